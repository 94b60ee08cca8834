"""Simulation parameter models for the generators and the vertex model."""

import math
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# 1-based cells carrying the morphogen source on the 80-cell ring
DEFAULT_SOURCE_CELLS = [*range(13, 20), *range(61, 68)]


class ChafeeInfanteConfig(BaseModel):
    """Chafee-Infante demo: u_t = u - u^3 + nu * u_xx on [0, length], u = 0 at both ends."""

    model_config = ConfigDict(frozen=True)

    nu: float = Field(default=0.16, gt=0)
    n_x: int = Field(default=101, ge=3)
    length: float = Field(default=1.0, gt=0)
    t_end: float = Field(default=10.0, gt=0)
    dt: float | None = Field(default=None, gt=0)
    u0: float = 0.1
    n_out: int = Field(default=200, ge=2)

    @property
    def dx(self) -> float:
        """Grid spacing."""
        return self.length / (self.n_x - 1)

    @property
    def step(self) -> float:
        """Requested time step, defaulting to 0.4 of the explicit stability limit scale."""
        return self.dt if self.dt is not None else 0.4 * self.dx**2 / self.nu

    @model_validator(mode="after")
    def _check_stability(self) -> Self:
        limit = self.dx**2 / (2 * self.nu)
        if self.step > limit:
            msg = f"dt={self.step:g} exceeds the explicit stability limit dx^2/(2 nu)={limit:g}"
            raise ValueError(msg)
        return self


class SignalParams(BaseModel):
    """Morphogen signal on a periodic ring of cells.

    Defaults reproduce the single-run setting: effective diffusivity 0.2, degradation 0.08,
    production switched off at t_s = 40 and decaying with rate 0.03 afterwards.
    """

    model_config = ConfigDict(frozen=True)

    D_e: float = Field(default=0.2, ge=0)
    d: float = Field(default=0.08, ge=0)
    t_s: float = Field(default=40.0, gt=0)
    k: float = Field(default=5e-5, ge=0)
    alpha: float = Field(default=0.03, ge=0)
    n_cells: int = Field(default=80, ge=3)
    source_cells: list[int] = Field(default_factory=lambda: list(DEFAULT_SOURCE_CELLS))
    dt: float = Field(default=0.05, gt=0)
    t_end: float = Field(default=120.0, gt=0)

    @model_validator(mode="after")
    def _check_ranges(self) -> Self:
        if any(not 1 <= cell <= self.n_cells for cell in self.source_cells):
            msg = f"source_cells must lie in [1, {self.n_cells}]"
            raise ValueError(msg)
        if not 0 < self.t_s < self.t_end:
            msg = f"t_s={self.t_s} must lie in (0, t_end={self.t_end})"
            raise ValueError(msg)
        limit = 1.0 / (2 * self.D_e + self.d) if (2 * self.D_e + self.d) > 0 else math.inf
        if self.dt > limit:
            msg = f"dt={self.dt} exceeds the forward-Euler limit 1/(2 D_e + d)={limit:g}"
            raise ValueError(msg)
        return self

    @property
    def source_mask(self) -> np.ndarray:
        """G(i) as a 0/1 vector over 0-based cell positions."""
        mask = np.zeros(self.n_cells)
        mask[np.asarray(self.source_cells, dtype=int) - 1] = 1.0
        return mask


class ParameterSample(BaseModel):
    """One point of the parameter ensemble."""

    model_config = ConfigDict(frozen=True)

    D_e: float
    d: float
    t_s: float

    def as_row(self) -> list[float]:
        """Return the sample as ``[D_e, d, t_s]``."""
        return [self.D_e, self.d, self.t_s]


class StoppingTimeRule(BaseModel):
    """Production stopping time as a smooth function of (D_e, d), clipped to [lo, hi]."""

    model_config = ConfigDict(frozen=True)

    base: float = 40.0
    ref_D_e: float = 0.2
    ref_d: float = 0.075
    coef_D_e: float = 20.0
    coef_d: float = -400.0
    lo: float = 35.0
    hi: float = 45.0

    def __call__(self, D_e: float, d: float) -> float:
        """Evaluate t_s.

        >>> StoppingTimeRule()(0.2, 0.075)
        40.0
        """
        t_s = self.base + self.coef_D_e * (D_e - self.ref_D_e) + self.coef_d * (d - self.ref_d)
        return float(min(max(t_s, self.lo), self.hi))


class SamplingConfig(BaseModel):
    """Normal distributions for the ensemble parameters, redrawn beyond ``truncation`` sd."""

    model_config = ConfigDict(frozen=True)

    D_e_mean: float = 0.2
    D_e_sd: float = Field(default=0.04, gt=0)
    d_mean: float = 0.075
    d_sd: float = Field(default=0.005, gt=0)
    truncation: float = Field(default=2.0, gt=0)


class MechParams(BaseModel):
    """Vertex-model mechanics.

    ``A_c0``, ``A_Y0`` and ``R_c`` may be left unset. The homogeneous ring then supplies
    them so that it is an exact stationary point of the un-patterned energy, with the
    membrane at 1.05 times the apical radius.
    """

    model_config = ConfigDict(frozen=True)

    sigma_a0: float = Field(default=2.6418, ge=0)
    sigma_b0: float = Field(default=2.6418, ge=0)
    sigma_l: float = Field(default=1.0, ge=0)
    B: float = Field(default=20.0, ge=0)
    A_c0: float | None = Field(default=None, gt=0)
    B_Y: float = Field(default=0.01, ge=0)
    A_Y0: float | None = Field(default=None, gt=0)
    eps_mem: float = Field(default=1e-10, ge=0)
    n_rep: int = Field(default=4, ge=1)
    R_c: float | None = Field(default=None, gt=0)
    membrane_factor: float = Field(default=1.05, gt=1)
    P: float = Field(default=0.2, ge=0)
    G_width: float = Field(default=4.0, gt=0)
    f_basal: float = Field(default=0.7, ge=0)
    eta: float = Field(default=1.0, gt=0)
    dt: float = Field(default=1e-3, gt=0)
    patterned: bool = True

    @field_validator("f_basal")
    @classmethod
    def _basal_reduces(cls, value: float) -> float:
        if value >= 1:
            msg = "f_basal must be < 1"
            raise ValueError(msg)
        return value
