"""Diffusion-map configuration and embedding models."""

from pathlib import Path
from typing import Any, Literal
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from rich.table import Table

from emergent_pde.constants import SYMBOL_CHECK, Normalization


class DiffusionConfig(BaseModel):
    """Kernel scale, spectrum size and normalization for :func:`diffusion_maps.embed`."""

    model_config = ConfigDict(frozen=True)

    epsilon: float | Literal["auto"] = "auto"
    n_eigs: int = Field(default=10, ge=1)
    normalization: Normalization = Normalization.ROW_STOCHASTIC
    alpha: float = Field(default=0.0, ge=0.0, le=1.0)
    knn: int | None = Field(default=None, ge=1)
    unique_threshold: float = Field(default=0.5, gt=0)
    regression_scale: float = Field(default=3.0, gt=0)
    dense_limit: int = Field(default=2000, ge=2)

    @field_validator("epsilon")
    @classmethod
    def _positive_epsilon(cls, value: float | str) -> float | str:
        if value != "auto" and float(value) <= 0:
            msg = "epsilon must be > 0 or 'auto'"
            raise ValueError(msg)
        return value


class EmbeddingSummary(BaseModel):
    """JSON companion of an embedding CSV."""

    eigenvalues: list[float]
    unique_flags: list[bool]
    epsilon_used: float
    weights: list[float]


class Embedding(BaseModel):
    """Spectral coordinates of one axis' channels.

    ``coords[:, k] = eigenvalues[k] * eigenvectors[:, k]``. The trivial constant mode is
    excluded and the eigenvectors have zero mean under ``weights``, the stationary
    distribution of the diffusion operator.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    unique_flags: list[bool]
    epsilon_used: float
    weights: np.ndarray

    @field_validator("eigenvalues", "eigenvectors", "weights", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_shapes(self) -> Self:
        n_coords = self.eigenvalues.size
        if self.eigenvectors.ndim != 2 or self.eigenvectors.shape[1] != n_coords:  # noqa: PLR2004
            msg = f"{n_coords} eigenvalues but eigenvectors of shape {self.eigenvectors.shape}"
            raise ValueError(msg)
        if len(self.unique_flags) != n_coords:
            msg = "one unique flag per coordinate is required"
            raise ValueError(msg)
        if np.any(np.diff(self.eigenvalues) > 0):
            msg = "eigenvalues must be sorted descending"
            raise ValueError(msg)
        return self

    @property
    def coords(self) -> np.ndarray:
        """Eigenvalue-weighted eigenvectors, one row per channel."""
        return self.eigenvectors * self.eigenvalues

    @property
    def n_points(self) -> int:
        """Number of embedded channels."""
        return self.eigenvectors.shape[0]

    def unique_coords(self) -> np.ndarray:
        """Columns of :attr:`coords` flagged unique."""
        return self.coords[:, np.asarray(self.unique_flags, dtype=bool)]

    def take(self, index: np.ndarray) -> "Embedding":
        """Embedding rows at ``index`` (used to relabel channels)."""
        index = np.asarray(index, dtype=int)
        return self.model_copy(
            update={"eigenvectors": self.eigenvectors[index], "weights": self.weights[index]}
        )

    def as_table(self, title: str = "Embedding") -> Table:
        """Eigenvalues and unique flags as a rich table."""
        table = Table(title=title, title_justify="left")
        table.add_column("coord", justify="right")
        table.add_column("eigenvalue", justify="right")
        table.add_column("unique", justify="center")
        for k, (value, unique) in enumerate(zip(self.eigenvalues, self.unique_flags, strict=True)):
            table.add_row(str(k + 1), f"{value:.6f}", SYMBOL_CHECK if unique else "")
        table.caption = f"epsilon = {self.epsilon_used:.6g}"
        return table

    def save(self, csv_path: Path) -> tuple[Path, Path]:
        """Write coordinates as CSV (rows = channels) and the spectrum as JSON.

        Returns:
            The CSV and JSON paths.
        """
        header = ",".join(f"coord_{k + 1}" for k in range(self.eigenvalues.size))
        np.savetxt(csv_path, self.coords, delimiter=",", header=header, comments="", fmt="%.17g")
        json_path = csv_path.with_suffix(".json")
        summary = EmbeddingSummary(
            eigenvalues=self.eigenvalues.tolist(),
            unique_flags=self.unique_flags,
            epsilon_used=self.epsilon_used,
            weights=self.weights.tolist(),
        )
        json_path.write_text(summary.model_dump_json(indent=2))
        return csv_path, json_path

    @classmethod
    def load(cls, csv_path: Path) -> "Embedding":
        """Read an embedding written by :meth:`save`."""
        summary = EmbeddingSummary.model_validate_json(csv_path.with_suffix(".json").read_text())
        coords = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        eigenvalues = np.asarray(summary.eigenvalues)
        return cls(
            eigenvalues=eigenvalues,
            eigenvectors=coords / eigenvalues,
            unique_flags=summary.unique_flags,
            epsilon_used=summary.epsilon_used,
            weights=summary.weights,
        )
