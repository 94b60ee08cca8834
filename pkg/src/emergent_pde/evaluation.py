"""Metrics against ground truth and the evaluation report."""

import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, field_validator
from rich.table import Table
from scipy.stats import spearmanr

from emergent_pde.diffusion_maps import local_linear_fit
from emergent_pde.utils.errors import DegenerateInputError, ShapeMismatchError

MIN_RANK_POINTS = 3


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Rank correlation, ties sharing their average rank.

    >>> round(spearman(np.array([1, 2, 3, 4]), np.array([1, 3, 2, 4])), 12)
    0.8

    Raises:
        ValueError: For inputs of unequal length or shorter than 3.
        DegenerateInputError: If either input is constant.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size or a.size < MIN_RANK_POINTS:
        msg = f"spearman needs two inputs of equal length >= {MIN_RANK_POINTS}, got {a.size} and {b.size}"
        raise ValueError(msg)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        msg = "rank correlation is undefined for a constant input"
        raise DegenerateInputError(msg)
    return float(np.clip(spearmanr(a, b).statistic, -1.0, 1.0))


def relative_l2(pred: np.ndarray, truth: np.ndarray) -> float:
    """||pred - truth|| / ||truth||.

    >>> round(relative_l2(np.array([1.1, 2.2]), np.array([1.0, 2.0])), 12)
    0.1

    Raises:
        ShapeMismatchError: If the shapes differ.
        DegenerateInputError: If the truth has zero norm.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        msg = f"prediction shape {pred.shape} differs from truth {truth.shape}"
        raise ShapeMismatchError(msg)
    norm = float(np.linalg.norm(truth))
    if norm == 0:
        msg = "relative L2 error is undefined for a zero truth"
        raise DegenerateInputError(msg)
    return float(np.linalg.norm(pred - truth)) / norm


def local_linear_r2(predictors: np.ndarray, target: np.ndarray, scale: float = 3.0) -> float:
    """Leave-one-out local-linear R^2 of ``target`` on ``predictors``, clipped to [0, 1].

    Raises:
        DegenerateInputError: If the target is constant.
    """
    target = np.asarray(target, dtype=np.float64)
    total = float(np.sum((target - target.mean()) ** 2))
    if total == 0:
        msg = "R^2 is undefined for a constant target"
        raise DegenerateInputError(msg)
    fitted = local_linear_fit(predictors, target, scale=scale)
    return float(np.clip(1.0 - np.sum((target - fitted) ** 2) / total, 0.0, 1.0))


class EvalReport(BaseModel):
    """Recovered-structure metrics; entries are omitted when their ground truth is absent."""

    spearman: dict[str, float] = Field(default_factory=dict)
    unique_param_coords: int | None = None
    param_r2: dict[str, float] = Field(default_factory=dict)
    reconstruction_l2: float | None = None
    runtimes: dict[str, float] = Field(default_factory=dict)
    undefined: dict[str, str] = Field(default_factory=dict)

    @field_validator("spearman")
    @classmethod
    def _check_rho(cls, value: dict[str, float]) -> dict[str, float]:
        if any(not -1 <= rho <= 1 for rho in value.values()):
            msg = "rank correlations must lie in [-1, 1]"
            raise ValueError(msg)
        return value

    @field_validator("param_r2")
    @classmethod
    def _check_r2(cls, value: dict[str, float]) -> dict[str, float]:
        if any(not 0 <= r2 <= 1 for r2 in value.values()):
            msg = "R^2 values must lie in [0, 1]"
            raise ValueError(msg)
        return value

    def as_table(self) -> Table:
        """Metrics as a two-column rich table."""
        table = Table(title="Evaluation", title_justify="left")
        table.add_column("metric")
        table.add_column("value", justify="right")
        for axis, rho in sorted(self.spearman.items()):
            table.add_row(f"spearman |rho| ({axis})", f"{abs(rho):.4f}")
        if self.unique_param_coords is not None:
            table.add_row("unique parameter coordinates", str(self.unique_param_coords))
        for name, r2 in sorted(self.param_r2.items()):
            table.add_row(f"local-linear R^2 ({name})", f"{r2:.4f}")
        if self.reconstruction_l2 is not None:
            table.add_row("reconstruction relative L2", f"{self.reconstruction_l2:.4f}")
        for name, reason in sorted(self.undefined.items()):
            table.add_row(name, f"[yellow]undefined: {reason}[/yellow]")
        return table

    def save(self, path: Path) -> Path:
        """Write the metrics as JSON; runtimes are left out so reruns compare equal.

        Returns:
            Path: The file written.
        """
        payload = self.model_dump(mode="json", exclude={"runtimes"})
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: Path) -> "EvalReport":
        """Read a report written by :meth:`save`."""
        return cls.model_validate_json(path.read_text())
