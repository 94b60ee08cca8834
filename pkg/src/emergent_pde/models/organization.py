"""Settings and results of questionnaire organization."""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from emergent_pde.constants import Axis, LevelWeighting

from .cluster_tree import ClusterTree
from .embedding import Embedding


class QuestConfig(BaseModel):
    """Clustering thresholds, level weights and the stopping rule of the informed-metric loop."""

    model_config = ConfigDict(frozen=True)

    threshold_growth: float = Field(default=2.0, gt=1)
    percentile: float = Field(default=25.0, gt=0, lt=100)
    max_levels: int = Field(default=30, ge=2)
    max_sweeps: int = Field(default=6, ge=1)
    tol: float = Field(default=1e-3, gt=0)
    weighting: LevelWeighting = LevelWeighting.MULTISCALE
    normalize: bool = True


class QuestState(BaseModel):
    """Per-axis distances and trees of the latest sweep, plus the change history."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    distances: list[np.ndarray]
    trees: list[ClusterTree]
    iteration: int = 0
    history: list[list[float]] = Field(default_factory=list)

    @field_validator("distances")
    @classmethod
    def _check_distances(cls, value: Any) -> list[np.ndarray]:
        for dist in value:
            if dist.shape[0] != dist.shape[1] or np.any(np.diag(dist) != 0):
                msg = "distance matrices must be square with a zero diagonal"
                raise ValueError(msg)
            if not np.array_equal(dist, dist.T):
                msg = "distance matrices must be symmetric"
                raise ValueError(msg)
        return value

    @property
    def converged_changes(self) -> list[float]:
        """Last recorded relative change of every axis."""
        return [h[-1] if h else float("nan") for h in self.history]


class Organization(BaseModel):
    """Embeddings of every organized axis; axes that could not be embedded are listed in ``errors``."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    embeddings: dict[Axis, Embedding]
    state: QuestState
    errors: dict[Axis, str] = Field(default_factory=dict)

    def as_tuple(self) -> tuple[Embedding | None, ...]:
        """Embeddings in (p, t, s) order, None for failed axes."""
        return tuple(self.embeddings.get(axis) for axis in Axis)
