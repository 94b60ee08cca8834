"""Ring-of-cells vertex model state."""

from typing import Any
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class RestGeometry(BaseModel):
    """Targets and confinement resolved when the ring is built."""

    model_config = ConfigDict(frozen=True)

    A_c0: float = Field(gt=0)
    A_Y0: float = Field(gt=0)
    R_c: float = Field(gt=0)
    R_a: float = Field(gt=0)
    l_l: float = Field(gt=0)


class VertexState(BaseModel):
    """Positions of the 2 * N_c ring vertices and the quadrilateral cells they bound.

    Apical vertex ``k`` has id ``k`` and basal vertex ``k`` has id ``N_c + k``. Cell ``c``
    is ``[a_c, a_{c+1}, b_{c+1}, b_c]``, counterclockwise.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    positions: np.ndarray
    cells: np.ndarray
    rest: RestGeometry

    @field_validator("positions", mode="before")
    @classmethod
    def _as_points(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64).reshape(-1, 2)

    @field_validator("cells", mode="before")
    @classmethod
    def _as_cells(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=int).reshape(-1, 4)

    @model_validator(mode="after")
    def _check_ring(self) -> Self:
        n_cells = self.cells.shape[0]
        if self.positions.shape[0] != 2 * n_cells:
            msg = f"{n_cells} cells need {2 * n_cells} vertices, got {self.positions.shape[0]}"
            raise ValueError(msg)
        if not np.all(np.isfinite(self.positions)):
            msg = "vertex positions must be finite"
            raise ValueError(msg)
        lateral = [tuple(sorted((int(c[1]), int(c[2])))) for c in self.cells]
        lateral += [tuple(sorted((int(c[0]), int(c[3])))) for c in self.cells]
        counts: dict[tuple[int, ...], int] = {}
        for edge in lateral:
            counts[edge] = counts.get(edge, 0) + 1
        if any(v != 2 for v in counts.values()):  # noqa: PLR2004
            msg = "every lateral edge must be shared by exactly two cells"
            raise ValueError(msg)
        return self

    @property
    def n_cells(self) -> int:
        """Number of cells."""
        return self.cells.shape[0]

    @property
    def apical(self) -> np.ndarray:
        """Apical vertex positions."""
        return self.positions[: self.n_cells]

    @property
    def basal(self) -> np.ndarray:
        """Basal vertex positions."""
        return self.positions[self.n_cells :]

    def with_positions(self, positions: np.ndarray) -> "VertexState":
        """Same topology and targets at new positions."""
        return VertexState(positions=positions, cells=self.cells, rest=self.rest)


class Backbone(BaseModel):
    """Ordered lateral-edge midpoints and their cumulative arclength."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    arclength: np.ndarray
    edges: list[int]
    closed: bool = False

    @field_validator("points", "arclength", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_monotone(self) -> Self:
        if self.arclength.size and np.any(np.diff(self.arclength) <= 0):
            msg = "backbone arclength must increase strictly"
            raise ValueError(msg)
        return self

    @property
    def length(self) -> float:
        """Total length, including the closing segment of a full ring."""
        if not self.closed:
            return float(self.arclength[-1])
        return float(self.arclength[-1] + np.linalg.norm(self.points[0] - self.points[-1]))
