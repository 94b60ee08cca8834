"""Emergent coordinates, emergent charts and derivative feature sets."""

import json
from pathlib import Path
from typing import Any
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from emergent_pde.constants import Axis, NodeTag
from emergent_pde.models.data_tensor import AxisMeta, DataTensor, load_tensor, read_sidecar, save_tensor
from emergent_pde.utils.errors import ShapeMismatchError

_UNIFORM_RTOL = 1e-9


class EmergentCoordinate(BaseModel):
    """A 1-D coordinate in [0, 1] for every channel of one axis."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    source_coords: list[int]
    orientation_anchor: int
    closed: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64).ravel()

    @model_validator(mode="after")
    def _check_range(self) -> Self:
        if not np.all(np.isfinite(self.values)):
            msg = "emergent coordinate values must be finite"
            raise ValueError(msg)
        if self.values.size and (self.values.min() < -1e-12 or self.values.max() > 1 + 1e-12):
            msg = "emergent coordinate values must lie in [0, 1]"
            raise ValueError(msg)
        if not 0 <= self.orientation_anchor < self.values.size:
            msg = f"anchor {self.orientation_anchor} outside 0..{self.values.size - 1}"
            raise ValueError(msg)
        return self

    @property
    def order(self) -> np.ndarray:
        """Channel indices sorted by coordinate (stable)."""
        return np.argsort(self.values, kind="stable")

    def save(self, path: Path) -> Path:
        """Write the coordinate as JSON.

        Returns:
            Path: The file written.
        """
        payload = {
            "values": self.values.tolist(),
            "source_coords": self.source_coords,
            "orientation_anchor": self.orientation_anchor,
            "closed": self.closed,
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path: Path) -> "EmergentCoordinate":
        """Read a coordinate written by :meth:`save`."""
        return cls.model_validate(json.loads(path.read_text()))


def _check_uniform(name: str, grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size < 2:  # noqa: PLR2004
        msg = f"{name} needs at least 2 points"
        raise ValueError(msg)
    steps = np.diff(grid)
    if np.any(steps <= 0):
        msg = f"{name} must be strictly increasing"
        raise ValueError(msg)
    if not np.allclose(steps, steps[0], rtol=_UNIFORM_RTOL, atol=0):
        msg = f"{name} must be uniform"
        raise ValueError(msg)


class ChartExtra(BaseModel):
    """Chart metadata kept in the tensor sidecar."""

    source_corridor: tuple[float, float] | None = None
    boundary_corridors: list[tuple[float, float]] = Field(default_factory=list)
    time_kind: str = "emergent"


class EmergentChart(BaseModel):
    """A field resampled on uniform emergent grids.

    ``field[i, j]`` is the value at time ``phi_grid[i]`` and position ``psi_grid[j]``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    psi_grid: np.ndarray
    phi_grid: np.ndarray
    field: np.ndarray
    source_corridor: tuple[float, float] | None = None
    boundary_corridors: list[tuple[float, float]] = Field(default_factory=list)
    time_kind: str = "emergent"

    @field_validator("psi_grid", "phi_grid", "field", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_chart(self) -> Self:
        _check_uniform("psi_grid", self.psi_grid)
        _check_uniform("phi_grid", self.phi_grid)
        if self.field.shape != (self.phi_grid.size, self.psi_grid.size):
            msg = f"field shape {self.field.shape} does not match the grids ({self.phi_grid.size}, {self.psi_grid.size})"
            raise ShapeMismatchError(msg)
        if not np.all(np.isfinite(self.field)):
            msg = "chart field must be finite"
            raise ValueError(msg)
        lo, hi = self.psi_grid[0], self.psi_grid[-1]
        corridors = list(self.boundary_corridors)
        if self.source_corridor is not None:
            corridors.append(self.source_corridor)
        for a, b in corridors:
            if not lo - 1e-12 <= a <= b <= hi + 1e-12:
                msg = f"corridor ({a}, {b}) is not inside the psi grid [{lo}, {hi}]"
                raise ValueError(msg)
        return self

    @property
    def dpsi(self) -> float:
        """Space grid spacing."""
        return float(self.psi_grid[1] - self.psi_grid[0])

    @property
    def dphi(self) -> float:
        """Time grid spacing."""
        return float(self.phi_grid[1] - self.phi_grid[0])

    def _in(self, interval: tuple[float, float]) -> np.ndarray:
        tol = 1e-9 * self.dpsi
        return (self.psi_grid >= interval[0] - tol) & (self.psi_grid <= interval[1] + tol)

    def node_tags(self) -> np.ndarray:
        """Role of every psi node; boundary corridors take precedence over the source corridor."""
        tags = np.full(self.psi_grid.size, NodeTag.INTERIOR.value, dtype=int)
        if self.source_corridor is not None:
            tags[self._in(self.source_corridor)] = NodeTag.SOURCE_CORRIDOR.value
        for interval in self.boundary_corridors:
            tags[self._in(interval)] = NodeTag.BOUNDARY_CORRIDOR.value
        return tags

    def to_tensor(self) -> DataTensor:
        """Chart as a (1, n_phi, n_psi) tensor with the grids as axis metadata."""
        return DataTensor(
            values=self.field[None, :, :],
            axis_meta={
                Axis.TIME: AxisMeta(columns=["phi"], values=self.phi_grid),
                Axis.SPACE: AxisMeta(columns=["psi"], values=self.psi_grid),
            },
        )

    def save(self, path: Path) -> Path:
        """Write the chart in tensor format with corridors in the sidecar.

        Returns:
            Path: The tensor file written.
        """
        extra = ChartExtra(
            source_corridor=self.source_corridor,
            boundary_corridors=self.boundary_corridors,
            time_kind=self.time_kind,
        )
        return save_tensor(self.to_tensor(), path, extra={"chart": extra.model_dump(mode="json")})

    @classmethod
    def load(cls, path: Path) -> "EmergentChart":
        """Read a chart written by :meth:`save`.

        Raises:
            ShapeMismatchError: If the file holds more than one parameter slab or lacks grids.
        """
        tensor = load_tensor(path)
        extra = ChartExtra.model_validate(read_sidecar(path).extra.get("chart", {}))
        phi, psi = tensor.meta(Axis.TIME), tensor.meta(Axis.SPACE)
        if tensor.dims[0] != 1 or phi is None or psi is None:
            msg = f"{path} is not an emergent chart"
            raise ShapeMismatchError(msg)
        return cls(
            psi_grid=psi.column("psi"),
            phi_grid=phi.column("phi"),
            field=tensor.values[0],
            source_corridor=extra.source_corridor,
            boundary_corridors=extra.boundary_corridors,
            time_kind=extra.time_kind,
        )


class FeatureSet(BaseModel):
    """Derivative features ``[c, c_1, c_2, c_3, c_4]`` and time-derivative targets per node.

    ``node`` and ``snapshot`` give the psi and phi index of every row.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: np.ndarray
    targets: np.ndarray
    tags: np.ndarray
    node: np.ndarray
    snapshot: np.ndarray

    @field_validator("features", "targets", mode="before")
    @classmethod
    def _as_float(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64)

    @field_validator("tags", "node", "snapshot", mode="before")
    @classmethod
    def _as_int(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=int).ravel()

    @model_validator(mode="after")
    def _check_rows(self) -> Self:
        n = self.targets.size
        if self.features.shape != (n, 5):
            msg = f"features must be ({n}, 5), got {self.features.shape}"
            raise ShapeMismatchError(msg)
        if not (self.tags.size == self.node.size == self.snapshot.size == n):
            msg = "tags, node and snapshot need one entry per row"
            raise ShapeMismatchError(msg)
        if not np.all(np.isfinite(self.targets)):
            msg = "targets must be finite"
            raise ValueError(msg)
        if not np.isin(self.tags, [t.value for t in NodeTag]).all():
            msg = "unknown node tag"
            raise ValueError(msg)
        return self

    @property
    def n_derivatives(self) -> int:
        """Number of spatial derivative orders."""
        return self.features.shape[1] - 1

    def subset(self, rows: np.ndarray) -> "FeatureSet":
        """Rows selected by a boolean mask or an index array."""
        return FeatureSet(
            features=self.features[rows],
            targets=self.targets[rows],
            tags=self.tags[rows],
            node=self.node[rows],
            snapshot=self.snapshot[rows],
        )

    def tagged(self, *tags: NodeTag) -> "FeatureSet":
        """Rows carrying one of ``tags``."""
        return self.subset(np.isin(self.tags, [t.value for t in tags]))

    def split_last(self, n_snapshots: int) -> tuple["FeatureSet", "FeatureSet"]:
        """Split off the last ``n_snapshots`` snapshots as a validation set."""
        snapshots = np.unique(self.snapshot)
        held = snapshots[-n_snapshots:] if n_snapshots else snapshots[:0]
        validation = np.isin(self.snapshot, held)
        return self.subset(~validation), self.subset(validation)
