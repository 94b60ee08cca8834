"""DataTensor model, axis scrambling and the binary tensor format.

A tensor file is ``EPDE`` magic, a little-endian u16 version, a u8 ndim, ndim u64 dims,
the f64 row-major payload and, when a mask is present, the mask packed into bits
(little bit order). Axis metadata, the scramble record and free-form extras live in a
JSON sidecar named ``<path>.meta.json``.
"""

import math
import struct
from pathlib import Path
from typing import Any
from typing_extensions import Self

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from rich.table import Table

from emergent_pde.constants import MIN_CHANNELS, RNG_NAME, TENSOR_MAGIC, TENSOR_VERSION, Axis
from emergent_pde.utils.errors import ShapeMismatchError, TensorFormatError
from emergent_pde.utils.helpers import make_rng

_HEADER = struct.Struct("<4sHB")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class AxisMeta(BaseModel):
    """Ground-truth labels for the channels of one axis, one row per channel."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    columns: list[str]
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim == 1:
            array = array[:, None]
        return _frozen(array)

    @model_validator(mode="after")
    def _check_columns(self) -> Self:
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):  # noqa: PLR2004
            msg = f"axis metadata has {self.values.shape} values for columns {self.columns}"
            raise ShapeMismatchError(msg)
        return self

    def column(self, name: str) -> np.ndarray:
        """Return one metadata column.

        Raises:
            KeyError: If the column does not exist.
        """
        if name not in self.columns:
            msg = f"no metadata column '{name}' (have {', '.join(self.columns)})"
            raise KeyError(msg)
        return self.values[:, self.columns.index(name)]

    def take(self, index: np.ndarray) -> "AxisMeta":
        """Return the metadata rows at ``index``, in that order."""
        return AxisMeta(columns=self.columns, values=self.values[np.asarray(index, dtype=int)])


class DataTensor(BaseModel):
    """Dense (parameter, time, space) tensor with an optional observation mask."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    mask: np.ndarray | None = None
    axis_meta: dict[Axis, AxisMeta] = Field(default_factory=dict)

    @field_validator("values", mode="before")
    @classmethod
    def _as_float(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 3:  # noqa: PLR2004
            msg = f"a DataTensor needs 3 axes (p, t, s), got shape {array.shape}"
            raise ShapeMismatchError(msg)
        return _frozen(array)

    @field_validator("mask", mode="before")
    @classmethod
    def _as_bool(cls, value: Any) -> np.ndarray | None:
        if value is None:
            return None
        return _frozen(np.array(value, dtype=bool))

    @model_validator(mode="after")
    def _check_consistency(self) -> Self:
        if self.mask is not None and self.mask.shape != self.values.shape:
            msg = f"mask shape {self.mask.shape} differs from values {self.values.shape}"
            raise ShapeMismatchError(msg)
        observed = self.values if self.mask is None else self.values[self.mask]
        if not np.all(np.isfinite(observed)):
            msg = "observed values must be finite"
            raise ValueError(msg)
        for axis, meta in self.axis_meta.items():
            if meta.values.shape[0] != self.values.shape[axis.index]:
                msg = f"axis '{axis.value}' metadata has {meta.values.shape[0]} rows for {self.values.shape[axis.index]} channels"
                raise ShapeMismatchError(msg)
        return self

    def __eq__(self, other: object) -> bool:
        """Compare values, masks and metadata bit for bit (NaN equals NaN)."""
        if not isinstance(other, DataTensor):
            return NotImplemented
        same_mask = (self.mask is None and other.mask is None) or (
            self.mask is not None
            and other.mask is not None
            and np.array_equal(self.mask, other.mask)
        )
        return (
            same_mask
            and np.array_equal(self.values, other.values, equal_nan=True)
            and self.axis_meta.keys() == other.axis_meta.keys()
            and all(
                self.axis_meta[a].columns == other.axis_meta[a].columns
                and np.array_equal(
                    self.axis_meta[a].values, other.axis_meta[a].values, equal_nan=True
                )
                for a in self.axis_meta
            )
        )

    __hash__ = None  # type: ignore [assignment]

    @property
    def dims(self) -> tuple[int, int, int]:
        """(N_p, N_t, N_s)."""
        return self.values.shape  # type: ignore [return-value]

    @property
    def n_missing(self) -> int:
        """Number of masked-out entries."""
        return 0 if self.mask is None else int(self.mask.size - self.mask.sum())

    def observed(self) -> np.ndarray:
        """Boolean array of observed entries (all True without a mask)."""
        return np.ones(self.dims, dtype=bool) if self.mask is None else self.mask

    def filled(self, fill: float | None = None) -> np.ndarray:
        """Return a writable copy of the values with missing entries replaced.

        Args:
            fill: Replacement for missing entries. Defaults to the mean of observed entries.
        """
        values = np.array(self.values)
        if self.mask is None or self.mask.all():
            return values
        if fill is None:
            fill = float(values[self.mask].mean()) if self.mask.any() else 0.0
        values[~self.mask] = fill
        return values

    def meta(self, axis: Axis | str) -> AxisMeta | None:
        """Metadata for one axis, if present."""
        return self.axis_meta.get(Axis(axis))

    def as_table(self) -> Table:
        """Summarize the tensor as a rich table."""
        table = Table(title="DataTensor", title_justify="left")
        table.add_column("axis")
        table.add_column("channels", justify="right")
        table.add_column("ground truth")
        for axis in Axis:
            meta = self.axis_meta.get(axis)
            table.add_row(
                axis.value,
                str(self.dims[axis.index]),
                ", ".join(meta.columns) if meta else "-",
            )
        table.caption = f"{self.n_missing} missing entries"
        return table


class ScrambleRecord(BaseModel):
    """Answer key of a scramble: kept original indices in scrambled order, and dropped ones.

    ``perm(axis)[j]`` is the original index of scrambled channel ``j``.
    """

    model_config = ConfigDict(frozen=True)

    perm_p: list[int]
    perm_t: list[int]
    perm_s: list[int]
    dropped_p: list[int] = Field(default_factory=list)
    dropped_t: list[int] = Field(default_factory=list)
    dropped_s: list[int] = Field(default_factory=list)
    seed: int = 0
    rng: str = RNG_NAME

    @model_validator(mode="after")
    def _check_bijection(self) -> Self:
        for axis in Axis:
            kept, dropped = self.perm(axis), self.dropped(axis)
            if dropped != sorted(dropped):
                msg = f"dropped_{axis.value} must be sorted"
                raise ValueError(msg)
            everything = kept + dropped
            if sorted(everything) != list(range(len(everything))):
                msg = f"perm_{axis.value} and dropped_{axis.value} must partition 0..{len(everything) - 1}"
                raise ValueError(msg)
        return self

    def perm(self, axis: Axis | str) -> list[int]:
        """Kept original indices of ``axis`` in scrambled order."""
        return getattr(self, f"perm_{Axis(axis).value}")

    def dropped(self, axis: Axis | str) -> list[int]:
        """Dropped original indices of ``axis``."""
        return getattr(self, f"dropped_{Axis(axis).value}")

    def original_size(self, axis: Axis | str) -> int:
        """Channel count of ``axis`` before scrambling."""
        return len(self.perm(axis)) + len(self.dropped(axis))

    @classmethod
    def identity(cls, dims: tuple[int, int, int], seed: int = 0) -> "ScrambleRecord":
        """Record that keeps every channel in place."""
        p, t, s = (list(range(n)) for n in dims)
        return cls(perm_p=p, perm_t=t, perm_s=s, seed=seed)


def apply_record(tensor: DataTensor, record: ScrambleRecord) -> DataTensor:
    """Reorder and subset a tensor according to ``record``.

    Raises:
        ShapeMismatchError: If the record was built for other dimensions.
    """
    for axis in Axis:
        if record.original_size(axis) != tensor.dims[axis.index]:
            msg = f"record covers {record.original_size(axis)} '{axis.value}' channels, tensor has {tensor.dims[axis.index]}"
            raise ShapeMismatchError(msg)

    index = np.ix_(*(np.asarray(record.perm(axis), dtype=int) for axis in Axis))
    return DataTensor(
        values=tensor.values[index],
        mask=None if tensor.mask is None else tensor.mask[index],
        axis_meta={
            axis: meta.take(np.asarray(record.perm(axis), dtype=int))
            for axis, meta in tensor.axis_meta.items()
        },
    )


def scramble(
    tensor: DataTensor,
    axes: set[Axis | str] | list[Axis | str] | tuple[Axis | str, ...],
    drop_fraction: dict[Axis | str, float] | None = None,
    seed: int = 0,
    *,
    identity: bool = False,
) -> tuple[DataTensor, ScrambleRecord]:
    """Drop and shuffle channels along the requested axes.

    Axes are visited in (p, t, s) order. For each, ``floor(N * fraction)`` channels are
    dropped uniformly at random, then the kept channels are shuffled if the axis is listed
    in ``axes`` (and ``identity`` is False).

    Args:
        tensor: Tensor to scramble.
        axes: Axes whose channel order is shuffled.
        drop_fraction: Fraction in [0, 1) of channels removed per axis.
        seed: Seed of the generator drawing drops and permutations.
        identity: Keep the kept channels in original order on every axis.

    Returns:
        The scrambled tensor and the record needed to undo it.

    Raises:
        ValueError: If a fraction is outside [0, 1) or leaves fewer than 4 channels.
        ShapeMismatchError: If an axis would become empty.
    """
    shuffled = {Axis(a) for a in axes}
    fractions = {Axis(a): float(f) for a, f in (drop_fraction or {}).items()}
    rng = make_rng(seed)

    kept: dict[Axis, list[int]] = {}
    dropped: dict[Axis, list[int]] = {}
    for axis in Axis:
        n = tensor.dims[axis.index]
        fraction = fractions.get(axis, 0.0)
        if not 0.0 <= fraction < 1.0:
            msg = f"drop fraction for '{axis.value}' must lie in [0, 1), got {fraction}"
            raise ValueError(msg)

        n_drop = math.floor(n * fraction)
        if n - n_drop < 1:
            msg = f"dropping {n_drop} of {n} '{axis.value}' channels leaves the axis empty"
            raise ShapeMismatchError(msg)
        if n_drop and n - n_drop < MIN_CHANNELS:
            msg = f"dropping {n_drop} of {n} '{axis.value}' channels leaves fewer than {MIN_CHANNELS}"
            raise ValueError(msg)

        drop = np.sort(rng.choice(n, size=n_drop, replace=False)) if n_drop else np.empty(0, int)
        keep = np.setdiff1d(np.arange(n), drop)
        if axis in shuffled and not identity:
            keep = keep[rng.permutation(keep.size)]
        kept[axis] = [int(i) for i in keep]
        dropped[axis] = [int(i) for i in drop]
        logger.trace(f"scramble: axis {axis.value} keeps {keep.size}/{n}")

    record = ScrambleRecord(
        perm_p=kept[Axis.PARAMETER],
        perm_t=kept[Axis.TIME],
        perm_s=kept[Axis.SPACE],
        dropped_p=dropped[Axis.PARAMETER],
        dropped_t=dropped[Axis.TIME],
        dropped_s=dropped[Axis.SPACE],
        seed=seed,
    )
    return apply_record(tensor, record), record


def mask_entries(tensor: DataTensor, fraction: float, seed: int = 0) -> DataTensor:
    """Hide ``floor(n_observed * fraction)`` observed entries drawn uniformly at random.

    Hidden entries become NaN and masked, as if they were never measured; entries that
    were already missing stay missing.

    Raises:
        ValueError: If ``fraction`` is outside [0, 1).
    """
    if not 0.0 <= fraction < 1.0:
        msg = f"mask fraction must lie in [0, 1), got {fraction}"
        raise ValueError(msg)
    mask = tensor.observed().ravel().copy()
    observed = np.flatnonzero(mask)
    n_hide = math.floor(observed.size * fraction)
    if not n_hide:
        return tensor

    mask[make_rng(seed).choice(observed, size=n_hide, replace=False)] = False
    mask = mask.reshape(tensor.dims)
    logger.trace(f"mask_entries: {n_hide} of {observed.size} observed entries hidden")
    return DataTensor(
        values=np.where(mask, tensor.values, np.nan), mask=mask, axis_meta=tensor.axis_meta
    )


def unscramble(tensor: DataTensor, record: ScrambleRecord) -> DataTensor:
    """Put scrambled channels back in original order; dropped channels come back masked.

    Raises:
        ShapeMismatchError: If the tensor's dims do not match the record.
    """
    for axis in Axis:
        if len(record.perm(axis)) != tensor.dims[axis.index]:
            msg = f"record keeps {len(record.perm(axis))} '{axis.value}' channels, tensor has {tensor.dims[axis.index]}"
            raise ShapeMismatchError(msg)

    shape = tuple(record.original_size(axis) for axis in Axis)
    index = np.ix_(*(np.asarray(record.perm(axis), dtype=int) for axis in Axis))

    values = np.full(shape, np.nan)
    values[index] = tensor.values
    mask = np.zeros(shape, dtype=bool)
    mask[index] = tensor.observed()

    axis_meta = {}
    for axis, meta in tensor.axis_meta.items():
        restored = np.full((shape[axis.index], len(meta.columns)), np.nan)
        restored[np.asarray(record.perm(axis), dtype=int)] = meta.values
        axis_meta[axis] = AxisMeta(columns=meta.columns, values=restored)

    return DataTensor(values=values, mask=None if mask.all() else mask, axis_meta=axis_meta)


class AxisMetaPayload(BaseModel):
    """JSON form of :class:`AxisMeta`. Unknown labels (NaN) are stored as null."""

    columns: list[str]
    values: list[list[float | None]]

    @classmethod
    def from_meta(cls, meta: AxisMeta) -> "AxisMetaPayload":
        """Convert metadata to its JSON form."""
        rows = np.where(np.isnan(meta.values), None, meta.values).tolist()
        return cls(columns=meta.columns, values=rows)

    def to_meta(self) -> AxisMeta:
        """Convert back to metadata."""
        values = np.array(self.values, dtype=float).reshape(len(self.values), len(self.columns))
        return AxisMeta(columns=self.columns, values=values)


class TensorSidecar(BaseModel):
    """Contents of ``<path>.meta.json``."""

    axis_meta: dict[Axis, AxisMetaPayload] = Field(default_factory=dict)
    scramble: ScrambleRecord | None = None
    extra: dict[str, Any] = Field(default_factory=dict)


def sidecar_path(path: Path) -> Path:
    """Location of a tensor file's JSON sidecar."""
    return path.with_name(f"{path.name}.meta.json")


def save_tensor(
    tensor: DataTensor,
    path: Path,
    *,
    record: ScrambleRecord | None = None,
    extra: dict[str, Any] | None = None,
) -> Path:
    """Write a tensor and its sidecar.

    Returns:
        Path: The tensor file written.
    """
    header = _HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, tensor.values.ndim)
    header += struct.pack(f"<{tensor.values.ndim}Q", *tensor.dims)
    payload = np.ascontiguousarray(tensor.values, dtype="<f8").tobytes()
    mask = b""
    if tensor.mask is not None:
        mask = np.packbits(tensor.mask.ravel(), bitorder="little").tobytes()

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + payload + mask)

    sidecar = TensorSidecar(
        axis_meta={
            axis: AxisMetaPayload.from_meta(meta) for axis, meta in tensor.axis_meta.items()
        },
        scramble=record,
        extra=extra or {},
    )
    sidecar_path(path).write_text(sidecar.model_dump_json(indent=2))
    logger.trace(f"Saved tensor {tensor.dims} to {path}")
    return path


def read_sidecar(path: Path) -> TensorSidecar:
    """Read a tensor's sidecar; an absent sidecar reads as empty."""
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        return TensorSidecar()
    return TensorSidecar.model_validate_json(meta_path.read_text())


def load_tensor(path: Path) -> DataTensor:
    """Read a tensor written by :func:`save_tensor`.

    Raises:
        TensorFormatError: On a wrong magic or version, or a truncated file.
    """
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        msg = f"{path} is too short to be a tensor file"
        raise TensorFormatError(msg)

    magic, version, ndim = _HEADER.unpack_from(data)
    if magic != TENSOR_MAGIC:
        msg = f"{path} has magic {magic!r}, expected {TENSOR_MAGIC!r}"
        raise TensorFormatError(msg)
    if version != TENSOR_VERSION:
        msg = f"{path} has format version {version}, expected {TENSOR_VERSION}"
        raise TensorFormatError(msg)

    offset = _HEADER.size + 8 * ndim
    if ndim != 3 or len(data) < offset:  # noqa: PLR2004
        msg = f"{path} has a malformed header"
        raise TensorFormatError(msg)
    dims = struct.unpack_from(f"<{ndim}Q", data, _HEADER.size)
    count = math.prod(dims)

    remaining = len(data) - offset - 8 * count
    mask_bytes = math.ceil(count / 8)
    if remaining not in {0, mask_bytes}:
        msg = f"{path} is truncated or has trailing data ({remaining} bytes after the payload)"
        raise TensorFormatError(msg)

    values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(dims)
    mask = None
    if remaining:
        bits = np.frombuffer(data, dtype=np.uint8, offset=offset + 8 * count)
        mask = np.unpackbits(bits, count=count, bitorder="little").astype(bool).reshape(dims)

    sidecar = read_sidecar(path)
    return DataTensor(
        values=values.astype(np.float64),
        mask=mask,
        axis_meta={axis: meta.to_meta() for axis, meta in sidecar.axis_meta.items()},
    )
