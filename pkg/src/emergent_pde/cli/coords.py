"""Coords command for emergent-pde."""

from pathlib import Path

import numpy as np
from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import (
    CHART_FILE,
    COORD_FILE,
    EMBEDDING_FILE,
    IMPUTED_FILE,
    SCRAMBLED_FILE,
    Axis,
)
from emergent_pde.emergent_coords import build_chart, extract_arclength, impute
from emergent_pde.models import Embedding, EmergentCoordinate, load_tensor, save_tensor
from emergent_pde.utils.errors import ConfigError

CHART_AXES = (Axis.TIME, Axis.SPACE)


def coords_inputs(cfg: EpdeConfig) -> list[Path]:
    """The scrambled tensor and the time and space embeddings."""
    return [
        cfg.out_dir / SCRAMBLED_FILE,
        *(cfg.out_dir / EMBEDDING_FILE.format(axis.value) for axis in CHART_AXES),
    ]


def curve_points(embedding: Embedding, n_coords: int | None) -> tuple[np.ndarray, list[int]]:
    """Embedding columns an emergent coordinate is extracted from, and their indices.

    The unique coordinates are used unless ``n_coords`` asks for the leading columns.
    """
    if n_coords is None:
        columns = [k for k, unique in enumerate(embedding.unique_flags) if unique]
    else:
        columns = list(range(min(n_coords, embedding.eigenvalues.size)))
    return embedding.coords[:, columns], columns


def build_coords(cfg: EpdeConfig, scratch: Path) -> None:
    """Extract emergent time and space, fill missing entries and build the chart of one slab.

    Emergent time starts at the channel carrying the least or the most total signal, as
    ``coords.time_anchor`` says the initial state looks.

    Raises:
        ConfigError: If the slab does not exist or physical time lacks time metadata.
    """
    block = cfg.coords
    tensor = load_tensor(cfg.out_dir / SCRAMBLED_FILE)
    if block.slab >= tensor.dims[0]:
        msg = f"coords.slab={block.slab} but the tensor has {tensor.dims[0]} parameter slabs"
        raise ConfigError(msg)

    mass = np.abs(tensor.filled()).sum(axis=(0, 2))
    start = np.argmin(mass) if block.time_anchor == "min-mass" else np.argmax(mass)
    anchors = {Axis.TIME: int(start), Axis.SPACE: None}

    coords: dict[Axis, EmergentCoordinate] = {}
    for axis in CHART_AXES:
        embedding = Embedding.load(cfg.out_dir / EMBEDDING_FILE.format(axis.value))
        points, columns = curve_points(embedding, block.n_coords)
        coords[axis] = extract_arclength(points, anchors[axis], columns, block.k)
        coords[axis].save(scratch / COORD_FILE.format(axis.value))
        shape = "closed loop" if coords[axis].closed else "open curve"
        logger.info(f"Axis '{axis.value}': {shape} through coordinates {[c + 1 for c in columns]}")

    if tensor.mask is not None:
        tensor = impute(tensor, coords)
        save_tensor(tensor, scratch / IMPUTED_FILE)

    phi: EmergentCoordinate | np.ndarray = coords[Axis.TIME]
    if block.time_kind == "physical":
        meta = tensor.meta(Axis.TIME)
        if meta is None:
            msg = "coords.time_kind='physical' needs time metadata on the tensor"
            raise ConfigError(msg)
        phi = meta.values[:, 0]

    chart = build_chart(
        tensor.filled()[block.slab],
        coords[Axis.SPACE],
        phi,
        n_psi=block.n_psi,
        n_phi=block.n_phi,
        corridors=block.corridors,
        time_kind=block.time_kind,
    )
    chart.save(scratch / CHART_FILE)
