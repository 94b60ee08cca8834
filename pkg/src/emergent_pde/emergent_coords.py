"""Emergent 1-D coordinates from curve-shaped embeddings, regridding and imputation."""

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import CubicSpline
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra, minimum_spanning_tree

from emergent_pde.constants import Axis
from emergent_pde.diffusion_maps import neighbor_count, pairwise_distances
from emergent_pde.models.data_tensor import DataTensor
from emergent_pde.models.emergent import EmergentChart, EmergentCoordinate
from emergent_pde.utils.errors import DegenerateInputError

COLLAPSE_RTOL = 1e-9
# Largest end-to-end gap of a loop, relative to its length
LOOP_GAP = 0.1
MIN_SPLINE_NODES = 4


def _collapse(coord: np.ndarray, values: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Sort by coordinate and average the values of coordinates equal within tolerance."""
    order = np.argsort(coord, kind="stable")
    coord = coord[order]
    values = np.take(values, order, axis=axis)
    span = float(coord[-1] - coord[0]) or 1.0
    starts = np.concatenate([[True], np.diff(coord) > COLLAPSE_RTOL * span])
    if starts.all():
        return coord, values
    groups = np.cumsum(starts) - 1
    counts = np.bincount(groups)
    nodes = np.bincount(groups, weights=coord) / counts
    moved = np.moveaxis(values, axis, 0)
    summed = np.zeros((counts.size, *moved.shape[1:]))
    np.add.at(summed, groups, moved)
    averaged = summed / counts.reshape(-1, *([1] * (moved.ndim - 1)))
    return nodes, np.moveaxis(averaged, 0, axis)


def resample_axis(
    values: np.ndarray,
    coord: np.ndarray,
    n: int,
    *,
    axis: int = -1,
    period: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Resample ``values`` along one axis onto ``n`` uniform points with a cubic spline.

    Args:
        values: Array sampled at ``coord`` along ``axis``.
        coord: Coordinate of every sample along ``axis``; need not be sorted.
        n: Number of output points.
        axis: Axis of ``values`` to resample.
        period: When set the data is periodic with this period and the grid covers
            [0, period) without the endpoint.

    Returns:
        The uniform grid and the resampled values.

    Raises:
        ValueError: With fewer than 4 distinct coordinate values.
    """
    values = np.asarray(values, dtype=np.float64)
    axis = axis % values.ndim
    nodes, data = _collapse(np.asarray(coord, dtype=np.float64), values, axis)
    if nodes.size < MIN_SPLINE_NODES:
        msg = f"need at least {MIN_SPLINE_NODES} distinct coordinate values, got {nodes.size}"
        raise ValueError(msg)

    if period is None:
        spline = CubicSpline(nodes, data, axis=axis)
        grid = np.linspace(nodes[0], nodes[-1], n)
    else:
        closed = np.concatenate([nodes, [nodes[0] + period]])
        first = np.take(data, [0], axis=axis)
        spline = CubicSpline(
            closed,
            np.concatenate([data, first], axis=axis),
            axis=axis,
            bc_type="periodic",
            extrapolate="periodic",
        )
        grid = np.arange(n) * (period / n)
    return grid, spline(grid)


def _knn_graph(points: np.ndarray, k: int) -> csr_matrix:
    dist = pairwise_distances(points)
    n = dist.shape[0]
    k = min(k, n - 1)
    order = np.argsort(dist, axis=1, kind="stable")[:, 1 : k + 1]
    rows = np.repeat(np.arange(n), k)
    cols = order.ravel()
    adjacency = np.zeros_like(dist)
    adjacency[rows, cols] = dist[rows, cols]
    adjacency = np.maximum(adjacency, adjacency.T)
    return csr_matrix(adjacency)


def _walk(predecessors: np.ndarray, start: int, steps: int) -> int:
    """Node reached after ``steps`` hops from ``start`` toward the Dijkstra source."""
    node = start
    for _ in range(steps):
        parent = int(predecessors[node])
        if parent < 0:
            break
        node = parent
    return node


def _outward(points: np.ndarray, predecessors: np.ndarray, end: int, steps: int) -> np.ndarray:
    """Unit direction in which the curve leaves through ``end``."""
    direction = points[end] - points[_walk(predecessors, end, steps)]
    norm = float(np.linalg.norm(direction))
    return direction / norm if norm else direction


def _is_loop(points: np.ndarray, tree: csr_matrix, a: int, b: int, from_a: np.ndarray, k: int) -> bool:
    """Whether the tree diameter ``a``..``b`` is a loop broken at its widest gap.

    A loop leaves through its two ends toward each other, so the outward directions are
    opposed and the ends are close compared to the length of the path between them. The
    free ends of a hairpin leave in the same direction.
    """
    length = float(from_a[b])
    gap = float(np.linalg.norm(points[b] - points[a]))
    if not length or gap > LOOP_GAP * length:
        return False
    _, toward_a = dijkstra(tree, directed=False, indices=a, return_predecessors=True)
    _, toward_b = dijkstra(tree, directed=False, indices=b, return_predecessors=True)
    n_path = 1
    node = b
    while node != a and toward_a[node] >= 0:
        node = int(toward_a[node])
        n_path += 1
    steps = max(1, min(k, n_path // 4))
    out_a = _outward(points, toward_b, a, steps)
    out_b = _outward(points, toward_a, b, steps)
    return bool(out_a @ out_b < 0)


def extract_arclength(
    points: np.ndarray,
    anchor: int | None = None,
    source_coords: list[int] | None = None,
    k: int | None = None,
) -> EmergentCoordinate:
    """Arclength along a curve-shaped point cloud, rescaled to [0, 1].

    Distances are measured along the minimum spanning tree of the k-nearest-neighbor
    graph. The tree follows the curve through consecutive samples, so nearly coincident
    branches of a hairpin stay apart even where the neighbor graph links them. Its
    diameter, found by two Dijkstra sweeps, runs between the ends of an open curve. A
    closed loop comes out as a path broken at its widest gap; it is measured around the
    loop from the anchor. Open curves are oriented so that the anchor falls in the lower
    half.

    Args:
        points: (N, m) embedding coordinates.
        anchor: Channel fixing the orientation.
        source_coords: Embedding columns the points came from, for the record.
        k: Neighbor count; defaults to max(7, ceil(0.01 N)).

    Raises:
        ValueError: With fewer than 4 points.
        DegenerateInputError: If the neighbor graph is disconnected.
    """
    points = np.asarray(points, dtype=np.float64)
    points = points[:, None] if points.ndim == 1 else points
    n = points.shape[0]
    if n < MIN_SPLINE_NODES:
        msg = f"extract_arclength needs at least {MIN_SPLINE_NODES} points, got {n}"
        raise ValueError(msg)
    k = k or neighbor_count(n)

    graph = _knn_graph(points, k)
    n_components, _ = connected_components(graph, directed=False)
    if n_components > 1:
        msg = f"the {k}-nearest-neighbor graph of the embedding has {n_components} components"
        raise DegenerateInputError(msg)

    tree = minimum_spanning_tree(graph)
    a = int(np.argmax(dijkstra(tree, directed=False, indices=0)))
    from_a = dijkstra(tree, directed=False, indices=a)
    b = int(np.argmax(from_a))
    closed = _is_loop(points, tree, a, b, from_a, k)

    if closed:
        perimeter = float(from_a[b]) + float(np.linalg.norm(points[b] - points[a]))
        start = a if anchor is None else anchor
        geodesic = np.mod(from_a - from_a[start], perimeter)
    else:
        geodesic = from_a

    values = geodesic / geodesic.max()
    if not closed and anchor is not None and values[anchor] > 0.5:  # noqa: PLR2004
        values = 1.0 - values
    logger.debug(f"Emergent coordinate: {n} points, {'closed loop' if closed else 'open curve'}")
    return EmergentCoordinate(
        values=np.clip(values, 0.0, 1.0),
        source_coords=source_coords or list(range(points.shape[1])),
        orientation_anchor=a if anchor is None else anchor,
        closed=closed,
    )


def _coord_values(coord: EmergentCoordinate | np.ndarray) -> np.ndarray:
    return coord.values if isinstance(coord, EmergentCoordinate) else np.asarray(coord, dtype=float)


def resample(
    field: np.ndarray,
    coord_a: EmergentCoordinate | np.ndarray,
    coord_b: EmergentCoordinate | np.ndarray,
    n_a: int,
    n_b: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Regrid a field sampled at (channel_a, channel_b) nodes with separable cubic splines.

    Splines run along axis a for every b channel, then along axis b on the new rows.

    Returns:
        The a grid, the b grid and the (n_a, n_b) resampled field.
    """
    field = np.asarray(field, dtype=np.float64)
    grid_a, partial = resample_axis(field, _coord_values(coord_a), n_a, axis=0)
    grid_b, regridded = resample_axis(partial, _coord_values(coord_b), n_b, axis=1)
    return grid_a, grid_b, regridded


def _fill_fibers(
    values: np.ndarray, mask: np.ndarray, coord: np.ndarray, axis: int
) -> tuple[np.ndarray, np.ndarray, int]:
    """Interpolate missing entries along ``axis``; returns values, mask and the extreme-fill count."""
    moved_v = np.moveaxis(values, axis, -1)
    moved_m = np.moveaxis(mask, axis, -1)
    flat_v = moved_v.reshape(-1, moved_v.shape[-1]).copy()
    flat_m = moved_m.reshape(-1, moved_m.shape[-1]).copy()

    extremes = 0
    incomplete = np.flatnonzero(~flat_m.all(axis=1))
    patterns: dict[bytes, list[int]] = {}
    for fiber in incomplete:
        patterns.setdefault(flat_m[fiber].tobytes(), []).append(int(fiber))

    for fibers in patterns.values():
        observed = flat_m[fibers[0]]
        if observed.sum() < 2:  # noqa: PLR2004
            continue
        missing = ~observed
        x, y = _collapse(coord[observed], flat_v[np.ix_(fibers, np.flatnonzero(observed))], axis=1)
        targets = coord[missing]
        inside = (targets >= x[0]) & (targets <= x[-1])
        filled = np.empty((len(fibers), targets.size))
        if x.size >= MIN_SPLINE_NODES:
            filled[:, inside] = CubicSpline(x, y, axis=1)(targets[inside])
        else:
            for row, series in enumerate(y):
                filled[row, inside] = np.interp(targets[inside], x, series)
        nearest = np.where(targets[~inside] < x[0], 0, x.size - 1)
        filled[:, ~inside] = y[:, nearest]
        extremes += int((~inside).sum()) * len(fibers)

        columns = np.flatnonzero(missing)
        flat_v[np.ix_(fibers, columns)] = filled
        flat_m[np.ix_(fibers, columns)] = True

    new_v = np.moveaxis(flat_v.reshape(moved_v.shape), -1, axis)
    new_m = np.moveaxis(flat_m.reshape(moved_m.shape), -1, axis)
    return new_v, new_m, extremes


def impute(tensor: DataTensor, coords: dict[Axis, EmergentCoordinate]) -> DataTensor:
    """Fill masked entries by interpolating along emergent coordinates.

    Axes are visited in the order of ``coords``. Entries beyond the observed coordinate
    range take the nearest observed value and a warning is logged.

    Returns:
        The tensor with filled entries unmasked; entries that could not be filled stay masked.
    """
    if tensor.mask is None or tensor.mask.all():
        return tensor

    values = tensor.filled(fill=0.0)
    mask = np.array(tensor.mask)
    for axis, coord in coords.items():
        if coord.values.size != tensor.dims[axis.index]:
            msg = f"coordinate for axis '{axis.value}' has {coord.values.size} values for {tensor.dims[axis.index]} channels"
            raise ValueError(msg)
        values, mask, extremes = _fill_fibers(values, mask, coord.values, axis.index)
        if extremes:
            logger.warning(
                f"{extremes} entries on axis '{axis.value}' lie beyond the observed emergent range; filled from the nearest channel"
            )

    values = np.where(mask, values, np.nan)
    return DataTensor(
        values=values, mask=None if mask.all() else mask, axis_meta=tensor.axis_meta
    )


class CorridorConfig(BaseModel):
    """Corridor geometry of an emergent chart."""

    model_config = ConfigDict(frozen=True)

    source: bool = True
    source_level: float = Field(default=0.9, gt=0, le=1)
    source_dilation: int = Field(default=2, ge=0)
    boundary_width: int = Field(default=2, ge=1)


def source_corridor(field: np.ndarray, psi_grid: np.ndarray, cfg: CorridorConfig) -> tuple[float, float]:
    """Psi interval where the late-time maximum reaches ``source_level`` of its peak, dilated.

    Raises:
        DegenerateInputError: If the late-time field is identically zero.
    """
    late = field[field.shape[0] // 2 :]
    peak = late.max(axis=0)
    if not np.any(peak > 0):
        msg = "late-time field has no positive values; cannot locate a source"
        raise DegenerateInputError(msg)
    hot = np.flatnonzero(peak >= cfg.source_level * peak.max())
    lo = max(int(hot.min()) - cfg.source_dilation, 0)
    hi = min(int(hot.max()) + cfg.source_dilation, psi_grid.size - 1)
    return float(psi_grid[lo]), float(psi_grid[hi])


def build_chart(
    slab: np.ndarray,
    psi: EmergentCoordinate,
    phi: EmergentCoordinate | np.ndarray,
    n_psi: int = 128,
    n_phi: int = 1500,
    corridors: CorridorConfig | None = None,
    time_kind: str = "emergent",
) -> EmergentChart:
    """Regrid one (time, space) slab onto uniform emergent grids and mark its corridors.

    Args:
        slab: Values with time channels as rows and space channels as columns.
        psi: Emergent space coordinate of the columns.
        phi: Emergent time coordinate of the rows, or physical times.
        n_psi: Space grid size.
        n_phi: Time grid size.
        corridors: Corridor geometry.
        time_kind: ``"emergent"`` or ``"physical"``, recorded on the chart.
    """
    corridors = corridors or CorridorConfig()
    phi_grid, psi_grid, field = resample(slab, phi, psi, n_phi, n_psi)
    width = corridors.boundary_width - 1
    boundary = [
        (float(psi_grid[0]), float(psi_grid[width])),
        (float(psi_grid[-1 - width]), float(psi_grid[-1])),
    ]
    source = source_corridor(field, psi_grid, corridors) if corridors.source else None
    logger.debug(f"Chart {field.shape}: source corridor {source}, boundary corridors {boundary}")
    return EmergentChart(
        psi_grid=psi_grid,
        phi_grid=phi_grid,
        field=field,
        source_corridor=source,
        boundary_corridors=boundary,
        time_kind=time_kind,
    )
