"""Questionnaire organization: cluster trees, informed distances and the alternating loop.

Every axis is clustered bottom-up into a tree. The informed distance between two channels
of one axis adds, to their plain L1 distance, the L1 distance between the sums of their
entries over every cluster (or pair of clusters) of the other axes' trees. Trees and
distances are refined in turn until the distances settle.
"""

import json
from pathlib import Path

import numpy as np
from loguru import logger
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from scipy.spatial.distance import pdist, squareform

from emergent_pde.constants import MIN_CHANNELS, Axis, LevelWeighting
from emergent_pde.diffusion_maps import check_distances, embed
from emergent_pde.models.cluster_tree import ClusterTree
from emergent_pde.models.data_tensor import DataTensor
from emergent_pde.models.embedding import DiffusionConfig, Embedding
from emergent_pde.models.organization import Organization, QuestConfig, QuestState
from emergent_pde.utils.console import console
from emergent_pde.utils.errors import DegenerateInputError, ShapeMismatchError


def base_threshold(dist: np.ndarray, percentile: float = 25.0) -> float:
    """Percentile of the pairwise distances, falling back to positive distances, then to 1.

    >>> base_threshold(np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]]))
    1.5
    """
    pairs = dist[np.triu_indices_from(dist, k=1)]
    if pairs.size == 0:
        return 1.0
    q = float(np.percentile(pairs, percentile))
    if q > 0:
        return q
    positive = pairs[pairs > 0]
    return float(np.percentile(positive, percentile)) if positive.size else 1.0


def _join_level(
    pair_sums: np.ndarray, sizes: np.ndarray, threshold: float
) -> list[list[int]]:
    """Group the current clusters into super-clusters for one level.

    Joins are taken cheapest first, over unjoined-cluster pairs and unjoined cluster to
    existing super-cluster candidates, while the average distance stays below
    ``threshold``. Ties go to the lowest cluster index, then to pairs before
    super-clusters, then to the lowest target index.
    """
    k = sizes.size
    average = pair_sums / np.outer(sizes, sizes)
    np.fill_diagonal(average, np.inf)
    unjoined = np.ones(k, dtype=bool)
    groups: list[list[int]] = []
    group_sums = np.zeros((k, 0))
    group_sizes = np.zeros(0)

    while unjoined.any():
        pairs = np.where(unjoined[:, None] & unjoined[None, :], average, np.inf)
        flat = int(np.argmin(pairs))
        u_pair, v_pair = divmod(flat, k)
        d_pair = pairs[u_pair, v_pair]

        d_group, u_group, s_group = np.inf, k, 0
        if groups:
            to_group = group_sums / np.outer(sizes, group_sizes)
            to_group[~unjoined] = np.inf
            flat = int(np.argmin(to_group))
            u_group, s_group = divmod(flat, len(groups))
            d_group = to_group[u_group, s_group]

        take_pair = (d_pair, u_pair, 0) <= (d_group, u_group, 1)
        if min(d_pair, d_group) >= threshold:
            break
        if take_pair:
            groups.append([u_pair, v_pair])
            unjoined[[u_pair, v_pair]] = False
            group_sums = np.column_stack([group_sums, pair_sums[:, u_pair] + pair_sums[:, v_pair]])
            group_sizes = np.append(group_sizes, sizes[u_pair] + sizes[v_pair])
        else:
            groups[s_group].append(u_group)
            unjoined[u_group] = False
            group_sums[:, s_group] += pair_sums[:, u_group]
            group_sizes[s_group] += sizes[u_group]

    return groups + [[u] for u in np.flatnonzero(unjoined).tolist()]


def hierarchical_cluster(
    dist: np.ndarray,
    threshold_growth: float = 2.0,
    *,
    percentile: float = 25.0,
    max_levels: int = 30,
) -> ClusterTree:
    """Bottom-up cluster tree of the channels behind a distance matrix.

    Level ``l >= 1`` joins clusters whose average distance is below ``q * g**l``,
    where ``q`` is the ``percentile`` of the pairwise distances and ``g`` is
    ``threshold_growth``. A level that joins nothing is not recorded. If ``max_levels``
    thresholds pass without reaching a single root, the root is forced.

    >>> tree = hierarchical_cluster(np.ones((4, 4)) - np.eye(4))
    >>> tree.levels[1], tree.thresholds[1]
    ([[0, 1], [2, 3]], 2.0)

    Raises:
        ValueError: For an empty matrix or a threshold growth of at most 1.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.size == 0:
        msg = "cannot cluster zero channels"
        raise ValueError(msg)
    dist = check_distances(dist)
    n = dist.shape[0]
    if threshold_growth <= 1:
        msg = f"threshold_growth must be > 1, got {threshold_growth}"
        raise ValueError(msg)

    q = base_threshold(dist, percentile)
    clusters = [[i] for i in range(n)]
    levels = [clusters]
    thresholds = [0.0]
    pair_sums = dist.copy()
    forced = False

    level = 1
    while len(clusters) > 1:
        threshold = q * threshold_growth**level
        if level > max_levels:
            forced = True
            groups = [list(range(len(clusters)))]
        else:
            groups = _join_level(pair_sums, np.array([len(c) for c in clusters], dtype=float), threshold)
        level += 1
        if len(groups) == len(clusters):
            continue

        merged = [sorted(i for g in group for i in clusters[g]) for group in groups]
        order = sorted(range(len(merged)), key=lambda g: merged[g][0])
        membership = np.zeros((len(groups), len(clusters)))
        for row, g in enumerate(order):
            membership[row, groups[g]] = 1.0
        pair_sums = membership @ pair_sums @ membership.T
        clusters = [merged[g] for g in order]
        levels.append(clusters)
        thresholds.append(threshold)
        logger.trace(f"Level {len(levels) - 1}: {len(clusters)} clusters below {threshold:.4g}")

    if forced:
        logger.debug(f"Cluster root forced after {max_levels} thresholds")
    return ClusterTree(n_channels=n, levels=levels, thresholds=thresholds, forced_root=forced)


def level_weight(level: int, n_levels: int, weighting: LevelWeighting) -> float:
    """Weight of one tree level's cluster sums.

    >>> level_weight(2, 4, LevelWeighting.MULTISCALE)
    0.125
    """
    match weighting:
        case LevelWeighting.MULTISCALE:
            return 2.0 ** (-level / 2) / n_levels
        case LevelWeighting.UNIFORM:
            return 1.0 / n_levels
        case _:
            return 1.0


def cluster_operator(tree: ClusterTree, weighting: LevelWeighting) -> np.ndarray:
    """Stacked weighted indicator rows for every cluster of every level."""
    return np.vstack(
        [
            level_weight(level, tree.n_levels, weighting) * tree.indicators(level)
            for level in range(tree.n_levels)
        ]
    )


def _features(items: np.ndarray, operators: list[np.ndarray]) -> np.ndarray:
    """Cluster sums of every item (first axis) over the trees of the remaining axes."""
    if len(operators) == 1:
        return items @ operators[0].T
    first, second = operators
    sums = np.einsum("ia,cab,jb->cij", first, items, second, optimize=True)
    return sums.reshape(items.shape[0], -1)


def _check_items(shape: tuple[int, ...], trees: list[ClusterTree]) -> None:
    if len(trees) not in (1, 2) or shape != tuple(tree.n_channels for tree in trees):
        msg = f"channel vector of shape {shape} does not match trees over {[t.n_channels for t in trees]} channels"
        raise ShapeMismatchError(msg)


def transform_F(  # noqa: N802
    y: np.ndarray,
    trees: list[ClusterTree],
    weighting: LevelWeighting = LevelWeighting.MULTISCALE,
) -> np.ndarray:
    """Weighted sums of ``y`` over every cluster of the other axes' trees.

    With one tree, ``y`` has one entry per channel of that tree. With two trees, ``y`` is
    a matrix and there is one sum per pair of clusters, taken over their intersection.

    >>> tree = ClusterTree(n_channels=2, levels=[[[0], [1]], [[0, 1]]], thresholds=[0.0, 1.0])
    >>> transform_F(np.array([1.0, 2.0]), [tree], LevelWeighting.NONE).tolist()
    [1.0, 2.0, 3.0]

    Raises:
        ShapeMismatchError: If ``y`` does not match the trees.
    """
    y = np.asarray(y, dtype=np.float64)
    _check_items(y.shape, trees)
    operators = [cluster_operator(tree, weighting) for tree in trees]
    return _features(y[None], operators)[0]


def quest_distance(
    y_i: np.ndarray,
    y_j: np.ndarray,
    trees: list[ClusterTree],
    weighting: LevelWeighting = LevelWeighting.MULTISCALE,
    *,
    normalize: bool = False,
) -> float:
    """L1 distance of the raw vectors plus L1 distance of their cluster sums.

    With ``normalize`` each term is divided by the length of the vectors it compares.

    Raises:
        ShapeMismatchError: If the vectors differ in shape or do not match the trees.
    """
    y_i = np.asarray(y_i, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64)
    if y_i.shape != y_j.shape:
        msg = f"cannot compare vectors of shapes {y_i.shape} and {y_j.shape}"
        raise ShapeMismatchError(msg)
    f_i = transform_F(y_i, trees, weighting)
    f_j = transform_F(y_j, trees, weighting)
    raw = float(np.abs(y_i - y_j).sum())
    informed = float(np.abs(f_i - f_j).sum())
    if normalize:
        raw /= y_i.size
        informed /= f_i.size
    return raw + informed


def plain_distances(items: np.ndarray, *, normalize: bool = False) -> np.ndarray:
    """Pairwise L1 distances between items (first axis), optionally divided by item size."""
    flat = items.reshape(items.shape[0], -1)
    dist = squareform(pdist(flat, metric="cityblock"))
    return dist / flat.shape[1] if normalize else dist


def quest_distances(
    items: np.ndarray,
    trees: list[ClusterTree],
    weighting: LevelWeighting = LevelWeighting.MULTISCALE,
    *,
    normalize: bool = False,
) -> np.ndarray:
    """Pairwise questionnaire distances between the items along the first axis."""
    items = np.asarray(items, dtype=np.float64)
    _check_items(items.shape[1:], trees)
    features = _features(items, [cluster_operator(tree, weighting) for tree in trees])
    return plain_distances(items, normalize=normalize) + plain_distances(
        features, normalize=normalize
    )


def _relative_change(old: np.ndarray, new: np.ndarray) -> float:
    scale = float(np.linalg.norm(old))
    change = float(np.linalg.norm(new - old))
    if scale == 0:
        return 0.0 if change == 0 else float("inf")
    return change / scale


def organize(values: np.ndarray, cfg: QuestConfig | None = None) -> QuestState:
    """Run the informed-metric loop over every axis of a 2-D or 3-D array.

    Axes 1 and up start from plain L1 clustering and axis 0 is then clustered with the
    informed metric. Each sweep re-clusters axes 1, 2, ... and finally axis 0, each with
    the latest trees of the others, until every axis' distance matrix changes by less than
    ``cfg.tol`` in relative Frobenius norm or ``cfg.max_sweeps`` sweeps have run.

    Raises:
        ValueError: If the array is not 2-D or 3-D or an axis has fewer than 4 channels.
    """
    cfg = cfg or QuestConfig()
    values = np.asarray(values, dtype=np.float64)
    if values.ndim not in (2, 3) or min(values.shape) < MIN_CHANNELS:
        msg = f"organize needs a 2-D or 3-D array with at least {MIN_CHANNELS} channels per axis, got shape {values.shape}"
        raise ValueError(msg)

    n_axes = values.ndim
    stacks = [np.moveaxis(values, axis, 0) for axis in range(n_axes)]
    trees: list[ClusterTree] = [ClusterTree.singletons(n) for n in values.shape]
    distances: list[np.ndarray] = [np.zeros((n, n)) for n in values.shape]

    def cluster(dist: np.ndarray) -> ClusterTree:
        return hierarchical_cluster(
            dist, cfg.threshold_growth, percentile=cfg.percentile, max_levels=cfg.max_levels
        )

    def informed(axis: int) -> np.ndarray:
        others = [trees[other] for other in range(n_axes) if other != axis]
        return quest_distances(stacks[axis], others, cfg.weighting, normalize=cfg.normalize)

    for axis in range(1, n_axes):
        distances[axis] = plain_distances(stacks[axis], normalize=cfg.normalize)
        trees[axis] = cluster(distances[axis])
    distances[0] = informed(0)
    trees[0] = cluster(distances[0])

    history: list[list[float]] = [[] for _ in range(n_axes)]
    order = [*range(1, n_axes), 0]
    iteration = 0
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task("Organizing", total=cfg.max_sweeps)
        while iteration < cfg.max_sweeps:
            for axis in order:
                updated = informed(axis)
                history[axis].append(_relative_change(distances[axis], updated))
                distances[axis] = updated
                trees[axis] = cluster(updated)
            iteration += 1
            progress.advance(task)
            changes = [h[-1] for h in history]
            logger.trace(f"Sweep {iteration}: relative changes {[f'{c:.3g}' for c in changes]}")
            if max(changes) < cfg.tol:
                break

    logger.debug(f"Organization stopped after {iteration} sweeps")
    return QuestState(distances=distances, trees=trees, iteration=iteration, history=history)


def organize_2d(
    matrix: np.ndarray,
    cfg: QuestConfig | None = None,
    diffusion: DiffusionConfig | None = None,
) -> tuple[Embedding, Embedding]:
    """Organize the rows and columns of a matrix and embed both.

    Raises:
        DegenerateInputError: If an axis has identical channels only, e.g. a constant matrix.
    """
    organization = organize_matrix(matrix, cfg, diffusion)
    return organization.embeddings[Axis.TIME], organization.embeddings[Axis.SPACE]


def organize_matrix(
    matrix: np.ndarray,
    cfg: QuestConfig | None = None,
    diffusion: DiffusionConfig | None = None,
) -> Organization:
    """Like :func:`organize_2d`, keeping the loop state; rows are time and columns space."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:  # noqa: PLR2004
        msg = f"organize_2d needs a matrix, got shape {matrix.shape}"
        raise ValueError(msg)
    state = organize(matrix, cfg)
    rows, cols = (embed(dist, diffusion) for dist in state.distances)
    return Organization(embeddings={Axis.TIME: rows, Axis.SPACE: cols}, state=state)


def organize_3d(
    tensor: DataTensor,
    cfg: QuestConfig | None = None,
    diffusion: DiffusionConfig | None = None,
) -> Organization:
    """Organize the (p, t, s) axes of a tensor and embed each of them.

    Masked entries are replaced by the mean of the observed ones first. An axis whose
    channels cannot be told apart is reported in ``errors`` and the others are still
    embedded.

    Raises:
        DegenerateInputError: If no axis can be embedded.
    """
    values = tensor.filled()
    if tensor.n_missing:
        logger.warning(
            f"{tensor.n_missing} missing entries filled with the observed mean before organizing"
        )

    state = organize(values, cfg)
    embeddings: dict[Axis, Embedding] = {}
    errors: dict[Axis, str] = {}
    for axis in Axis:
        try:
            embeddings[axis] = embed(state.distances[axis.index], diffusion)
        except DegenerateInputError as e:
            logger.warning(f"Axis '{axis.value}' could not be embedded: {e}")
            errors[axis] = str(e)
    if not embeddings:
        msg = "no axis of the tensor could be embedded"
        raise DegenerateInputError(msg)
    return Organization(embeddings=embeddings, state=state, errors=errors)


def dump_state(state: QuestState, directory: Path, names: list[str]) -> list[Path]:
    """Write each axis' tree as JSON and its distance matrix as ``.npy``.

    Returns:
        The written paths.
    """
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name, tree, dist, history in zip(
        names, state.trees, state.distances, state.history, strict=True
    ):
        tree_path = directory / f"tree_{name}.json"
        payload = {**tree.model_dump(mode="json"), "history": history}
        tree_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        dist_path = directory / f"distances_{name}.npy"
        np.save(dist_path, dist)
        written += [tree_path, dist_path]
    logger.debug(f"Dumped {len(names)} trees and distance matrices to {directory}")
    return written
