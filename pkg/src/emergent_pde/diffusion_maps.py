"""Diffusion maps: Gaussian kernels, the normalized operator, its spectrum and harmonic filtering."""

import math

import numpy as np
from loguru import logger
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.spatial.distance import pdist, squareform

from emergent_pde.constants import Normalization
from emergent_pde.models.embedding import DiffusionConfig, Embedding
from emergent_pde.utils.errors import ConvergenceError, DegenerateInputError

DISTINCT_RTOL = 1e-9


def pairwise_distances(points: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """Square matrix of pairwise distances between the rows of ``points``."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    return squareform(pdist(points, metric=metric))


def check_distances(dist: np.ndarray) -> np.ndarray:
    """Validate a distance matrix.

    Raises:
        ValueError: If it is not square, symmetric, nonnegative with a zero diagonal.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:  # noqa: PLR2004
        msg = f"distance matrix must be square, got shape {dist.shape}"
        raise ValueError(msg)
    if not np.all(np.isfinite(dist)) or np.any(dist < 0):
        msg = "distances must be finite and nonnegative"
        raise ValueError(msg)
    if np.any(np.diag(dist) != 0):
        msg = "distance matrix must have a zero diagonal"
        raise ValueError(msg)
    if not np.allclose(dist, dist.T, rtol=1e-12, atol=1e-12 * max(float(dist.max()), 1.0)):
        msg = "distance matrix must be symmetric"
        raise ValueError(msg)
    return dist


def kernel_matrix(dist: np.ndarray, epsilon: float) -> np.ndarray:
    """Gaussian weights exp(-d^2 / epsilon^2).

    >>> kernel_matrix(np.array([[0.0, 2.0], [2.0, 0.0]]), 2.0).round(4).tolist()
    [[1.0, 0.3679], [0.3679, 1.0]]

    Raises:
        ValueError: If ``epsilon`` is not positive.
    """
    if not epsilon > 0:
        msg = f"epsilon must be > 0, got {epsilon}"
        raise ValueError(msg)
    dist = check_distances(dist)
    return np.exp(-((dist / epsilon) ** 2))


def _kth_distinct(row: np.ndarray, k: int) -> float | None:
    positive = np.sort(row[row > 0])
    if positive.size == 0:
        return None
    distinct = [positive[0]]
    for value in positive[1:]:
        if value > distinct[-1] * (1 + DISTINCT_RTOL):
            distinct.append(value)
            if len(distinct) == k:
                break
    return float(distinct[k - 1] if len(distinct) >= k else distinct[-1])


def neighbor_count(n_points: int) -> int:
    """k = max(7, ceil(0.01 N)).

    >>> neighbor_count(100), neighbor_count(1000)
    (7, 10)
    """
    return max(7, math.ceil(0.01 * n_points))


def choose_epsilon(dist: np.ndarray, k: int | None = None) -> float:
    """Median over points of the k-th smallest distinct nonzero distance.

    Distances equal within a relative 1e-9 count once; a point with fewer than ``k``
    distinct distances contributes its largest one.

    Raises:
        ValueError: With fewer than 2 points.
        DegenerateInputError: If every distance is zero.
    """
    dist = check_distances(dist)
    if dist.shape[0] < 2:  # noqa: PLR2004
        msg = "choose_epsilon needs at least 2 points"
        raise ValueError(msg)
    k = k or neighbor_count(dist.shape[0])
    per_point = [v for v in (_kth_distinct(row, k) for row in dist) if v is not None]
    if not per_point:
        msg = "all pairwise distances are zero; the kernel scale is undefined"
        raise DegenerateInputError(msg)
    return float(np.median(per_point))


def _sparsify(weights: np.ndarray, dist: np.ndarray, knn: int) -> np.ndarray:
    """Keep w_ij when j is among i's knn nearest neighbors or i among j's."""
    order = np.argsort(dist, axis=1, kind="stable")[:, : knn + 1]
    keep = np.zeros_like(weights, dtype=bool)
    np.put_along_axis(keep, order, values=True, axis=1)
    keep |= keep.T
    return np.where(keep, weights, 0.0)


def _spectrum(
    operator: np.ndarray, n_vectors: int, dense_limit: int, degree: np.ndarray, epsilon: float
) -> tuple[np.ndarray, np.ndarray]:
    n = operator.shape[0]
    if n <= dense_limit:
        values, vectors = eigh(operator, subset_by_index=[n - n_vectors, n - 1])
    else:
        try:
            values, vectors = eigsh(operator, k=n_vectors, which="LA", tol=1e-12)
        except ArpackNoConvergence as e:
            msg = (
                f"eigensolver did not converge for {n} points (epsilon={epsilon:.4g}, "
                f"degree range {degree.min():.3g}..{degree.max():.3g}, "
                f"degree ratio {degree.max() / degree.min():.3g})"
            )
            raise ConvergenceError(msg) from e
    order = np.argsort(values)[::-1]
    return values[order], vectors[:, order]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    for k in range(vectors.shape[1]):
        column = vectors[:, k]
        nonzero = np.flatnonzero(np.abs(column) > 1e-12 * np.max(np.abs(column)))
        if nonzero.size and column[nonzero[0]] < 0:
            vectors[:, k] = -column
    return vectors


def embed(dist: np.ndarray, cfg: DiffusionConfig | None = None) -> Embedding:
    """Diffusion-map embedding of the points behind a distance matrix.

    The Gaussian kernel (optionally density-normalized by ``alpha`` and sparsified to
    ``knn`` neighbors) is normalized through its symmetric conjugate
    ``S = D^-1/2 W D^-1/2``. For the row-stochastic operator the eigenvectors of ``S``
    map back to right eigenvectors of ``D^-1 W`` normalized under the stationary
    distribution. The constant mode is dropped and each eigenvector's first nonzero
    entry is made positive.

    Raises:
        ValueError: With fewer than 3 points.
        DegenerateInputError: If all distances are zero.
        ConvergenceError: If the iterative eigensolver fails.
    """
    cfg = cfg or DiffusionConfig()
    dist = check_distances(dist)
    n = dist.shape[0]
    if n < 3:  # noqa: PLR2004
        msg = f"embedding needs at least 3 points, got {n}"
        raise ValueError(msg)

    epsilon = choose_epsilon(dist) if cfg.epsilon == "auto" else float(cfg.epsilon)
    if not np.any(dist > 0):
        msg = "all pairwise distances are zero; nothing to embed"
        raise DegenerateInputError(msg)

    weights = kernel_matrix(dist, epsilon)
    if cfg.knn is not None:
        weights = _sparsify(weights, dist, cfg.knn)
    if cfg.alpha > 0:
        q = weights.sum(axis=1) ** cfg.alpha
        weights = weights / np.outer(q, q)

    degree = weights.sum(axis=1)
    root = np.sqrt(degree)
    operator = weights / np.outer(root, root)
    n_eigs = max(1, min(cfg.n_eigs, n - 2))
    values, vectors = _spectrum(operator, n_eigs + 1, cfg.dense_limit, degree, epsilon)

    if cfg.normalization == Normalization.ROW_STOCHASTIC:
        total = degree.sum()
        phi = vectors * (math.sqrt(total) / root)[:, None]
        stationary = degree / total
    else:
        phi = vectors
        stationary = root / root.sum()

    phi = _fix_signs(phi[:, 1:].copy())
    values = values[1:]
    logger.debug(
        f"Diffusion map: {n} points, epsilon={epsilon:.4g}, "
        f"eigenvalues {np.array2string(values[:5], precision=4)}"
    )

    embedding = Embedding(
        eigenvalues=values,
        eigenvectors=phi,
        unique_flags=[True] * values.size,
        epsilon_used=epsilon,
        weights=stationary,
    )
    flags = select_unique(embedding, cfg.unique_threshold, cfg.regression_scale)
    return embedding.model_copy(update={"unique_flags": flags})


def local_linear_fit(
    predictors: np.ndarray,
    target: np.ndarray,
    bandwidth: float | None = None,
    scale: float = 3.0,
    *,
    leave_one_out: bool = True,
) -> np.ndarray:
    """Gaussian-weighted local-linear predictions of ``target`` from ``predictors``.

    Args:
        predictors: (N, m) or (N,) predictor values.
        target: N target values.
        bandwidth: Kernel bandwidth; defaults to the predictor range divided by ``scale``.
            With several predictors the range is the diagonal of their bounding box.
        scale: Divisor for the default bandwidth.
        leave_one_out: Exclude each point from its own fit.

    Returns:
        The fitted value at every point.
    """
    x = np.asarray(predictors, dtype=np.float64)
    x = x[:, None] if x.ndim == 1 else x
    y = np.asarray(target, dtype=np.float64)
    dist = pairwise_distances(x)
    if bandwidth is None:
        bandwidth = float(np.linalg.norm(np.ptp(x, axis=0))) / scale
    bandwidth = bandwidth if bandwidth > 0 else 1.0

    kernel = np.exp(-((dist / bandwidth) ** 2))
    if leave_one_out:
        np.fill_diagonal(kernel, 0.0)

    fitted = np.empty(y.size)
    for i in range(y.size):
        sqrt_w = np.sqrt(kernel[i])
        design = np.column_stack([np.ones(y.size), x - x[i]]) * sqrt_w[:, None]
        coef, *_ = np.linalg.lstsq(design, y * sqrt_w, rcond=None)
        fitted[i] = coef[0]
    return fitted


def harmonic_residuals(embedding: Embedding, scale: float = 3.0) -> np.ndarray:
    """Normalized leave-one-out residual of every eigenvector regressed on the earlier ones.

    The first coordinate has residual 1 by convention.
    """
    phi = embedding.eigenvectors
    residuals = np.ones(phi.shape[1])
    for k in range(1, phi.shape[1]):
        fitted = local_linear_fit(phi[:, :k], phi[:, k], scale=scale)
        norm = float(np.sum(phi[:, k] ** 2))
        residuals[k] = math.sqrt(float(np.sum((phi[:, k] - fitted) ** 2)) / norm) if norm else 0.0
    return residuals


def select_unique(
    embedding: Embedding, threshold: float = 0.5, scale: float = 3.0
) -> list[bool]:
    """Flag coordinates that are not functions of the earlier ones (residual >= threshold)."""
    residuals = harmonic_residuals(embedding, scale)
    logger.trace(f"Harmonic residuals: {np.array2string(residuals, precision=3)}")
    return [bool(r >= threshold) for r in residuals]
