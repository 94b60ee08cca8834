"""Adam training of the right-hand side, source and surrogate networks; SVD regularization."""

import numpy as np
from loguru import logger
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from emergent_pde.constants import Activation, NodeTag
from emergent_pde.models.emergent import EmergentChart, FeatureSet
from emergent_pde.models.mlp import MlpModel, TrainConfig, TrainHistory
from emergent_pde.utils.console import console
from emergent_pde.utils.errors import DegenerateInputError, NumericalError
from emergent_pde.utils.helpers import make_rng

RHS_HIDDEN = (126,) * 6
SOURCE_HIDDEN = (64,) * 3
SURROGATE_HIDDEN = (12,) * 8
MIN_SURROGATE_VOXELS = 1000
SVD_ENERGY = 0.999


def adam_train(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    description: str = "Training",
) -> TrainHistory:
    """Minimize the mean squared error of ``model`` on ``(x, y)`` with Adam, in place.

    Input statistics are refit on ``x``. Each epoch visits shuffled mini-batches; the
    learning rate is multiplied by ``cfg.lr_factor`` whenever the epoch training loss has
    not improved for ``cfg.plateau_patience`` epochs. The validation loss is recorded
    only.

    Raises:
        NumericalError: If a loss turns NaN or infinite.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    model.standardize(x, fit=True)
    rng = make_rng(cfg.seed)

    params = model.get_parameters()
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    step = 0
    lr = cfg.lr0
    best, stale = np.inf, 0
    history = TrainHistory()

    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(description, total=cfg.epochs)
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(y.size)
            total = 0.0
            for start in range(0, y.size, cfg.batch):
                rows = order[start : start + cfg.batch]
                loss, grad = model.flat_gradient(x[rows], y[rows])
                if not np.isfinite(loss):
                    msg = f"{description}: loss became {loss} in epoch {epoch}"
                    raise NumericalError(msg)
                total += loss * rows.size

                step += 1
                m = cfg.beta1 * m + (1 - cfg.beta1) * grad
                v = cfg.beta2 * v + (1 - cfg.beta2) * grad**2
                m_hat = m / (1 - cfg.beta1**step)
                v_hat = v / (1 - cfg.beta2**step)
                params = params - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
                model.set_parameters(params)

            epoch_loss = total / y.size
            history.train.append(epoch_loss)
            history.lr.append(lr)
            if validation is not None and validation[1].size:
                history.validation.append(float(np.mean((model(validation[0]) - validation[1]) ** 2)))

            if epoch_loss < best:
                best, stale = epoch_loss, 0
            else:
                stale += 1
                if stale >= cfg.plateau_patience:
                    lr *= cfg.lr_factor
                    stale = 0
                    logger.trace(f"{description}: learning rate lowered to {lr:.3g} at epoch {epoch}")
            progress.advance(task)
            logger.trace(f"{description} epoch {epoch}: loss {epoch_loss:.4g}")

    logger.debug(f"{description}: final loss {history.train[-1]:.4g} after {cfg.epochs} epochs")
    return history


def _check_batch(n_rows: int, cfg: TrainConfig, what: str) -> None:
    if n_rows < cfg.batch:
        msg = f"{what} needs at least {cfg.batch} training rows (one batch), got {n_rows}"
        raise ValueError(msg)


def train_rhs(
    features: FeatureSet,
    cfg: TrainConfig | None = None,
    hidden: tuple[int, ...] = RHS_HIDDEN,
) -> tuple[MlpModel, TrainHistory]:
    """Fit the autonomous right-hand side on interior rows, outside every corridor.

    The last ``cfg.n_validation`` snapshots are held out for validation.

    Raises:
        ValueError: With fewer training rows than one batch.
    """
    cfg = cfg or TrainConfig()
    interior = features.tagged(NodeTag.INTERIOR)
    train, validation = interior.split_last(cfg.n_validation)
    _check_batch(train.targets.size, cfg, "train_rhs")

    model = MlpModel.initialize([features.features.shape[1], *hidden, 1], Activation.SWISH, cfg.seed)
    logger.debug(f"Right-hand side network: {model.param_count} parameters, {train.targets.size} rows")
    history = adam_train(
        model,
        train.features,
        train.targets,
        cfg,
        validation=(validation.features, validation.targets),
        description="Training f",
    )
    return model, history


def source_rows(
    rhs: MlpModel, features: FeatureSet, chart: EmergentChart
) -> tuple[np.ndarray, np.ndarray]:
    """(psi, phi) inputs and the residual the fixed right-hand side leaves in the source corridor.

    Raises:
        ValueError: If the chart has no source corridor or no feature row lies in it.
    """
    if chart.source_corridor is None:
        msg = "the chart has no source corridor"
        raise ValueError(msg)
    rows = features.tagged(NodeTag.SOURCE_CORRIDOR)
    if rows.targets.size == 0:
        msg = "the source corridor holds no feature rows"
        raise ValueError(msg)
    inputs = np.column_stack([chart.psi_grid[rows.node], chart.phi_grid[rows.snapshot]])
    return inputs, rows.targets - rhs(rows.features)


def train_source(
    rhs: MlpModel,
    features: FeatureSet,
    chart: EmergentChart,
    cfg: TrainConfig | None = None,
    hidden: tuple[int, ...] = SOURCE_HIDDEN,
) -> tuple[MlpModel, TrainHistory]:
    """Fit the source network g(psi, phi) to what ``rhs`` misses inside the source corridor.

    g is zero outside the corridor.
    """
    cfg = cfg or TrainConfig()
    inputs, residual = source_rows(rhs, features, chart)
    _check_batch(residual.size, cfg, "train_source")

    model = MlpModel.initialize([2, *hidden, 1], Activation.SWISH, cfg.seed)
    model.support = chart.source_corridor
    history = adam_train(model, inputs, residual, cfg, description="Training g")
    return model, history


def train_surrogate(
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig | None = None,
    hidden: tuple[int, ...] = SURROGATE_HIDDEN,
) -> tuple[MlpModel, TrainHistory]:
    """Regress voxel intensities on (parameter 1, parameter 2, space, time) embedding coordinates.

    Raises:
        ValueError: With fewer than 1000 voxels.
    """
    cfg = cfg or TrainConfig()
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] < MIN_SURROGATE_VOXELS:
        msg = f"train_surrogate needs at least {MIN_SURROGATE_VOXELS} voxels, got {inputs.shape[0]}"
        raise ValueError(msg)
    model = MlpModel.initialize([inputs.shape[1], *hidden, 1], Activation.TANH, cfg.seed)
    history = adam_train(model, inputs, targets, cfg, description="Training surrogate")
    return model, history


def surrogate_inputs(
    param_coords: np.ndarray, time_coord: np.ndarray, space_coord: np.ndarray
) -> np.ndarray:
    """One (param 1, param 2, space, time) row per voxel, in (p, t, s) C order.

    >>> surrogate_inputs(np.array([[1.0, 2.0]]), np.array([0.0, 1.0]), np.array([5.0])).tolist()
    [[1.0, 2.0, 5.0, 0.0], [1.0, 2.0, 5.0, 1.0]]
    """
    param_coords = np.asarray(param_coords, dtype=np.float64).reshape(-1, 2)
    p, t, s = np.meshgrid(
        np.arange(param_coords.shape[0]), np.arange(len(time_coord)), np.arange(len(space_coord)),
        indexing="ij",
    )
    return np.column_stack([
        param_coords[p.ravel(), 0],
        param_coords[p.ravel(), 1],
        np.asarray(space_coord, dtype=np.float64)[s.ravel()],
        np.asarray(time_coord, dtype=np.float64)[t.ravel()],
    ])


def reconstruct_held_out(
    model: MlpModel, param_coords: np.ndarray, time_coord: np.ndarray, space_coord: np.ndarray
) -> np.ndarray:
    """Surrogate prediction of whole (time, space) slabs for the given parameter points.

    Returns:
        Array of shape (n_params, n_times, n_space).
    """
    rows = surrogate_inputs(param_coords, time_coord, space_coord)
    n_params = np.asarray(param_coords).reshape(-1, 2).shape[0]
    return model(rows).reshape(n_params, len(time_coord), len(space_coord))


def gradient_check(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    n_params: int = 50,
    h: float = 1e-5,
    seed: int = 0,
    atol: float = 1e-5,
) -> float:
    """Largest gap between backprop and central differences on uniformly drawn parameters.

    Each gap is divided by ``atol + max(|numeric|, |backprop|)``, so it is a relative error
    where the gradient is large and an absolute one, in units of ``atol``, where it vanishes.
    """
    trial = model.copy_model()
    params = trial.get_parameters()
    _, grad = trial.flat_gradient(x, y)
    chosen = make_rng(seed).choice(params.size, size=min(n_params, params.size), replace=False)

    worst = 0.0
    for index in chosen:
        shifted = params.copy()
        shifted[index] += h
        trial.set_parameters(shifted)
        plus, _ = trial.flat_gradient(x, y)
        shifted[index] -= 2 * h
        trial.set_parameters(shifted)
        minus, _ = trial.flat_gradient(x, y)
        numeric = (plus - minus) / (2 * h)
        gap = abs(numeric - grad[index]) / (atol + max(abs(numeric), abs(grad[index])))
        worst = max(worst, gap)
    trial.set_parameters(params)
    return worst


def svd_projector(snapshots: np.ndarray, energy: float = SVD_ENERGY) -> np.ndarray:
    """Orthonormal basis of the leading left-singular subspace holding ``energy`` of the spectrum.

    Args:
        snapshots: (n_snapshots, n_nodes) profiles.
        energy: Fraction of the summed squared singular values to keep.

    Returns:
        (n_nodes, rank) basis.

    Raises:
        ValueError: With fewer than 2 snapshots.
        DegenerateInputError: If every snapshot is zero.
    """
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.ndim != 2 or snapshots.shape[0] < 2:  # noqa: PLR2004
        msg = f"svd_projector needs at least 2 snapshots, got shape {snapshots.shape}"
        raise ValueError(msg)
    u, sigma, _ = np.linalg.svd(snapshots.T, full_matrices=False)
    power = sigma**2
    if power.sum() == 0:
        msg = "training snapshots are all zero; there is no subspace to project on"
        raise DegenerateInputError(msg)
    rank = int(np.searchsorted(np.cumsum(power) / power.sum(), energy - 1e-12) + 1)
    logger.trace(f"SVD projector keeps {rank} of {sigma.size} modes")
    return u[:, :rank]


def svd_regularize(
    snapshots: np.ndarray, predicted: np.ndarray, energy: float = SVD_ENERGY
) -> np.ndarray:
    """Project a predicted profile onto the leading subspace of the training snapshots."""
    basis = svd_projector(snapshots, energy)
    return basis @ (basis.T @ np.asarray(predicted, dtype=np.float64))
