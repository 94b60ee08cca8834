"""Time integration of a learned right-hand side on an emergent chart."""

import numpy as np
from loguru import logger

from emergent_pde.constants import BLOWUP_FACTOR, NodeTag, Scheme
from emergent_pde.learner.features import STENCIL_HALF_WIDTH, spatial_derivatives
from emergent_pde.learner.training import SVD_ENERGY, svd_projector
from emergent_pde.models.emergent import EmergentChart
from emergent_pde.models.mlp import MlpModel
from emergent_pde.utils.errors import NumericalError


def corridor_mask(chart: EmergentChart, *, with_source: bool) -> np.ndarray:
    """Nodes whose values come from data.

    These are the stencil margins and the boundary corridors, plus the source corridor
    when ``with_source``.
    """
    tags = chart.node_tags()
    mask = tags == NodeTag.BOUNDARY_CORRIDOR.value
    if with_source:
        mask |= tags == NodeTag.SOURCE_CORRIDOR.value
    mask[:STENCIL_HALF_WIDTH] = True
    mask[-STENCIL_HALF_WIDTH:] = True
    return mask


def _rhs(
    rhs: MlpModel, source: MlpModel | None, chart: EmergentChart, u: np.ndarray, phi: float
) -> np.ndarray:
    du = np.zeros_like(u)
    du[STENCIL_HALF_WIDTH:-STENCIL_HALF_WIDTH] = rhs(spatial_derivatives(u, chart.dpsi))
    if source is not None:
        psi = chart.psi_grid[STENCIL_HALF_WIDTH:-STENCIL_HALF_WIDTH]
        du[STENCIL_HALF_WIDTH:-STENCIL_HALF_WIDTH] += source(
            np.column_stack([psi, np.full(psi.size, phi)])
        )
    return du


def integrate(
    rhs: MlpModel,
    chart: EmergentChart,
    initial: np.ndarray | None = None,
    source: MlpModel | None = None,
    *,
    scheme: Scheme = Scheme.RK4,
    substeps: int = 4,
    svd_energy: float | None = SVD_ENERGY,
    n_holdout: int = 0,
) -> np.ndarray:
    """Integrate ``u_phi = f(u, u', ..., u'''') [+ g(psi, phi)]`` across the chart's time grid.

    Each grid interval takes ``substeps`` explicit steps. After every step the state is
    projected onto the leading SVD subspace of the training snapshots (unless
    ``svd_energy`` is None), which are the chart snapshots before the last ``n_holdout``.
    The corridor nodes are then overwritten with the chart data, linearly interpolated in
    time. Without a source network the source corridor is a data corridor too.

    Args:
        rhs: Autonomous right-hand side network.
        chart: Chart supplying the grids and the corridor data.
        initial: Starting profile; defaults to the first chart snapshot.
        source: Source network g, zero outside its support.
        scheme: ``rk4`` or ``euler``.
        substeps: Explicit steps per time-grid interval.
        svd_energy: Energy kept by the output regularization.
        n_holdout: Trailing snapshots held out from training and from the SVD basis.

    Returns:
        The (n_phi, n_psi) integrated field.

    Raises:
        ValueError: If ``initial`` does not match the space grid, or fewer than 2
            snapshots remain for the SVD basis.
        NumericalError: If the solution leaves ten times the data range.
    """
    field = chart.field
    u = np.array(field[0] if initial is None else initial, dtype=np.float64)
    if u.shape != (chart.psi_grid.size,):
        msg = f"initial profile must have {chart.psi_grid.size} values, got shape {u.shape}"
        raise ValueError(msg)
    if substeps < 1:
        msg = f"substeps must be >= 1, got {substeps}"
        raise ValueError(msg)

    if not 0 <= n_holdout <= field.shape[0] - 2:
        msg = f"n_holdout must leave at least 2 of {field.shape[0]} snapshots, got {n_holdout}"
        raise ValueError(msg)

    fixed = corridor_mask(chart, with_source=source is None)
    training = field[: field.shape[0] - n_holdout]
    basis = None if svd_energy is None else svd_projector(training, svd_energy)
    span = float(field.max() - field.min()) or float(np.abs(field).max()) or 1.0
    limit = BLOWUP_FACTOR * span
    dt = chart.dphi / substeps

    def derivative(state: np.ndarray, phi: float) -> np.ndarray:
        return _rhs(rhs, source, chart, state, phi)

    def advance(u: np.ndarray, i: int) -> np.ndarray:
        for k in range(substeps):
            phi = chart.phi_grid[i] + k * dt
            if scheme == Scheme.RK4:
                k1 = derivative(u, phi)
                k2 = derivative(u + 0.5 * dt * k1, phi + 0.5 * dt)
                k3 = derivative(u + 0.5 * dt * k2, phi + 0.5 * dt)
                k4 = derivative(u + dt * k3, phi + dt)
                u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                u = u + dt * derivative(u, phi)
            if basis is not None:
                u = basis @ (basis.T @ u)
            weight = (k + 1) / substeps
            u[fixed] = (1 - weight) * field[i, fixed] + weight * field[i + 1, fixed]
        return u

    out = np.empty_like(field)
    u[fixed] = field[0, fixed]
    out[0] = u
    for i in range(field.shape[0] - 1):
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                u = advance(u, i)
        except FloatingPointError as e:
            msg = f"integration overflowed at step {i + 1} of {field.shape[0] - 1}"
            raise NumericalError(msg) from e

        if not np.all(np.isfinite(u)) or np.abs(u).max() > limit:
            msg = f"integration blew up at step {i + 1} of {field.shape[0] - 1} (|c| > {limit:.4g})"
            raise NumericalError(msg)
        out[i + 1] = u
        logger.trace(f"Integrated step {i + 1}: max |c| = {np.abs(u).max():.4g}")

    logger.debug(f"Integrated {field.shape[0] - 1} steps with {scheme.value}, {substeps} substeps each")
    return out
