"""Finite-difference derivative features on an emergent chart."""

import numpy as np

from emergent_pde.models.emergent import EmergentChart, FeatureSet

STENCIL_HALF_WIDTH = 2
MIN_SPACE_POINTS = 7
MIN_TIME_POINTS = 3


def spatial_derivatives(u: np.ndarray, h: float) -> np.ndarray:
    """``[u, u', u'', u''', u'''']`` at nodes ``2 .. n-3`` of the last axis.

    Orders 1 and 2 use 3-point central stencils, orders 3 and 4 the standard 5-point
    central stencils; all are second-order accurate.

    >>> spatial_derivatives(np.arange(7.0) ** 2, 1.0)[:, 2].tolist()
    [2.0, 2.0, 2.0]

    Returns:
        Array of shape ``u.shape[:-1] + (n - 4, 5)``.
    """
    u = np.asarray(u, dtype=np.float64)
    c = u[..., 2:-2]
    m1, p1 = u[..., 1:-3], u[..., 3:-1]
    m2, p2 = u[..., :-4], u[..., 4:]
    d1 = (p1 - m1) / (2 * h)
    d2 = (p1 - 2 * c + m1) / h**2
    d3 = (p2 - 2 * p1 + 2 * m1 - m2) / (2 * h**3)
    d4 = (p2 - 4 * p1 + 6 * c - 4 * m1 + m2) / h**4
    return np.stack([c, d1, d2, d3, d4], axis=-1)


def time_derivative(field: np.ndarray, dt: float) -> np.ndarray:
    """Second-order central differences along axis 0, one-sided second order at the ends."""
    return np.gradient(field, dt, axis=0, edge_order=2)


def fd_features(chart: EmergentChart) -> FeatureSet:
    """Derivative features and time-derivative targets at every node with a full stencil.

    Rows run over snapshots first, then nodes ``2 .. n_psi-3``; each row carries the tag
    of its node so callers can keep interior or source-corridor rows.

    Raises:
        ValueError: With fewer than 7 space or 3 time grid points.
    """
    n_phi, n_psi = chart.field.shape
    if n_psi < MIN_SPACE_POINTS or n_phi < MIN_TIME_POINTS:
        msg = (
            f"fd_features needs at least {MIN_SPACE_POINTS} space and {MIN_TIME_POINTS} time "
            f"points, got {n_psi} and {n_phi}"
        )
        raise ValueError(msg)

    features = spatial_derivatives(chart.field, chart.dpsi)
    targets = time_derivative(chart.field, chart.dphi)[:, 2:-2]
    nodes = np.arange(STENCIL_HALF_WIDTH, n_psi - STENCIL_HALF_WIDTH)
    node, snapshot = np.meshgrid(nodes, np.arange(n_phi))
    return FeatureSet(
        features=features.reshape(-1, 5),
        targets=targets.ravel(),
        tags=chart.node_tags()[node.ravel()],
        node=node.ravel(),
        snapshot=snapshot.ravel(),
    )
