# type: ignore
"""Test derivative features, network training and chart integration."""

import numpy as np
import pytest

from emergent_pde.constants import NodeTag, Scheme
from emergent_pde.learner import (
    adam_train,
    corridor_mask,
    fd_features,
    integrate,
    reconstruct_held_out,
    spatial_derivatives,
    svd_projector,
    svd_regularize,
    time_derivative,
    train_rhs,
    train_source,
    train_surrogate,
)
from emergent_pde.models import EmergentChart, MlpModel, TrainConfig
from emergent_pde.utils.errors import DegenerateInputError, NumericalError
from emergent_pde.utils.helpers import make_rng

QUICK = TrainConfig(epochs=3, batch=32, n_validation=2)


def _chart(n_phi: int = 6, n_psi: int = 11, *, source: tuple[float, float] | None = None) -> EmergentChart:
    """A chart holding ``phi + psi**2`` with two-node boundary corridors."""
    phi = np.linspace(0.0, 1.0, n_phi)
    psi = np.linspace(0.0, 1.0, n_psi)
    step = psi[1]
    return EmergentChart(
        psi_grid=psi,
        phi_grid=phi,
        field=phi[:, None] + psi[None, :] ** 2,
        source_corridor=source,
        boundary_corridors=[(0.0, step), (1.0 - step, 1.0)],
    )


def test_spatial_derivatives_of_sine():
    """Test the stencils against exact derivatives."""
    # GIVEN sin(x) on a fine grid
    x = np.linspace(0.0, 1.0, 101)

    # WHEN the derivative features are taken
    features = spatial_derivatives(np.sin(x), x[1] - x[0])

    # THEN they match sin, cos, -sin, -cos and sin at the inner nodes
    inner = x[2:-2]
    exact = np.column_stack([np.sin(inner), np.cos(inner), -np.sin(inner), -np.cos(inner), np.sin(inner)])
    assert features.shape == (97, 5)
    assert np.allclose(features, exact, atol=1e-4)


def test_time_derivative_is_exact_for_quadratics():
    """Test the second-order time differences."""
    # GIVEN a field quadratic in time
    t = np.linspace(0.0, 1.0, 6)
    field = np.outer(t**2, np.ones(3))

    # WHEN it is differentiated in time
    # THEN the ends are exact as well
    assert np.allclose(time_derivative(field, t[1]), np.outer(2 * t, np.ones(3)))


def test_fd_features_rows_and_tags():
    """Test building feature rows from a chart."""
    # GIVEN a chart with a source corridor
    chart = _chart(source=(0.4, 0.6))

    # WHEN the features are built
    features = fd_features(chart)

    # THEN there is one row per snapshot and inner node
    assert features.targets.size == 6 * 7
    assert features.n_derivatives == 4
    # AND the features and targets are exact for phi + psi^2
    psi = chart.psi_grid[features.node]
    assert np.allclose(features.features[:, 1], 2 * psi)
    assert np.allclose(features.features[:, 2], 2.0)
    assert np.allclose(features.features[:, 3:], 0.0, atol=1e-8)
    assert np.allclose(features.targets, 1.0)
    # AND the rows carry the tags of their nodes
    assert set(features.tagged(NodeTag.SOURCE_CORRIDOR).node.tolist()) == {4, 5, 6}
    assert NodeTag.BOUNDARY_CORRIDOR.value not in features.tags


def test_fd_features_needs_a_full_stencil():
    """Test the minimum chart size."""
    # GIVEN a chart with six space points
    chart = _chart(n_psi=6)

    # WHEN features are built
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="at least 7 space"):
        fd_features(chart)


def test_adam_train_lowers_loss():
    """Test fitting a linear target."""
    # GIVEN a small network and a linear target
    x = make_rng(0).normal(size=(256, 2))
    y = x[:, 0] - 2 * x[:, 1]
    model = MlpModel.initialize([2, 8, 1], seed=0)

    # WHEN it is trained
    history = adam_train(model, x, y, TrainConfig(epochs=40, batch=32, lr0=0.01))

    # THEN the loss falls and one entry is kept per epoch
    assert len(history.train) == len(history.lr) == 40
    assert history.train[-1] < 0.5 * history.train[0]
    assert history.validation == []


def test_adam_train_reports_nan_loss():
    """Test a loss that is not finite."""
    # GIVEN targets holding NaN
    x = np.ones((8, 2))
    y = np.full(8, np.nan)

    # WHEN a model is trained on them
    # THEN a NumericalError is raised
    with pytest.raises(NumericalError, match="loss"):
        adam_train(MlpModel.initialize([2, 3, 1]), x, y, TrainConfig(epochs=1, batch=4))


def test_train_rhs():
    """Test fitting the right-hand side on interior rows."""
    # GIVEN features of a chart with twenty snapshots
    features = fd_features(_chart(n_phi=20, n_psi=21))

    # WHEN a small network is trained
    model, history = train_rhs(features, QUICK, hidden=(8, 8))

    # THEN it takes the five features and holds out the last snapshots
    assert model.layer_dims == [5, 8, 8, 1]
    assert len(history.train) == len(history.validation) == 3


def test_train_rhs_needs_one_batch():
    """Test training on too few rows."""
    # GIVEN a small chart and a huge batch
    features = fd_features(_chart())

    # WHEN the right-hand side is trained
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="one batch"):
        train_rhs(features, TrainConfig(batch=10_000), hidden=(4,))


def test_train_source_is_supported_on_the_corridor():
    """Test fitting the source network to the corridor residual."""
    # GIVEN a chart with a source corridor and a zero right-hand side
    chart = _chart(n_phi=20, n_psi=21, source=(0.4, 0.6))
    features = fd_features(chart)
    rhs = MlpModel.zeros([5, 1])

    # WHEN the source network is trained
    model, history = train_source(rhs, features, chart, TrainConfig(epochs=2, batch=16), hidden=(4,))

    # THEN it takes (psi, phi) and is zero outside the corridor
    assert model.layer_dims == [2, 4, 1]
    assert model.support == (0.4, 0.6)
    assert model(np.array([[0.9, 0.5]])).tolist() == [0.0]
    assert len(history.train) == 2


def test_train_source_needs_a_corridor():
    """Test fitting a source without a corridor."""
    # GIVEN a chart without a source corridor
    chart = _chart(n_phi=20, n_psi=21)

    # WHEN the source network is trained
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="no source corridor"):
        train_source(MlpModel.zeros([5, 1]), fd_features(chart), chart)


def test_train_surrogate_needs_enough_voxels():
    """Test the surrogate's minimum data size."""
    # GIVEN fewer than 1000 voxels
    # WHEN the surrogate is trained
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="1000 voxels"):
        train_surrogate(np.zeros((999, 4)), np.zeros(999))


def test_reconstruct_held_out_shape():
    """Test surrogate slabs for held-out parameter points."""
    # GIVEN a zero surrogate
    model = MlpModel.zeros([4, 1])

    # WHEN two parameter points are reconstructed
    slabs = reconstruct_held_out(model, np.array([[0.1, 0.2], [0.3, 0.4]]), np.zeros(3), np.zeros(5))

    # THEN one (time, space) slab comes back per point
    assert slabs.shape == (2, 3, 5)


def test_svd_projector():
    """Test the leading-subspace projector."""
    # GIVEN snapshots spanned by two sine modes of equal weight
    x = np.linspace(0.0, 1.0, 30)
    modes = np.stack([np.sin(np.pi * x), np.sin(2 * np.pi * x)])
    snapshots = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]]) @ modes

    # WHEN the projector is built
    basis = svd_projector(snapshots)

    # THEN it has two orthonormal columns
    assert basis.shape == (30, 2)
    assert np.allclose(basis.T @ basis, np.eye(2))
    # AND profiles in the span are left alone while others lose their outside part
    assert np.allclose(svd_regularize(snapshots, snapshots[2]), snapshots[2])
    assert np.allclose(svd_regularize(snapshots, modes[0] + np.sin(3 * np.pi * x)), modes[0], atol=1e-10)


@pytest.mark.parametrize(
    ("snapshots", "error"),
    [
        pytest.param(np.ones((1, 5)), ValueError, id="one-snapshot"),
        pytest.param(np.zeros((3, 5)), DegenerateInputError, id="all-zero"),
    ],
)
def test_svd_projector_rejects(snapshots, error):
    """Test snapshots without a usable subspace."""
    # GIVEN too few or all-zero snapshots
    # WHEN the projector is built
    # THEN an error is raised
    with pytest.raises(error):
        svd_projector(snapshots)


def test_corridor_mask():
    """Test the data-driven nodes of the integrator."""
    # GIVEN a chart with a source corridor
    chart = _chart(n_psi=21, source=(0.45, 0.55))

    # WHEN masks are taken with and without the source
    plain = corridor_mask(chart, with_source=False)
    sourced = corridor_mask(chart, with_source=True)

    # THEN the margins and boundary corridors are always fixed
    assert np.flatnonzero(plain).tolist() == [0, 1, 19, 20]
    # AND the source corridor only when asked
    assert np.flatnonzero(sourced).tolist() == [0, 1, 9, 10, 11, 19, 20]


@pytest.mark.parametrize(
    "scheme",
    [pytest.param(Scheme.RK4, id="rk4"), pytest.param(Scheme.EULER, id="euler")],
)
def test_integrate_zero_rhs_follows_corridors(scheme):
    """Test that corridor nodes follow the data while a zero right-hand side holds the rest."""
    # GIVEN a chart and a network that outputs zero
    chart = _chart(n_phi=8, n_psi=21)
    rhs = MlpModel.zeros([5, 1])

    # WHEN the chart is integrated without regularization
    out = integrate(rhs, chart, scheme=scheme, svd_energy=None)

    # THEN the corridor nodes match the chart at every snapshot
    fixed = corridor_mask(chart, with_source=True)
    assert np.allclose(out[:, fixed], chart.field[:, fixed])
    # AND the interior keeps its initial profile
    assert np.allclose(out[:, ~fixed], chart.field[0, ~fixed])


def test_integrate_reports_blow_up():
    """Test a right-hand side that grows without bound."""
    # GIVEN a linear network with u_phi = 50 u on a steady profile
    psi = np.linspace(0.0, 1.0, 21)
    chart = EmergentChart(
        psi_grid=psi, phi_grid=np.linspace(0.0, 1.0, 11), field=np.tile(np.sin(np.pi * psi), (11, 1))
    )
    rhs = MlpModel.zeros([5, 1])
    rhs.weights[0][0, 0] = 50.0

    # WHEN it is integrated
    # THEN a NumericalError is raised
    with pytest.raises(NumericalError, match="blew up at step 1"):
        integrate(rhs, chart)


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        pytest.param({"initial": np.zeros(5)}, "initial profile", id="initial"),
        pytest.param({"substeps": 0}, "substeps", id="substeps"),
        pytest.param({"n_holdout": 5}, "n_holdout", id="holdout"),
    ],
)
def test_integrate_rejects_bad_arguments(kwargs, match):
    """Test invalid integration arguments."""
    # GIVEN a chart and a zero network
    # WHEN it is integrated with a bad argument
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match=match):
        integrate(MlpModel.zeros([5, 1]), _chart(), **kwargs)


def test_integrate_projects_on_training_snapshots_only():
    """Test that held-out snapshots stay out of the SVD basis."""
    # GIVEN a flat chart whose last four snapshots add an interior mode
    n_phi, n_psi = 20, 30
    flat = np.ones(n_psi)
    mode = np.zeros(n_psi)
    mode[8:22] = np.sin(np.linspace(0.0, 2 * np.pi, 14))
    field = np.tile(flat, (n_phi, 1))
    field[-4:] += mode
    psi = np.linspace(0.0, 1.0, n_psi)
    chart = EmergentChart(
        psi_grid=psi,
        phi_grid=np.linspace(0.0, 1.0, n_phi),
        field=field,
        boundary_corridors=[(0.0, psi[1]), (psi[-2], 1.0)],
    )
    rhs = MlpModel.zeros([5, 1])

    # WHEN a profile carrying the mode is integrated with the last four snapshots held out
    held_out = integrate(rhs, chart, initial=flat + mode, svd_energy=0.999, n_holdout=4)

    # THEN the mode is projected away
    assert np.allclose(held_out[1:], flat)

    # WHEN every snapshot feeds the basis
    # THEN the mode survives
    assert np.allclose(integrate(rhs, chart, initial=flat + mode, svd_energy=0.999)[-1], flat + mode)
