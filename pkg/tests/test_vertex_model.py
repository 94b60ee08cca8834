# type: ignore
"""Test the ring-of-cells vertex model."""

import math

import numpy as np
import pytest

from emergent_pde.generators import static_cell_arclengths
from emergent_pde.models import MechParams, VertexState
from emergent_pde.utils.errors import NumericalError
from emergent_pde.utils.helpers import make_rng
from emergent_pde.vertex_model import (
    apical_tension,
    backbone_curve,
    cell_arclengths,
    cell_areas,
    edge_lengths,
    energy,
    energy_terms,
    export_snapshot,
    gradient,
    gradient_error,
    init_homogeneous,
    load_snapshot,
    nominal_edge_lengths,
    polygon_areas,
    sample_apical_radius,
    simulate_mechanics,
    step,
)

FLAT = MechParams(patterned=False)


def _perturbed(state: VertexState, scale: float = 0.05, seed: int = 1) -> VertexState:
    noise = make_rng(seed).normal(0.0, scale, size=state.positions.shape)
    return state.with_positions(state.positions + noise)


def test_polygon_areas():
    """Test the shoelace formula."""
    # GIVEN a counterclockwise unit square and its clockwise twin
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    # WHEN the areas are computed
    areas = polygon_areas(np.stack([square, square[::-1]]))

    # THEN orientation sets the sign
    assert areas.tolist() == [1.0, -1.0]


def test_init_homogeneous_builds_a_ring():
    """Test the homogeneous initial ring."""
    # GIVEN the default geometry
    # WHEN the ring is built
    state = init_homogeneous(80, 3.0, 8.5, FLAT)

    # THEN apical and basal vertices sit on their radii
    assert np.allclose(np.linalg.norm(state.apical, axis=1), 8.5)
    assert np.allclose(np.linalg.norm(state.basal, axis=1), 5.5)
    # AND edges have their nominal lengths
    apical, basal = nominal_edge_lengths(80, 8.5, 3.0)
    lengths = edge_lengths(state)
    assert np.allclose(lengths["apical"], 2 * 8.5 * math.sin(math.pi / 80))
    assert lengths["apical"][0] == pytest.approx(apical, rel=1e-3)
    assert lengths["basal"][0] == pytest.approx(basal, rel=1e-3)
    assert np.allclose(lengths["lateral"], 3.0)
    # AND every cell has the same positive area
    areas = cell_areas(state)
    assert np.all(areas > 0)
    assert np.allclose(areas, areas[0])
    # AND the membrane sits outside the apical surface
    assert state.rest.R_c == pytest.approx(1.05 * 8.5)


@pytest.mark.parametrize(
    "n_cells",
    [pytest.param(16, id="16-cells"), pytest.param(80, id="80-cells")],
)
def test_homogeneous_ring_is_stationary(n_cells):
    """Test that the derived targets make the un-patterned ring an equilibrium."""
    # GIVEN the homogeneous ring without patterning
    state = init_homogeneous(n_cells, 3.0, 8.5, FLAT)

    # WHEN the energy gradient is computed
    grad = gradient(state, FLAT)

    # THEN every vertex is in force balance
    assert np.abs(grad).max() < 1e-9


@pytest.mark.parametrize(
    ("args", "match"),
    [
        pytest.param((2, 3.0, 8.5), "N_c", id="too-few-cells"),
        pytest.param((16, 9.0, 8.5), "lateral length", id="flat-ring"),
    ],
)
def test_init_homogeneous_rejects_bad_geometry(args, match):
    """Test invalid ring geometries."""
    # GIVEN an impossible geometry
    # WHEN the ring is built
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match=match):
        init_homogeneous(*args, FLAT)


def test_vertex_state_needs_two_vertices_per_cell():
    """Test the vertex-count invariant."""
    # GIVEN a ring and one vertex too few
    state = init_homogeneous(16, 3.0, 8.5, FLAT)

    # WHEN a state is built from the truncated positions
    # THEN validation fails
    with pytest.raises(ValueError, match="vertices"):
        VertexState(positions=state.positions[:-1], cells=state.cells, rest=state.rest)


def test_apical_tension_pattern():
    """Test the patterned apical tension."""
    # GIVEN default mechanics
    params = MechParams()

    # WHEN tension is evaluated inside and outside the patterned sector
    inside = apical_tension(0.0, params)
    edge = apical_tension(0.7, params)
    outside = apical_tension(1.0, params)

    # THEN it peaks at theta = 0 and falls back to sigma_a0 outside the sector
    assert inside == pytest.approx(params.sigma_a0 * (1 + params.P))
    assert params.sigma_a0 < edge < inside
    assert outside == params.sigma_a0


def test_analytic_gradient_matches_finite_differences():
    """Test the analytic gradient against central differences."""
    # GIVEN a perturbed patterned ring
    params = MechParams()
    state = _perturbed(init_homogeneous(16, 3.0, 8.5, params))

    # WHEN both gradients are compared
    error = gradient_error(state, params)

    # THEN they agree
    assert error < 1e-5


def test_simulate_mechanics_lowers_energy():
    """Test overdamped relaxation under patterning."""
    # GIVEN a slightly perturbed homogeneous ring with apical patterning switched on
    params = MechParams()
    state = _perturbed(init_homogeneous(80, 3.0, 8.5, params), scale=0.01)

    # WHEN the ring relaxes
    trajectory = simulate_mechanics(state, params, n_steps=200, record_every=1)

    # THEN every step is recorded
    assert len(trajectory) == 201
    # AND the energy never increases
    energies = np.array([energy(s, params) for s in trajectory])
    assert np.all(np.diff(energies) <= 1e-12 * np.abs(energies[:-1]))
    assert energies[-1] < energies[0]
    # AND the apical surface stays inside the membrane
    assert np.all(np.linalg.norm(trajectory[-1].apical, axis=1) < state.rest.R_c)


def test_simulate_mechanics_records_every_nth_state():
    """Test the trajectory recording."""
    # GIVEN the homogeneous ring
    state = init_homogeneous(16, 3.0, 8.5, FLAT)

    # WHEN 25 steps are run, recording every tenth
    trajectory = simulate_mechanics(state, FLAT, n_steps=25, record_every=10)

    # THEN the initial state, steps 10 and 20 and the last state are kept
    assert len(trajectory) == 4
    assert trajectory[0] is state


def test_membrane_penetration_is_reported():
    """Test a vertex beyond the membrane."""
    # GIVEN a ring with one apical vertex pushed past the membrane
    state = init_homogeneous(16, 3.0, 8.5, FLAT)
    positions = state.positions.copy()
    positions[0] *= 1.2
    broken = state.with_positions(positions)

    # WHEN its energy is evaluated
    # THEN the membrane term is infinite
    assert math.isinf(energy_terms(broken, FLAT)["membrane"])
    # AND the gradient and the step refuse the state
    with pytest.raises(NumericalError, match="membrane"):
        gradient(broken, FLAT)
    with pytest.raises(NumericalError, match="infinite energy"):
        step(broken, FLAT)


def test_sample_apical_radius():
    """Test the ensemble draw of apical radii."""
    # GIVEN a generator
    rng = make_rng(0)

    # WHEN many radii are drawn
    radii = [sample_apical_radius(rng) for _ in range(200)]

    # THEN they are clipped to [8.25, 8.75]
    assert min(radii) >= 8.25
    assert max(radii) <= 8.75


def test_backbone_curve():
    """Test the full and sector backbones."""
    # GIVEN the homogeneous ring
    state = init_homogeneous(16, 3.0, 8.5, FLAT)
    chord = 2 * 7.0 * math.sin(math.pi / 16)

    # WHEN the full backbone is taken
    full = backbone_curve(state)

    # THEN it is a closed polygon through every lateral midpoint
    assert full.closed
    assert full.edges == list(range(16))
    assert full.length == pytest.approx(16 * chord)

    # WHEN a sector is taken
    sector = backbone_curve(state, (-0.5, 0.5))

    # THEN it is open and covers only midpoints inside the sector
    assert not sector.closed
    assert sorted(sector.edges) == [0, 1, 15]
    assert sector.length == pytest.approx(2 * chord)


def test_backbone_curve_rejects_empty_sector():
    """Test a sector without midpoints."""
    # GIVEN a ring with 16 cells, 22.5 degrees apart
    state = init_homogeneous(16, 3.0, 8.5, FLAT)

    # WHEN a sector between two midpoints is taken
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="sector"):
        backbone_curve(state, (0.1, 0.2))


def test_cell_arclengths_of_homogeneous_ring():
    """Test cell positions along the backbone."""
    # GIVEN the homogeneous ring
    state = init_homogeneous(80, 3.0, 8.5, FLAT)

    # WHEN cell arclengths are computed
    arc = cell_arclengths(state)

    # THEN they match the static layout
    assert np.allclose(arc, static_cell_arclengths(80, 8.5, 3.0))


def test_snapshot_round_trip(tmp_path):
    """Test the cell snapshot CSV."""
    # GIVEN a ring and a concentration per cell
    state = init_homogeneous(16, 3.0, 8.5, FLAT)
    concentrations = np.linspace(0.0, 1.0, 16)

    # WHEN the snapshot is written and read back
    path = export_snapshot(state, concentrations, tmp_path / "snapshot.csv")
    polygons, values = load_snapshot(path)

    # THEN the cell polygons and concentrations are recovered
    assert path.read_text().startswith("cell,vertex,kind,x,y,concentration\n")
    assert np.array_equal(polygons, state.positions[state.cells])
    assert np.array_equal(values, concentrations)
