# type: ignore
"""Test emergent coordinates, regridding, imputation and charts."""

import numpy as np
import pytest

from emergent_pde.constants import Axis, NodeTag
from emergent_pde.emergent_coords import (
    CorridorConfig,
    build_chart,
    extract_arclength,
    impute,
    resample,
    resample_axis,
    source_corridor,
)
from emergent_pde.evaluation import spearman
from emergent_pde.models import DataTensor, EmergentChart, EmergentCoordinate
from emergent_pde.utils.errors import DegenerateInputError
from emergent_pde.utils.helpers import make_rng


def _coordinate(values: np.ndarray) -> EmergentCoordinate:
    return EmergentCoordinate(values=values, source_coords=[0], orientation_anchor=0)


def test_resample_axis_reproduces_cubics():
    """Test that the spline regridding is exact for cubic data."""
    # GIVEN a cubic sampled at shuffled positions
    coord = make_rng(1).permutation(np.linspace(0.0, 1.0, 9))
    values = coord**3 - coord

    # WHEN it is resampled onto 21 uniform points
    grid, resampled = resample_axis(values, coord, 21)

    # THEN the grid spans the samples and the cubic is reproduced
    assert grid[0] == 0.0
    assert grid[-1] == 1.0
    assert np.allclose(resampled, grid**3 - grid)


def test_resample_axis_averages_repeated_coordinates():
    """Test that channels sharing a coordinate are averaged."""
    # GIVEN two channels at the same position with different values
    coord = np.array([0.0, 0.25, 0.5, 0.5, 0.75, 1.0])
    values = np.array([0.0, 0.25, 0.4, 0.6, 0.75, 1.0])

    # WHEN they are resampled
    _, resampled = resample_axis(values, coord, 5)

    # THEN the line through the averages comes out
    assert np.allclose(resampled, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_resample_axis_needs_four_distinct_values():
    """Test the minimum spline support."""
    # GIVEN only three distinct positions
    # WHEN they are resampled
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="at least 4"):
        resample_axis(np.ones(4), np.array([0.0, 0.5, 0.5, 1.0]), 10)


def test_resample_axis_periodic():
    """Test periodic regridding."""
    # GIVEN a sine sampled over one period
    coord = np.arange(40) / 40
    values = np.sin(2 * np.pi * coord)

    # WHEN it is resampled with period 1
    grid, resampled = resample_axis(values, coord, 25, period=1.0)

    # THEN the grid leaves out the endpoint and the sine is recovered
    assert grid[-1] == pytest.approx(24 / 25)
    assert np.allclose(resampled, np.sin(2 * np.pi * grid), atol=1e-4)


def test_resample_is_separable():
    """Test regridding along two axes."""
    # GIVEN a field that is cubic in each axis, on shuffled nodes
    rng = make_rng(2)
    a = rng.permutation(np.linspace(0.0, 1.0, 8))
    b = rng.permutation(np.linspace(0.0, 1.0, 7))
    field = a[:, None] + b[None, :] ** 2

    # WHEN it is regridded
    grid_a, grid_b, regridded = resample(field, a, b, 11, 13)

    # THEN the field is reproduced on the uniform grids
    assert regridded.shape == (11, 13)
    assert np.allclose(regridded, grid_a[:, None] + grid_b[None, :] ** 2)


def test_extract_arclength_open_curve():
    """Test the arclength along a shuffled parabola."""
    # GIVEN points on a parabola in random order
    s = make_rng(3).permutation(np.linspace(-1.0, 1.0, 30))
    points = np.column_stack([s, s**2])
    anchor = int(np.argmin(s))

    # WHEN the arclength is extracted
    coord = extract_arclength(points, anchor=anchor, source_coords=[0, 1])

    # THEN it is an open curve ordered like the parameter
    assert not coord.closed
    assert spearman(coord.values, s) > 0.99
    # AND it starts near the anchor and spans [0, 1]
    assert coord.values[anchor] < 0.05
    assert coord.values.min() == 0.0
    assert coord.values.max() == 1.0
    assert coord.orientation_anchor == anchor
    assert coord.source_coords == [0, 1]


def _hairpin(gap: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Two unit branches ``gap`` apart joined by a half circle, with the arclength of every point."""
    radius = gap / 2
    fold = np.pi * radius
    s = np.linspace(0.0, 2.0 + fold, n)
    theta = (s - 1.0) / radius
    x = np.where(s < 1.0, 1.0 - s, np.where(s <= 1.0 + fold, -radius * np.sin(theta), s - 1.0 - fold))
    y = np.where(s < 1.0, 0.0, np.where(s <= 1.0 + fold, radius - radius * np.cos(theta), gap))
    return np.column_stack([x, y]), s


@pytest.mark.parametrize("gap", [pytest.param(0.1, id="wide"), pytest.param(0.02, id="narrow")])
def test_extract_arclength_separates_hairpin_branches(gap):
    """Test the arclength along two nearly coincident branches."""
    # GIVEN a shuffled hairpin anchored at one free end
    order = make_rng(4).permutation(300)
    points, s = _hairpin(gap, 300)
    points, s = points[order], s[order]
    anchor = int(np.argmin(s))

    # WHEN the arclength is extracted
    coord = extract_arclength(points, anchor=anchor)

    # THEN it runs from the anchor around the fold to the other end
    assert not coord.closed
    assert coord.values[anchor] == 0.0
    assert spearman(coord.values, s) > 0.99
    # AND the two branches stay apart
    assert coord.values[s < 1.0].max() < coord.values[s > 1.0 + np.pi * gap / 2].min()


@pytest.mark.parametrize(
    "semi_minor",
    [pytest.param(1.0, id="circle"), pytest.param(0.05, id="skinny-ellipse")],
)
def test_extract_arclength_closed_loop(semi_minor):
    """Test the arclength around a shuffled loop."""
    # GIVEN points on a loop in random order
    angle = make_rng(5).permutation(np.linspace(0.0, 2 * np.pi, 200, endpoint=False))
    points = np.column_stack([np.cos(angle), semi_minor * np.sin(angle)])
    anchor = 17

    # WHEN the arclength is extracted
    coord = extract_arclength(points, anchor=anchor)

    # THEN the loop is detected and cut at the anchor
    assert coord.closed
    assert coord.values[anchor] == 0.0
    # AND the coordinate runs around the loop in one direction
    turned = np.mod(angle - angle[anchor], 2 * np.pi)
    rho = max(spearman(coord.values, turned), spearman(coord.values, np.mod(-turned, 2 * np.pi)))
    assert rho > 0.99


def test_extract_arclength_rejects_bad_input():
    """Test curves that cannot be measured."""
    # GIVEN too few points
    # WHEN the arclength is extracted
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="at least 4"):
        extract_arclength(np.zeros((3, 2)))

    # GIVEN two distant clumps
    clumps = np.concatenate([np.linspace(0, 1, 10), np.linspace(100, 101, 10)])

    # WHEN the arclength is extracted with few neighbors
    # THEN the disconnected graph is reported
    with pytest.raises(DegenerateInputError, match="components"):
        extract_arclength(clumps, k=3)


def test_emergent_coordinate_range_and_round_trip(tmp_path):
    """Test the coordinate invariants and its JSON form."""
    # GIVEN values outside [0, 1]
    # WHEN a coordinate is built
    # THEN validation fails
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        _coordinate(np.array([0.0, 1.5]))

    # GIVEN a valid coordinate
    coord = EmergentCoordinate(
        values=[0.5, 0.0, 1.0], source_coords=[0, 2], orientation_anchor=1, closed=True
    )

    # WHEN it is saved and loaded
    loaded = EmergentCoordinate.load(coord.save(tmp_path / "coord_t.json"))

    # THEN it is unchanged and orders its channels
    assert np.array_equal(loaded.values, coord.values)
    assert loaded.closed
    assert loaded.order.tolist() == [1, 0, 2]


def test_impute_fills_missing_snapshots():
    """Test filling masked snapshots along emergent time."""
    # GIVEN a tensor cubic in time with an interior and an end snapshot masked
    t = np.linspace(0.0, 1.0, 10)
    s = np.linspace(0.0, 1.0, 6)
    values = np.broadcast_to(t[None, :, None] ** 3 + s[None, None, :], (2, 10, 6)).copy()
    mask = np.ones_like(values, dtype=bool)
    mask[:, [0, 4], :] = False
    values[~mask] = np.nan
    tensor = DataTensor(values=values, mask=mask)

    # WHEN it is imputed along time
    filled = impute(tensor, {Axis.TIME: _coordinate(t)})

    # THEN every entry is observed
    assert filled.mask is None
    # AND the interior snapshot is interpolated exactly
    assert np.allclose(filled.values[:, 4, :], t[4] ** 3 + s)
    # AND the end snapshot takes the nearest observed one
    assert np.allclose(filled.values[:, 0, :], filled.values[:, 1, :])


def test_impute_checks_coordinate_length():
    """Test imputing with a coordinate for another axis size."""
    # GIVEN a masked tensor
    mask = np.ones((1, 6, 5), dtype=bool)
    mask[0, 2, 2] = False
    tensor = DataTensor(values=np.zeros((1, 6, 5)), mask=mask)

    # WHEN the coordinate has the wrong length
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="coordinate"):
        impute(tensor, {Axis.TIME: _coordinate(np.linspace(0, 1, 5))})


def test_source_corridor():
    """Test locating the source from the late-time maximum."""
    # GIVEN a field peaked at psi = 0.5 late in time
    psi = np.linspace(0.0, 1.0, 21)
    field = np.outer(np.linspace(0.0, 1.0, 10), np.exp(-((psi - 0.5) ** 2) / 0.001))

    # WHEN the corridor is located without dilation
    lo, hi = source_corridor(field, psi, CorridorConfig(source_dilation=0))

    # THEN it is centered on the peak
    assert lo == pytest.approx(0.5)
    assert hi == pytest.approx(0.5)

    # WHEN it is dilated by two nodes
    lo, hi = source_corridor(field, psi, CorridorConfig(source_dilation=2))

    # THEN it grows by two grid steps on each side
    assert (lo, hi) == pytest.approx((0.4, 0.6))


def test_source_corridor_rejects_zero_field():
    """Test a field without a positive late-time value."""
    # GIVEN an all-zero field
    # WHEN the source is located
    # THEN a DegenerateInputError is raised
    with pytest.raises(DegenerateInputError):
        source_corridor(np.zeros((4, 5)), np.linspace(0, 1, 5), CorridorConfig())


def test_build_chart_marks_corridors():
    """Test building an emergent chart from a slab."""
    # GIVEN a slab with a source bump in the middle of space
    phi = np.linspace(0.0, 1.0, 12)
    psi = np.linspace(0.0, 1.0, 15)
    slab = np.outer(1 + phi, np.exp(-((psi - 0.5) ** 2) / 0.01))

    # WHEN it is regridded onto a chart
    chart = build_chart(
        slab,
        _coordinate(psi),
        _coordinate(phi),
        n_psi=21,
        n_phi=9,
        corridors=CorridorConfig(boundary_width=2, source_dilation=1),
    )

    # THEN the chart has the requested uniform grids
    assert chart.field.shape == (9, 21)
    assert chart.dpsi == pytest.approx(0.05)
    assert chart.dphi == pytest.approx(0.125)
    # AND two nodes at each end are boundary corridor nodes
    tags = chart.node_tags()
    assert tags[[0, 1, -2, -1]].tolist() == [NodeTag.BOUNDARY_CORRIDOR.value] * 4
    assert tags[2] == NodeTag.INTERIOR.value
    # AND the source corridor surrounds the bump
    assert tags[10] == NodeTag.SOURCE_CORRIDOR.value
    assert chart.source_corridor[0] < 0.5 < chart.source_corridor[1]


def test_build_chart_without_source():
    """Test a chart for data without a source."""
    # GIVEN a smooth slab
    phi, psi = np.linspace(0, 1, 8), np.linspace(0, 1, 10)
    slab = np.outer(np.exp(-phi), np.sin(np.pi * psi))

    # WHEN the chart is built with the source corridor off and physical times
    chart = build_chart(
        slab,
        _coordinate(psi),
        phi * 10,
        n_psi=11,
        n_phi=6,
        corridors=CorridorConfig(source=False),
        time_kind="physical",
    )

    # THEN no node is a source node and the time grid keeps physical units
    assert chart.source_corridor is None
    assert NodeTag.SOURCE_CORRIDOR.value not in chart.node_tags()
    assert chart.phi_grid[-1] == pytest.approx(10.0)
    assert chart.time_kind == "physical"


def test_chart_round_trip(tmp_path):
    """Test the chart file."""
    # GIVEN a chart with corridors
    chart = EmergentChart(
        psi_grid=np.linspace(0, 1, 11),
        phi_grid=np.linspace(0, 2, 5),
        field=make_rng(0).random((5, 11)),
        source_corridor=(0.4, 0.6),
        boundary_corridors=[(0.0, 0.1), (0.9, 1.0)],
    )

    # WHEN it is saved and loaded
    loaded = EmergentChart.load(chart.save(tmp_path / "chart.epde"))

    # THEN grids, field and corridors are unchanged
    assert np.array_equal(loaded.field, chart.field)
    assert np.array_equal(loaded.psi_grid, chart.psi_grid)
    assert loaded.source_corridor == (0.4, 0.6)
    assert loaded.boundary_corridors == [(0.0, 0.1), (0.9, 1.0)]
    assert np.array_equal(loaded.node_tags(), chart.node_tags())


@pytest.mark.parametrize(
    ("overrides", "match"),
    [
        pytest.param({"psi_grid": np.array([0.0, 0.1, 0.3, 0.4, 0.5])}, "uniform", id="non-uniform"),
        pytest.param({"field": np.zeros((4, 5))}, "shape", id="shape"),
        pytest.param({"source_corridor": (0.2, 1.5)}, "corridor", id="corridor"),
    ],
)
def test_chart_validation(overrides, match):
    """Test the chart invariants."""
    # GIVEN chart arguments with one invalid entry
    args = {
        "psi_grid": np.linspace(0, 0.5, 5),
        "phi_grid": np.linspace(0, 1, 3),
        "field": np.zeros((3, 5)),
    } | overrides

    # WHEN the chart is built
    # THEN validation fails
    with pytest.raises(ValueError, match=match):
        EmergentChart(**args)
