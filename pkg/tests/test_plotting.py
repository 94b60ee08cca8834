# type: ignore
"""Test the SVG figures."""

import numpy as np

from emergent_pde.evaluation import EvalReport
from emergent_pde.models import Embedding, MechParams, TrainHistory
from emergent_pde.plotting import (
    HEATMAP_GID,
    _coarsen,
    plot_embedding,
    plot_loss,
    plot_report,
    plot_spacetime,
    render_cells,
)
from emergent_pde.vertex_model import init_homogeneous


def _embedding(n_coords: int) -> Embedding:
    t = np.linspace(0.0, 1.0, 12)
    vectors = np.column_stack([np.cos((k + 1) * np.pi * t) for k in range(n_coords)])
    return Embedding(
        eigenvalues=np.linspace(0.9, 0.5, n_coords),
        eigenvectors=vectors,
        unique_flags=[True] * n_coords,
        epsilon_used=0.1,
        weights=np.full(12, 1 / 12),
    )


def test_coarsen_block_averages():
    """Test shrinking large heat maps."""
    # GIVEN a 4 x 3 field and a two-row limit
    field = np.arange(12.0).reshape(4, 3)

    # WHEN it is coarsened
    # THEN pairs of rows are averaged
    assert _coarsen(field, 2, 3).tolist() == [[1.5, 2.5, 3.5], [7.5, 8.5, 9.5]]
    # AND small fields pass through
    assert _coarsen(field, 200, 200) is field
    assert _coarsen(np.ones((450, 90)), 200, 200).shape == (150, 90)


def test_plot_spacetime_is_deterministic(tmp_path):
    """Test the heat map file."""
    # GIVEN a (time, space) field
    field = np.outer(np.linspace(0, 1, 10), np.sin(np.linspace(0, np.pi, 15)))

    # WHEN it is plotted twice with a CSV
    first = plot_spacetime(field, tmp_path / "a" / "field.svg", time=np.linspace(0, 2, 10), csv=True)
    second = plot_spacetime(field, tmp_path / "b" / "field.svg", time=np.linspace(0, 2, 10))

    # THEN the SVGs are identical and carry the heat map group
    assert first.read_bytes() == second.read_bytes()
    assert f'id="{HEATMAP_GID}"' in first.read_text()
    # AND the values are written alongside
    csv = (tmp_path / "a" / "field.csv").read_text().splitlines()
    assert csv[0].startswith("s0,s1,")
    assert len(csv) == 11


def test_plot_embedding(tmp_path):
    """Test embedding scatters in two and three dimensions."""
    # GIVEN embeddings with two and three unique coordinates
    # WHEN they are plotted with a color
    flat = plot_embedding(_embedding(2), tmp_path / "flat.svg", color=np.arange(12.0), color_label="t")
    solid = plot_embedding(_embedding(3), tmp_path / "solid.svg", csv=True)

    # THEN both files are written
    assert flat.read_text().startswith("<?xml")
    assert solid.exists()
    # AND the CSV holds the three coordinates
    assert (tmp_path / "solid.csv").read_text().splitlines()[0] == "coord_0,coord_1,coord_2"


def test_plot_loss(tmp_path):
    """Test the loss curve."""
    # GIVEN a short history
    history = TrainHistory(train=[1.0, 0.5, 0.25], validation=[1.2, 0.7, 0.4], lr=[0.01] * 3)

    # WHEN it is plotted with a CSV
    path = plot_loss(history, tmp_path / "loss_f.svg", csv=True)

    # THEN the figure and the history are written
    assert path.exists()
    assert TrainHistory.load_csv(tmp_path / "loss_f.csv") == history


def test_plot_report(tmp_path):
    """Test the report figure."""
    # GIVEN a report
    report = EvalReport(spearman={"t": 0.98, "s": 0.97}, unique_param_coords=2)

    # WHEN it is rendered with a CSV
    path = plot_report(report, tmp_path / "report.svg", csv=True)

    # THEN the table is exported as SVG and the metrics as one CSV row
    assert path.read_text().startswith("<svg")
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == "spearman_s,spearman_t,unique_param_coords"
    assert len(lines) == 2


def test_render_cells(tmp_path):
    """Test the cell rendering."""
    # GIVEN a ring of cells and a concentration per cell
    state = init_homogeneous(16, 3.0, 8.5, MechParams(patterned=False))
    concentrations = np.linspace(0.0, 2.0, 16)

    # WHEN the cells are rendered
    path = render_cells(state.positions[state.cells], concentrations, tmp_path / "cells.svg", csv=True)

    # THEN the figure and one CSV row per cell are written
    assert path.exists()
    assert len((tmp_path / "cells.csv").read_text().splitlines()) == 17
