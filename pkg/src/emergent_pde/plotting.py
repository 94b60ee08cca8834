"""Deterministic SVG figures: space-time heat maps, embeddings, loss curves, reports and cells."""

import io
from pathlib import Path

import matplotlib as mpl
import numpy as np
from loguru import logger
from matplotlib.collections import PolyCollection
from matplotlib.figure import Figure
from rich.console import Console

from emergent_pde.evaluation import EvalReport
from emergent_pde.models.embedding import Embedding
from emergent_pde.models.mlp import TrainHistory

HEATMAP_GID = "heatmap"
MAX_HEATMAP_ROWS = 200
MAX_HEATMAP_COLS = 200

_STYLE = {
    "svg.hashsalt": "emergent-pde",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "figure.dpi": 72,
}


def _save(fig: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug(f"Wrote {path}")
    return path


def _write_csv(path: Path, header: list[str], rows: np.ndarray) -> Path:
    csv_path = path.with_suffix(".csv")
    np.savetxt(csv_path, rows, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    return csv_path


def _coarsen(field: np.ndarray, max_rows: int, max_cols: int) -> np.ndarray:
    """Block-average a field down to at most ``max_rows`` x ``max_cols`` cells."""
    rows = -(-field.shape[0] // max_rows)
    cols = -(-field.shape[1] // max_cols)
    if rows == 1 and cols == 1:
        return field
    n_r, n_c = field.shape[0] // rows, field.shape[1] // cols
    trimmed = field[: n_r * rows, : n_c * cols]
    return trimmed.reshape(n_r, rows, n_c, cols).mean(axis=(1, 3))


def plot_spacetime(
    field: np.ndarray,
    path: Path,
    *,
    space: np.ndarray | None = None,
    time: np.ndarray | None = None,
    title: str = "",
    csv: bool = False,
) -> Path:
    """Heat map of a (time, space) field, one colored cell per value.

    Fields larger than 200 x 200 are block-averaged first.
    """
    field = np.asarray(field, dtype=np.float64)
    if csv:
        _write_csv(path, [f"s{j}" for j in range(field.shape[1])], field)
    cells = _coarsen(field, MAX_HEATMAP_ROWS, MAX_HEATMAP_COLS)
    space = np.linspace(0, 1, cells.shape[1] + 1) if space is None or cells is not field else _edges(space)
    time = np.linspace(0, 1, cells.shape[0] + 1) if time is None or cells is not field else _edges(time)

    with mpl.rc_context(_STYLE):
        fig = Figure(figsize=(6, 4))
        ax = fig.subplots()
        mesh = ax.pcolormesh(space, time, cells, cmap="viridis", shading="flat")
        mesh.set_gid(HEATMAP_GID)
        ax.set_xlabel("space")
        ax.set_ylabel("time")
        if title:
            ax.set_title(title)
        fig.colorbar(mesh, ax=ax, label="c")
        return _save(fig, path)


def _edges(centers: np.ndarray) -> np.ndarray:
    """Cell edges around sorted or unsorted centers, as pcolormesh expects."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.size == 1:
        return np.array([centers[0] - 0.5, centers[0] + 0.5])
    if not np.all(np.diff(centers) > 0):
        return np.arange(centers.size + 1, dtype=np.float64)
    middle = (centers[1:] + centers[:-1]) / 2
    return np.concatenate([[2 * centers[0] - middle[0]], middle, [2 * centers[-1] - middle[-1]]])


def plot_embedding(
    embedding: Embedding,
    path: Path,
    *,
    color: np.ndarray | None = None,
    color_label: str = "",
    title: str = "",
    csv: bool = False,
) -> Path:
    """Scatter of the leading unique coordinates (2-D, or 3-D with three or more)."""
    coords = embedding.unique_coords()
    if coords.shape[1] < 2:  # noqa: PLR2004
        coords = embedding.coords[:, : min(2, embedding.coords.shape[1])]
    if csv:
        header = [f"coord_{k}" for k in range(coords.shape[1])]
        rows = coords if color is None else np.column_stack([coords, color])
        _write_csv(path, header + ([color_label or "color"] if color is not None else []), rows)

    with mpl.rc_context(_STYLE):
        fig = Figure(figsize=(5, 4))
        three_d = coords.shape[1] >= 3  # noqa: PLR2004
        ax = fig.add_subplot(projection="3d" if three_d else None)
        columns = [coords[:, k] for k in range(min(coords.shape[1], 3))]
        if len(columns) == 1:
            columns.append(np.zeros_like(columns[0]))
        style = {"s": 12} if color is None else {"s": 12, "c": color, "cmap": "viridis"}
        scatter = ax.scatter(*columns, **style)
        ax.set_xlabel("coordinate 1")
        ax.set_ylabel("coordinate 2")
        if color is not None:
            fig.colorbar(scatter, ax=ax, label=color_label)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_loss(history: TrainHistory, path: Path, *, title: str = "", csv: bool = False) -> Path:
    """Training and validation loss per epoch on a log scale."""
    epochs = np.arange(1, len(history.train) + 1)
    if csv:
        history.save_csv(path.with_suffix(".csv"))
    with mpl.rc_context(_STYLE):
        fig = Figure(figsize=(6, 4))
        ax = fig.subplots()
        ax.semilogy(epochs, history.train, label="train")
        if history.validation:
            ax.semilogy(epochs[: len(history.validation)], history.validation, label="validation")
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE")
        ax.legend()
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_report(report: EvalReport, path: Path, *, csv: bool = False) -> Path:
    """Render the evaluation table as SVG."""
    recorder = Console(record=True, width=80, file=io.StringIO())
    recorder.print(report.as_table())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(recorder.export_svg(title="emergent-pde evaluation"))
    if csv:
        payload = report.model_dump(exclude={"runtimes", "undefined"})
        names = [f"spearman_{k}" for k in sorted(payload["spearman"])]
        values = [payload["spearman"][k] for k in sorted(payload["spearman"])]
        names += [f"r2_{k}" for k in sorted(payload["param_r2"])]
        values += [payload["param_r2"][k] for k in sorted(payload["param_r2"])]
        if report.unique_param_coords is not None:
            names.append("unique_param_coords")
            values.append(report.unique_param_coords)
        if report.reconstruction_l2 is not None:
            names.append("reconstruction_l2")
            values.append(report.reconstruction_l2)
        _write_csv(path, names, np.array([values], dtype=np.float64))
    logger.debug(f"Wrote {path}")
    return path


def render_cells(
    polygons: np.ndarray,
    concentrations: np.ndarray,
    path: Path,
    *,
    csv: bool = False,
) -> Path:
    """Filled cell polygons, red in proportion to concentration over the frame maximum."""
    polygons = np.asarray(polygons, dtype=np.float64)
    conc = np.asarray(concentrations, dtype=np.float64)
    peak = float(conc.max()) if conc.size and conc.max() > 0 else 1.0
    level = np.clip(conc / peak, 0.0, 1.0)
    colors = np.column_stack([np.ones_like(level), 1 - level, 1 - level])
    if csv:
        _write_csv(path, ["cell", "concentration"], np.column_stack([np.arange(conc.size), conc]))

    with mpl.rc_context(_STYLE):
        fig = Figure(figsize=(5, 5))
        ax = fig.subplots()
        ax.add_collection(PolyCollection(polygons, facecolors=colors, edgecolors="black", linewidths=0.5))
        ax.autoscale_view()
        ax.set_aspect("equal")
        ax.set_axis_off()
        return _save(fig, path)
