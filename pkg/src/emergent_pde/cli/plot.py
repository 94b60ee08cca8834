"""Plot command for emergent-pde."""

from pathlib import Path

import numpy as np
from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import (
    CHART_FILE,
    EMBEDDING_FILE,
    LOSS_FILE,
    PLOTS_DIR,
    PREDICTION_FILE,
    REPORT_FILE,
    SCRAMBLED_FILE,
    SNAPSHOT_FILE,
    Axis,
    PlotKind,
)
from emergent_pde.evaluation import EvalReport
from emergent_pde.models import Embedding, EmergentChart, TrainHistory, load_tensor, read_sidecar
from emergent_pde.plotting import (
    plot_embedding,
    plot_loss,
    plot_report,
    plot_spacetime,
    render_cells,
)
from emergent_pde.utils.errors import ConfigError
from emergent_pde.vertex_model import load_snapshot

DEFAULT_ARTIFACTS: dict[PlotKind, tuple[str, ...]] = {
    PlotKind.SPACETIME: (CHART_FILE, PREDICTION_FILE),
    PlotKind.EMBEDDING: tuple(EMBEDDING_FILE.format(axis) for axis in ("t", "s", "p")),
    PlotKind.LOSS: tuple(LOSS_FILE.format(name) for name in ("rhs", "source", "surrogate")),
    PlotKind.REPORT: (REPORT_FILE,),
    PlotKind.CELLS: (SNAPSHOT_FILE,),
}


def plot_artifacts(cfg: EpdeConfig, kind: PlotKind, artifact: Path | None = None) -> list[Path]:
    """Files a plot stage renders: ``artifact`` alone, or the default artifacts of ``kind`` present.

    The first default artifact is always required so a missing input is reported.
    """
    if artifact is not None:
        return [artifact]
    defaults = [cfg.out_dir / name for name in DEFAULT_ARTIFACTS[kind]]
    return [defaults[0], *(path for path in defaults[1:] if path.is_file())]


def _svg_name(artifact: Path) -> str:
    """``chart.epde`` -> ``chart.svg``, ``rhs.loss.csv`` -> ``rhs.loss.svg``."""
    return f"{artifact.name.rsplit('.', 1)[0]}.svg"


def _embedding_color(
    cfg: EpdeConfig, artifact: Path, color_by: str | None
) -> tuple[np.ndarray | None, str]:
    """Metadata column of the embedded axis used as scatter color.

    Raises:
        ConfigError: If ``color_by`` names a column the axis does not have.
    """
    axis_letter = artifact.stem.rsplit("_", 1)[-1]
    scrambled = cfg.out_dir / SCRAMBLED_FILE
    if axis_letter not in {a.value for a in Axis} or not scrambled.is_file():
        return None, ""
    meta = load_tensor(scrambled).meta(Axis(axis_letter))
    if meta is None:
        return None, ""
    if color_by is None:
        return meta.values[:, 0], meta.columns[0]
    try:
        return meta.column(color_by), color_by
    except KeyError as e:
        raise ConfigError(str(e)) from e


def _spacetime(cfg: EpdeConfig, artifact: Path, target: Path, csv: bool) -> Path:
    if "chart" in read_sidecar(artifact).extra:
        chart = EmergentChart.load(artifact)
        field, space, time = chart.field, chart.psi_grid, chart.phi_grid
    else:
        tensor = load_tensor(artifact)
        slab = min(cfg.coords.slab, tensor.dims[0] - 1)
        field = tensor.filled()[slab]
        space_meta, time_meta = tensor.meta(Axis.SPACE), tensor.meta(Axis.TIME)
        space = None if space_meta is None else space_meta.values[:, 0]
        time = None if time_meta is None else time_meta.values[:, 0]
    return plot_spacetime(field, target, space=space, time=time, title=artifact.name, csv=csv)


def plot(
    cfg: EpdeConfig,
    scratch: Path,
    kind: PlotKind,
    artifact: Path | None = None,
    color_by: str | None = None,
    *,
    csv: bool = False,
) -> list[Path]:
    """Render SVG figures of one kind into ``plots/``, named after their artifacts.

    Args:
        cfg: Pipeline configuration.
        scratch: Directory receiving the figures.
        kind: Figure kind.
        artifact: File to plot; defaults to the stage artifacts matching ``kind``.
        color_by: Axis metadata column coloring an embedding scatter.
        csv: Also write the plotted numbers next to each figure.

    Returns:
        The figures written.
    """
    written = []
    for path in plot_artifacts(cfg, kind, artifact):
        target = scratch / PLOTS_DIR / _svg_name(path)
        match kind:
            case PlotKind.SPACETIME:
                written.append(_spacetime(cfg, path, target, csv))
            case PlotKind.EMBEDDING:
                color, label = _embedding_color(cfg, path, color_by)
                written.append(
                    plot_embedding(
                        Embedding.load(path),
                        target,
                        color=color,
                        color_label=label,
                        title=path.name,
                        csv=csv,
                    )
                )
            case PlotKind.LOSS:
                history = TrainHistory.load_csv(path)
                written.append(plot_loss(history, target, title=path.name, csv=csv))
            case PlotKind.REPORT:
                written.append(plot_report(EvalReport.load(path), target, csv=csv))
            case PlotKind.CELLS:
                polygons, concentrations = load_snapshot(path)
                written.append(render_cells(polygons, concentrations, target, csv=csv))
        logger.debug(f"Plotted {path.name} as {kind.value}")
    return written
