"""Integrate command for emergent-pde."""

from pathlib import Path

from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import CHART_FILE, MODEL_FILE, PREDICTION_FILE
from emergent_pde.evaluation import relative_l2
from emergent_pde.learner import integrate
from emergent_pde.models import EmergentChart, MlpModel


def integrate_inputs(cfg: EpdeConfig) -> list[Path]:
    """The chart and the trained networks."""
    paths = [cfg.out_dir / CHART_FILE, cfg.out_dir / MODEL_FILE.format("rhs")]
    if cfg.learn.source:
        paths.append(cfg.out_dir / MODEL_FILE.format("source"))
    return paths


def integrate_chart(cfg: EpdeConfig, scratch: Path) -> None:
    """Integrate the learned model from the first chart snapshot and write ``prediction.epde``.

    The SVD regularization only sees the snapshots the right-hand side was trained on.
    """
    block = cfg.integrate
    chart = EmergentChart.load(cfg.out_dir / CHART_FILE)
    rhs = MlpModel.load(cfg.out_dir / MODEL_FILE.format("rhs"))
    source = MlpModel.load(cfg.out_dir / MODEL_FILE.format("source")) if cfg.learn.source else None

    predicted = integrate(
        rhs,
        chart,
        source=source,
        scheme=block.scheme,
        substeps=block.substeps,
        svd_energy=block.svd_energy,
        n_holdout=cfg.learn.rhs.n_validation,
    )
    chart.model_copy(update={"field": predicted}).save(scratch / PREDICTION_FILE)
    logger.info(f"Relative L2 error against the chart: {relative_l2(predicted, chart.field):.4f}")
