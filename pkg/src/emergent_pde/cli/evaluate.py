"""Eval command for emergent-pde."""

import json
from pathlib import Path

import numpy as np
from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import (
    CHART_FILE,
    COORD_FILE,
    EMBEDDING_FILE,
    PREDICTION_FILE,
    REPORT_FILE,
    SCRAMBLED_FILE,
    STAGES,
    TIMING_FILE,
    Axis,
)
from emergent_pde.evaluation import EvalReport, local_linear_r2, relative_l2, spearman
from emergent_pde.models import (
    DataTensor,
    Embedding,
    EmergentChart,
    EmergentCoordinate,
    load_tensor,
)
from emergent_pde.utils import console
from emergent_pde.utils.errors import ConfigError, DegenerateInputError


def evaluate_inputs(cfg: EpdeConfig) -> list[Path]:
    """The scrambled tensor and the emergent time and space coordinates."""
    return [
        cfg.out_dir / SCRAMBLED_FILE,
        cfg.out_dir / COORD_FILE.format(Axis.TIME.value),
        cfg.out_dir / COORD_FILE.format(Axis.SPACE.value),
    ]


def _truth(tensor: DataTensor, axis: Axis, column: str | None) -> tuple[str, np.ndarray | None]:
    meta = tensor.meta(axis)
    if meta is None:
        return "", None
    if column is None:
        return meta.columns[0], meta.values[:, 0]
    try:
        return column, meta.column(column)
    except KeyError as e:
        raise ConfigError(str(e)) from e


def build_report(cfg: EpdeConfig) -> EvalReport:
    """Compare the recovered structure with whatever ground truth the tensor carries.

    Metrics whose inputs are degenerate are listed as undefined rather than failing the
    stage.

    Raises:
        ConfigError: If a configured ground-truth column does not exist.
    """
    out = cfg.out_dir
    block = cfg.evaluate
    tensor = load_tensor(out / SCRAMBLED_FILE)
    report = EvalReport()

    columns = {Axis.TIME: block.time_column, Axis.SPACE: block.space_column}
    for axis, column in columns.items():
        coord = EmergentCoordinate.load(out / COORD_FILE.format(axis.value))
        name, truth = _truth(tensor, axis, column)
        if truth is None:
            report.undefined[f"spearman ({axis.value})"] = "no ground truth"
            continue
        try:
            report.spearman[axis.value] = spearman(coord.values, truth)
        except (DegenerateInputError, ValueError) as e:
            report.undefined[f"spearman ({axis.value})"] = str(e)
        logger.debug(f"Axis '{axis.value}' compared with '{name}'")

    embedding_path = out / EMBEDDING_FILE.format(Axis.PARAMETER.value)
    meta = tensor.meta(Axis.PARAMETER)
    if embedding_path.is_file() and meta is not None:
        embedding = Embedding.load(embedding_path)
        report.unique_param_coords = int(sum(embedding.unique_flags))
        predictors = embedding.unique_coords()[:, :2]
        for column in block.param_columns:
            if column not in meta.columns:
                report.undefined[f"R^2 ({column})"] = "no ground truth"
                continue
            try:
                report.param_r2[column] = local_linear_r2(
                    predictors, meta.column(column), scale=block.r2_scale
                )
            except DegenerateInputError as e:
                report.undefined[f"R^2 ({column})"] = str(e)

    if (out / PREDICTION_FILE).is_file() and (out / CHART_FILE).is_file():
        predicted = EmergentChart.load(out / PREDICTION_FILE)
        truth_chart = EmergentChart.load(out / CHART_FILE)
        try:
            report.reconstruction_l2 = relative_l2(predicted.field, truth_chart.field)
        except DegenerateInputError as e:
            report.undefined["reconstruction relative L2"] = str(e)

    for stage in STAGES:
        timing = out / TIMING_FILE.format(stage)
        if timing.is_file():
            report.runtimes[stage] = float(json.loads(timing.read_text())["seconds"])
    return report


def evaluate(cfg: EpdeConfig, scratch: Path) -> None:
    """Write ``report.json`` and print it as a table."""
    report = build_report(cfg)
    report.save(scratch / REPORT_FILE)
    console.print(report.as_table())
