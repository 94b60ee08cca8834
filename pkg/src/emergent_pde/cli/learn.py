"""Learn command for emergent-pde."""

from pathlib import Path

import numpy as np
from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import (
    CHART_FILE,
    COORD_FILE,
    EMBEDDING_FILE,
    LOSS_FILE,
    MODEL_FILE,
    SCRAMBLED_FILE,
    Axis,
)
from emergent_pde.learner import (
    fd_features,
    surrogate_inputs,
    train_rhs,
    train_source,
    train_surrogate,
)
from emergent_pde.models import (
    Embedding,
    EmergentChart,
    EmergentCoordinate,
    MlpModel,
    TrainHistory,
    load_tensor,
)
from emergent_pde.utils import derive_seed, make_rng
from emergent_pde.utils.errors import ConfigError, DegenerateInputError


def learn_inputs(cfg: EpdeConfig) -> list[Path]:
    """The chart, plus the scrambled tensor, embeddings and coordinates for the surrogate."""
    paths = [cfg.out_dir / CHART_FILE]
    if cfg.learn.surrogate:
        paths += [
            cfg.out_dir / SCRAMBLED_FILE,
            cfg.out_dir / EMBEDDING_FILE.format(Axis.PARAMETER.value),
            cfg.out_dir / COORD_FILE.format(Axis.TIME.value),
            cfg.out_dir / COORD_FILE.format(Axis.SPACE.value),
        ]
    return paths


def _save(name: str, model: MlpModel, history: TrainHistory, scratch: Path) -> None:
    model.save(scratch / MODEL_FILE.format(name))
    history.save_csv(scratch / LOSS_FILE.format(name))
    logger.info(f"{name}: {model.param_count} parameters, final loss {history.train[-1]:.4g}")


def learn(cfg: EpdeConfig, scratch: Path) -> None:
    """Fit the right-hand side network and, as configured, the source and surrogate networks.

    Raises:
        ConfigError: If a source network is requested on a chart without a source corridor.
    """
    block = cfg.learn
    seed = cfg.stage_seed("learn")
    chart = EmergentChart.load(cfg.out_dir / CHART_FILE)
    features = fd_features(chart)
    if block.max_samples is not None and features.targets.size > block.max_samples:
        rows = make_rng(derive_seed(seed, "rows")).choice(
            features.targets.size, size=block.max_samples, replace=False
        )
        features = features.subset(np.sort(rows))
        logger.debug(f"Training on {block.max_samples} sampled feature rows")

    rhs_cfg = block.rhs.model_copy(update={"seed": derive_seed(seed, "rhs")})
    rhs, history = train_rhs(features, rhs_cfg, tuple(block.rhs_hidden))
    _save("rhs", rhs, history, scratch)

    if block.source:
        if chart.source_corridor is None:
            msg = "learn.source is on but the chart has no source corridor (coords.corridors.source)"
            raise ConfigError(msg)
        source_cfg = block.source_train.model_copy(update={"seed": derive_seed(seed, "source")})
        source, history = train_source(rhs, features, chart, source_cfg, tuple(block.source_hidden))
        _save("source", source, history, scratch)

    if block.surrogate:
        surrogate, history = _fit_surrogate(cfg, derive_seed(seed, "surrogate"))
        _save("surrogate", surrogate, history, scratch)


def _fit_surrogate(cfg: EpdeConfig, seed: int) -> tuple[MlpModel, TrainHistory]:
    out = cfg.out_dir
    tensor = load_tensor(out / SCRAMBLED_FILE)
    params = Embedding.load(out / EMBEDDING_FILE.format(Axis.PARAMETER.value)).unique_coords()
    if params.shape[1] < 2:  # noqa: PLR2004
        msg = f"the surrogate needs two unique parameter coordinates, found {params.shape[1]}"
        raise DegenerateInputError(msg)
    inputs = surrogate_inputs(
        params[:, :2],
        EmergentCoordinate.load(out / COORD_FILE.format(Axis.TIME.value)).values,
        EmergentCoordinate.load(out / COORD_FILE.format(Axis.SPACE.value)).values,
    )
    train_cfg = cfg.learn.surrogate_train.model_copy(update={"seed": seed})
    hidden = tuple(cfg.learn.surrogate_hidden)
    return train_surrogate(inputs, tensor.filled().ravel(), train_cfg, hidden)
