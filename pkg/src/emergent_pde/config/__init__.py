"""Configuration module."""

from .config import (
    PATH_CONFIG_DEFAULT,
    CoordsConfig,
    EpdeConfig,
    EvalConfig,
    GenerateConfig,
    IntegrateConfig,
    LearnConfig,
    MechanicsConfig,
    OrganizeConfig,
    PlotConfig,
    ScrambleConfig,
)

__all__ = [
    "PATH_CONFIG_DEFAULT",
    "CoordsConfig",
    "EpdeConfig",
    "EvalConfig",
    "GenerateConfig",
    "IntegrateConfig",
    "LearnConfig",
    "MechanicsConfig",
    "OrganizeConfig",
    "PlotConfig",
    "ScrambleConfig",
]
