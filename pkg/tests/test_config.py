# type: ignore
"""Test the pipeline configuration."""

import pytest
from confz import EnvSource, FileSource

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import Axis, GeneratorKind
from tests.conftest import FIXTURE_CONFIG


def test_packaged_defaults(mock_config):
    """Test the values of the packaged configuration file."""
    # GIVEN the packaged configuration
    with EpdeConfig.change_config_sources(mock_config()):
        # WHEN it is loaded
        cfg = EpdeConfig()

    # THEN the demo settings are in place
    assert cfg.seed == 42
    assert cfg.generate.kind == GeneratorKind.CHAFEE_INFANTE
    assert cfg.generate.mechanics.n_steps == 1000
    assert cfg.coords.time_anchor == "max-mass"
    assert not cfg.coords.corridors.source
    assert cfg.integrate.substeps == 16
    assert cfg.learn.rhs_hidden == [32, 32, 32]
    assert cfg.scramble.axes == [Axis.PARAMETER, Axis.TIME, Axis.SPACE]


def test_eval_block_uses_its_alias(mock_config):
    """Test that the ``eval`` table fills the evaluate settings."""
    # GIVEN an override of the eval table
    with EpdeConfig.change_config_sources(mock_config(eval={"space_column": "x"})):
        # WHEN the configuration is loaded
        cfg = EpdeConfig()

    # THEN the override is merged into the packaged table
    assert cfg.evaluate.space_column == "x"
    assert cfg.evaluate.param_columns == ["D_e", "d"]


def test_seed_from_environment(monkeypatch):
    """Test the EPDE_SEED override."""
    # GIVEN a seed in the environment
    monkeypatch.setenv("EPDE_SEED", "9")

    # WHEN the configuration is loaded from the file and the environment
    with EpdeConfig.change_config_sources(
        [FileSource(FIXTURE_CONFIG), EnvSource(allow=["seed"], prefix="EPDE_")]
    ):
        cfg = EpdeConfig()

    # THEN the environment wins
    assert cfg.seed == 9


@pytest.mark.parametrize(
    ("overrides", "match"),
    [
        pytest.param({"coords": {"slab": 1}}, "single slab", id="demo-slab"),
        pytest.param(
            {"generate": {"kind": "signal-ensemble", "n_samples": 3}, "coords": {"slab": 3}},
            "not below",
            id="ensemble-slab",
        ),
        pytest.param({"scramble": {"drop_fraction": {"t": 1.0}}}, "drop fraction", id="drop"),
        pytest.param({"scramble": {"mask_fraction": 1.0}}, "mask_fraction", id="mask"),
        pytest.param({"learn": {"rhs_hidden": []}}, "hidden layer", id="hidden"),
        pytest.param({"seed": -1}, "seed", id="seed"),
    ],
)
def test_invalid_configuration(mock_config, overrides, match):
    """Test configuration validation."""
    # GIVEN an invalid override
    with EpdeConfig.change_config_sources(mock_config(**overrides)):
        # WHEN the configuration is loaded
        # THEN validation fails
        with pytest.raises(ValueError, match=match):
            EpdeConfig()


def test_stage_seeds(mock_config):
    """Test per-stage seeds."""
    # GIVEN two configurations with different global seeds
    with EpdeConfig.change_config_sources(mock_config()):
        cfg = EpdeConfig()
    with EpdeConfig.change_config_sources(mock_config(seed=7)):
        other = EpdeConfig()

    # WHEN stage seeds are derived
    # THEN they differ between stages and follow the global seed
    assert cfg.stage_seed("generate") != cfg.stage_seed("scramble")
    assert cfg.stage_seed("generate") == cfg.stage_seed("generate")
    assert cfg.stage_seed("generate") != other.stage_seed("generate")
