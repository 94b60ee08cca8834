# type: ignore
"""Shared fixtures."""

from pathlib import Path

import numpy as np
import pytest
from confz import DataSource, FileSource
from loguru import logger

from emergent_pde.constants import Axis
from emergent_pde.models import AxisMeta, DataTensor

logger.remove()  # Remove default logger

FIXTURE_CONFIG = Path(__file__).resolve().parent.parent / "src/emergent_pde/default_config.toml"


@pytest.fixture(autouse=True)
def _change_test_dir(monkeypatch, tmp_path) -> None:
    """All tests should run in a temporary directory."""
    monkeypatch.chdir(tmp_path)


@pytest.fixture(autouse=True)
def _user_config_path(monkeypatch, tmp_path) -> None:
    """Keep the CLI from writing a default configuration into the real home directory."""
    monkeypatch.setattr("emergent_pde.emergent_pde.CONFIG_PATH", tmp_path / "user" / "config.toml")


@pytest.fixture
def mock_config(tmp_path):
    """Mock specific configuration data for use in tests by accepting arbitrary keyword arguments.

    Usage:
        def test_something(mock_config):
            with EpdeConfig.change_config_sources(mock_config(seed=7)):
                cfg = EpdeConfig()
                assert cfg.seed == 7
    """

    def _inner(**kwargs):
        """Build the fixture configuration sources with ``kwargs`` layered on top.

        Args:
            **kwargs: Configuration keys to override. None values are dropped.

        Returns:
            list: A FileSource with the packaged defaults and a DataSource with the overrides.
        """
        override_data = {
            key: value for key, value in kwargs.items() if value is not None and key != "config_file"
        }

        if Path(tmp_path / "config.toml").exists():
            config_file_source = str(tmp_path / "config.toml")
        else:
            config_file_source = kwargs.get("config_file", FIXTURE_CONFIG)

        return [FileSource(config_file_source), DataSource(data=override_data)]

    return _inner


@pytest.fixture
def wave_tensor():
    """Build a small smooth (p, t, s) tensor with ground-truth metadata on every axis.

    Slab ``p`` carries ``a_p * exp(-t) * sin(pi * x) + 0.2 * x``, so every axis has a
    clear 1-D geometry.

    Returns:
        Callable: ``_inner(n_p, n_t, n_s)`` returning a DataTensor.
    """

    def _inner(n_p: int = 6, n_t: int = 20, n_s: int = 24) -> DataTensor:
        a = np.linspace(0.5, 1.5, n_p)
        t = np.linspace(0.0, 1.0, n_t)
        x = np.linspace(0.0, 1.0, n_s)
        values = (
            a[:, None, None] * np.exp(-t)[None, :, None] * np.sin(np.pi * x)[None, None, :]
            + 0.2 * x[None, None, :]
        )
        return DataTensor(
            values=values,
            axis_meta={
                Axis.PARAMETER: AxisMeta(columns=["a"], values=a),
                Axis.TIME: AxisMeta(columns=["time"], values=t),
                Axis.SPACE: AxisMeta(columns=["x"], values=x),
            },
        )

    return _inner

