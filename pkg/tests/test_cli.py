# type: ignore
"""Test the emergent-pde CLI."""

import re

import pytest
from typer.testing import CliRunner

from emergent_pde.emergent_pde import app
from tests.pytest_functions import strip_ansi

runner = CliRunner()

SMALL_DEMO = """\
out_dir = "out"

[generate.chafee_infante]
    n_x   = 21
    n_out = 11
    t_end = 1.0
"""


@pytest.fixture
def small_config(tmp_path):
    """Write a configuration file for the small demo."""
    path = tmp_path / "small.toml"
    path.write_text(SMALL_DEMO)
    return path


def test_version():
    """Test printing version and then exiting."""
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert re.match(r"emergent_pde: v\d+\.\d+\.\d+", strip_ansi(result.output))


def test_generate_command(tmp_path, small_config):
    """Test running one stage from the command line."""
    # GIVEN a configuration file
    # WHEN the generate command runs with an output override
    result = runner.invoke(app, ["generate", "--config", str(small_config), "--out", "elsewhere"])

    # THEN it succeeds and writes into the override
    assert result.exit_code == 0
    assert (tmp_path / "elsewhere" / "tensor.epde").is_file()
    assert (tmp_path / "elsewhere" / "generate.manifest.json").is_file()
    assert not (tmp_path / "out").exists()
    # AND the default user configuration is created
    assert (tmp_path / "user" / "config.toml").is_file()


def test_missing_input_exits_with_usage_code(tmp_path, small_config):
    """Test a stage whose inputs were never produced."""
    # GIVEN an empty output directory
    # WHEN the learn stage runs
    result = runner.invoke(app, ["learn", "--config", str(small_config)])

    # THEN it exits with code 2 and writes nothing
    assert result.exit_code == 2
    assert not (tmp_path / "out" / "learn.manifest.json").exists()


@pytest.mark.parametrize(
    ("content", "args"),
    [
        pytest.param("seed = -1\n", [], id="negative-seed"),
        pytest.param('[integrate]\nscheme = "leapfrog"\n', [], id="unknown-scheme"),
        pytest.param("", ["--threads", "0"], id="no-threads"),
    ],
)
def test_invalid_configuration_exits_with_usage_code(tmp_path, content, args):
    """Test configuration errors."""
    # GIVEN an invalid configuration or option
    path = tmp_path / "bad.toml"
    path.write_text(content)

    # WHEN a stage runs
    result = runner.invoke(app, ["generate", "--config", str(path), *args])

    # THEN it exits with code 2 before running
    assert result.exit_code == 2
    assert not (tmp_path / "epde-out").exists()


def test_missing_config_file():
    """Test naming a configuration file that does not exist."""
    # GIVEN no such file
    # WHEN it is passed to a stage
    result = runner.invoke(app, ["generate", "--config", "nope.toml"])

    # THEN the option is refused
    assert result.exit_code == 2


def test_plot_rejects_unknown_kind(small_config):
    """Test the plot kind choices."""
    # GIVEN a configuration
    # WHEN an unknown kind is asked for
    result = runner.invoke(app, ["plot", "--kind", "histogram", "--config", str(small_config)])

    # THEN the option is refused
    assert result.exit_code == 2


@pytest.mark.slow
def test_run_all_is_deterministic(tmp_path, small_config):
    """Test that two full runs give identical manifests."""
    # GIVEN the small demo with short training
    small_config.write_text(
        SMALL_DEMO
        + "\n[coords]\n    n_psi = 21\n    n_phi = 30\n    time_anchor = \"max-mass\"\n"
        + "\n[coords.corridors]\n    source = false\n"
        + "\n[learn]\n    source = false\n    rhs_hidden = [16, 16]\n"
        + "\n[learn.rhs]\n    epochs = 20\n    batch = 64\n    n_validation = 2\n"
        + "\n[eval]\n    space_column = \"fold\"\n"
    )

    # WHEN the pipeline runs twice into separate directories
    for out in ("run_a", "run_b"):
        result = runner.invoke(app, ["run-all", "--config", str(small_config), "--out", out])
        assert result.exit_code == 0

    # THEN every stage manifest matches
    manifests = sorted(p.name for p in (tmp_path / "run_a").glob("*.manifest.json"))
    assert "eval.manifest.json" in manifests
    for name in manifests:
        assert (tmp_path / "run_a" / name).read_text() == (tmp_path / "run_b" / name).read_text()
    assert (tmp_path / "run_a" / "report.json").read_text() == (tmp_path / "run_b" / "report.json").read_text()
