"""emergent-pde CLI."""

import shutil
from collections.abc import Iterator
from contextlib import contextmanager, nullcontext
from pathlib import Path
from typing import Annotated, Optional

import typer
import typer.rich_utils
from confz import EnvSource, FileSource
from confz.exceptions import ConfigException as ConfZException
from loguru import logger
from pydantic import ValidationError

from emergent_pde.cli import StageOptions, run_all, run_stage
from emergent_pde.config import EpdeConfig
from emergent_pde.constants import CONFIG_PATH, EXIT_NUMERICAL, EXIT_USAGE, VERSION, PlotKind
from emergent_pde.utils import console, instantiate_logger
from emergent_pde.utils.errors import (
    ConfigError,
    MissingInputError,
    NumericalError,
    TensorFormatError,
)

typer.rich_utils.STYLE_HELPTEXT = ""

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    rich_markup_mode="rich",
    context_settings={"help_option_names": ["-h", "--help"]},
)

ConfigOption = Annotated[
    Optional[Path],
    typer.Option(
        "--config",
        "-c",
        help=r"Configuration file [#888888]\[default: user config][/#888888]",
        show_default=False,
        exists=True,
        dir_okay=False,
        file_okay=True,
        resolve_path=True,
    ),
]
OutOption = Annotated[
    Optional[Path],
    typer.Option(
        "--out",
        "-o",
        help=r"Output directory [#888888]\[default: out_dir from config][/#888888]",
        show_default=False,
        file_okay=False,
        dir_okay=True,
    ),
]
ThreadsOption = Annotated[
    Optional[int],
    typer.Option(
        "--threads",
        help="Worker processes for data generation",
        show_default=False,
        min=1,
    ),
]


def docstring_parameter(*sub):  # type: ignore [no-untyped-def]  # noqa: ANN002, ANN201
    """Decorator to format docstring with parameters."""

    def dec(obj):  # type: ignore [no-untyped-def]  # noqa: ANN001, ANN202
        """Format docstring with parameters."""
        obj.__doc__ = obj.__doc__.format(*sub)
        return obj

    return dec


def version_callback(value: bool) -> None:
    """Print version and exit.

    Raises:
        typer.Exit: Exit the application
    """
    if value:
        console.print(f"{__package__}: v{VERSION}")
        raise typer.Exit()


@contextmanager
def configured(
    ctx: typer.Context, config_file: Path | None, out: Path | None, threads: int | None
) -> Iterator[EpdeConfig]:
    """Load and validate the configuration, then apply command-line overrides.

    Raises:
        typer.Exit: With the usage exit code when the configuration is invalid.
    """
    sources = (
        EpdeConfig.change_config_sources(
            [FileSource(file=config_file), EnvSource(allow=["seed"], prefix="EPDE_")]
        )
        if config_file
        else nullcontext()
    )
    with sources:
        try:
            cfg = EpdeConfig()
        except ValidationError as e:
            logger.error(f"Invalid configuration file: {config_file or CONFIG_PATH}")
            for error in e.errors():
                loc = ".".join(str(part) for part in error["loc"])
                console.print(f"           [red]{loc}: {error['msg']}[/red]")
            raise typer.Exit(code=EXIT_USAGE) from e
        except ConfZException as e:
            logger.error(f"Could not load configuration: {e}")
            raise typer.Exit(code=EXIT_USAGE) from e

        overrides: dict[str, object] = {}
        if out is not None:
            overrides["out_dir"] = out
        if threads is not None:
            overrides["threads"] = threads
        cfg = cfg.model_copy(update=overrides)

        if cfg.log_to_file and not ctx.meta.get("log_to_file"):
            instantiate_logger(ctx.meta.get("verbosity", 0), cfg.log_file, log_to_file=True)

        yield cfg


@contextmanager
def stage_errors() -> Iterator[None]:
    """Translate pipeline errors into exit codes.

    Raises:
        typer.Exit: 1 for numerical failures, 2 for usage and input errors.
    """
    try:
        yield
    except NumericalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise typer.Exit(code=EXIT_NUMERICAL) from e
    except (MissingInputError, ConfigError, TensorFormatError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise typer.Exit(code=EXIT_USAGE) from e


def _run(
    ctx: typer.Context,
    stage: str,
    config_file: Path | None,
    out: Path | None,
    threads: int | None,
    options: StageOptions | None = None,
) -> None:
    with configured(ctx, config_file, out, threads) as cfg, stage_errors():
        run_stage(stage, cfg, options)


@app.command("generate")
def generate_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
) -> None:
    """Simulate the ground-truth data tensor.

    Writes [code]tensor.epde[/code]: the Chafee-Infante demo or a parameter ensemble of the signal model, depending on [code]generate.kind[/code].
    """
    _run(ctx, "generate", config, out, threads)


@app.command("scramble")
def scramble_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
) -> None:
    """Shuffle the tensor axes and drop channels.

    The permutations and drop masks are recorded next to [code]scrambled.epde[/code] so later stages can score the recovered orders.
    """
    _run(ctx, "scramble", config, out, threads)


@app.command("organize")
def organize_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    dump: Annotated[
        bool,
        typer.Option("--dump", help="Write per-sweep distances and trees for inspection"),
    ] = False,
) -> None:
    """Recover the geometry of every axis with the informed-metric questionnaire.

    Writes one diffusion-map embedding per axis and a convergence record.
    """
    _run(ctx, "organize", config, out, threads, StageOptions(dump=dump))


@app.command("coords")
def coords_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
) -> None:
    """Extract 1-D emergent coordinates and resample the field on uniform grids.

    Writes [code]coord_t.json[/code], [code]coord_s.json[/code] and the emergent chart [code]chart.epde[/code].
    """
    _run(ctx, "coords", config, out, threads)


@app.command("learn")
def learn_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
) -> None:
    """Train the right-hand-side network and, when enabled, the source and parameter networks."""
    _run(ctx, "learn", config, out, threads)


@app.command("integrate")
def integrate_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
) -> None:
    """Integrate the learned PDE from the first chart snapshot."""
    _run(ctx, "integrate", config, out, threads)


@app.command("eval")
def eval_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
) -> None:
    """Score recovered orders, parameter coordinates and the reconstruction.

    Writes [code]report.json[/code].
    """
    _run(ctx, "eval", config, out, threads)


@app.command("plot")
def plot_command(
    ctx: typer.Context,
    artifact: Annotated[
        Optional[Path],
        typer.Argument(
            help=r"Artifact to draw [#888888]\[default: from the output directory][/#888888]",
            show_default=False,
            exists=True,
            dir_okay=False,
            file_okay=True,
        ),
    ] = None,
    kind: Annotated[
        PlotKind, typer.Option("--kind", "-k", help="What to draw", case_sensitive=False)
    ] = PlotKind.SPACETIME,
    color_by: Annotated[
        Optional[str],
        typer.Option(
            "--color-by", help="Metadata column that colors embedding points", show_default=False
        ),
    ] = None,
    csv: Annotated[
        bool, typer.Option("--csv", help="Also write the plotted data as CSV")
    ] = False,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
) -> None:
    """Render an artifact as SVG.

    [bold underline]Usage Examples[/bold underline]

    [#999999]Compare the chart with the integrated prediction:[/#999999]
    epde plot --kind spacetime

    [#999999]Color the space embedding by the true position:[/#999999]
    epde plot --kind embedding --color-by x epde-out/embedding_s.csv
    """
    options = StageOptions(kind=kind, artifact=artifact, color_by=color_by, csv=csv)
    _run(ctx, "plot", config, out, threads, options)


@app.command("run-all")
def run_all_command(
    ctx: typer.Context,
    config: ConfigOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    dump: Annotated[
        bool,
        typer.Option("--dump", help="Write per-sweep questionnaire state"),
    ] = False,
) -> None:
    """Run every stage in order and render the configured plots."""
    with configured(ctx, config, out, threads) as cfg, stage_errors():
        run_all(cfg, StageOptions(dump=dump))


@docstring_parameter(CONFIG_PATH)
@app.callback()
def main(
    ctx: typer.Context,
    log_file: Annotated[
        Optional[Path],
        typer.Option(
            help="Path to log file",
            show_default=False,
            dir_okay=False,
            file_okay=True,
            exists=False,
            rich_help_panel="Output Settings",
        ),
    ] = None,
    log_to_file: Annotated[
        Optional[bool],
        typer.Option(
            "--log-to-file",
            help="Log to file",
            show_default=True,
            rich_help_panel="Output Settings",
        ),
    ] = None,
    verbosity: Annotated[
        int,
        typer.Option(
            "-v",
            "--verbose",
            show_default=True,
            help="""Set verbosity level(0=INFO, 1=DEBUG, 2=TRACE)""",
            count=True,
            rich_help_panel="Output Settings",
        ),
    ] = 0,
    version: Annotated[  # noqa: ARG001
        Optional[bool],
        typer.Option(
            "--version",
            is_eager=True,
            callback=version_callback,
            help="Print version and exit",
            rich_help_panel="Output Settings",
        ),
    ] = None,
) -> None:
    """Recover space, time and parameters from scrambled data and learn the PDE behind it.

    \b
    - [bold]Generate[/bold] ground-truth data from a reaction-diffusion demo or a signaling ensemble
    - [bold]Scramble[/bold] the axes and drop channels
    - [bold]Organize[/bold] every axis with a tri-geometry questionnaire and diffusion maps
    - [bold]Extract[/bold] emergent coordinates and resample on uniform grids
    - [bold]Learn[/bold] the right-hand side of the PDE and integrate it

    Settings are read from the configuration file located at [code]{0}[/code] unless [code]--config[/code] names another one.

    [bold underline]Usage Examples[/bold underline]

        [#999999]Run the full demo:[/#999999]
        epde run-all --out demo

        [#999999]Re-run the questionnaire and keep its intermediate state:[/#999999]
        epde organize --dump
    """  # noqa: D301
    # Instantiate Logging
    instantiate_logger(verbosity, log_file, log_to_file)
    ctx.meta["verbosity"] = verbosity
    ctx.meta["log_to_file"] = bool(log_to_file)

    # Create a default configuration file if one does not exist
    if not CONFIG_PATH.exists():
        CONFIG_PATH.parent.mkdir(parents=True, exist_ok=True)
        default_config_file = Path(__file__).parent.resolve() / "default_config.toml"
        shutil.copy(default_config_file, CONFIG_PATH)
        logger.info(f"Created default configuration file at '{CONFIG_PATH}'")


if __name__ == "__main__":
    app()
