"""Loguru sinks for the pipeline: a rich console sink and an optional rotating file."""  # noqa: A005

import logging
import sys
from contextlib import AbstractContextManager
from pathlib import Path

from loguru import logger
from rich.markup import escape

from emergent_pde.constants import PACKAGE_NAME, STATE_DIR

from .console import console

# Console threshold per -v count
VERBOSITY_LEVELS = ("INFO", "DEBUG", "TRACE")

# Libraries whose stdlib logging is routed to loguru at -vvv
INTERCEPTED_LIBRARIES = ("matplotlib", "scipy", "PIL")

LEVEL_STYLES = {
    "TRACE": ("turquoise2", "🔧 "),
    "DEBUG": ("cyan", "🐞 "),
    "INFO": ("bold", ""),
    "SUCCESS": ("bold green", "✅ "),
    "WARNING": ("bold yellow", "⚠️ "),
    "ERROR": ("bold red", "❌ "),
    "CRITICAL": ("bold white on red", "💀 "),
}

FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[stage]: <9} | {message} ({name})"


def log_formatter(record: dict) -> str:
    """Render a loguru record as rich markup.

    Records emitted inside :func:`stage_context` are prefixed with the stage name. DEBUG
    and TRACE records also name the emitting module, function and line.

    >>> from types import SimpleNamespace
    >>> record = {"level": SimpleNamespace(name="INFO"), "message": "hi", "extra": {"stage": "coords"}}
    >>> log_formatter(record)
    '[dim]coords[/dim] [bold]hi[/bold]'
    """
    name = record["level"].name
    color, icon = LEVEL_STYLES.get(name, ("cyan", f"{name: <8} | "))
    stage = record["extra"].get("stage", "")
    prefix = f"[dim]{stage}[/dim] " if stage else ""
    # loguru formats the returned string again, so literal braces are doubled
    text = escape(record["message"]).replace("{", "{{").replace("}", "}}")
    msg = f"{prefix}[{color}]{icon}{text}[/{color}]"
    if name in {"DEBUG", "TRACE"}:
        msg += f" [#c5c5c5]({record['name']}:{record['function']}:{record['line']})[/#c5c5c5]"
    return msg


def stage_context(stage: str) -> AbstractContextManager[None]:
    """Tag every record logged in the block with ``stage``."""
    return logger.contextualize(stage=stage)


def instantiate_logger(
    verbosity: int,
    log_file: Path | None,
    log_to_file: bool,
) -> None:  # pragma: no cover
    """Replace loguru's default sink with the console sink and, optionally, a file sink.

    Args:
        verbosity: 0 for INFO and above, 1 for DEBUG, 2 for TRACE. Above 2, stdlib logging
            from the numerical and plotting libraries is routed into loguru as well.
        log_file: Where file logs go. Defaults to ``emergent-pde.log`` in the XDG state
            directory.
        log_to_file: Whether to add the file sink.
    """
    level = VERBOSITY_LEVELS[min(verbosity, len(VERBOSITY_LEVELS) - 1)]

    logger.remove()
    logger.configure(extra={"stage": ""})
    logger.add(console.print, level=level, colorize=True, format=log_formatter)  # type: ignore [arg-type]
    if log_to_file:
        logger.add(
            log_file or STATE_DIR / f"{PACKAGE_NAME}.log",
            level=level,
            format=FILE_FORMAT,
            rotation="50 MB",
            retention=2,
            compression="zip",
        )

    if verbosity >= len(VERBOSITY_LEVELS):
        for library in INTERCEPTED_LIBRARIES:
            logging.getLogger(library).setLevel(level="DEBUG")
        logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)


class InterceptHandler(logging.Handler):  # pragma: no cover
    """Send stdlib records from matplotlib and scipy through the loguru sinks."""

    @staticmethod
    def emit(record: logging.LogRecord) -> None:
        """Redirect a stdlib record to loguru at the matching level."""
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno  # type: ignore [assignment]

        # Skip logging's own frames so loguru reports the caller
        frame, depth = sys._getframe(6), 6  # noqa: SLF001
        while frame and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())
