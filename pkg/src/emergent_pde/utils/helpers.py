"""Helper functions for emergent-pde."""

import hashlib
import json
import shutil
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import typer
from loguru import logger

from emergent_pde.constants import RNG_NAME
from emergent_pde.utils import errors


def existing_file_path(path: str | Path) -> Path:
    """Check if the given path exists and is a file.

    Args:
        path (str | Path): The path to check.

    Returns:
        Path: The resolved path if it exists and is a file.

    Raises:
        typer.BadParameter: If the path does not exist or is not a file.
    """
    resolved_path = Path(path).expanduser().resolve()

    if not resolved_path.exists():
        msg = f"File {path!s} does not exist"
        raise typer.BadParameter(msg)

    if not resolved_path.is_file():
        msg = f"{path!s} is not a file"
        raise typer.BadParameter(msg)

    return resolved_path


def require_inputs(*paths: Path) -> None:
    """Check that every artifact a stage depends on is present.

    Raises:
        MissingInputError: Naming every missing path at once.
    """
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        msg = f"Missing input(s): {', '.join(missing)}"
        raise errors.MissingInputError(msg)


def make_rng(seed: int) -> np.random.Generator:
    """Return the project's seeded generator.

    Args:
        seed (int): Non-negative seed.

    Returns:
        np.random.Generator: A generator on the counter-based Philox bit generator.
    """
    logger.trace(f"RNG {RNG_NAME} seeded with {seed}")
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(seed: int, name: str) -> int:
    """Derive a stage or sub-task seed from the global seed.

    Returns:
        int: A 63-bit seed that depends only on ``seed`` and ``name``.
    """
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def file_sha256(path: Path) -> str:
    """Hash a file's contents.

    Returns:
        str: Hex sha256 digest.
    """
    sha = hashlib.sha256()
    with path.open("rb") as f:
        for block in iter(lambda: f.read(1024 * 1024), b""):
            sha.update(block)
    return sha.hexdigest()


def canonical_json(data: object) -> str:
    """Serialize to JSON with sorted keys so equal data hashes equally.

    >>> canonical_json({"b": 1, "a": [1, 2]})
    '{"a": [1, 2], "b": 1}'
    """
    return json.dumps(data, sort_keys=True, default=str)


def data_sha256(data: object) -> str:
    """Hash JSON-serializable data through its canonical form.

    Returns:
        str: Hex sha256 digest.
    """
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


@contextmanager
def staged_output(out_dir: Path, stage: str) -> Iterator[Path]:
    """Yield a scratch directory whose files move into ``out_dir`` only on success.

    Args:
        out_dir (Path): Final destination of the stage's files.
        stage (str): Stage name, used for the scratch directory name.

    Yields:
        Path: The scratch directory to write into.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch = out_dir / f".{stage}.partial"
    if scratch.exists():
        shutil.rmtree(scratch)
    scratch.mkdir()
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise

    _move_into(scratch, out_dir)
    scratch.rmdir()
    logger.trace(f"{stage}: outputs moved into {out_dir}")


def _move_into(source: Path, target_dir: Path) -> None:
    """Move the contents of ``source`` into ``target_dir``, merging subdirectories."""
    for item in sorted(source.iterdir()):
        target = target_dir / item.name
        if item.is_dir():
            if target.exists() and not target.is_dir():
                target.unlink()
            target.mkdir(exist_ok=True)
            _move_into(item, target)
            item.rmdir()
        else:
            item.replace(target)
