"""Organize command for emergent-pde."""

import json
from pathlib import Path

from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import (
    DUMP_DIR,
    EMBEDDING_FILE,
    ORGANIZATION_FILE,
    SCRAMBLED_FILE,
    Axis,
)
from emergent_pde.models import load_tensor
from emergent_pde.questionnaire import dump_state, organize_3d, organize_matrix
from emergent_pde.utils import console


def organize_inputs(cfg: EpdeConfig) -> list[Path]:
    """The scrambled tensor."""
    return [cfg.out_dir / SCRAMBLED_FILE]


def organize_tensor(cfg: EpdeConfig, scratch: Path, *, dump: bool = False) -> None:
    """Recover the geometry of every axis and write one embedding per axis.

    A tensor with a single parameter slab is organized as a (time, space) matrix.

    Args:
        cfg: Pipeline configuration.
        scratch: Directory receiving the outputs.
        dump: Also write the final trees and distance matrices.
    """
    tensor = load_tensor(cfg.out_dir / SCRAMBLED_FILE)
    block = cfg.organize

    if tensor.dims[0] == 1:
        if tensor.n_missing:
            logger.warning(
                f"{tensor.n_missing} missing entries filled with the observed mean before organizing"
            )
        organization = organize_matrix(tensor.filled()[0], block.quest, block.diffusion)
    else:
        organization = organize_3d(tensor, block.quest, block.diffusion)

    for axis, embedding in organization.embeddings.items():
        embedding.save(scratch / EMBEDDING_FILE.format(axis.value))
        console.print(embedding.as_table(title=f"Axis '{axis.value}'"))

    state = organization.state
    names = [axis.value for axis in Axis][-len(state.history) :]
    summary = {
        "sweeps": state.iteration,
        "history": dict(zip(names, state.history, strict=True)),
        "errors": {axis.value: message for axis, message in organization.errors.items()},
    }
    (scratch / ORGANIZATION_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    if dump:
        dump_state(state, scratch / DUMP_DIR, names)
