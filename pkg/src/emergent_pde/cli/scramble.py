"""Scramble command for emergent-pde."""

from pathlib import Path

from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import SCRAMBLED_FILE, TENSOR_FILE
from emergent_pde.models import load_tensor, mask_entries, read_sidecar, save_tensor, scramble


def scramble_inputs(cfg: EpdeConfig) -> list[Path]:
    """The generated tensor."""
    return [cfg.out_dir / TENSOR_FILE]


def scramble_tensor(cfg: EpdeConfig, scratch: Path) -> None:
    """Drop and shuffle channels; the answer key travels in the sidecar of ``scrambled.epde``.

    With ``scramble.mask_fraction`` a random share of the kept entries is then hidden
    behind the mask, for the coords stage to impute.
    """
    source = cfg.out_dir / TENSOR_FILE
    tensor = load_tensor(source)
    block = cfg.scramble
    scrambled, record = scramble(
        tensor,
        block.axes,
        block.drop_fraction,
        seed=cfg.stage_seed("scramble"),
        identity=block.identity,
    )
    scrambled = mask_entries(scrambled, block.mask_fraction, seed=cfg.stage_seed("mask"))
    save_tensor(
        scrambled, scratch / SCRAMBLED_FILE, record=record, extra=read_sidecar(source).extra
    )
    logger.debug(f"Scrambled {tensor.dims} into {scrambled.dims}, {scrambled.n_missing} entries masked")
