"""Generate command for emergent-pde."""

from pathlib import Path

import numpy as np
from loguru import logger

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import SNAPSHOT_FILE, TENSOR_FILE, GeneratorKind
from emergent_pde.generators import (
    generate_ensemble,
    relaxed_ring,
    sample_parameters,
    simulate_signal,
    solve_chafee_infante,
    with_sample,
)
from emergent_pde.models import ParameterSample, save_tensor
from emergent_pde.utils import console, derive_seed
from emergent_pde.vertex_model import export_snapshot


def generate_inputs(cfg: EpdeConfig) -> list[Path]:  # noqa: ARG001
    """The generator reads nothing from disk."""
    return []


def generate(cfg: EpdeConfig, scratch: Path) -> None:
    """Simulate the configured ground truth and write it as ``tensor.epde``.

    With vertex-model coupling enabled, the relaxed ring of the first ensemble member is
    exported as ``snapshot.csv`` together with its most concentrated frame.
    """
    block = cfg.generate
    seed = cfg.stage_seed("generate")

    if block.kind == GeneratorKind.CHAFEE_INFANTE:
        tensor = solve_chafee_infante(block.chafee_infante)
    else:
        samples = sample_parameters(
            block.n_samples, derive_seed(seed, "sampling"), block.sampling, block.stopping
        )
        coupling = block.mechanics if block.mechanics.enabled else None
        tensor = generate_ensemble(
            samples,
            block.signal,
            block.n_out_times,
            layout=block.layout,
            coupling=coupling,
            seed=seed,
            workers=cfg.threads,
        )
        if coupling is not None:
            _snapshot(samples[0], cfg, seed, scratch / SNAPSHOT_FILE)

    console.print(tensor.as_table())
    save_tensor(tensor, scratch / TENSOR_FILE, extra={"generator": block.kind.value})
    logger.debug(f"Generated {block.kind.value} tensor {tensor.dims}")


def _snapshot(sample: ParameterSample, cfg: EpdeConfig, seed: int, path: Path) -> Path:
    block = cfg.generate
    field = simulate_signal(with_sample(block.signal, sample), n_out=block.n_out_times)
    frame = field[int(np.argmax(field.sum(axis=1)))]
    state = relaxed_ring(0, seed, block.signal.n_cells, block.mechanics)
    return export_snapshot(state, frame, path)
