"""Stage runner: input checks, atomic outputs, manifests and timings."""

import json
import time
from pathlib import Path

from loguru import logger
from pydantic import BaseModel, ConfigDict

from emergent_pde.config import EpdeConfig
from emergent_pde.constants import MANIFEST_FILE, SNAPSHOT_FILE, STAGES, TIMING_FILE, PlotKind
from emergent_pde.utils import (
    data_sha256,
    file_sha256,
    require_inputs,
    stage_context,
    staged_output,
)
from emergent_pde.utils.errors import ConfigError

from .coords import build_coords, coords_inputs
from .evaluate import evaluate, evaluate_inputs
from .generate import generate, generate_inputs
from .integrate import integrate_chart, integrate_inputs
from .learn import learn, learn_inputs
from .organize import organize_inputs, organize_tensor
from .plot import plot, plot_artifacts
from .scramble import scramble_inputs, scramble_tensor


class StageOptions(BaseModel):
    """Command-line options that only some stages read."""

    model_config = ConfigDict(frozen=True)

    dump: bool = False
    kind: PlotKind = PlotKind.SPACETIME
    artifact: Path | None = None
    color_by: str | None = None
    csv: bool = False


class Manifest(BaseModel):
    """Record of one stage run. Identical inputs and configuration give identical manifests."""

    stage: str
    seed: int
    config_sha256: str
    inputs: dict[str, str]
    outputs: dict[str, str]


def config_hash(cfg: EpdeConfig) -> str:
    """Hash of every setting that can change a stage's outputs.

    Paths, logging and the worker count are left out.
    """
    payload = cfg.model_dump(mode="json", exclude={"out_dir", "log_file", "log_to_file", "threads"})
    return data_sha256(payload)


def stage_inputs(name: str, cfg: EpdeConfig, options: StageOptions) -> list[Path]:
    """Files a stage reads."""
    match name:
        case "generate":
            return generate_inputs(cfg)
        case "scramble":
            return scramble_inputs(cfg)
        case "organize":
            return organize_inputs(cfg)
        case "coords":
            return coords_inputs(cfg)
        case "learn":
            return learn_inputs(cfg)
        case "integrate":
            return integrate_inputs(cfg)
        case "eval":
            return evaluate_inputs(cfg)
        case _:
            return plot_artifacts(cfg, options.kind, options.artifact)


def _execute(name: str, cfg: EpdeConfig, scratch: Path, options: StageOptions) -> None:
    match name:
        case "generate":
            generate(cfg, scratch)
        case "scramble":
            scramble_tensor(cfg, scratch)
        case "organize":
            organize_tensor(cfg, scratch, dump=options.dump)
        case "coords":
            build_coords(cfg, scratch)
        case "learn":
            learn(cfg, scratch)
        case "integrate":
            integrate_chart(cfg, scratch)
        case "eval":
            evaluate(cfg, scratch)
        case _:
            plot(cfg, scratch, options.kind, options.artifact, options.color_by, csv=options.csv)


def run_stage(name: str, cfg: EpdeConfig, options: StageOptions | None = None) -> Manifest:
    """Run one stage into ``cfg.out_dir`` and write its manifest and timing.

    Outputs are written to a scratch directory and moved into place only when the stage
    succeeds.

    Raises:
        ConfigError: If ``name`` is not a stage.
        MissingInputError: If an artifact of an earlier stage is absent.
    """
    options = options or StageOptions()
    if name not in STAGES:
        msg = f"unknown stage '{name}' (choose from {', '.join(STAGES)})"
        raise ConfigError(msg)
    inputs = stage_inputs(name, cfg, options)
    require_inputs(*inputs)

    logger.info(f"⇨ {name}")
    start = time.perf_counter()
    with stage_context(name), staged_output(cfg.out_dir, name) as scratch:
        _execute(name, cfg, scratch, options)
        outputs = {
            path.relative_to(scratch).as_posix(): file_sha256(path)
            for path in sorted(scratch.rglob("*"))
            if path.is_file()
        }
        manifest = Manifest(
            stage=name,
            seed=cfg.stage_seed(name),
            config_sha256=config_hash(cfg),
            inputs={path.name: file_sha256(path) for path in inputs},
            outputs=outputs,
        )
        (scratch / MANIFEST_FILE.format(name)).write_text(manifest.model_dump_json(indent=2) + "\n")
        timing = {"stage": name, "seconds": round(time.perf_counter() - start, 3)}
        (scratch / TIMING_FILE.format(name)).write_text(json.dumps(timing, indent=2) + "\n")

    logger.success(f"{name}: {len(outputs)} file(s) written to {cfg.out_dir}")
    return manifest


def run_all(cfg: EpdeConfig, options: StageOptions | None = None) -> list[Manifest]:
    """Run every stage in order, then render each configured plot kind.

    A ``cells`` plot is skipped when no vertex-model snapshot was generated.
    """
    options = options or StageOptions()
    manifests = [run_stage(name, cfg, options) for name in STAGES if name != "plot"]
    for kind in cfg.plot.kinds:
        if kind == PlotKind.CELLS and not (cfg.out_dir / SNAPSHOT_FILE).is_file():
            logger.warning("No vertex-model snapshot was generated; skipping the cells plot")
            continue
        plot_options = StageOptions(kind=kind, color_by=cfg.plot.color_by, csv=cfg.plot.csv)
        manifests.append(run_stage("plot", cfg, plot_options))
    return manifests
