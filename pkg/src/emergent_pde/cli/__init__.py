"""Pipeline stages."""

from .pipeline import Manifest, StageOptions, config_hash, run_all, run_stage, stage_inputs

__all__ = ["Manifest", "StageOptions", "config_hash", "run_all", "run_stage", "stage_inputs"]
