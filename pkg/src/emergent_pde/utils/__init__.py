"""Shared utilities."""

from .console import console
from .helpers import (
    canonical_json,
    data_sha256,
    derive_seed,
    existing_file_path,
    file_sha256,
    make_rng,
    require_inputs,
    staged_output,
)
from .logging import InterceptHandler, instantiate_logger, stage_context

__all__ = [
    "InterceptHandler",
    "canonical_json",
    "console",
    "data_sha256",
    "derive_seed",
    "existing_file_path",
    "file_sha256",
    "instantiate_logger",
    "make_rng",
    "require_inputs",
    "stage_context",
    "staged_output",
]
