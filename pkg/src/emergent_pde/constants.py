"""Constants for emergent-pde."""

import os
from enum import Enum
from pathlib import Path

PACKAGE_NAME = __package__.replace("_", "-").replace(".", "-").replace(" ", "-")
CONFIG_DIR = Path(os.getenv("XDG_CONFIG_HOME", "~/.config")).expanduser().absolute() / PACKAGE_NAME
STATE_DIR = (
    Path(os.getenv("XDG_STATE_HOME", "~/.local/state")).expanduser().absolute() / PACKAGE_NAME
)
CONFIG_PATH = CONFIG_DIR / "config.toml"


class Axis(str, Enum):
    """Tensor axes. Values are the single-letter names used in files and configs."""

    PARAMETER = "p"
    TIME = "t"
    SPACE = "s"

    @property
    def index(self) -> int:
        """Position of the axis in a (p, t, s) tensor.

        >>> Axis("t").index
        1
        """
        return list(Axis).index(self)


class Activation(str, Enum):
    """Hidden-layer activations."""

    SWISH = "swish"
    TANH = "tanh"


class Normalization(str, Enum):
    """Diffusion-map operator variants."""

    ROW_STOCHASTIC = "row-stochastic"
    SYMMETRIC = "symmetric"


class LevelWeighting(str, Enum):
    """Questionnaire level weights."""

    MULTISCALE = "multiscale"
    UNIFORM = "uniform"
    NONE = "none"


class Scheme(str, Enum):
    """Explicit time-stepping schemes for the learned PDE."""

    RK4 = "rk4"
    EULER = "euler"


class GeneratorKind(str, Enum):
    """Ground-truth generators."""

    CHAFEE_INFANTE = "chafee-infante"
    SIGNAL_ENSEMBLE = "signal-ensemble"


class PlotKind(str, Enum):
    """Kinds of SVG the plot stage renders."""

    SPACETIME = "spacetime"
    EMBEDDING = "embedding"
    LOSS = "loss"
    REPORT = "report"
    CELLS = "cells"


class NodeTag(int, Enum):
    """Roles of emergent-space grid nodes during learning and integration."""

    INTERIOR = 0
    BOUNDARY_CORRIDOR = 1
    SOURCE_CORRIDOR = 2


STAGES = ("generate", "scramble", "organize", "coords", "learn", "integrate", "eval", "plot")

# Artifact names inside out_dir; {} is an axis letter
TENSOR_FILE = "tensor.epde"
SNAPSHOT_FILE = "snapshot.csv"
SCRAMBLED_FILE = "scrambled.epde"
EMBEDDING_FILE = "embedding_{}.csv"
ORGANIZATION_FILE = "organization.json"
DUMP_DIR = "quest"
PLOTS_DIR = "plots"
COORD_FILE = "coord_{}.json"
IMPUTED_FILE = "imputed.epde"
CHART_FILE = "chart.epde"
MODEL_FILE = "{}.model"
LOSS_FILE = "{}.loss.csv"
PREDICTION_FILE = "prediction.epde"
REPORT_FILE = "report.json"
MANIFEST_FILE = "{}.manifest.json"
TIMING_FILE = "{}.timing.json"

TENSOR_MAGIC = b"EPDE"
TENSOR_VERSION = 1
MODEL_MAGIC = b"EPDM"
MODEL_VERSION = 1

# Philox is counter-based and versioned with numpy's bit-generator API
RNG_NAME = "numpy.random.Philox/4x64-10"

SYMBOL_CHECK = "✓"

MIN_CHANNELS = 4
MAX_ABS_CHAFEE_INFANTE = 10.0
BLOWUP_FACTOR = 10.0

EXIT_NUMERICAL = 1
EXIT_USAGE = 2

VERSION = "0.1.0"
