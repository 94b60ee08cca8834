"""Domain models."""

from .cluster_tree import ClusterTree
from .data_tensor import (
    AxisMeta,
    DataTensor,
    ScrambleRecord,
    apply_record,
    load_tensor,
    mask_entries,
    read_sidecar,
    save_tensor,
    scramble,
    sidecar_path,
    unscramble,
)
from .embedding import DiffusionConfig, Embedding
from .emergent import EmergentChart, EmergentCoordinate, FeatureSet
from .mlp import MlpModel, TrainConfig, TrainHistory, swish
from .organization import Organization, QuestConfig, QuestState
from .parameters import (
    ChafeeInfanteConfig,
    MechParams,
    ParameterSample,
    SamplingConfig,
    SignalParams,
    StoppingTimeRule,
)
from .vertex import Backbone, RestGeometry, VertexState

__all__ = [
    "AxisMeta",
    "Backbone",
    "ChafeeInfanteConfig",
    "ClusterTree",
    "DataTensor",
    "DiffusionConfig",
    "Embedding",
    "EmergentChart",
    "EmergentCoordinate",
    "FeatureSet",
    "MechParams",
    "MlpModel",
    "Organization",
    "ParameterSample",
    "QuestConfig",
    "QuestState",
    "RestGeometry",
    "SamplingConfig",
    "ScrambleRecord",
    "SignalParams",
    "StoppingTimeRule",
    "TrainConfig",
    "TrainHistory",
    "VertexState",
    "apply_record",
    "load_tensor",
    "mask_entries",
    "read_sidecar",
    "save_tensor",
    "scramble",
    "sidecar_path",
    "swish",
    "unscramble",
]
