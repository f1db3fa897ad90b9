"""IncepFormerNet architecture, parameter initialization and checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig
from .network import (
    ForwardContext,
    ModelParams,
    channel_fusion_forward,
    classifier_forward,
    extract_features,
    former_module_forward,
    init_params,
    model_forward,
    predict_logits,
    predict_proba,
    scale_block_forward,
    temporal_module_forward,
)

__all__ = [
    "ForwardContext",
    "ModelConfig",
    "ModelParams",
    "channel_fusion_forward",
    "classifier_forward",
    "extract_features",
    "former_module_forward",
    "init_params",
    "load_checkpoint",
    "model_forward",
    "predict_logits",
    "predict_proba",
    "save_checkpoint",
    "scale_block_forward",
    "temporal_module_forward",
]
