"""
Neural Network Module
Sinc front-end acoustic model with hand-written forward and backward passes
"""

from .layers import (
    conv1d,
    maxpool1d,
    batchnorm,
    softmax,
    softmax_xent,
    normalize_frames,
)
from .model import (
    LayerSpec,
    ModelSpec,
    Model,
    LHUC_SITES,
    full_spec,
    toy_spec,
    output_lengths,
    layer_param_counts,
    count_parameters,
    build_model,
    model_forward,
    model_backward,
    param_count,
)
from .trainer import Trainer, evaluate_model, metrics_record
from .checkpoint import save_checkpoint, load_checkpoint, inspect_checkpoint, checkpoints_identical

__all__ = [
    'conv1d',
    'maxpool1d',
    'batchnorm',
    'softmax',
    'softmax_xent',
    'normalize_frames',
    'LayerSpec',
    'ModelSpec',
    'Model',
    'LHUC_SITES',
    'full_spec',
    'toy_spec',
    'output_lengths',
    'layer_param_counts',
    'count_parameters',
    'build_model',
    'model_forward',
    'model_backward',
    'param_count',
    'Trainer',
    'evaluate_model',
    'metrics_record',
    'save_checkpoint',
    'load_checkpoint',
    'inspect_checkpoint',
    'checkpoints_identical',
]
