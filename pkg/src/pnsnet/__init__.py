"""Normalized self-attention (NS) blocks and a progressive NS stack for video segmentation."""
from .data import ClipBatch, SynthConfig, gen_synth_dataset
from .metrics import MetricResult, dice, iou, mae, max_metric_sweep, specificity
from .model import (
    AdamState,
    ModelConfig,
    PnsStack,
    ToyModel,
    TrainConfig,
    adam_step,
    bce_loss,
    infer,
    init_model,
    load_checkpoint,
    model_forward,
    pns_forward,
    save_checkpoint,
    train,
)
from .ns_block import (
    NsParams,
    aggregate,
    ns_backward,
    ns_forward,
    relevance,
    sample_neighborhood,
    soft_attention_map,
)
from .tensor import (
    DegenerateRowError,
    DimensionError,
    LinearWeights,
    SplitError,
    channel_split,
    concat_channels,
    layer_norm_temporal,
    linear_embed,
    rowwise_max,
    softmax_rows,
)

__version__ = "0.1.0"
