"""From-scratch 3D convolutional surrogate: forward pass, analytic
backpropagation, Adam training, prediction and feature-map export."""

from .model import (  # noqa: F401
    ConvLayer,
    CnnModel,
    backward,
    feature_maps,
    forward,
    init_model,
    load_checkpoint,
    param_count,
    save_checkpoint,
)
from .ops import conv3d, conv3d_reference, leaky_relu  # noqa: F401
from .pipeline import predict, predict_batch  # noqa: F401
from .training import (  # noqa: F401
    AdamState,
    TrainConfig,
    adam_step,
    half_mse,
    half_mse_sum,
    train,
)
