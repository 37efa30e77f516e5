"""Network definition, forward/backward passes and checkpoints.

Architecture: K blocks of (valid conv, per-channel standardization
without learnable affine, leaky ReLU), a flatten, and one fully
connected output neuron.  The scalar target is z-scored during
training and de-normalized at prediction time.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, DimensionError, UsageError, ValidationError
from . import ops

CHECKPOINT_MAGIC = b"ARCK"
FORMAT_VERSION = 1

DEFAULT_DELTAS = (4, 3, 3, 3)
DEFAULT_CHANNELS = (5, 10, 15, 20)
DEFAULT_BN_EPS = 1e-5
DEFAULT_LEAK = 0.01
DEFAULT_BN_MOMENTUM = 0.1


@dataclass
class ConvLayer:
    weights: np.ndarray          # (c_out, c_in, d, d, d)
    bias: np.ndarray             # (c_out,)
    bn_eps: float = DEFAULT_BN_EPS
    leak: float = DEFAULT_LEAK
    bn_momentum: float = DEFAULT_BN_MOMENTUM
    running_mean: np.ndarray = field(default=None)
    running_var: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.weights.ndim != 5:
            raise DimensionError("conv weights must be 5D")
        d = self.weights.shape[2]
        if self.weights.shape[3] != d or self.weights.shape[4] != d:
            raise DimensionError("kernels must be cubic")
        if not 0 < self.leak < 1:
            raise ValidationError("leak must lie in (0, 1)")
        if self.bn_eps <= 0:
            raise ValidationError("bn_eps must be positive")
        co = self.weights.shape[0]
        if self.running_mean is None:
            self.running_mean = np.zeros(co)
        if self.running_var is None:
            self.running_var = np.ones(co)

    @property
    def delta(self) -> int:
        return self.weights.shape[2]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]


@dataclass
class CnnModel:
    layers: list[ConvLayer]
    fc_weights: np.ndarray       # (flat_len,)
    fc_bias: float
    input_dims: tuple[int, int, int]
    input_bounds: tuple[tuple[float, float], ...]
    target_label: str
    norm_mean: float = 0.0
    norm_std: float = 1.0
    seed: int = 0

    @property
    def dtype(self):
        return self.fc_weights.dtype

    @property
    def deltas(self) -> tuple[int, ...]:
        return tuple(l.delta for l in self.layers)

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(l.out_channels for l in self.layers)

    def block_dims(self) -> list[tuple[int, int, int]]:
        """Spatial dims after each conv block."""
        dims = tuple(self.input_dims)
        out = []
        for l in self.layers:
            dims = ops.out_shape(dims, l.delta)
            out.append(dims)
        return out

    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in checkpoint order (fc bias last as a
        1-element array view is not possible; handled by training)."""
        params = []
        for l in self.layers:
            params.append(l.weights)
            params.append(l.bias)
        params.append(self.fc_weights)
        return params


def flatten_length(input_dims, deltas=DEFAULT_DELTAS, channels=DEFAULT_CHANNELS) -> int:
    dims = tuple(input_dims)
    for d in deltas:
        dims = ops.out_shape(dims, d)
    return int(np.prod(dims)) * channels[-1]


def param_count_arch(input_dims, deltas=DEFAULT_DELTAS, channels=DEFAULT_CHANNELS) -> int:
    """Trainable parameter count: conv kernels and biases plus the
    fully connected row and its bias.  Normalization layers carry no
    trainable parameters."""
    count = 0
    c_in = 1
    for d, c_out in zip(deltas, channels):
        count += d**3 * c_in * c_out + c_out
        c_in = c_out
    count += flatten_length(input_dims, deltas, channels) + 1
    return count


def param_count(model: CnnModel) -> int:
    return param_count_arch(model.input_dims, model.deltas, model.channels)


def init_model(
    input_dims,
    input_bounds,
    target_label: str,
    deltas=DEFAULT_DELTAS,
    channels=DEFAULT_CHANNELS,
    seed: int = 0,
    dtype=np.float64,
    bn_eps: float = DEFAULT_BN_EPS,
    leak: float = DEFAULT_LEAK,
) -> CnnModel:
    """Seeded Glorot-uniform initialization, zero biases."""
    rng = np.random.default_rng(seed)
    dtype = np.dtype(dtype)
    layers = []
    c_in = 1
    for d, c_out in zip(deltas, channels):
        fan_in = c_in * d**3
        fan_out = c_out * d**3
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-lim, lim, size=(c_out, c_in, d, d, d)).astype(dtype)
        layers.append(
            ConvLayer(
                weights=w,
                bias=np.zeros(c_out, dtype=dtype),
                bn_eps=bn_eps,
                leak=leak,
            )
        )
        c_in = c_out
    flat = flatten_length(input_dims, deltas, channels)
    lim = np.sqrt(6.0 / (flat + 1))
    fc_w = rng.uniform(-lim, lim, size=flat).astype(dtype)
    return CnnModel(
        layers=layers,
        fc_weights=fc_w,
        fc_bias=0.0,
        input_dims=tuple(int(v) for v in input_dims),
        input_bounds=tuple(tuple(float(v) for v in b) for b in input_bounds),
        target_label=target_label,
        seed=seed,
    )


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]       # conv input per layer
    centered: list[np.ndarray]
    var: list[np.ndarray]
    denom: list[np.ndarray]
    bn_out: list[np.ndarray]
    flat: np.ndarray
    pred_norm: np.ndarray


def forward(
    model: CnnModel, batch: np.ndarray, training: bool = False
):
    """Run the network on a batch of level-set tensors.

    ``batch`` has shape (B, m, n, p).  Returns (predictions, cache);
    the cache is None in inference mode.  Training mode uses batch
    statistics for the standardization and updates each layer's
    running statistics; inference mode uses the running statistics so
    single samples are well defined.
    """
    batch = np.asarray(batch)
    if batch.ndim == 3:
        batch = batch[None]
    if batch.shape[1:] != tuple(model.input_dims):
        raise DimensionError(
            f"input dims {batch.shape[1:]} do not match model {model.input_dims}"
        )
    if training and batch.shape[0] < 2:
        raise ValidationError("training-mode forward needs a batch of at least 2")
    x = np.ascontiguousarray(batch[:, None], dtype=model.dtype)

    cache = ForwardCache([], [], [], [], [], None, None) if training else None
    for li, layer in enumerate(model.layers):
        if x.shape[2] < layer.delta or x.shape[3] < layer.delta or x.shape[4] < layer.delta:
            raise DimensionError(
                f"layer {li + 1}: input {x.shape[2:]} smaller than kernel {layer.delta}"
            )
        g = ops.conv3d(x, layer.weights, layer.bias)
        if training:
            bn, mean, var, centered, denom = ops.batch_norm_forward(g, layer.bn_eps)
            mom = layer.bn_momentum
            layer.running_mean = (1.0 - mom) * layer.running_mean + mom * mean
            layer.running_var = (1.0 - mom) * layer.running_var + mom * var
            cache.inputs.append(x)
            cache.centered.append(centered)
            cache.var.append(var)
            cache.denom.append(denom)
            cache.bn_out.append(bn)
        else:
            bn = ops.batch_norm_inference(
                g, layer.running_mean, layer.running_var, layer.bn_eps
            )
        x = ops.leaky_relu(bn, layer.leak)

    flat = x.reshape(x.shape[0], -1)
    pred_norm = flat @ model.fc_weights + model.dtype.type(model.fc_bias)
    pred = pred_norm * model.dtype.type(model.norm_std) + model.dtype.type(model.norm_mean)
    if training:
        cache.flat = flat
        cache.pred_norm = pred_norm
    return pred, cache


@dataclass
class Gradients:
    conv: list[tuple[np.ndarray, np.ndarray]]
    fc_weights: np.ndarray
    fc_bias: float

    def arrays(self) -> list[np.ndarray]:
        out = []
        for gw, gb in self.conv:
            out.append(gw)
            out.append(gb)
        out.append(self.fc_weights)
        return out


def backward(model: CnnModel, cache: ForwardCache, d_pred_norm: np.ndarray) -> Gradients:
    """Analytic gradients of every trainable parameter given the loss
    gradient with respect to the normalized predictions."""
    if cache is None or cache.flat is None:
        raise UsageError("backward requires the cache from a training-mode forward")
    d_pred_norm = d_pred_norm.astype(model.dtype)
    g_fc_w = cache.flat.T @ d_pred_norm
    g_fc_b = float(d_pred_norm.sum(dtype=np.float64))
    d_flat = np.outer(d_pred_norm, model.fc_weights)

    last_dims = model.block_dims()[-1]
    d_act = d_flat.reshape(
        (-1, model.channels[-1]) + last_dims
    )
    conv_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.layers)
    for li in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[li]
        d_pre = d_act * ops.leaky_relu_grad(cache.bn_out[li], layer.leak)
        d_g = ops.batch_norm_backward(
            d_pre, cache.centered[li], cache.var[li], cache.denom[li], layer.bn_eps
        )
        gw, gb = ops.conv3d_grad_weights(cache.inputs[li], d_g, layer.delta)
        conv_grads[li] = (gw, gb)
        if li > 0:
            d_act = ops.conv3d_grad_input(d_g, layer.weights, cache.inputs[li].shape)
    return Gradients(conv=conv_grads, fc_weights=g_fc_w, fc_bias=g_fc_b)


def feature_maps(
    model: CnnModel, field: np.ndarray, layer_index: int, kernel_index: int
) -> np.ndarray:
    """Post-activation map of one kernel for one input, inference
    statistics.  Indices are 0-based."""
    if not 0 <= layer_index < len(model.layers):
        raise ValidationError(
            f"layer_index must be in [0, {len(model.layers) - 1}]"
        )
    if not 0 <= kernel_index < model.layers[layer_index].out_channels:
        raise ValidationError(
            f"kernel_index must be in [0, {model.layers[layer_index].out_channels - 1}]"
        )
    x = np.ascontiguousarray(np.asarray(field)[None, None], dtype=model.dtype)
    for li, layer in enumerate(model.layers[: layer_index + 1]):
        g = ops.conv3d(x, layer.weights, layer.bias)
        bn = ops.batch_norm_inference(
            g, layer.running_mean, layer.running_var, layer.bn_eps
        )
        x = ops.leaky_relu(bn, layer.leak)
    return np.asarray(x[0, kernel_index], dtype=float)


# ---------------------------------------------------------------------------
# Checkpoints: magic, u64 header length, JSON header, then all arrays
# as little-endian float64 in header-documented order.

def _model_arrays(model: CnnModel) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, l in enumerate(model.layers):
        out.append((f"layer{i}.weights", l.weights))
        out.append((f"layer{i}.bias", l.bias))
        out.append((f"layer{i}.running_mean", l.running_mean))
        out.append((f"layer{i}.running_var", l.running_var))
    out.append(("fc.weights", model.fc_weights))
    out.append(("fc.bias", np.array([model.fc_bias])))
    return out


def save_checkpoint(model: CnnModel, path, train_config: dict | None = None) -> None:
    arrays = _model_arrays(model)
    header = {
        "format_version": FORMAT_VERSION,
        "target_label": model.target_label,
        "input_dims": list(model.input_dims),
        "input_bounds": [list(b) for b in model.input_bounds],
        "deltas": list(model.deltas),
        "channels": list(model.channels),
        "bn_eps": model.layers[0].bn_eps,
        "leak": model.layers[0].leak,
        "bn_momentum": model.layers[0].bn_momentum,
        "norm_mean": model.norm_mean,
        "norm_std": model.norm_std,
        "dtype": model.dtype.name,
        "seed": model.seed,
        "train_config": train_config,
        "sections": [
            {"name": name, "shape": list(arr.shape)} for name, arr in arrays
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for _, arr in arrays:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[CnnModel, dict]:
    """Rebuild a model from a checkpoint; returns (model, header)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a model checkpoint")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode())
        payload = f.read()
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version")
    dtype = np.dtype(header["dtype"])
    offset = 0
    arrays = {}
    for sec in header["sections"]:
        n = int(np.prod(sec["shape"])) if sec["shape"] else 1
        raw = np.frombuffer(payload, dtype="<f8", count=n, offset=offset)
        arrays[sec["name"]] = raw.reshape(sec["shape"]).copy()
        offset += n * 8
    if offset != len(payload):
        raise DataError(f"{path}: trailing bytes in checkpoint payload")

    layers = []
    for i in range(len(header["deltas"])):
        layers.append(
            ConvLayer(
                weights=arrays[f"layer{i}.weights"].astype(dtype),
                bias=arrays[f"layer{i}.bias"].astype(dtype),
                bn_eps=header["bn_eps"],
                leak=header["leak"],
                bn_momentum=header["bn_momentum"],
                running_mean=arrays[f"layer{i}.running_mean"],
                running_var=arrays[f"layer{i}.running_var"],
            )
        )
    model = CnnModel(
        layers=layers,
        fc_weights=arrays["fc.weights"].astype(dtype),
        fc_bias=float(arrays["fc.bias"][0]),
        input_dims=tuple(header["input_dims"]),
        input_bounds=tuple(tuple(b) for b in header["input_bounds"]),
        target_label=header["target_label"],
        norm_mean=header["norm_mean"],
        norm_std=header["norm_std"],
        seed=header["seed"],
    )
    return model, header
