"""Small deterministic feed-forward kernel with MAC accounting.

Tensors are plain float64 numpy arrays. 1-D convolution and pooling layers
operate on ``(length, channels)`` arrays; a 1-D input of shape ``(length,)``
is accepted by ``conv1d`` when it has a single input channel.

Only multiply-accumulates are counted. Bias additions, pooling, activations
and comparisons cost nothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError

Shape = tuple[int, ...]

LAYER_KINDS = ("dense", "conv1d", "maxpool1d", "avgpool_global", "relu", "softmax", "flatten")


@dataclass(frozen=True, eq=False)
class Layer:
    """One layer of a segment or exit branch.

    ``params`` holds kind-specific metadata (sizes, stride, padding) and
    ``weights`` / ``bias`` hold the arrays for ``dense`` and ``conv1d``.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense":
            if self.weights is None or self.weights.ndim != 2:
                raise ConfigError("dense layer needs a 2-D weight matrix (in, out)")
            if self.bias is not None and self.bias.shape != (self.weights.shape[1],):
                raise ConfigError(
                    f"dense bias has shape {self.bias.shape}, expected ({self.weights.shape[1]},)"
                )
        elif self.kind == "conv1d":
            if self.weights is None or self.weights.ndim != 3:
                raise ConfigError("conv1d layer needs a 3-D kernel (k, c_in, c_out)")
            if self.params.get("stride", 1) < 1:
                raise ConfigError("conv1d stride must be >= 1")
            if self.params.get("padding", "valid") not in ("valid", "same"):
                raise ConfigError("conv1d padding must be 'valid' or 'same'")
            if self.bias is not None and self.bias.shape != (self.weights.shape[2],):
                raise ConfigError(
                    f"conv1d bias has shape {self.bias.shape}, expected ({self.weights.shape[2]},)"
                )
        elif self.kind == "maxpool1d":
            size = self.params.get("size", 2)
            if size < 1 or self.params.get("stride", size) < 1:
                raise ConfigError("maxpool1d size and stride must be >= 1")

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.params == other.params
            and _array_eq(self.weights, other.weights)
            and _array_eq(self.bias, other.bias)
        )

    def describe(self) -> str:
        if self.kind == "dense":
            return f"dense({self.weights.shape[0]}->{self.weights.shape[1]})"
        if self.kind == "conv1d":
            k, cin, cout = self.weights.shape
            return f"conv1d(k={k}, {cin}->{cout}, stride={self.stride}, {self.padding})"
        return self.kind

    @property
    def stride(self) -> int:
        if self.kind == "maxpool1d":
            return int(self.params.get("stride", self.params.get("size", 2)))
        return int(self.params.get("stride", 1))

    @property
    def padding(self) -> str:
        return self.params.get("padding", "valid")


def _array_eq(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and bool(np.array_equal(a, b))


def dense(weights, bias=None) -> Layer:
    w = np.asarray(weights, dtype=np.float64)
    b = None if bias is None else np.asarray(bias, dtype=np.float64)
    return Layer("dense", weights=w, bias=b)


def conv1d(kernel, bias=None, stride: int = 1, padding: str = "valid") -> Layer:
    k = np.asarray(kernel, dtype=np.float64)
    b = None if bias is None else np.asarray(bias, dtype=np.float64)
    return Layer("conv1d", params={"stride": stride, "padding": padding}, weights=k, bias=b)


def maxpool1d(size: int = 2, stride: int | None = None) -> Layer:
    return Layer("maxpool1d", params={"size": size, "stride": size if stride is None else stride})


def simple(kind: str) -> Layer:
    return Layer(kind)


def _mismatch(layer: Layer, expected: str, actual: Shape) -> ConfigError:
    return ConfigError(f"{layer.describe()}: expected input shape {expected}, got {tuple(actual)}")


def _conv_geometry(layer: Layer, shape: Shape) -> tuple[int, int, int]:
    """Return (input length, output length, left padding) for a conv1d layer."""
    k, cin, _ = layer.weights.shape
    if len(shape) == 1 and cin == 1:
        length = shape[0]
    elif len(shape) == 2 and shape[1] == cin:
        length = shape[0]
    else:
        raise _mismatch(layer, f"(length, {cin})", shape)
    stride = layer.stride
    if layer.padding == "same":
        out = math.ceil(length / stride)
        total = max((out - 1) * stride + k - length, 0)
        left = total // 2
    else:
        if length < k:
            raise _mismatch(layer, f"(length >= {k}, {cin})", shape)
        out = (length - k) // stride + 1
        left = 0
    return length, out, left


def output_shape(layer: Layer, shape: Sequence[int]) -> Shape:
    shape = tuple(int(s) for s in shape)
    kind = layer.kind
    if kind == "dense":
        n_in, n_out = layer.weights.shape
        if shape != (n_in,):
            raise _mismatch(layer, f"({n_in},)", shape)
        return (n_out,)
    if kind == "conv1d":
        _, out, _ = _conv_geometry(layer, shape)
        return (out, layer.weights.shape[2])
    if kind == "maxpool1d":
        if len(shape) != 2:
            raise _mismatch(layer, "(length, channels)", shape)
        size = int(layer.params.get("size", 2))
        if shape[0] < size:
            raise _mismatch(layer, f"(length >= {size}, channels)", shape)
        return ((shape[0] - size) // layer.stride + 1, shape[1])
    if kind == "avgpool_global":
        if len(shape) != 2:
            raise _mismatch(layer, "(length, channels)", shape)
        return (shape[1],)
    if kind == "flatten":
        return (math.prod(shape),)
    if kind == "softmax" and len(shape) != 1:
        raise _mismatch(layer, "(classes,)", shape)
    return shape


def mac_cost(layer: Layer, input_shape: Sequence[int]) -> int:
    """Multiply-accumulate count of one layer applied to ``input_shape``."""
    out_shape = output_shape(layer, input_shape)
    if layer.kind == "dense":
        n_in, n_out = layer.weights.shape
        return n_in * n_out
    if layer.kind == "conv1d":
        k, cin, cout = layer.weights.shape
        return out_shape[0] * k * cin * cout
    return 0


def sequence_cost(layers: Sequence[Layer], input_shape: Sequence[int]) -> tuple[int, Shape]:
    """Total MACs of a layer sequence and its output shape."""
    total = 0
    shape = tuple(input_shape)
    for layer in layers:
        total += mac_cost(layer, shape)
        shape = output_shape(layer, shape)
    return total, shape


def softmax(scores) -> np.ndarray:
    x = np.asarray(scores, dtype=np.float64)
    e = np.exp(x - np.max(x))
    return e / e.sum()


def forward(layer: Layer, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out_shape = output_shape(layer, x.shape)
    kind = layer.kind
    if kind == "dense":
        y = x @ layer.weights
        return y if layer.bias is None else y + layer.bias
    if kind == "conv1d":
        return _conv1d(layer, x, out_shape)
    if kind == "maxpool1d":
        size, stride = int(layer.params.get("size", 2)), layer.stride
        idx = np.arange(out_shape[0])[:, None] * stride + np.arange(size)[None, :]
        return x[idx].max(axis=1)
    if kind == "avgpool_global":
        return x.mean(axis=0)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "softmax":
        return softmax(x)
    return x.reshape(-1)


def _conv1d(layer: Layer, x: np.ndarray, out_shape: Shape) -> np.ndarray:
    k, cin, _ = layer.weights.shape
    if x.ndim == 1:
        x = x[:, None]
    length, out, left = _conv_geometry(layer, x.shape)
    stride = layer.stride
    if layer.padding == "same":
        right = max((out - 1) * stride + k - length - left, 0)
        x = np.pad(x, ((left, right), (0, 0)))
    idx = np.arange(out)[:, None] * stride + np.arange(k)[None, :]
    windows = x[idx]  # (out, k, cin)
    y = np.tensordot(windows, layer.weights, axes=([1, 2], [0, 1]))
    if layer.bias is not None:
        y = y + layer.bias
    return y.reshape(out_shape)


def run_sequence(layers: Sequence[Layer], x) -> np.ndarray:
    for layer in layers:
        x = forward(layer, x)
    return x


# -- JSON (de)serialisation of single layers --------------------------------

def layer_to_dict(layer: Layer) -> dict:
    d: dict[str, Any] = {"kind": layer.kind}
    if layer.kind == "dense":
        n_in, n_out = layer.weights.shape
        d.update({"in": n_in, "out": n_out, "weights": layer.weights.ravel().tolist()})
    elif layer.kind == "conv1d":
        k, cin, cout = layer.weights.shape
        d.update(
            {
                "kernel_size": k,
                "in_channels": cin,
                "out_channels": cout,
                "stride": layer.stride,
                "padding": layer.padding,
                "weights": layer.weights.ravel().tolist(),
            }
        )
    elif layer.kind == "maxpool1d":
        d.update({"size": int(layer.params.get("size", 2)), "stride": layer.stride})
    if layer.bias is not None:
        d["bias"] = layer.bias.tolist()
    return d


def _flat(d: dict, key: str, shape: Shape, where: str) -> np.ndarray:
    try:
        arr = np.asarray(d[key], dtype=np.float64)
    except KeyError:
        raise ConfigError(f"{where}: missing field {key!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: field {key!r} is not a numeric array ({exc})") from None
    if arr.size != math.prod(shape):
        raise ConfigError(f"{where}: {key!r} has {arr.size} values, expected {math.prod(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}: {key!r} contains non-finite values")
    return arr.reshape(shape)


def layer_from_dict(d: dict, where: str = "layer") -> Layer:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{where}: layer object must carry a 'kind'")
    kind = d["kind"]
    try:
        if kind == "dense":
            shape = (int(d["in"]), int(d["out"]))
            w = _flat(d, "weights", shape, where)
            b = _flat(d, "bias", (shape[1],), where) if "bias" in d else None
            return Layer("dense", weights=w, bias=b)
        if kind == "conv1d":
            shape = (int(d["kernel_size"]), int(d["in_channels"]), int(d["out_channels"]))
            w = _flat(d, "weights", shape, where)
            b = _flat(d, "bias", (shape[2],), where) if "bias" in d else None
            params = {"stride": int(d.get("stride", 1)), "padding": d.get("padding", "valid")}
            return Layer("conv1d", params=params, weights=w, bias=b)
        if kind == "maxpool1d":
            size = int(d.get("size", 2))
            return Layer("maxpool1d", params={"size": size, "stride": int(d.get("stride", size))})
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from None
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    try:
        return Layer(kind)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
