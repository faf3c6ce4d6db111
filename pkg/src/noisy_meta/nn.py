"""Flat-parameter MLP with hand-written reverse mode.

Parameters of a network live in one contiguous float64 vector. For every layer
the weight matrix (``fan_in x fan_out``, row-major) is followed by its bias; the
optional classification head is the last layer. Hidden layers use the chosen
activation, the embedding layer and the head are linear.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetworkSpec:
    layer_widths: tuple
    activation: str = "relu"
    head_width: Optional[int] = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("layer_widths needs at least an input and an output width")
        if min(widths) < 1:
            raise ValueError(f"layer widths must be positive, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.head_width is not None:
            if int(self.head_width) < 1:
                raise ValueError("head_width must be positive")
            object.__setattr__(self, "head_width", int(self.head_width))

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def embedding_dim(self) -> int:
        return self.layer_widths[-1]

    @property
    def output_dim(self) -> int:
        return self.head_width if self.head_width is not None else self.embedding_dim

    def layer_shapes(self) -> list[tuple[int, int]]:
        w = self.layer_widths
        shapes = [(w[i], w[i + 1]) for i in range(len(w) - 1)]
        if self.head_width is not None:
            shapes.append((w[-1], self.head_width))
        return shapes

    @property
    def num_params(self) -> int:
        return sum(a * b + b for a, b in self.layer_shapes())

    def head_slice(self) -> slice:
        """Slice of the flat vector holding the head's weights and bias."""
        if self.head_width is None:
            raise ValueError("network has no head")
        a, b = self.embedding_dim, self.head_width
        n = self.num_params
        return slice(n - (a * b + b), n)

    def with_head(self, n_out: Optional[int]) -> "NetworkSpec":
        return NetworkSpec(self.layer_widths, self.activation, n_out)

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activation": self.activation,
            "head_width": self.head_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(tuple(d["layer_widths"]), d.get("activation", "relu"), d.get("head_width"))


def unflatten(params: np.ndarray, spec: NetworkSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views ``[(W, b), ...]`` into ``params``; no copy."""
    params = np.asarray(params)
    if params.shape != (spec.num_params,):
        raise ValueError(f"expected {spec.num_params} parameters, got shape {params.shape}")
    layers = []
    off = 0
    for a, b in spec.layer_shapes():
        W = params[off:off + a * b].reshape(a, b)
        off += a * b
        bias = params[off:off + b]
        off += b
        layers.append((W, bias))
    return layers


def flatten(layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for W, b in layers:
        parts.append(np.asarray(W, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts)


def init_network(spec: NetworkSpec, seed) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for a, b in spec.layer_shapes():
        bound = 1.0 / np.sqrt(a)
        layers.append((rng.uniform(-bound, bound, size=(a, b)), np.zeros(b)))
    return flatten(layers)


class Trace:
    """Activations recorded by :func:`forward`, consumed by :func:`backward`."""

    __slots__ = ("spec", "layers", "inputs", "pre")

    def __init__(self, spec, layers, inputs, pre):
        self.spec = spec
        self.layers = layers
        self.inputs = inputs  # input to each layer
        self.pre = pre  # pre-activation of each hidden layer (None for linear layers)


def _activate(kind, x):
    if kind == "relu":
        return np.maximum(x, 0.0)
    return np.tanh(x)


def _activate_grad(kind, pre, out, g):
    if kind == "relu":
        return g * (pre > 0)
    return g * (1.0 - out * out)


def forward(params: np.ndarray, spec: NetworkSpec, inputs) -> tuple[np.ndarray, Trace]:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"inputs must have shape (batch, {spec.input_dim}), got {np.shape(inputs)}")
    layers = unflatten(params, spec)
    n_backbone = len(spec.layer_widths) - 1
    ins, pres = [], []
    h = x
    for i, (W, b) in enumerate(layers):
        ins.append(h)
        z = h @ W + b
        if i < n_backbone - 1:
            pres.append(z)
            h = _activate(spec.activation, z)
        else:
            pres.append(None)
            h = z
    return h, Trace(spec, layers, ins, pres)


def backward(trace: Trace, output_grad) -> np.ndarray:
    """Gradient w.r.t. the flat parameters of ``sum(output_grad * outputs)``."""
    g = np.asarray(output_grad, dtype=np.float64)
    spec = trace.spec
    batch = trace.inputs[0].shape[0]
    if g.shape != (batch, spec.output_dim):
        raise ValueError(f"output_grad must have shape {(batch, spec.output_dim)}, got {g.shape}")
    grads = [None] * len(trace.layers)
    for i in range(len(trace.layers) - 1, -1, -1):
        W, _ = trace.layers[i]
        if trace.pre[i] is not None:
            # outputs of this layer are the inputs of the next one
            g = _activate_grad(spec.activation, trace.pre[i], trace.inputs[i + 1], g)
        grads[i] = (trace.inputs[i].T @ g, g.sum(axis=0))
        if i > 0:
            g = g @ W.T
    return flatten(grads)


def input_grad(trace: Trace, output_grad) -> np.ndarray:
    """Gradient w.r.t. the network inputs (used by tests only)."""
    g = np.asarray(output_grad, dtype=np.float64)
    for i in range(len(trace.layers) - 1, -1, -1):
        W, _ = trace.layers[i]
        if trace.pre[i] is not None:
            g = _activate_grad(trace.spec.activation, trace.pre[i], trace.inputs[i + 1], g)
        g = g @ W.T
    return g


def cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy; ``labels`` are 0-based class indices."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError("one label per logit row expected")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c}), got range [{labels.min()}, {labels.max()}]")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logz - shifted[rows, labels]))
    grad = np.exp(shifted - logz[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n


def sgd_step(params, grad, lr: float) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape:
        raise ValueError(f"length mismatch: params {params.shape} vs grad {grad.shape}")
    return params - lr * grad


def finite_diff_grad(loss_fn: Callable[[np.ndarray], float], params, h: float = 1e-5) -> np.ndarray:
    params = np.array(params, dtype=np.float64)
    out = np.empty_like(params)
    for i in range(params.size):
        old = params[i]
        params[i] = old + h
        fp = loss_fn(params)
        params[i] = old - h
        fm = loss_fn(params)
        params[i] = old
        out[i] = (fp - fm) / (2.0 * h)
    return out


def hvp(loss_fn_grad: Callable[[np.ndarray], np.ndarray], params, v, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian-vector product ``(g(p + h v) - g(p - h v)) / 2h``."""
    params = np.asarray(params, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not np.any(v):
        return np.zeros_like(params)
    return (loss_fn_grad(params + h * v) - loss_fn_grad(params - h * v)) / (2.0 * h)


def ce_loss_and_grad(params, spec: NetworkSpec, x, labels) -> tuple[float, np.ndarray]:
    logits, trace = forward(params, spec, x)
    loss, g = cross_entropy(logits, labels)
    return loss, backward(trace, g)
