"""Small feed-forward networks with analytic backpropagation.

Parameters live in one flat float64 vector (a "ParamVec"), laid out layer by
layer as the row-major weight matrix ``(fan_in, fan_out)`` followed by the
bias. Both the generator and the discriminator are plain :class:`Mlp` values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from dgan.rng import generator

HIDDEN_ACTIVATIONS = ("tanh", "relu", "leaky_relu")
OUTPUT_ACTIVATIONS = ("identity", "sigmoid")

# Sigmoid outputs are clamped so log(D) and log(1 - D) stay finite.
PROB_EPS = 1e-7


class NonFiniteError(FloatingPointError):
    """Raised when an update produces NaN or Inf parameters."""


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "leaky_relu"
    output_activation: str = "identity"
    leaky_slope: float = 0.2

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError(f"need at least 2 layer sizes, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be >= 1, got {sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]


def parameter_count(spec: MlpSpec) -> int:
    s = spec.layer_sizes
    return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))


def unflatten(values: np.ndarray, spec: MlpSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into ``[(W, b), ...]`` views (no copies)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size != parameter_count(spec):
        raise ValueError(
            f"parameter vector has shape {values.shape}, expected ({parameter_count(spec)},)"
        )
    layers = []
    off = 0
    s = spec.layer_sizes
    for fan_in, fan_out in zip(s[:-1], s[1:]):
        w = values[off : off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = values[off : off + fan_out]
        off += fan_out
        layers.append((w, b))
    return layers


def flatten(layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts) if parts else np.zeros(0)


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Mlp:
    spec: MlpSpec
    params: np.ndarray

    def __post_init__(self):
        params = _frozen(self.params)
        if params.ndim != 1 or params.size != parameter_count(self.spec):
            raise ValueError(
                f"params length {params.size} != parameter_count {parameter_count(self.spec)}"
            )
        object.__setattr__(self, "params", params)

    def with_params(self, params: np.ndarray) -> "Mlp":
        return Mlp(self.spec, params)


def init_mlp(spec: MlpSpec, seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases; layer ``l`` draws from counter ``l``."""
    values = np.zeros(parameter_count(spec))
    for l, (w, _b) in enumerate(unflatten(values, spec)):
        fan_in, fan_out = w.shape
        a = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = generator(seed, l).uniform(-a, a, size=w.shape)
    return Mlp(spec, values)


def _activate(kind: str, a: np.ndarray, slope: float) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(a)
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "leaky_relu":
        if 0.0 <= slope <= 1.0:
            return np.maximum(a, slope * a)
        return np.where(a > 0, a, slope * a)
    if kind == "identity":
        return a
    # sigmoid; piecewise form avoids overflow in exp
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return np.clip(out, PROB_EPS, 1.0 - PROB_EPS)


def _activation_grad(kind: str, a: np.ndarray, h: np.ndarray, slope: float) -> np.ndarray:
    """d h / d a given pre-activation ``a`` and output ``h``."""
    if kind == "tanh":
        return 1.0 - h * h
    if kind == "relu":
        return (a > 0).astype(np.float64)
    if kind == "leaky_relu":
        # np.where with scalar branches is several times slower here
        g = (a > 0).astype(np.float64)
        g *= 1.0 - slope
        g += slope
        return g
    if kind == "identity":
        return np.ones_like(a)
    # clamped sigmoid: flat outside the clamp
    inside = (h > PROB_EPS) & (h < 1.0 - PROB_EPS)
    return np.where(inside, h * (1.0 - h), 0.0)


def _forward_cache(mlp: Mlp, x: np.ndarray):
    spec = mlp.spec
    layers = unflatten(mlp.params, spec)
    inputs, pre, outs = [], [], []
    h = x
    last = len(layers) - 1
    for l, (w, b) in enumerate(layers):
        inputs.append(h)
        a = h @ w + b
        kind = spec.output_activation if l == last else spec.hidden_activation
        h = _activate(kind, a, spec.leaky_slope)
        pre.append(a)
        outs.append(h)
    return layers, inputs, pre, outs


def _as_batch(mlp: Mlp, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != mlp.spec.input_dim:
        raise ValueError(f"input shape {x.shape} does not match input dim {mlp.spec.input_dim}")
    return xb, single


def forward(mlp: Mlp, x) -> np.ndarray:
    """Evaluate the network on one input vector or a ``(batch, in)`` array."""
    xb, single = _as_batch(mlp, x)
    out = _forward_cache(mlp, xb)[3][-1]
    return out[0] if single else out


def _backward_from_cache(mlp, cache, upstream, need_params=True, need_input=True):
    spec = mlp.spec
    layers, inputs, pre, outs = cache
    last = len(layers) - 1
    grads = [None] * len(layers)
    delta = upstream
    for l in range(last, -1, -1):
        kind = spec.output_activation if l == last else spec.hidden_activation
        delta = delta * _activation_grad(kind, pre[l], outs[l], spec.leaky_slope)
        w, _b = layers[l]
        if need_params:
            grads[l] = (inputs[l].T @ delta, delta.sum(axis=0))
        if l == 0 and not need_input:
            delta = None
            break
        delta = delta @ w.T
    param_grad = flatten(grads) if need_params else None
    return param_grad, delta


def backward(mlp: Mlp, x, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``sum(upstream * forward(mlp, x))``.

    Returns ``(param_grad, input_grad)``. For batched input the parameter
    gradient is summed over the batch and ``input_grad`` keeps the batch axis.
    """
    xb, single = _as_batch(mlp, x)
    up = np.asarray(upstream, dtype=np.float64)
    up = up[None, :] if single and up.ndim == 1 else up
    if up.shape != (xb.shape[0], mlp.spec.output_dim):
        raise ValueError(f"upstream shape {np.shape(upstream)} does not match output")
    cache = _forward_cache(mlp, xb)
    param_grad, input_grad = _backward_from_cache(mlp, cache, up)
    return param_grad, (input_grad[0] if single else input_grad)


def finite_diff_grad(f: Callable[[np.ndarray], float], p, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``p``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = np.array(p, dtype=np.float64)
    g = np.zeros_like(p)
    for i in range(p.size):
        old = p[i]
        p[i] = old + eps
        hi = f(p.copy())
        p[i] = old - eps
        lo = f(p.copy())
        p[i] = old
        g[i] = (hi - lo) / (2.0 * eps)
    return g


def axpy_update(p, g, step: float) -> np.ndarray:
    """Return ``p + step * g`` as a new array."""
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {g.shape}")
    out = p + step * g
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("non-finite parameters after update")
    return out
