"""Small fully connected networks with hand-rolled reverse-mode gradients.

Hidden layers are ReLU; the output layer is linear, ReLU, or sigmoid.  The
ReLU derivative at exactly zero is zero.  Everything is float64 and batched:
``X`` has one row per sample, weights are stored ``(fan_out, fan_in)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

OUTPUT_ACTIVATIONS = ("linear", "relu", "sigmoid")


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]
    output_activation: str = "linear"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("need at least input and output widths")
        if any(w < 1 for w in self.widths):
            raise ValueError("all widths must be >= 1")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    init_scheme: str = "he_uniform"
    init_seed: int | None = None

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases],
                         self.init_scheme, self.init_seed)

    def check_finite(self):
        for arr in self.weights + self.biases:
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError("non-finite network parameters")


def he_uniform(spec: MlpSpec, rng: np.random.Generator,
               seed_record: int | None = None) -> MlpParams:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, "he_uniform", seed_record)


def zero_params(spec: MlpSpec) -> MlpParams:
    weights = [np.zeros((fo, fi)) for fi, fo in zip(spec.widths[:-1], spec.widths[1:])]
    biases = [np.zeros(fo) for fo in spec.widths[1:]]
    return MlpParams(weights, biases, "zeros", None)


def _out_act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "linear":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    # numerically stable sigmoid
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def _as_batch(x: np.ndarray, in_dim: int):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != in_dim:
            raise ValueError(f"input length {x.shape[0]} != expected {in_dim}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise ValueError(f"input shape {x.shape} incompatible with width {in_dim}")
    return x, False


def forward_cached(spec: MlpSpec, params: MlpParams, x: np.ndarray):
    """Forward pass keeping the per-layer activations for backprop."""
    xb, _ = _as_batch(x, spec.in_dim)
    acts = [xb]
    pre = None
    h = xb
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        pre = h @ w.T + b
        if li < spec.n_layers - 1:
            h = np.maximum(pre, 0.0)
            acts.append(h)
        else:
            h = _out_act(pre, spec.output_activation)
    return h, (acts, pre)


def mlp_forward(spec: MlpSpec, params: MlpParams, x: np.ndarray):
    """Network output; a single input vector gives a scalar when out_dim is 1."""
    xb, single = _as_batch(x, spec.in_dim)
    out, _ = forward_cached(spec, params, xb)
    if single:
        return float(out[0, 0]) if spec.out_dim == 1 else out[0]
    return out


def _output_delta(spec: MlpSpec, out: np.ndarray, pre: np.ndarray,
                  upstream: np.ndarray) -> np.ndarray:
    if spec.output_activation == "linear":
        return upstream
    if spec.output_activation == "relu":
        return upstream * (pre > 0)
    return upstream * out * (1.0 - out)


def _coerce_upstream(spec: MlpSpec, upstream, n: int) -> np.ndarray:
    up = np.asarray(upstream, dtype=np.float64)
    if up.ndim == 0:
        up = np.full((n, spec.out_dim), float(up))
    elif up.ndim == 1:
        if spec.out_dim != 1 or up.shape[0] != n:
            raise ValueError("1-d upstream only valid for scalar-output nets")
        up = up[:, None]
    elif up.shape != (n, spec.out_dim):
        raise ValueError(f"upstream shape {up.shape} != {(n, spec.out_dim)}")
    return up


def mlp_param_grad(spec: MlpSpec, params: MlpParams, x: np.ndarray, upstream):
    """Gradient of sum_i <upstream_i, output_i> w.r.t. every weight and bias.

    Returns (dweights, dbiases) shaped like the parameters.
    """
    xb, _ = _as_batch(x, spec.in_dim)
    out, (acts, pre_last) = forward_cached(spec, params, xb)
    delta = _output_delta(spec, out, pre_last, _coerce_upstream(spec, upstream, xb.shape[0]))
    dws = [None] * spec.n_layers
    dbs = [None] * spec.n_layers
    for li in range(spec.n_layers - 1, -1, -1):
        dws[li] = delta.T @ acts[li]
        dbs[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ params.weights[li]) * (acts[li] > 0)
    return dws, dbs


def mlp_input_grad(spec: MlpSpec, params: MlpParams, x: np.ndarray, upstream=None):
    """Gradient of the (scalar) output w.r.t. the input, batched.

    For out_dim > 1 an explicit upstream must weight the outputs.
    """
    if upstream is None and spec.out_dim != 1:
        raise ValueError("input gradient of a vector output needs an upstream")
    xb, single = _as_batch(x, spec.in_dim)
    out, (acts, pre_last) = forward_cached(spec, params, xb)
    up = np.ones((xb.shape[0], 1)) if upstream is None \
        else _coerce_upstream(spec, upstream, xb.shape[0])
    delta = _output_delta(spec, out, pre_last, up)
    for li in range(spec.n_layers - 1, 0, -1):
        delta = (delta @ params.weights[li]) * (acts[li] > 0)
    grad = delta @ params.weights[0]
    return grad[0] if single else grad


@dataclass
class Adam:
    """Adam in ascent convention: ``step`` moves parameters along the gradient."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")

    def _ensure(self, params: MlpParams):
        if not self.m_w:
            self.m_w = [np.zeros_like(w) for w in params.weights]
            self.v_w = [np.zeros_like(w) for w in params.weights]
            self.m_b = [np.zeros_like(b) for b in params.biases]
            self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, params: MlpParams, dws, dbs):
        self._ensure(params)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for w, m, v, g in zip(params.weights, self.m_w, self.v_w, dws):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            w += self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        for b, m, v, g in zip(params.biases, self.m_b, self.v_b, dbs):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            b += self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class Sgd:
    """Plain gradient ascent step."""

    lr: float = 1e-3

    def step(self, params: MlpParams, dws, dbs):
        for w, g in zip(params.weights, dws):
            w += self.lr * g
        for b, g in zip(params.biases, dbs):
            b += self.lr * g


def make_optimizer(name: str, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8):
    if name == "adam":
        return Adam(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    if name == "sgd":
        return Sgd(lr=lr)
    raise ValueError(f"unknown optimizer {name!r}")
