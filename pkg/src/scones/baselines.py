"""Barycentric projection baseline trained against a learned compatibility.

The map T minimizes the M-weighted product-minibatch regression loss

    mean_{i,j} M(V(x_i, y_j)) ||T(x_i) - y_j||^2,

an unbiased surrogate for the conditional expectation objective under the
pseudo-coupling.  Its outputs are deterministic per x, which is exactly why
the baseline collapses the conditional variance of the plan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets
from .dual import DualPair, cost_matrix
from .fdiv import DomainError


@dataclass
class BaryConfig:
    hidden: tuple[int, ...] = (128, 128)
    iterations: int = 5000
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    output_activation: str = "linear"
    seed: int = 0


@dataclass
class BaryMap:
    spec: nets.MlpSpec
    params: nets.MlpParams


def train_barycentric(pair: DualPair, source: np.ndarray, target: np.ndarray,
                      config: BaryConfig) -> BaryMap:
    """Fit the projection map against the pair's compatibility weights."""
    if pair.compat.kernel_kind_id() is None:
        raise DomainError("barycentric training supports kl and pearson_chi2 only")
    source = np.atleast_2d(np.asarray(source, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    spec = nets.MlpSpec((source.shape[1], *config.hidden, target.shape[1]),
                        config.output_activation)
    rng = np.random.default_rng(config.seed)
    params = nets.he_uniform(spec, rng, config.seed)
    opt = nets.Adam(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    m = config.batch_size
    for it in range(config.iterations):
        xs = source[rng.integers(0, source.shape[0], size=m)]
        ys = target[rng.integers(0, target.shape[0], size=m)]
        v = pair.violation_matrix(xs, ys)
        with np.errstate(over="ignore"):
            w = np.asarray(pair.compat.m(v))
        out, cache = nets.forward_cached(spec, params, xs)
        # d/dT_i of sum_j w_ij ||T_i - y_j||^2 / m^2
        row_w = w.sum(axis=1)
        upstream = 2.0 * (row_w[:, None] * out - w @ ys) / (m * m)
        if not np.all(np.isfinite(upstream)):
            raise FloatingPointError(f"barycentric gradient diverged at iteration {it}")
        acts, pre_last = cache
        delta = nets._output_delta(spec, out, pre_last, upstream)
        dws, dbs = [], []
        for li in range(spec.n_layers - 1, -1, -1):
            dws.insert(0, delta.T @ acts[li])
            dbs.insert(0, delta.sum(axis=0))
            if li > 0:
                delta = (delta @ params.weights[li]) * (acts[li] > 0)
        opt.step(params, [-g for g in dws], [-g for g in dbs])
    params.check_finite()
    return BaryMap(spec, params)


def bary_map_eval(bary: BaryMap, xs: np.ndarray) -> np.ndarray:
    """Batch forward of the trained map; empty input gives an empty batch."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 2 and xs.shape[0] == 0:
        return np.zeros((0, bary.spec.out_dim))
    out, _ = nets.forward_cached(bary.spec, bary.params, np.atleast_2d(xs))
    return out
