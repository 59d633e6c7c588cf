"""Neural dual potentials and the stochastic dual-ascent trainer.

A :class:`DualPair` holds two scalar-output networks acting as dual
potentials over the source and target spaces, the regularizer
compatibility, and a transport cost tag.  Training ascends the dual
objective

    J(phi, psi) = E_sigma[phi] + E_tau[psi] - E_{sigma x tau}[H*(V)]

with V(x, y) = phi(x) + psi(y) - c(x, y), using all m^2 cross pairs of each
minibatch.  The penalty gradient for a pair is M(V) * (grad phi + grad psi),
so the per-sample upstream reduces to row/column sums of the M matrix, which
the fused kernel supplies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels, nets
from .fdiv import Compatibility, DomainError

COST_TAGS = ("sqeuclidean", "mean_sqeuclidean", "zero")


class TrainingDivergedError(RuntimeError):
    """Non-finite parameters or gradients during dual training."""


def cost_matrix(tag: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if tag == "zero":
        return np.zeros((x.shape[0], y.shape[0]))
    if x.shape[1] != y.shape[1]:
        raise ValueError("squared costs need matching dimensions")
    sq = _kernels.pairwise_sqdist(np.ascontiguousarray(x), np.ascontiguousarray(y))
    if tag == "sqeuclidean":
        return sq
    if tag == "mean_sqeuclidean":
        return sq / x.shape[1]
    raise ValueError(f"unknown cost tag {tag!r}")


def cost_paired(tag: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """c(x_i, y_i) row by row."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if tag == "zero":
        return np.zeros(x.shape[0])
    sq = np.sum((x - y) ** 2, axis=1)
    return sq / x.shape[1] if tag == "mean_sqeuclidean" else sq


def cost_grad_y(tag: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of c(x_i, .) at y_i, row by row."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if tag == "zero":
        return np.zeros_like(y)
    g = 2.0 * (y - x)
    return g / x.shape[1] if tag == "mean_sqeuclidean" else g


@dataclass
class DualPair:
    phi_spec: nets.MlpSpec
    phi: nets.MlpParams
    psi_spec: nets.MlpSpec
    psi: nets.MlpParams
    compat: Compatibility
    cost: str = "sqeuclidean"

    def __post_init__(self):
        if self.phi_spec.out_dim != 1 or self.psi_spec.out_dim != 1:
            raise ValueError("dual potentials must have scalar outputs")
        if self.cost not in COST_TAGS:
            raise ValueError(f"unknown cost tag {self.cost!r}")

    def copy(self) -> "DualPair":
        return replace(self, phi=self.phi.copy(), psi=self.psi.copy())

    def phi_values(self, x: np.ndarray) -> np.ndarray:
        out, _ = nets.forward_cached(self.phi_spec, self.phi, x)
        return out[:, 0]

    def psi_values(self, y: np.ndarray) -> np.ndarray:
        out, _ = nets.forward_cached(self.psi_spec, self.psi, y)
        return out[:, 0]

    def psi_input_grad(self, y: np.ndarray) -> np.ndarray:
        return nets.mlp_input_grad(self.psi_spec, self.psi, np.atleast_2d(y))

    def violation_matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        phi = self.phi_values(xs)
        psi = self.psi_values(ys)
        return phi[:, None] + psi[None, :] - cost_matrix(self.cost, xs, ys)


def new_dual_pair(source_dim: int, target_dim: int, compat: Compatibility,
                  hidden: tuple[int, ...] = (128, 128), cost: str = "sqeuclidean",
                  output_activation: str = "linear", seed: int = 0,
                  rng: np.random.Generator | None = None) -> DualPair:
    """Freshly initialized potentials; linear outputs unless configured otherwise."""
    if rng is None:
        rng = np.random.default_rng(seed)
    phi_spec = nets.MlpSpec((source_dim, *hidden, 1), output_activation)
    psi_spec = nets.MlpSpec((target_dim, *hidden, 1), output_activation)
    phi = nets.he_uniform(phi_spec, rng, seed)
    psi = nets.he_uniform(psi_spec, rng, seed)
    return DualPair(phi_spec, phi, psi_spec, psi, compat, cost)


def violation(pair: DualPair, x: np.ndarray, y: np.ndarray) -> float:
    """V(x, y) = phi(x) + psi(y) - c(x, y) at a single point pair."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    phi = nets.mlp_forward(pair.phi_spec, pair.phi, x)
    psi = nets.mlp_forward(pair.psi_spec, pair.psi, y)
    return float(phi + psi - cost_paired(pair.cost, x[None, :], y[None, :])[0])


def _penalty_stats(compat: Compatibility, phi, psi, cost, wx, wy):
    kid = compat.kernel_kind_id()
    alpha = compat.params.chi2_softplus_alpha or 0.0
    if kid is not None:
        return _kernels.penalty_stats(phi, psi, cost, compat.lam, kid, alpha, wx, wy)
    # generic path for registry-only kinds
    v = phi[:, None] + psi[None, :] - cost
    h = np.asarray(compat.h_star(v))
    m, _, sat = compat.m_dlog(v)
    m = np.asarray(m)
    return float(wx @ h @ wy), m @ wy, wx @ m, int(np.count_nonzero(sat))


def dual_objective_batch(pair: DualPair, xs: np.ndarray, ys: np.ndarray,
                         wx: np.ndarray | None = None,
                         wy: np.ndarray | None = None) -> float:
    """J estimated on a batch: mean phi + mean psi - mean H*(V) over all pairs.

    Optional weights turn the means into exact expectations under discrete
    marginals (used by the full-batch trainer and the oracles).
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    if xs.shape[0] == 0 or ys.shape[0] == 0:
        raise ValueError("batches must be nonempty")
    wx = np.full(xs.shape[0], 1.0 / xs.shape[0]) if wx is None else np.asarray(wx)
    wy = np.full(ys.shape[0], 1.0 / ys.shape[0]) if wy is None else np.asarray(wy)
    phi = pair.phi_values(xs)
    psi = pair.psi_values(ys)
    cmat = cost_matrix(pair.cost, xs, ys)
    h_sum, _, _, _ = _penalty_stats(pair.compat, phi, psi, cmat, wx, wy)
    return float(wx @ phi + wy @ psi - h_sum)


@dataclass
class TrainConfig:
    iterations: int = 5000
    batch_size: int = 1000
    optimizer: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    full_batch: bool = False
    seed: int = 0
    eval_cap: int = 4096  # cap on the held-out exact-objective evaluation


@dataclass
class TrainReport:
    j_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    wall_seconds: float = 0.0
    final_objective: float = float("nan")
    saturated_pairs: int = 0


def train_dual(pair: DualPair, source: np.ndarray, target: np.ndarray,
               config: TrainConfig,
               source_weights: np.ndarray | None = None,
               target_weights: np.ndarray | None = None):
    """Algorithm-1 style dual ascent; returns a trained copy and a report.

    Minibatches are drawn with replacement from the datasets (or, in
    full-batch mode, every atom enters with its marginal weight, making the
    gradient exact).  Restricted to KL and Pearson chi^2 regularizers, whose
    penalties are defined on every violation value.
    """
    if pair.compat.kernel_kind_id() is None:
        raise DomainError("training supports kl and pearson_chi2 regularizers only")
    source = np.atleast_2d(np.asarray(source, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if source.shape[0] == 0 or target.shape[0] == 0:
        raise ValueError("training data must be nonempty")

    out = pair.copy()
    t0 = time.perf_counter()
    if config.iterations == 0:
        return out, TrainReport(wall_seconds=time.perf_counter() - t0)

    rng = np.random.default_rng(config.seed)
    opt_phi = nets.make_optimizer(config.optimizer, config.lr, config.beta1,
                                  config.beta2, config.adam_eps)
    opt_psi = nets.make_optimizer(config.optimizer, config.lr, config.beta1,
                                  config.beta2, config.adam_eps)

    if config.full_batch:
        xs, ys = source, target
        wx = (np.full(xs.shape[0], 1.0 / xs.shape[0])
              if source_weights is None else np.asarray(source_weights, dtype=np.float64))
        wy = (np.full(ys.shape[0], 1.0 / ys.shape[0])
              if target_weights is None else np.asarray(target_weights, dtype=np.float64))
        cmat = cost_matrix(out.cost, xs, ys)

    history = np.empty(config.iterations)
    saturated = 0
    m = config.batch_size
    for it in range(config.iterations):
        if not config.full_batch:
            xs = source[rng.integers(0, source.shape[0], size=m)]
            ys = target[rng.integers(0, target.shape[0], size=m)]
            wx = np.full(m, 1.0 / m)
            wy = np.full(m, 1.0 / m)
            cmat = cost_matrix(out.cost, xs, ys)
        phi_out, phi_cache = nets.forward_cached(out.phi_spec, out.phi, xs)
        psi_out, psi_cache = nets.forward_cached(out.psi_spec, out.psi, ys)
        phi = phi_out[:, 0]
        psi = psi_out[:, 0]
        h_sum, m_row, m_col, sat = _penalty_stats(out.compat, phi, psi, cmat, wx, wy)
        saturated += sat
        history[it] = wx @ phi + wy @ psi - h_sum

        up_phi = wx * (1.0 - m_row)
        up_psi = wy * (1.0 - m_col)
        if not (np.isfinite(history[it]) and np.all(np.isfinite(up_phi))
                and np.all(np.isfinite(up_psi))):
            raise TrainingDivergedError(
                f"non-finite objective or gradient at iteration {it}")
        dws, dbs = _param_grad_from_cache(out.phi_spec, out.phi, phi_cache,
                                          phi_out, up_phi)
        opt_phi.step(out.phi, dws, dbs)
        dws, dbs = _param_grad_from_cache(out.psi_spec, out.psi, psi_cache,
                                          psi_out, up_psi)
        opt_psi.step(out.psi, dws, dbs)

    out.phi.check_finite()
    out.psi.check_finite()
    cap = config.eval_cap
    final = dual_objective_batch(out, source[:cap], target[:cap])
    return out, TrainReport(history, time.perf_counter() - t0, final, saturated)


def _param_grad_from_cache(spec, params, cache, out, upstream):
    acts, pre_last = cache
    delta = nets._output_delta(spec, out, pre_last,
                               nets._coerce_upstream(spec, upstream, acts[0].shape[0]))
    dws = [None] * spec.n_layers
    dbs = [None] * spec.n_layers
    for li in range(spec.n_layers - 1, -1, -1):
        dws[li] = delta.T @ acts[li]
        dbs[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ params.weights[li]) * (acts[li] > 0)
    return dws, dbs
