"""Denoising score matching for low-dimensional targets.

The score net takes the noise level as an extra input coordinate and trains
across all levels with the tau^2 loss weighting, which balances the per-level
residual magnitudes:

    loss = mean over batch of  (tau^2 / 2) * || s(y + tau z, tau) + z / tau ||^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets

SWISS_ROLL_T_MIN = 1.5 * np.pi
SWISS_ROLL_T_MAX = 4.5 * np.pi
SWISS_ROLL_SCALE = 4.5 * np.pi / 2.0   # maps the spiral into [-2, 2]^2
SWISS_ROLL_DEFAULT_JITTER = 0.05


def swiss_roll_data(n: int, noise_sd: float, rng: np.random.Generator) -> np.ndarray:
    """2-D swiss roll: t ~ U[1.5 pi, 4.5 pi], point = (t cos t, t sin t) / scale."""
    if n < 1:
        raise ValueError("need at least one sample")
    t = rng.uniform(SWISS_ROLL_T_MIN, SWISS_ROLL_T_MAX, size=n)
    pts = np.stack([t * np.cos(t), t * np.sin(t)], axis=1) / SWISS_ROLL_SCALE
    if noise_sd > 0:
        pts = pts + noise_sd * rng.standard_normal((n, 2))
    return pts


@dataclass
class DsmConfig:
    levels: np.ndarray                     # noise levels, high to low (or a single one)
    iterations: int = 10000
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    hidden: tuple[int, ...] = (128, 128)
    seed: int = 0

    def __post_init__(self):
        self.levels = np.atleast_1d(np.asarray(self.levels, dtype=np.float64))
        if np.any(self.levels <= 0):
            raise ValueError("noise levels must be positive")
        if self.iterations < 0 or self.batch_size < 1:
            raise ValueError("counts must be positive")


@dataclass
class ScoreNet:
    """Trained multi-level score estimator, callable as a ScoreOracle."""

    spec: nets.MlpSpec
    params: nets.MlpParams
    levels: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __call__(self, y, noise_level=None):
        y = np.asarray(y, dtype=np.float64)
        single = y.ndim == 1
        yb = np.atleast_2d(y)
        tau = float(self.levels[-1]) if noise_level is None else float(noise_level)
        inp = np.concatenate([yb, np.full((yb.shape[0], 1), tau)], axis=1)
        out, _ = nets.forward_cached(self.spec, self.params, inp)
        return out[0] if single else out


def dsm_loss_grad(spec: nets.MlpSpec, params: nets.MlpParams, batch: np.ndarray,
                  tau: float, rng: np.random.Generator):
    """DSM loss at one noise level and its parameter gradient.

    The residual is s(y_noisy, tau) + z / tau; the analytic optimum makes it
    vanish, so the loss is zero exactly at the oracle score.
    """
    if tau <= 0:
        raise ValueError("noise level must be positive")
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    n, d = batch.shape
    z = rng.standard_normal((n, d))
    noisy = batch + tau * z
    inp = np.concatenate([noisy, np.full((n, 1), tau)], axis=1)
    out, cache = nets.forward_cached(spec, params, inp)
    resid = out + z / tau
    loss = 0.5 * tau ** 2 * float(np.mean(np.sum(resid ** 2, axis=1)))
    upstream = (tau ** 2 / n) * resid       # d loss / d out
    acts, pre_last = cache
    delta = nets._output_delta(spec, out, pre_last, upstream)
    dws = [None] * spec.n_layers
    dbs = [None] * spec.n_layers
    for li in range(spec.n_layers - 1, -1, -1):
        dws[li] = delta.T @ acts[li]
        dbs[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ params.weights[li]) * (acts[li] > 0)
    return loss, (dws, dbs)


def train_score(data: np.ndarray, config: DsmConfig) -> ScoreNet:
    """Fit a multi-level score net by DSM; zero iterations returns it untrained."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] == 0:
        raise ValueError("training data must be nonempty")
    d = data.shape[1]
    spec = nets.MlpSpec((d + 1, *config.hidden, d), "linear")
    rng = np.random.default_rng(config.seed)
    params = nets.he_uniform(spec, rng, config.seed)
    if config.iterations == 0:
        return ScoreNet(spec, params, config.levels.copy())
    opt = nets.Adam(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    nb = config.batch_size
    for it in range(config.iterations):
        idx = rng.integers(0, data.shape[0], size=nb)
        # mixing levels within the batch keeps every level in every update
        taus = config.levels[rng.integers(0, config.levels.shape[0], size=nb)]
        z = rng.standard_normal((nb, d))
        noisy = data[idx] + taus[:, None] * z
        inp = np.concatenate([noisy, taus[:, None]], axis=1)
        out, cache = nets.forward_cached(spec, params, inp)
        resid = out + z / taus[:, None]
        loss = 0.5 * float(np.mean(taus ** 2 * np.sum(resid ** 2, axis=1)))
        if not np.isfinite(loss):
            raise FloatingPointError(f"DSM loss diverged at iteration {it}")
        upstream = (taus ** 2)[:, None] * resid / nb
        acts, pre_last = cache
        delta = nets._output_delta(spec, out, pre_last, upstream)
        dws, dbs = [], []
        for li in range(spec.n_layers - 1, -1, -1):
            dws.insert(0, delta.T @ acts[li])
            dbs.insert(0, delta.sum(axis=0))
            if li > 0:
                delta = (delta @ params.weights[li]) * (acts[li] > 0)
        # descend: the optimizer steps along +gradient
        opt.step(params, [-g for g in dws], [-g for g in dbs])
    params.check_finite()
    return ScoreNet(spec, params, config.levels.copy())
