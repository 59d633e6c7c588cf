"""Langevin and annealed Langevin dynamics for conditional plan sampling.

The conditional score at source point x assembles the score oracle of the
target marginal with the compatibility gradient of the learned potentials:

    s(y) + dlogM/dv(V(x, y)) * (grad psi(y) - grad_y c(x, y)).

One update step is ``y <- y + (eps/2) * score + sqrt(eps) * z`` with
z ~ N(0, I); annealing reruns the inner loop across a decreasing geometric
noise ladder, conditioning only the score oracle on the level (the
potentials are trained at noise zero and stay fixed).  Chains own
independent generator substreams, so running a batch reproduces the
corresponding single-chain runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dual import DualPair, cost_grad_y, cost_paired
from .fdiv import Compatibility

# elements per chunk of pre-drawn chain noise (bounds memory)
_NOISE_CHUNK_BUDGET = 8_000_000


class ChainDivergedError(RuntimeError):
    """A Langevin iterate became non-finite; the configuration is at fault."""


class CompatibilitySaturationError(RuntimeError):
    """M(V) = 0 under a hinge regularizer: the conditional score is -inf."""


@dataclass(frozen=True)
class NoiseSchedule:
    levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.float64)
        object.__setattr__(self, "levels", levels)
        if levels.ndim != 1 or levels.shape[0] < 1:
            raise ValueError("schedule needs at least one level")
        if np.any(levels <= 0) or np.any(np.diff(levels) >= 0):
            raise ValueError("levels must be positive and strictly decreasing")
        if levels.shape[0] >= 3:
            ratios = levels[1:] / levels[:-1]
            if np.abs(ratios - ratios[0]).max() > 1e-12:
                raise ValueError("levels must decay geometrically")

    @property
    def n(self) -> int:
        return self.levels.shape[0]


def geometric_schedule(tau_first: float, tau_last: float, n: int) -> NoiseSchedule:
    """n levels from tau_first down to tau_last with a constant ratio."""
    if not (tau_first > tau_last > 0):
        raise ValueError("need tau_first > tau_last > 0")
    if n < 2:
        raise ValueError("need at least two levels")
    ratio = (tau_last / tau_first) ** (1.0 / (n - 1))
    return NoiseSchedule(tau_first * ratio ** np.arange(n))


@dataclass(frozen=True)
class SamplerConfig:
    epsilon: float = 5e-3
    steps: int = 1000
    schedule: NoiseSchedule | None = None
    denoise_final: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("step size must be positive")
        if self.steps < 1:
            raise ValueError("need at least one step per level")
        if self.denoise_final and self.schedule is None:
            raise ValueError("final denoising needs a noise schedule")


def spawn_chain_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _compat_term(pair: DualPair, phi_vals: np.ndarray | None,
                 xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """dlogM/dv(V) * (grad psi - grad_y c), row-paired over chains."""
    compat: Compatibility = pair.compat
    grad = pair.psi_input_grad(ys) - cost_grad_y(pair.cost, xs, ys)
    if compat.kind.tag == "kl":
        return grad / compat.lam
    psi_vals = pair.psi_values(ys)
    v = phi_vals + psi_vals - cost_paired(pair.cost, xs, ys)
    m, dlog, sat = compat.m_dlog(v)
    if np.any(sat):
        raise CompatibilitySaturationError(
            f"{int(np.count_nonzero(sat))} chains hit the M = 0 region; "
            "use the softplus-smoothed regularizer for sampling")
    return np.asarray(dlog)[:, None] * grad


def conditional_score(pair: DualPair, score, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Conditional plan score at a single (x, y): score(y) + compatibility term."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    phi_vals = None
    if pair.compat.kind.tag != "kl":
        phi_vals = pair.phi_values(x[None, :])
    term = _compat_term(pair, phi_vals, x[None, :], y[None, :])[0]
    return np.asarray(score(y), dtype=np.float64) + term


def langevin_chain(score_fn, y0: np.ndarray, epsilon: float, steps: int,
                   rng: np.random.Generator, return_trajectory: bool = False):
    """One chain of ``y <- y + (eps/2) score(y) + sqrt(eps) z``.

    Returns the final state, or the full (steps+1, d) trajectory on request.
    """
    y = np.asarray(y0, dtype=np.float64).copy()
    root = math.sqrt(epsilon)
    traj = np.empty((steps + 1, y.shape[0])) if return_trajectory else None
    if traj is not None:
        traj[0] = y
    for t in range(steps):
        y = y + 0.5 * epsilon * np.asarray(score_fn(y)) + root * rng.standard_normal(y.shape[0])
        if not np.all(np.isfinite(y)):
            raise ChainDivergedError(f"non-finite iterate at step {t + 1}")
        if traj is not None:
            traj[t + 1] = y
    return (y, traj) if return_trajectory else y


def langevin_batch(score_fn, y0: np.ndarray, epsilon: float, steps: int,
                   rngs: list[np.random.Generator]) -> np.ndarray:
    """Vectorized chains; chain i consumes only its own generator."""
    y = np.asarray(y0, dtype=np.float64).copy()
    n, d = y.shape
    if len(rngs) != n:
        raise ValueError("need one generator per chain")
    root = math.sqrt(epsilon)
    chunk = max(1, min(steps, _NOISE_CHUNK_BUDGET // max(n * d, 1)))
    noise = np.empty((chunk, n, d))
    done = 0
    while done < steps:
        block = min(chunk, steps - done)
        for i, r in enumerate(rngs):
            noise[:block, i, :] = r.standard_normal((block, d))
        for t in range(block):
            y += 0.5 * epsilon * np.asarray(score_fn(y)) + root * noise[t]
        if not np.all(np.isfinite(y)):
            raise ChainDivergedError(f"non-finite iterate near step {done + block}")
        done += block
    return y


def denoise_final(y: np.ndarray, score, tau_last: float) -> np.ndarray:
    """One Tweedie-style correction: y + tau^2 * score(y, tau)."""
    if tau_last <= 0:
        raise ValueError("noise level must be positive")
    y = np.asarray(y, dtype=np.float64)
    return y + tau_last ** 2 * np.asarray(score(y, tau_last))


def sample_scones_batch(pair: DualPair, score, xs: np.ndarray,
                        config: SamplerConfig, chunk_size: int = 2048) -> np.ndarray:
    """Draw one conditional sample per source row of ``xs``.

    Chains initialize from N(0, I), run ``steps`` updates per noise level
    (the final state of each level seeds the next), and optionally apply the
    final denoising step.  The compatibility term always uses the noiseless
    potentials; only the score oracle sees the level.

    Chains are independent, so they are processed in cache-sized chunks;
    each chain consumes only its own generator either way.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    n = xs.shape[0]
    d = pair.psi_spec.in_dim
    rngs = spawn_chain_rngs(config.seed, n)
    out = np.empty((n, d))
    for lo in range(0, n, chunk_size):
        hi = min(lo + chunk_size, n)
        out[lo:hi] = _scones_chunk(pair, score, xs[lo:hi], rngs[lo:hi], config, d)
    return out


def _scones_chunk(pair, score, xs, rngs, config, d):
    y = np.stack([r.standard_normal(d) for r in rngs])
    phi_vals = None
    if pair.compat.kind.tag != "kl":
        phi_vals = pair.phi_values(xs)

    levels = [None] if config.schedule is None else list(config.schedule.levels)
    for level in levels:
        def step_score(ys, _level=level):
            base = score(ys) if _level is None else score(ys, _level)
            return np.asarray(base) + _compat_term(pair, phi_vals, xs, ys)

        y = langevin_batch(step_score, y, config.epsilon, config.steps, rngs)

    if config.denoise_final:
        y = denoise_final(y, score, float(levels[-1]))
    return y


def sample_scones(pair: DualPair, score, x: np.ndarray,
                  config: SamplerConfig) -> np.ndarray:
    """Single conditional draw from the learned coupling at source point x."""
    return sample_scones_batch(pair, score, np.asarray(x)[None, :], config)[0]
