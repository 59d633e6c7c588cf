"""Exact solvers on finite transport instances.

Two independent routes to the optimum serve as ground truth for each other:
log-domain Sinkhorn for KL regularization, and full-batch gradient ascent on
the dual objective for any registered divergence.  Potentials returned by
``sinkhorn_kl`` follow the shifted normalization in which the optimal plan is

    pi_ij = (1/e) exp((phi_i + psi_j - c_ij) / lam) sigma_i tau_j,

i.e. the compatibility-function convention, with the lam shift split evenly
between phi and psi.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dual import cost_matrix
from .fdiv import Compatibility, DomainError, SupportError, h_regularizer
from .linalg import sym_eig


class ConvergenceError(RuntimeError):
    """Iteration cap reached before the requested tolerance."""


@dataclass(frozen=True)
class EmpiricalMeasure:
    atoms: np.ndarray      # (n, d)
    weights: np.ndarray    # probability vector

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=np.float64))
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        if atoms.shape[0] != w.shape[0]:
            raise ValueError("atom and weight counts differ")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")

    @property
    def n(self) -> int:
        return self.atoms.shape[0]


@dataclass(frozen=True)
class DualVectors:
    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=np.float64))
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=np.float64))
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.psi))):
            raise ValueError("potentials must be finite")


def sinkhorn_kl(cost: np.ndarray, sigma: np.ndarray, tau: np.ndarray, lam: float,
                tol: float = 1e-10, max_iter: int = 100_000):
    """Log-domain Sinkhorn for the KL-regularized problem.

    Alternating softmin updates on the kernel exp(-c/lam) sigma x tau until
    the worst marginal l1 residual drops below ``tol``.  Returns the plan and
    potentials in the shifted (compatibility) normalization.
    """
    cost = np.asarray(cost, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if np.any(sigma <= 0) or np.any(tau <= 0):
        raise ValueError("marginals must be strictly positive")
    f, g, iters, res = _kernels.sinkhorn_kl_log(
        np.ascontiguousarray(cost), np.log(sigma), np.log(tau),
        float(lam), float(tol), int(max_iter))
    if res >= tol:
        raise ConvergenceError(
            f"sinkhorn residual {res:.3e} after {iters} iterations (tol {tol:.1e})")
    logp = (np.log(sigma)[:, None] + np.log(tau)[None, :]
            + (f[:, None] + g[None, :] - cost) / lam)
    plan = np.exp(logp)
    duals = DualVectors(f + 0.5 * lam, g + 0.5 * lam)
    return plan, duals


def plan_from_duals(cost: np.ndarray, sigma: np.ndarray, tau: np.ndarray,
                    compat: Compatibility, duals: DualVectors) -> np.ndarray:
    """Pseudo-coupling M(V) sigma x tau; no normalization is applied."""
    v = duals.phi[:, None] + duals.psi[None, :] - cost
    m = np.asarray(compat.m(v))
    return m * sigma[:, None] * tau[None, :]


def dual_objective(cost, sigma, tau, compat: Compatibility, phi, psi) -> float:
    v = phi[:, None] + psi[None, :] - cost
    with np.errstate(over="ignore"):
        h = np.asarray(compat.h_star(v))
        return float(sigma @ phi + tau @ psi - sigma @ h @ tau)


def _dual_grad(cost, sigma, tau, compat, phi, psi):
    v = phi[:, None] + psi[None, :] - cost
    m = np.asarray(compat.m(v))
    mtau = m @ tau
    msig = sigma @ m
    return sigma * (1.0 - mtau), tau * (1.0 - msig)


def dual_ascent_generic(cost: np.ndarray, sigma: np.ndarray, tau: np.ndarray,
                        compat: Compatibility, lr: float = 1.0, tol: float = 1e-9,
                        max_iter: int = 100_000):
    """Full-batch gradient ascent on J over finite dual vectors.

    Barzilai-Borwein steps with an Armijo backtracking safeguard; a step that
    leaves the conjugate domain (J = -inf) is halved until feasible.  Stops
    when the gradient infinity-norm drops below ``tol``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    n, m = cost.shape
    phi = np.zeros(n)
    psi = np.zeros(m)

    def value(p, q):
        try:
            return dual_objective(cost, sigma, tau, compat, p, q)
        except DomainError:
            return -np.inf

    j = value(phi, psi)
    if not np.isfinite(j):
        raise DomainError("zero initialization lies outside the conjugate domain")
    gphi, gpsi = _dual_grad(cost, sigma, tau, compat, phi, psi)
    step = lr
    for _ in range(max_iter):
        gnorm = max(np.abs(gphi).max(), np.abs(gpsi).max())
        if gnorm < tol:
            return DualVectors(phi, psi), j
        gsq = float(gphi @ gphi + gpsi @ gpsi)
        slack = 4e-16 * max(1.0, abs(j))  # float resolution near convergence
        trial = step
        for _halving in range(80):
            p = phi + trial * gphi
            q = psi + trial * gpsi
            jn = value(p, q)
            if np.isfinite(jn) and jn >= j + 1e-4 * trial * gsq - slack:
                break
            trial *= 0.5
        else:
            raise DomainError("persistent domain exit or no ascent step found")
        gphi_n, gpsi_n = _dual_grad(cost, sigma, tau, compat, p, q)
        # Barzilai-Borwein step from successive (position, gradient) pairs
        dg = np.concatenate([gphi_n - gphi, gpsi_n - gpsi])
        ds = np.concatenate([p - phi, q - psi])
        dgg = float(dg @ dg)
        step = abs(float(ds @ dg)) / dgg if dgg > 0 else trial * 2.0
        step = min(max(step, 1e-12), 1e6)
        phi, psi, j, gphi, gpsi = p, q, jn, gphi_n, gpsi_n
    raise ConvergenceError(f"dual ascent did not reach tol {tol:.1e} "
                           f"in {max_iter} iterations (grad {gnorm:.3e})")


def primal_objective(cost: np.ndarray, sigma: np.ndarray, tau: np.ndarray,
                     kind, lam: float, plan: np.ndarray) -> float:
    """K(pi) = <pi, c> + lam * D_f(pi || sigma x tau)."""
    plan = np.asarray(plan, dtype=np.float64)
    product = np.outer(sigma, tau)
    try:
        reg = h_regularizer(kind, plan, product)
    except SupportError:
        raise
    return float(np.sum(plan * cost) + lam * reg)


def softmin_potential(cost_col: np.ndarray, phi: np.ndarray, sigma: np.ndarray,
                      lam: float) -> float:
    """-lam log sum_i sigma_i exp((phi_i - c(x_i, y)) / lam), log-domain."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    a = np.log(sigma) + (phi - cost_col) / lam
    amax = a.max()
    return float(-lam * (np.log(np.exp(a - amax).sum()) + amax))


def logconcavity_check(atoms: np.ndarray, phi: np.ndarray, sigma: np.ndarray,
                       lam: float, x: np.ndarray, y: np.ndarray,
                       step: float) -> float:
    """Largest eigenvalue of the finite-difference Hessian of log h(y).

    log h(y) = (phi(x) + psi(y) - ||x - y||^2) / lam with psi the softmin
    transform of phi over the source atoms (squared-l2 cost).  phi(x) is
    constant in y, so it is dropped.  A step-halving consistency probe warns
    when truncation dominates.
    """
    atoms = np.atleast_2d(np.asarray(atoms, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if step <= 0:
        raise ValueError("finite-difference step must be positive")

    def log_h(pt):
        col = np.sum((atoms - pt[None, :]) ** 2, axis=1)
        psi = softmin_potential(col, phi, sigma, lam)
        return (psi - float(np.sum((x - pt) ** 2))) / lam

    def max_eig(h):
        d = y.shape[0]
        hess = np.empty((d, d))
        f0 = log_h(y)
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = h
            hess[i, i] = (log_h(y + ei) - 2.0 * f0 + log_h(y - ei)) / (h * h)
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = h
                hess[i, j] = hess[j, i] = (
                    log_h(y + ei + ej) - log_h(y + ei - ej)
                    - log_h(y - ei + ej) + log_h(y - ei - ej)) / (4.0 * h * h)
        w, _ = sym_eig(hess)  # symmetric by construction
        return float(w[0])

    val = max_eig(step)
    refined = max_eig(0.5 * step)
    if abs(val - refined) > max(1e-6, 0.05 * abs(refined)):
        warnings.warn("finite-difference step too large: truncation dominates "
                      f"({val:.3e} vs {refined:.3e} at h/2)", RuntimeWarning)
    return val


@dataclass(frozen=True)
class StabilityResult:
    lhs: float       # |pi_hat - pi_star|_1
    rhs: float       # sqrt(2 eps / s)
    eps: float       # duality gap J* - J(duals), clamped at 0
    holds: bool


def stability_check(cost: np.ndarray, sigma: np.ndarray, tau: np.ndarray,
                    compat: Compatibility, approx_duals: DualVectors,
                    oracle_value: float, oracle_plan: np.ndarray) -> StabilityResult:
    """Both sides of the l1 stability bound |pi_hat - pi*|_1 <= sqrt(2 eps / s)."""
    j_hat = dual_objective(cost, sigma, tau, compat, approx_duals.phi,
                           approx_duals.psi)
    eps = max(oracle_value - j_hat, 0.0)
    pi_hat = plan_from_duals(cost, sigma, tau, compat, approx_duals)
    lhs = float(np.abs(pi_hat - oracle_plan).sum())
    s = compat.strong_convexity
    rhs = float(np.sqrt(2.0 * eps / s))
    return StabilityResult(lhs, rhs, eps, lhs <= rhs + 1e-9)


# ---------------------------------------------------------------------------
# plain-text instance serialization for the CLI
# ---------------------------------------------------------------------------

def instance_to_csv(source: EmpiricalMeasure, target: EmpiricalMeasure,
                    cost_tag: str) -> str:
    buf = io.StringIO()
    buf.write(f"# cost={cost_tag}\n")
    buf.write("side,weight," + ",".join(
        f"c{i}" for i in range(source.atoms.shape[1])) + "\n")
    for side, meas in (("x", source), ("y", target)):
        for w, atom in zip(meas.weights, meas.atoms):
            buf.write(f"{side},{float(w)!r},"
                      + ",".join(repr(float(v)) for v in atom) + "\n")
    return buf.getvalue()


def instance_from_csv(text: str):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# cost="):
        raise ValueError("instance file must start with '# cost=<tag>'")
    cost_tag = lines[0].split("=", 1)[1]
    rows = {"x": [], "y": []}
    for ln in lines[2:]:
        parts = ln.split(",")
        rows[parts[0]].append([float(v) for v in parts[1:]])
    out = []
    for side in ("x", "y"):
        arr = np.asarray(rows[side])
        weights = arr[:, 0]
        out.append(EmpiricalMeasure(arr[:, 1:], weights / weights.sum()))
    return out[0], out[1], cost_tag


def make_cost(source: EmpiricalMeasure, target: EmpiricalMeasure,
              cost_tag: str) -> np.ndarray:
    return cost_matrix(cost_tag, source.atoms, target.atoms)
