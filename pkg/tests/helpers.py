"""Shared test utilities."""

from types import SimpleNamespace

import numpy as np

from scones.fdiv import make_compat
from scones.gaussian import JointGaussianPlan, conditional_of_joint


class QuadraticDual:
    """Exact optimal dual potentials of a Gaussian entropic plan.

    For zero-mean Gaussians with squared-l2 cost and KL regularization, the
    optimal psi is the quadratic psi(y) = ||y||^2 + (lam/2) y'(S2^-1 - S^-1)y
    with S the conditional covariance.  Plugging its gradient into the
    conditional-score assembly reproduces the Schur-complement conditional
    exactly, which isolates sampler correctness from training error.
    """

    def __init__(self, plan: JointGaussianPlan, lam: float):
        d = plan.dim
        cond = conditional_of_joint(plan, np.zeros(d))
        s_inv = np.linalg.inv(cond.cov)
        s2_inv = np.linalg.inv(plan.sigma2)
        self._u = np.eye(d) + 0.5 * lam * (s2_inv - s_inv)
        self.compat = make_compat("kl", lam)
        self.cost = "sqeuclidean"
        self.psi_spec = SimpleNamespace(in_dim=d)

    def psi_input_grad(self, ys):
        return 2.0 * np.atleast_2d(ys) @ self._u.T

    def psi_values(self, ys):
        ys = np.atleast_2d(ys)
        return np.einsum("ni,ij,nj->n", ys, self._u, ys)

    def phi_values(self, xs):
        raise NotImplementedError("not needed for KL sampling")


def grid_sinkhorn_1d(var1: float, var2: float, lam: float,
                     n: int = 400, span: float = 6.0):
    """Discretized 1-d entropic plan: grids at +-span standard deviations,
    renormalized Gaussian weights, log-domain Sinkhorn.  Returns the grid
    atoms and the plan."""
    from scones.discrete import sinkhorn_kl
    from scones.dual import cost_matrix

    sd1, sd2 = np.sqrt(var1), np.sqrt(var2)
    xs = np.linspace(-span * sd1, span * sd1, n)
    ys = np.linspace(-span * sd2, span * sd2, n)
    wx = np.exp(-0.5 * xs ** 2 / var1)
    wy = np.exp(-0.5 * ys ** 2 / var2)
    wx /= wx.sum()
    wy /= wy.sum()
    cost = cost_matrix("sqeuclidean", xs[:, None], ys[:, None])
    plan, _ = sinkhorn_kl(cost, wx, wy, lam, tol=1e-11)
    return xs, ys, wx, wy, plan


def plan_cross_covariance(xs, ys, plan) -> float:
    mx = plan.sum(axis=1) @ xs
    my = plan.sum(axis=0) @ ys
    return float(np.einsum("i,ij,j->", xs, plan, ys) - mx * my)
