"""Closed-form entropic transport between Gaussians and Bures metrics.

For zero-mean sources and targets with squared-l2 cost and KL regularization
lam, the optimal coupling is the joint Gaussian whose cross-covariance is

    C = S1^{1/2} (S1^{1/2} S2 S1^{1/2} + (lam^2/16) I)^{1/2} S1^{-1/2} - (lam/4) I.

Stationarity of the primal objective is equivalent to the identity
Cond^{-1} C^T S1^{-1} = (2/lam) I with Cond the conditional covariance, which
is asserted in the test suite alongside a one-dimensional grid-Sinkhorn
validation (the discretized oracle is the source of truth for conventions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import haar_orthogonal, sqrtm_psd, substream, sym_eig


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-10 * scale:
            raise ValueError("covariance must be symmetric")
        w, _ = sym_eig(self.cov)
        if w[-1] < -1e-10 * max(w[0], 1.0):
            raise ValueError("covariance must be positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class JointGaussianPlan:
    """Joint Gaussian coupling: marginal blocks plus the cross block."""

    mean: np.ndarray          # (2d,)
    sigma1: np.ndarray        # source block, exact marginal
    sigma2: np.ndarray        # target block, exact marginal
    cross: np.ndarray         # Cov(x, y), d x d

    @property
    def dim(self) -> int:
        return self.sigma1.shape[0]

    def joint_cov(self) -> np.ndarray:
        return np.block([[self.sigma1, self.cross],
                         [self.cross.T, self.sigma2]])


@dataclass(frozen=True)
class ProblemInstance:
    dim: int
    source: GaussianMeasure
    target: GaussianMeasure
    lam: float
    seed: int


def random_instance(d: int, seed: int, lam: float | None = None) -> ProblemInstance:
    """Zero-mean Gaussians with Haar-random eigenvectors and U[1, 10]
    eigenvalues; regularization lam = 2d unless overridden."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    covs = []
    for name in ("source", "target"):
        rng = substream(seed, "instance", name, d)
        q = haar_orthogonal(d, rng)
        w = rng.uniform(1.0, 10.0, size=d)
        covs.append((q * w) @ q.T)
    zero = np.zeros(d)
    return ProblemInstance(d, GaussianMeasure(zero, covs[0]),
                           GaussianMeasure(zero, covs[1]),
                           2.0 * d if lam is None else float(lam), seed)


def entropic_plan(instance: ProblemInstance) -> JointGaussianPlan:
    """The joint Gaussian minimizing the KL-regularized squared-l2 objective."""
    a = instance.source.cov
    b = instance.target.cov
    lam = instance.lam
    d = instance.dim
    wa, va = sym_eig(a)
    if wa[-1] <= 0:
        raise ValueError("source covariance must be positive definite")
    a_half = (va * np.sqrt(wa)) @ va.T
    a_ihalf = (va / np.sqrt(wa)) @ va.T
    inner = a_half @ b @ a_half + (lam * lam / 16.0) * np.eye(d)
    e = sqrtm_psd(inner)
    cross = a_half @ e @ a_ihalf - (lam / 4.0) * np.eye(d)
    mean = np.concatenate([instance.source.mean, instance.target.mean])
    return JointGaussianPlan(mean, a, b, cross)


def gaussian_score(g: GaussianMeasure, y: np.ndarray) -> np.ndarray:
    """Score of the Gaussian density: -Sigma^{-1}(y - mu), batched over rows."""
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    yb = np.atleast_2d(y)
    diff = yb - g.mean[None, :]
    out = -np.linalg.solve(g.cov, diff.T).T
    return out[0] if single else out


def score_oracle(g: GaussianMeasure):
    """Closed-form score callable ``s(y, noise_level=None)``.

    When queried with a noise level tau it returns the score of the
    tau-smoothed measure N(mu, Sigma + tau^2 I).
    """
    base_prec = np.linalg.inv(g.cov)

    def score(y, noise_level=None):
        y = np.asarray(y, dtype=np.float64)
        single = y.ndim == 1
        yb = np.atleast_2d(y)
        diff = yb - g.mean[None, :]
        if noise_level is None:
            out = -diff @ base_prec.T
        else:
            smoothed = g.cov + (noise_level ** 2) * np.eye(g.dim)
            out = -np.linalg.solve(smoothed, diff.T).T
        return out[0] if single else out

    return score


def conditional_of_joint(plan: JointGaussianPlan, x: np.ndarray) -> GaussianMeasure:
    """Schur-complement conditional of the joint plan at X = x."""
    x = np.asarray(x, dtype=np.float64)
    d = plan.dim
    mu1, mu2 = plan.mean[:d], plan.mean[d:]
    sol = np.linalg.solve(plan.sigma1, plan.cross)       # Sigma1^{-1} C
    mean = mu2 + sol.T @ (x - mu1)
    cov = plan.sigma2 - plan.cross.T @ sol
    return GaussianMeasure(mean, 0.5 * (cov + cov.T))


def bw2_squared(g1: GaussianMeasure, g2: GaussianMeasure) -> float:
    """Squared Bures-Wasserstein distance between two Gaussians."""
    s1, s2 = g1.cov, g2.cov
    root1 = sqrtm_psd(s1)
    inner = sqrtm_psd(root1 @ s2 @ root1)
    val = (float(np.sum((g1.mean - g2.mean) ** 2))
           + float(np.trace(s1) + np.trace(s2) - 2.0 * np.trace(inner)))
    return max(val, 0.0)


def bw_uvp(sample_joint_cov: np.ndarray, reference: JointGaussianPlan) -> float:
    """Unexplained variance percentage, 0 to 100, lower is better.

    100 * BW^2(N(0, cov_hat), N(0, cov_ref)) / (tr(cov_ref) / 2); means are
    compared at zero since every benchmark instance is centered.
    """
    ref_cov = reference.joint_cov()
    if sample_joint_cov.shape != ref_cov.shape:
        raise ValueError("joint covariance dimensions disagree")
    zeros = np.zeros(ref_cov.shape[0])
    bw2 = bw2_squared(GaussianMeasure(zeros, sample_joint_cov),
                      GaussianMeasure(zeros, ref_cov))
    return 100.0 * bw2 / (0.5 * float(np.trace(ref_cov)))
