"""Dense symmetric linear algebra and seeded randomness.

Everything here is deterministic given its inputs: matrix routines are pure,
and random draws go through numpy Generators created by :func:`substream`, so
a (seed, labels) pair always yields the same stream.  Covariances use the
population 1/n normalization, which is what the Bures-Wasserstein metric
module compares against.
"""

from __future__ import annotations

import zlib

import numpy as np


class SymmetryError(ValueError):
    """Input matrix is not symmetric within tolerance."""


class EigenConvergenceError(RuntimeError):
    """The symmetric eigensolver failed to converge (ill-conditioned input)."""


def substream(seed: int, *labels) -> np.random.Generator:
    """Independent, reproducible generator for a named substream of ``seed``.

    Labels may be strings or ints; they are hashed with crc32 (stable across
    runs and platforms, unlike Python's salted ``hash``).
    """
    key = tuple(zlib.crc32(str(l).encode("utf-8")) for l in labels)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _check_symmetric(m: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > rtol * scale:
        raise SymmetryError("matrix is not symmetric within tolerance")
    return 0.5 * (m + m.T)


def sym_eig(m: np.ndarray, rtol: float = 1e-10):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` in descending order and
    orthogonal columns ``v`` so that ``v @ diag(w) @ v.T`` reconstructs ``m``.
    """
    msym = _check_symmetric(m, rtol)
    try:
        w, v = np.linalg.eigh(msym)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(str(exc)) from exc
    return w[::-1].copy(), v[:, ::-1].copy()


def sqrtm_psd(m: np.ndarray, clip: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in ``[-clip * max_eig, 0)`` are treated as rank-deficiency
    noise and clamped to zero; anything more negative raises.
    """
    w, v = sym_eig(m)
    wmax = max(float(w[0]), 0.0)
    floor = -clip * max(wmax, 1.0)
    if w[-1] < floor:
        raise ValueError(f"matrix has negative eigenvalue {w[-1]:.3e} below tolerance")
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


def haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Rotation matrix drawn from the Haar measure on SO(d).

    QR of a Gaussian matrix with the R-diagonal sign correction; a final
    column flip pins det = +1.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return np.ones((1, 1))
    gauss = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if np.linalg.det(q) < 0:
        q[:, -1] = -q[:, -1]
    return q


def sample_gaussian(mean: np.ndarray, cov_chol: np.ndarray, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows from N(mean, L L^T) given the lower factor ``L``."""
    mean = np.asarray(mean, dtype=np.float64)
    cov_chol = np.asarray(cov_chol, dtype=np.float64)
    d = mean.shape[0]
    if cov_chol.shape != (d, d):
        raise ValueError(f"factor shape {cov_chol.shape} does not match mean dim {d}")
    z = rng.standard_normal((n, d))
    return mean[None, :] + z @ cov_chol.T


def empirical_covariance(samples: np.ndarray):
    """Mean and population (1/n) covariance of the rows of ``samples``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two samples")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    return mean, 0.5 * (cov + cov.T)
