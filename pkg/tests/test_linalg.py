import numpy as np
import pytest
from scipy import stats

from scones.linalg import (EigenConvergenceError, SymmetryError,
                           empirical_covariance, haar_orthogonal,
                           sample_gaussian, sqrtm_psd, substream, sym_eig)


def random_symmetric(rng, d):
    a = rng.standard_normal((d, d))
    return a + a.T


def random_psd(rng, d):
    a = rng.standard_normal((d, d + 2))
    return a @ a.T / (d + 2)


def test_sym_eig_identity():
    w, v = sym_eig(np.eye(3))
    assert np.allclose(w, 1.0)
    assert np.allclose(v @ v.T, np.eye(3), atol=1e-12)


def test_sym_eig_diagonal():
    w, v = sym_eig(np.diag([4.0, 1.0]))
    assert np.allclose(w, [4.0, 1.0])
    assert np.allclose(np.abs(v), np.eye(2), atol=1e-12)


def test_sym_eig_reconstruction_random():
    rng = substream(7, "eig")
    m = random_symmetric(rng, 8)
    w, v = sym_eig(m)
    assert np.all(np.diff(w) <= 0)
    recon = (v * w) @ v.T
    assert np.linalg.norm(recon - m) <= 1e-8 * np.linalg.norm(m)


def test_sym_eig_property_sweep():
    rng = substream(11, "eig-sweep")
    for _ in range(100):
        d = int(rng.integers(2, 65))
        m = random_symmetric(rng, d)
        w, v = sym_eig(m)
        scale = max(np.linalg.norm(m), 1.0)
        assert np.linalg.norm((v * w) @ v.T - m) <= 1e-8 * scale
        assert np.linalg.norm(v.T @ v - np.eye(d)) <= 1e-8


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(SymmetryError):
        sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises((SymmetryError, EigenConvergenceError)):
        sym_eig(np.arange(6.0).reshape(2, 3))


def test_sqrtm_examples():
    assert np.allclose(sqrtm_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    assert np.allclose(sqrtm_psd(np.eye(4)), np.eye(4))


def test_sqrtm_squares_back():
    rng = substream(3, "sqrtm")
    for _ in range(100):
        d = int(rng.integers(2, 17))
        m = random_psd(rng, d)
        s = sqrtm_psd(m)
        assert np.allclose(s, s.T)
        assert np.linalg.norm(s @ s - m) <= 1e-8 * max(np.linalg.norm(m), 1.0)


def test_sqrtm_rejects_negative():
    with pytest.raises(ValueError):
        sqrtm_psd(np.diag([1.0, -0.5]))


def test_haar_so1():
    q = haar_orthogonal(1, substream(0, "haar1"))
    assert q.shape == (1, 1) and q[0, 0] == 1.0


def test_haar_orthogonality_and_det():
    for seed in range(20):
        rng = substream(seed, "haar")
        d = 2 + seed % 7
        q = haar_orthogonal(d, rng)
        assert np.linalg.norm(q.T @ q - np.eye(d)) < 1e-10
        assert np.linalg.det(q) > 0


def test_haar_column_marginal_ks():
    # first column of an SO(3) Haar draw is uniform on the sphere, so a single
    # coordinate is uniform on [-1, 1]
    rng = substream(42, "haar-ks")
    coords = np.array([haar_orthogonal(3, rng)[0, 0] for _ in range(1000)])
    ks = stats.kstest(coords, stats.uniform(loc=-1.0, scale=2.0).cdf)
    assert ks.statistic < 1.63 / np.sqrt(coords.size)  # alpha = 0.01


def test_sample_gaussian_moments():
    rng = substream(5, "gauss")
    x = sample_gaussian(np.zeros(3), np.eye(3), 100_000, rng)
    _, cov = empirical_covariance(x)
    assert np.abs(cov - np.eye(3)).max() < 0.03


def test_sample_gaussian_edge_cases():
    rng = substream(5, "gauss-edge")
    assert sample_gaussian(np.zeros(2), np.eye(2), 0, rng).shape == (0, 2)
    x = sample_gaussian(np.array([5.0, 5.0]), np.zeros((2, 2)), 7, rng)
    assert np.all(x == 5.0)
    with pytest.raises(ValueError):
        sample_gaussian(np.zeros(2), np.eye(3), 4, rng)


def test_empirical_covariance_hand_case():
    mean, cov = empirical_covariance(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert np.allclose(mean, [1.0, 0.0])
    assert np.allclose(cov, np.diag([1.0, 0.0]))  # population 1/n form


def test_empirical_covariance_constant_and_sampling():
    mean, cov = empirical_covariance(np.full((10, 2), 3.0))
    assert np.allclose(cov, 0.0)
    rng = substream(9, "cov")
    x = sample_gaussian(np.zeros(2), np.diag(np.sqrt([2.0, 3.0])), 100_000, rng)
    _, cov = empirical_covariance(x)
    assert np.abs(cov[0, 0] - 2.0) < 0.06 and np.abs(cov[1, 1] - 3.0) < 0.09
    with pytest.raises(ValueError):
        empirical_covariance(np.ones((1, 2)))


def test_substream_determinism_and_independence():
    a1 = substream(123, "x").standard_normal(8)
    a2 = substream(123, "x").standard_normal(8)
    b = substream(123, "y").standard_normal(8)
    c = substream(124, "x").standard_normal(8)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert not np.array_equal(a1, c)
