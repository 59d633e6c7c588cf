import numpy as np
import pytest

from scones.baselines import BaryConfig, bary_map_eval, train_barycentric
from scones.dual import TrainConfig, new_dual_pair, train_dual
from scones.fdiv import make_compat
from scones.gaussian import entropic_plan, random_instance
from scones.linalg import sample_gaussian, substream
from scones import nets
from scones.baselines import BaryMap


def test_untrained_zero_net_outputs_zero_and_empty_batch():
    spec = nets.MlpSpec((2, 4, 2))
    bary = BaryMap(spec, nets.zero_params(spec))
    assert np.allclose(bary_map_eval(bary, np.ones((3, 2))), 0.0)
    assert bary_map_eval(bary, np.zeros((0, 2))).shape == (0, 2)


def test_constant_compatibility_regresses_to_target_mean():
    # zero potentials with zero cost: uniform weights, so T(x) ~ mean(y)
    rng = substream(1, "bp-mean")
    src = rng.standard_normal((600, 2))
    tgt = rng.standard_normal((600, 2)) + np.array([1.5, -0.5])
    pair = new_dual_pair(2, 2, make_compat("kl", 1.0), hidden=(8,), seed=0,
                         cost="zero")
    for p in pair.phi.weights + pair.phi.biases + pair.psi.weights + pair.psi.biases:
        p[:] = 0.0
    bary = train_barycentric(pair, src, tgt,
                             BaryConfig(hidden=(16,), iterations=2500,
                                        batch_size=128, lr=3e-3, seed=1))
    outs = bary_map_eval(bary, rng.standard_normal((200, 2)))
    target_mean = tgt.mean(axis=0)
    assert np.abs(outs - target_mean).max() < 0.15


def test_small_lambda_concentration_gives_identity_map():
    # identical source and target datasets with tiny regularization: the
    # compatibility concentrates near y = x and T learns the identity
    rng = substream(2, "bp-ident")
    data = rng.uniform(-1.0, 1.0, size=(800, 2))
    pair = new_dual_pair(2, 2, make_compat("kl", 0.05), hidden=(64, 64), seed=3)
    pair, _ = train_dual(pair, data, data,
                         TrainConfig(iterations=3000, batch_size=256, lr=2e-3,
                                     seed=4))
    bary = train_barycentric(pair, data, data,
                             BaryConfig(hidden=(64, 64), iterations=4000,
                                        batch_size=256, lr=2e-3, seed=5))
    xs = rng.uniform(-0.8, 0.8, size=(300, 2))
    outs = bary_map_eval(bary, xs)
    displacement = np.linalg.norm(outs - xs, axis=1).mean()
    assert displacement < 0.05


def test_gaussian_benchmark_map_close_to_conditional_mean():
    inst = random_instance(2, seed=9, lam=4.0)
    plan = entropic_plan(inst)
    gain = np.linalg.solve(plan.sigma1, plan.cross).T   # y = gain @ x
    rng = substream(3, "bp-gauss")
    xs = sample_gaussian(np.zeros(2), np.linalg.cholesky(inst.source.cov), 4000, rng)
    ys = sample_gaussian(np.zeros(2), np.linalg.cholesky(inst.target.cov), 4000, rng)
    pair = new_dual_pair(2, 2, make_compat("kl", inst.lam), hidden=(64, 64), seed=6)
    pair, _ = train_dual(pair, xs, ys,
                         TrainConfig(iterations=4000, batch_size=384, lr=1e-3,
                                     seed=7))
    bary = train_barycentric(pair, xs, ys,
                             BaryConfig(hidden=(64, 64), iterations=5000,
                                        batch_size=256, lr=1e-3, seed=8))
    probe = sample_gaussian(np.zeros(2), np.linalg.cholesky(inst.source.cov), 2000,
                            substream(4, "probe"))
    outs = bary_map_eval(bary, probe)
    # compare the fitted linear response against the Schur conditional mean
    fitted = np.linalg.lstsq(probe, outs, rcond=None)[0].T
    rel = np.abs(fitted - gain).max() / np.abs(gain).max()
    assert rel < 0.10


def test_bp_outputs_are_deterministic_per_x():
    spec = nets.MlpSpec((2, 8, 2))
    bary = BaryMap(spec, nets.he_uniform(spec, np.random.default_rng(0)))
    x = np.tile(np.array([[0.3, -0.7]]), (50, 1))
    outs = bary_map_eval(bary, x)
    assert np.all(outs == outs[0])  # zero conditional variance by construction
