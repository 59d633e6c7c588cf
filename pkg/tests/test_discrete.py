import math

import numpy as np
import pytest

from scones.discrete import (ConvergenceError, DualVectors, EmpiricalMeasure,
                             dual_ascent_generic, dual_objective,
                             instance_from_csv, instance_to_csv,
                             logconcavity_check, make_cost, plan_from_duals,
                             primal_objective, sinkhorn_kl, softmin_potential,
                             stability_check)
from scones.dual import cost_matrix
from scones.fdiv import KL, PEARSON_CHI2, h_regularizer, make_compat
from scones.linalg import substream

COST_2X2 = np.array([[0.0, 1.0], [1.0, 0.0]])
UNIF2 = np.array([0.5, 0.5])


def random_instance(rng, n, m, dim=2):
    xs = rng.standard_normal((n, dim))
    ys = rng.standard_normal((m, dim))
    wx = rng.dirichlet(np.full(n, 5.0))
    wy = rng.dirichlet(np.full(m, 5.0))
    cost = cost_matrix("sqeuclidean", xs, ys)
    return cost, wx, wy


def test_sinkhorn_independence_limit():
    plan, _ = sinkhorn_kl(COST_2X2, UNIF2, UNIF2, 1e6)
    assert np.allclose(plan, 0.25, atol=1e-6)


def test_sinkhorn_unregularized_limit():
    plan, _ = sinkhorn_kl(COST_2X2, UNIF2, UNIF2, 0.01)
    assert np.allclose(plan, np.diag([0.5, 0.5]), atol=1e-8)


def test_sinkhorn_closed_form_lambda_one():
    plan, _ = sinkhorn_kl(COST_2X2, UNIF2, UNIF2, 1.0, tol=1e-12)
    diag = 0.5 * math.e / (1.0 + math.e)     # = 0.5 / (1 + 1/e)
    off = 0.5 / (1.0 + math.e)
    assert np.allclose(plan, [[diag, off], [off, diag]], atol=1e-10)
    assert diag == pytest.approx(0.36552928931, abs=1e-9)


def test_sinkhorn_potentials_reproduce_plan():
    # the returned duals follow the (1/e) exp(V / lam) convention exactly
    rng = substream(1, "conv")
    cost, wx, wy = random_instance(rng, 7, 9)
    for lam in (0.5, 1.0, 2.0):
        plan, duals = sinkhorn_kl(cost, wx, wy, lam)
        rebuilt = plan_from_duals(cost, wx, wy, make_compat("kl", lam), duals)
        assert np.abs(rebuilt - plan).max() < 1e-12
        assert np.abs(plan.sum(axis=1) - wx).sum() < 1e-10
        assert np.abs(plan.sum(axis=0) - wy).sum() < 1e-10


def test_sinkhorn_nonconvergence_raises():
    rng = substream(0, "nonconv")
    cost, wx, wy = random_instance(rng, 10, 10)
    with pytest.raises(ConvergenceError):
        sinkhorn_kl(cost, wx, wy, 2.0, tol=1e-12, max_iter=1)


def test_plan_from_duals_examples():
    zero = DualVectors(np.zeros(2), np.zeros(2))
    plan = plan_from_duals(np.zeros((2, 2)), UNIF2, UNIF2,
                           make_compat("kl", 1.0), zero)
    assert np.allclose(plan, math.exp(-1.0) * 0.25)
    # chi2 hard hinge: all violations at or below -2 lam give the zero plan
    duals = DualVectors(np.full(2, -3.0), np.full(2, -3.0))
    plan = plan_from_duals(np.zeros((2, 2)), UNIF2, UNIF2,
                           make_compat("pearson_chi2", 1.0), duals)
    assert np.all(plan == 0.0)


def test_dual_ascent_zero_cost_optimum():
    compat = make_compat("kl", 1.5)
    duals, j_star = dual_ascent_generic(np.zeros((2, 2)), UNIF2, UNIF2, compat,
                                        lr=1.0, tol=1e-11)
    assert j_star == pytest.approx(0.0, abs=1e-10)
    v = duals.phi[:, None] + duals.psi[None, :]
    assert np.allclose(v, 1.5, atol=1e-8)


def test_dual_ascent_strong_duality_kl():
    plan, _ = sinkhorn_kl(COST_2X2, UNIF2, UNIF2, 1.0, tol=1e-12)
    _, j_star = dual_ascent_generic(COST_2X2, UNIF2, UNIF2,
                                    make_compat("kl", 1.0), lr=1.0, tol=1e-11)
    k = primal_objective(COST_2X2, UNIF2, UNIF2, KL, 1.0, plan)
    assert abs(k - j_star) < 1e-8


def test_dual_ascent_chi2_marginals():
    rng = substream(2, "chi2-ascent")
    cost, wx, wy = random_instance(rng, 5, 5)
    compat = make_compat("pearson_chi2", 1.0)
    duals, _ = dual_ascent_generic(cost, wx, wy, compat, lr=1.0, tol=1e-10)
    plan = plan_from_duals(cost, wx, wy, compat, duals)
    assert np.abs(plan.sum(axis=1) - wx).max() < 1e-6
    assert np.abs(plan.sum(axis=0) - wy).max() < 1e-6


@pytest.mark.parametrize("tag", ["kl", "pearson_chi2"])
def test_strong_duality_random_sweep(tag):
    rng = substream(3, "duality", tag)
    for trial in range(10):
        n = int(rng.integers(3, 21))
        m = int(rng.integers(3, 21))
        cost, wx, wy = random_instance(rng, n, m)
        lam = float(rng.uniform(0.5, 2.0))
        compat = make_compat(tag, lam)
        duals, j_star = dual_ascent_generic(cost, wx, wy, compat, lr=lam, tol=1e-10)
        plan = plan_from_duals(cost, wx, wy, compat, duals)
        kind = KL if tag == "kl" else PEARSON_CHI2
        k = primal_objective(cost, wx, wy, kind, lam, plan)
        assert abs(k - j_star) < 1e-7
        if tag == "kl":
            plan_s, _ = sinkhorn_kl(cost, wx, wy, lam)
            assert np.abs(plan - plan_s).sum() < 1e-6


def test_primal_objective_examples():
    prod = np.outer(UNIF2, UNIF2)
    assert primal_objective(np.zeros((2, 2)), UNIF2, UNIF2, KL, 1.0, prod) == 0.0
    ident = np.diag([0.5, 0.5])
    val = primal_objective(np.zeros((2, 2)), UNIF2, UNIF2, KL, 1.0, ident)
    assert val == pytest.approx(math.log(2.0), abs=1e-14)


def test_gauge_invariance_of_kl_plan():
    rng = substream(4, "gauge")
    cost, wx, wy = random_instance(rng, 6, 6)
    _, duals = sinkhorn_kl(cost, wx, wy, 1.0)
    base = plan_from_duals(cost, wx, wy, make_compat("kl", 1.0), duals)
    shifted = DualVectors(duals.phi + 0.37, duals.psi - 0.37)
    moved = plan_from_duals(cost, wx, wy, make_compat("kl", 1.0), shifted)
    assert np.abs(moved - base).max() <= 1e-14 * max(1.0, base.max())


def test_lambda_monotonicity_of_regularizer():
    rng = substream(5, "lam-mono")
    cost, wx, wy = random_instance(rng, 8, 8)
    prod = np.outer(wx, wy)
    values = []
    for lam in (0.1, 1.0, 10.0):
        plan, _ = sinkhorn_kl(cost, wx, wy, lam)
        values.append(h_regularizer(KL, plan, prod))
    assert values[0] >= values[1] >= values[2]


def test_softmin_single_atom():
    cost_col = np.array([3.7])
    assert softmin_potential(cost_col, np.zeros(1), np.ones(1), 1.0) == pytest.approx(3.7)


def test_softmin_is_min_in_small_lambda_limit():
    rng = substream(6, "softmin")
    cost_col = rng.uniform(0.0, 4.0, size=12)
    phi = rng.standard_normal(12)
    sigma = np.full(12, 1.0 / 12)
    val = softmin_potential(cost_col, phi, sigma, 1e-6)
    assert abs(val - np.min(cost_col - phi)) < 1e-4


def test_softmin_fixed_point_matches_sinkhorn():
    # alternating softmin iteration is log-domain sinkhorn up to the gauge
    rng = substream(7, "fixed-point")
    xs = rng.standard_normal((6, 2))
    ys = rng.standard_normal((5, 2))
    wx = np.full(6, 1 / 6)
    wy = np.full(5, 1 / 5)
    cost = cost_matrix("sqeuclidean", xs, ys)
    lam = 0.8
    f = np.zeros(6)
    g = np.zeros(5)
    for _ in range(3000):
        g = np.array([softmin_potential(cost[:, j], f, wx, lam) for j in range(5)])
        f = np.array([softmin_potential(cost[i, :], g, wy, lam) for i in range(6)])
    _, duals = sinkhorn_kl(cost, wx, wy, lam, tol=1e-12)
    # same potentials up to an additive constant split
    delta_f = (f - duals.phi) - (f - duals.phi).mean()
    delta_g = (g - duals.psi) - (g - duals.psi).mean()
    assert np.abs(delta_f).max() < 1e-9
    assert np.abs(delta_g).max() < 1e-9


def test_logconcavity_single_atom_quadratic():
    atoms = np.array([[0.4, -0.2]])
    val = logconcavity_check(atoms, np.zeros(1), np.ones(1), 1.0,
                             x=np.array([1.0, 1.0]), y=np.array([0.1, 0.3]),
                             step=1e-3)
    assert abs(val) < 1e-8


def test_logconcavity_two_atoms_analytic_variance():
    atoms = np.array([[0.0], [1.0]])
    sigma = np.array([0.3, 0.7])
    phi = np.array([0.2, -0.1])
    lam = 1.3
    y = np.array([0.4])
    dens = sigma * np.exp((phi - (atoms[:, 0] - y[0]) ** 2) / lam)
    rho = dens / dens.sum()
    var = rho[0] * rho[1] * (atoms[0, 0] - atoms[1, 0]) ** 2
    expected = -(4.0 / lam ** 2) * var
    val = logconcavity_check(atoms, phi, sigma, lam, x=np.array([0.5]), y=y,
                             step=1e-3)
    assert val == pytest.approx(expected, abs=1e-4)
    assert val < 0


def test_logconcavity_random_configs():
    rng = substream(8, "logconc")
    for _ in range(10):
        n = int(rng.integers(5, 21))
        atoms = rng.standard_normal((n, 2))
        sigma = rng.dirichlet(np.full(n, 3.0))
        phi = rng.standard_normal(n)
        lam = float(rng.uniform(1.0, 3.0))
        y = rng.standard_normal(2)
        val = logconcavity_check(atoms, phi, sigma, lam,
                                 x=rng.standard_normal(2), y=y, step=1e-3)
        assert val <= 1e-6


def test_stability_check_exact_duals():
    rng = substream(9, "stab0")
    cost, wx, wy = random_instance(rng, 6, 7)
    plan, duals = sinkhorn_kl(cost, wx, wy, 1.0, tol=1e-12)
    compat = make_compat("kl", 1.0)
    j_star = dual_objective(cost, wx, wy, compat, duals.phi, duals.psi)
    res = stability_check(cost, wx, wy, compat, duals, j_star, plan)
    assert res.holds and res.lhs < 1e-9 and res.eps == 0.0


def test_stability_bound_perturbation_sweep():
    rng = substream(10, "stab")
    for trial in range(100):
        n = int(rng.integers(3, 9))
        cost, wx, wy = random_instance(rng, n, n)
        lam = float(rng.uniform(0.5, 2.0))
        compat = make_compat("kl", lam)
        plan, duals = sinkhorn_kl(cost, wx, wy, lam, tol=1e-12)
        j_star = dual_objective(cost, wx, wy, compat, duals.phi, duals.psi)
        scale = float(rng.uniform(1e-3, 0.1))
        noisy = DualVectors(duals.phi + scale * rng.standard_normal(n),
                            duals.psi + scale * rng.standard_normal(n))
        res = stability_check(cost, wx, wy, compat, noisy, j_star, plan)
        assert res.holds, (res.lhs, res.rhs, trial)


def test_stability_single_coordinate_perturbation():
    rng = substream(11, "stab1")
    cost, wx, wy = random_instance(rng, 5, 5)
    plan, duals = sinkhorn_kl(cost, wx, wy, 1.0, tol=1e-12)
    compat = make_compat("kl", 1.0)
    j_star = dual_objective(cost, wx, wy, compat, duals.phi, duals.psi)
    phi = duals.phi.copy()
    phi[2] += 0.01
    res = stability_check(cost, wx, wy, compat, DualVectors(phi, duals.psi),
                          j_star, plan)
    assert res.holds and res.lhs > 0


def test_instance_csv_round_trip():
    rng = substream(12, "csv")
    src = EmpiricalMeasure(rng.standard_normal((4, 2)), np.full(4, 0.25))
    tgt = EmpiricalMeasure(rng.standard_normal((3, 2)), np.array([0.5, 0.25, 0.25]))
    text = instance_to_csv(src, tgt, "sqeuclidean")
    s2, t2, tag = instance_from_csv(text)
    assert tag == "sqeuclidean"
    assert np.allclose(s2.atoms, src.atoms) and np.allclose(t2.weights, tgt.weights)
    assert np.allclose(make_cost(s2, t2, tag),
                       cost_matrix("sqeuclidean", src.atoms, tgt.atoms))
