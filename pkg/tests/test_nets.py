import numpy as np
import pytest

from scones import nets
from scones.linalg import substream


def hand_net():
    # 1 -> 2 -> 1, ReLU hidden, linear output
    spec = nets.MlpSpec((1, 2, 1))
    params = nets.zero_params(spec)
    params.weights[0] = np.array([[1.0], [-1.0]])
    params.weights[1] = np.array([[1.0, 1.0]])
    return spec, params


def test_forward_hand_composition():
    spec, params = hand_net()
    assert nets.mlp_forward(spec, params, np.array([2.0])) == 2.0
    assert nets.mlp_forward(spec, params, np.array([-3.0])) == 3.0


def test_forward_zero_weights_returns_bias():
    spec = nets.MlpSpec((3, 4, 1))
    params = nets.zero_params(spec)
    params.biases[-1][:] = 0.7
    assert nets.mlp_forward(spec, params, np.zeros(3)) == pytest.approx(0.7)


def test_param_grad_linear_case():
    spec = nets.MlpSpec((1, 1))
    params = nets.zero_params(spec)
    params.weights[0][0, 0] = 2.0
    dws, dbs = nets.mlp_param_grad(spec, params, np.array([[3.0]]), np.array([1.0]))
    assert dws[0][0, 0] == 3.0 and dbs[0][0] == 1.0
    dws, dbs = nets.mlp_param_grad(spec, params, np.array([[3.0]]), np.array([0.0]))
    assert dws[0][0, 0] == 0.0 and dbs[0][0] == 0.0


def _flatten(dws, dbs):
    return np.concatenate([a.ravel() for a in dws] + [b.ravel() for b in dbs])


def _fd_param_grad(spec, params, x, upstream, h=1e-6):
    out = []
    for arrs in (params.weights, params.biases):
        for arr in arrs:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                old = arr[idx]
                arr[idx] = old + h
                fp = float(np.sum(upstream * nets.mlp_forward(spec, params, x).squeeze(-1)))
                arr[idx] = old - h
                fm = float(np.sum(upstream * nets.mlp_forward(spec, params, x).squeeze(-1)))
                arr[idx] = old
                g[idx] = (fp - fm) / (2 * h)
            out.append(g.ravel())
    return np.concatenate(out)


def _rel_err(a, b):
    return np.abs(a - b).max() / max(1.0, np.abs(b).max())


def test_param_grad_matches_finite_differences():
    rng = substream(2, "pgrad")
    for trial in range(50):
        widths = (4, int(rng.integers(3, 9)), 1)
        spec = nets.MlpSpec(widths)
        params = nets.he_uniform(spec, rng)
        x = rng.standard_normal((3, 4))
        upstream = rng.standard_normal(3)
        dws, dbs = nets.mlp_param_grad(spec, params, x, upstream)
        fd = _fd_param_grad(spec, params, x, upstream)
        assert _rel_err(_flatten(dws, dbs), fd) < 1e-5


def test_input_grad_linear_net_returns_weights():
    spec = nets.MlpSpec((3, 1))
    params = nets.zero_params(spec)
    params.weights[0][:] = np.array([[1.0, -2.0, 0.5]])
    g = nets.mlp_input_grad(spec, params, np.array([0.3, 0.4, 0.5]))
    assert np.allclose(g, [1.0, -2.0, 0.5])


def test_input_grad_dead_relu_is_zero():
    spec = nets.MlpSpec((2, 4, 1))
    params = nets.zero_params(spec)
    params.weights[0][:] = -1.0
    params.biases[0][:] = -1.0   # pre-activations strictly negative
    params.weights[1][:] = 1.0
    g = nets.mlp_input_grad(spec, params, np.array([1.0, 1.0]))
    assert np.allclose(g, 0.0)


def test_input_grad_matches_finite_differences():
    rng = substream(3, "igrad")
    for trial in range(50):
        spec = nets.MlpSpec((2, 16, 16, 1))
        params = nets.he_uniform(spec, rng)
        x = rng.standard_normal(2)
        g = nets.mlp_input_grad(spec, params, x)
        fd = np.zeros(2)
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd[i] = (nets.mlp_forward(spec, params, x + e)
                     - nets.mlp_forward(spec, params, x - e)) / (2 * h)
        assert _rel_err(g, fd) < 1e-5


@pytest.mark.parametrize("act", ["relu", "sigmoid"])
def test_output_activation_grads(act):
    rng = substream(4, "act" + act)
    spec = nets.MlpSpec((3, 8, 1), act)
    params = nets.he_uniform(spec, rng)
    x = rng.standard_normal((2, 3))
    upstream = rng.standard_normal(2)
    dws, dbs = nets.mlp_param_grad(spec, params, x, upstream)
    fd = _fd_param_grad(spec, params, x, upstream)
    assert _rel_err(_flatten(dws, dbs), fd) < 1e-5


def test_vector_output_param_grad():
    rng = substream(5, "vec")
    spec = nets.MlpSpec((3, 8, 2))
    params = nets.he_uniform(spec, rng)
    x = rng.standard_normal((4, 3))
    upstream = rng.standard_normal((4, 2))

    def objective():
        return float(np.sum(upstream * nets.mlp_forward(spec, params, x)))

    dws, dbs = nets.mlp_param_grad(spec, params, x, upstream)
    h = 1e-6
    w = params.weights[0]
    old = w[1, 2]
    w[1, 2] = old + h
    fp = objective()
    w[1, 2] = old - h
    fm = objective()
    w[1, 2] = old
    assert dws[0][1, 2] == pytest.approx((fp - fm) / (2 * h), rel=1e-5, abs=1e-8)


def test_relu_subgradient_at_zero_is_zero():
    spec = nets.MlpSpec((1, 1, 1))
    params = nets.zero_params(spec)
    params.weights[0][0, 0] = 1.0
    params.weights[1][0, 0] = 1.0
    # pre-activation exactly zero at x = 0
    dws, _ = nets.mlp_param_grad(spec, params, np.array([[0.0]]), np.array([1.0]))
    assert dws[0][0, 0] == 0.0
    assert nets.mlp_input_grad(spec, params, np.array([0.0]))[0] == 0.0


def test_he_uniform_is_seeded():
    spec = nets.MlpSpec((3, 5, 1))
    a = nets.he_uniform(spec, np.random.default_rng(9))
    b = nets.he_uniform(spec, np.random.default_rng(9))
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert all(np.all(b == 0) for b in a.biases)


def test_adam_moves_toward_maximum():
    # maximize -(w - 3)^2 for a single scalar weight
    spec = nets.MlpSpec((1, 1))
    params = nets.zero_params(spec)
    opt = nets.Adam(lr=0.05)
    for _ in range(500):
        w = params.weights[0][0, 0]
        grad = -2.0 * (w - 3.0)
        opt.step(params, [np.array([[grad]])], [np.zeros(1)])
    assert params.weights[0][0, 0] == pytest.approx(3.0, abs=1e-2)
