"""Network engine checks, anchored by an independent finite-difference oracle."""

import io

import numpy as np
import pytest

from dbrl import accel
from dbrl.neural import (
    Adam,
    MlpNetwork,
    backward,
    count_macs,
    forward,
    forward_cached,
    load_network,
    mlp_init,
    save_network,
    soft_update,
)

RNG = lambda s: np.random.default_rng(s)


# --- independent oracle: central finite differences --------------------

FD_H = 1e-5


def fd_param_grad(net, x, probe, arr):
    """d sum(forward(net,x)*probe) / d arr, one entry at a time."""
    g = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + FD_H
        lp = float(np.sum(forward(net, x) * probe))
        flat[i] = old - FD_H
        lm = float(np.sum(forward(net, x) * probe))
        flat[i] = old
        gflat[i] = (lp - lm) / (2 * FD_H)
    return g


def fd_input_grad(net, x, probe):
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + FD_H
        lp = float(np.sum(forward(net, x) * probe))
        flat[i] = old - FD_H
        lm = float(np.sum(forward(net, x) * probe))
        flat[i] = old
        gflat[i] = (lp - lm) / (2 * FD_H)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a) + np.abs(b)))


@pytest.mark.parametrize(
    "sizes,head,a_max,hidden",
    [
        ([3, 8, 8, 2], "tanh", 2.0, "relu"),  # actor-shaped, fused kernel path
        ([4, 8, 8, 1], "identity", 1.0, "relu"),  # critic-shaped, fused kernel path
        ([3, 6, 1], "identity", 1.0, "relu"),  # one hidden layer, generic path
        ([3, 5, 5, 2], "tanh", 1.5, "identity"),  # linear hidden, generic path
    ],
)
def test_backward_matches_finite_differences(sizes, head, a_max, hidden):
    rng = RNG(7)
    net = mlp_init(sizes, rng, head=head, a_max=a_max, hidden=hidden, dtype=np.float64)
    x = rng.normal(size=(5, sizes[0]))
    probe = rng.normal(size=(5, sizes[-1]))
    _, caches = forward_cached(net, x)
    gw, gb, gx = backward(net, caches, probe)
    for i, w in enumerate(net.weights):
        assert rel_err(gw[i], fd_param_grad(net, x, probe, w)) <= 1e-4
    for i, b in enumerate(net.biases):
        assert rel_err(gb[i], fd_param_grad(net, x, probe, b)) <= 1e-4
    assert rel_err(gx, fd_input_grad(net, x, probe)) <= 1e-4


def test_linear_net_gradient_is_input_outer_probe():
    # single linear layer: y = x W + b, so dL/dW = x^T probe exactly
    rng = RNG(3)
    net = mlp_init([4, 3], rng, head="identity", hidden="identity", dtype=np.float64)
    x = rng.normal(size=(6, 4))
    probe = rng.normal(size=(6, 3))
    _, caches = forward_cached(net, x)
    gw, gb, gx = backward(net, caches, probe)
    np.testing.assert_allclose(gw[0], x.T @ probe, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(gb[0], probe.sum(axis=0), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(gx, probe @ net.weights[0].T, rtol=1e-12, atol=1e-12)


def test_count_macs_production_shapes():
    rng = RNG(0)
    actor_pend = mlp_init([3, 256, 256, 1], rng, head="tanh", a_max=2.0)
    assert count_macs(actor_pend) == 66_560
    actor_mc = mlp_init([2, 256, 256, 1], rng, head="tanh", a_max=1.0)
    assert count_macs(actor_mc) == 66_304
    gate_pend = mlp_init([4, 256, 256, 2], rng)
    assert count_macs(gate_pend) == 67_072
    tiny = mlp_init([2, 3, 4], rng)
    assert count_macs(tiny) == 2 * 3 + 3 * 4


def test_forward_shapes_and_bounds():
    rng = RNG(11)
    net = mlp_init([3, 16, 16, 2], rng, head="tanh", a_max=2.0, dtype=np.float64)
    y1 = forward(net, rng.normal(size=3))
    assert y1.shape == (2,)
    y2 = forward(net, rng.normal(size=(9, 3)) * 50)
    assert y2.shape == (9, 2)
    assert np.all(np.abs(y2) <= 2.0)


def test_init_is_fan_in_uniform_and_deterministic():
    a = mlp_init([5, 7, 2], RNG(42), dtype=np.float64)
    b = mlp_init([5, 7, 2], RNG(42), dtype=np.float64)
    for wa, wb in zip(a.weights + a.biases, b.weights + b.biases):
        np.testing.assert_array_equal(wa, wb)
    assert np.max(np.abs(a.weights[0])) <= 1 / np.sqrt(5)
    assert np.max(np.abs(a.weights[1])) <= 1 / np.sqrt(7)
    c = mlp_init([5, 7, 2], RNG(43), dtype=np.float64)
    assert not np.array_equal(a.weights[0], c.weights[0])


# --- optimizer ----------------------------------------------------------


def reference_adam(params, grads_seq, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook Adam, written independently of the package kernel."""
    params = [p.copy() for p in params]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    for t, grads in enumerate(grads_seq, start=1):
        for i, (p, g) in enumerate(zip(params, grads)):
            m[i] = b1 * m[i] + (1 - b1) * g
            v[i] = b2 * v[i] + (1 - b2) * g * g
            mhat = m[i] / (1 - b1**t)
            vhat = v[i] / (1 - b2**t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)
    return params


def test_adam_matches_reference_trajectory():
    rng = RNG(5)
    net = mlp_init([3, 4, 2], rng, dtype=np.float64)
    start = [p.copy() for p in net.weights + net.biases]
    grads_seq = []
    opt = Adam(lr=3e-4)
    for _ in range(5):
        gw = [rng.normal(size=w.shape) for w in net.weights]
        gb = [rng.normal(size=b.shape) for b in net.biases]
        grads_seq.append([g.copy() for g in gw + gb])
        opt.step(net, gw, gb)
    expected = reference_adam(start, grads_seq, lr=3e-4)
    for p, e in zip(net.weights + net.biases, expected):
        np.testing.assert_allclose(p, e, rtol=1e-12, atol=1e-14)


def test_adam_first_step_moves_against_gradient():
    rng = RNG(9)
    net = mlp_init([2, 3], rng, dtype=np.float64)
    before = net.weights[0].copy()
    gw = [np.ones_like(net.weights[0])]
    gb = [np.zeros_like(net.biases[0])]
    Adam(lr=3e-4).step(net, gw, gb)
    delta = net.weights[0] - before
    assert np.all(delta < 0)
    np.testing.assert_allclose(-delta, 3e-4, rtol=1e-4)


def test_adam_minimizes_quadratic():
    net = mlp_init([1, 1], RNG(1), hidden="identity", dtype=np.float64)
    net.weights[0][:] = 5.0
    opt = Adam(lr=0.05)
    for _ in range(2000):
        g = 2 * (net.weights[0] - 1.0)
        opt.step(net, [g], [np.zeros_like(net.biases[0])])
    np.testing.assert_allclose(net.weights[0], 1.0, atol=1e-3)


def test_soft_update_blend_and_convergence():
    rng = RNG(2)
    src = mlp_init([3, 4, 2], rng, dtype=np.float64)
    tgt = src.copy()
    for w in src.weights + src.biases:
        w += 1.0
    before = tgt.weights[0].copy()
    soft_update(tgt, src, rho=0.005)
    np.testing.assert_allclose(tgt.weights[0], 0.995 * before + 0.005 * src.weights[0], rtol=1e-12)
    for _ in range(4000):
        soft_update(tgt, src, rho=0.005)
    np.testing.assert_allclose(tgt.weights[0], src.weights[0], atol=1e-6)


def test_checkpoint_roundtrip(tmp_path):
    rng = RNG(21)
    net = mlp_init([3, 8, 8, 2], rng, head="tanh", a_max=2.0, dtype=np.float32)
    path = tmp_path / "actor.npz"
    save_network(path, net)
    loaded = load_network(path)
    assert loaded.head == "tanh" and loaded.hidden == "relu"
    assert loaded.a_max == 2.0
    assert loaded.layer_sizes == [3, 8, 8, 2]
    for a, b in zip(net.weights + net.biases, loaded.weights + loaded.biases):
        np.testing.assert_array_equal(a, b)
        assert a.dtype == b.dtype
    x = np.linspace(-1, 1, 3, dtype=np.float32)
    np.testing.assert_array_equal(forward(net, x), forward(loaded, x))


@pytest.mark.skipif(not accel.JIT_ENABLED, reason="numba path disabled")
def test_fused_kernels_match_numpy_fallback():
    from dbrl.neural import _bwd3, _fwd3

    rng = RNG(17)
    net = mlp_init([3, 32, 32, 2], rng, head="tanh", a_max=2.0, dtype=np.float64)
    x = np.ascontiguousarray(rng.normal(size=(7, 3)))
    args = (
        x,
        net.weights[0],
        net.biases[0],
        net.weights[1],
        net.biases[1],
        net.weights[2],
        net.biases[2],
        1,
        2.0,
        0.0,
    )
    jit_out = _fwd3(*args)
    py_out = accel.py_func(_fwd3)(*args)
    for a, b in zip(jit_out, py_out):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    h0, h1, y = jit_out
    gy = np.ascontiguousarray(rng.normal(size=(7, 2)))
    bargs = (x, h0, h1, y, gy, net.weights[0], net.weights[1], net.weights[2], 1, 2.0, 0.0)
    for a, b in zip(_bwd3(*bargs), accel.py_func(_bwd3)(*bargs)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_elementwise_kernels_match_numpy_fallback():
    from dbrl.neural import _adam_update, _adam_update_numpy, _soft_update_kernel, _soft_update_numpy

    rng = RNG(18)
    for dtype in (np.float32, np.float64):
        f = dtype
        p = rng.normal(size=4096).astype(dtype)
        g = rng.normal(size=4096).astype(dtype)
        m = rng.normal(size=4096).astype(dtype) * f(0.01)
        v = np.abs(rng.normal(size=4096)).astype(dtype) * f(0.01)
        scalars = (f(3e-4), f(0.9), f(0.999), f(0.1), f(0.001), f(1e-8), f(0.271), f(0.0296))
        pa, ga, ma, va = p.copy(), g.copy(), m.copy(), v.copy()
        pb, gb, mb, vb = p.copy(), g.copy(), m.copy(), v.copy()
        _adam_update(pa, ga, ma, va, *scalars)
        _adam_update_numpy(pb, gb, mb, vb, *scalars)
        # the jitted adam kernel uses fastmath, so allow a few ulp of
        # reassociation error (atol covers near-zero state elements)
        adam_tol = (
            dict(rtol=1e-4, atol=1e-7) if dtype is np.float32 else dict(rtol=1e-12, atol=1e-16)
        )
        np.testing.assert_allclose(pa, pb, **adam_tol)
        np.testing.assert_allclose(ma, mb, **adam_tol)
        np.testing.assert_allclose(va, vb, **adam_tol)

        ta, tb = p.copy(), p.copy()
        _soft_update_kernel(ta, g, f(0.005), f(0.995))
        _soft_update_numpy(tb, g, f(0.005), f(0.995))
        tol = dict(rtol=1e-6, atol=0) if dtype is np.float32 else dict(rtol=1e-14, atol=0)
        np.testing.assert_allclose(ta, tb, **tol)


def test_float32_stays_float32():
    rng = RNG(8)
    net = mlp_init([3, 16, 16, 1], rng, head="tanh", a_max=2.0, dtype=np.float32)
    x = rng.normal(size=(4, 3)).astype(np.float32)
    y, caches = forward_cached(net, x)
    assert y.dtype == np.float32
    gw, gb, gx = backward(net, caches, np.ones((4, 1), np.float32))
    assert all(g.dtype == np.float32 for g in gw + gb) and gx.dtype == np.float32
    opt = Adam()
    opt.step(net, gw, gb)
    assert net.weights[0].dtype == np.float32
