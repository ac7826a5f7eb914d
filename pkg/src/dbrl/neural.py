"""Minimal dense-network engine for the deep agents.

Networks are 2-hidden-layer MLPs (the production shape is
[in, 256, 256, out]) with ReLU hidden units and either an identity head
(critics, gate) or a tanh head scaled to the action bound (actors).
Forward/backward/optimizer math lives in numba-jitted kernels written
as plain vectorized NumPy, so disabling the JIT (DBRL_DISABLE_NUMBA=1)
runs the identical NumPy code.

MAC counting deliberately excludes biases and activations: one MAC per
weight, summed over layers, is the compute currency used by the
efficiency metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import JIT_ENABLED, maybe_jit

HEAD_IDENTITY = 0
HEAD_TANH = 1
HIDDEN_RELU = 0
HIDDEN_IDENTITY = 1

_HEAD_CODES = {"identity": HEAD_IDENTITY, "tanh": HEAD_TANH}
_HIDDEN_CODES = {"relu": HIDDEN_RELU, "identity": HIDDEN_IDENTITY}


@dataclass
class MlpNetwork:
    weights: list[np.ndarray]  # each (fan_in, fan_out)
    biases: list[np.ndarray]  # each (fan_out,)
    head: str = "identity"
    a_max: float = 1.0
    hidden: str = "relu"

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head,
            self.a_max,
            self.hidden,
        )


def mlp_init(
    layer_sizes,
    rng: np.random.Generator,
    head: str = "identity",
    a_max: float = 1.0,
    hidden: str = "relu",
    dtype=np.float32,
) -> MlpNetwork:
    """Uniform fan-in init: W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    if head not in _HEAD_CODES:
        raise ValueError(f"unknown head {head!r}")
    if hidden not in _HIDDEN_CODES:
        raise ValueError(f"unknown hidden activation {hidden!r}")
    ws, bs = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        bs.append(rng.uniform(-bound, bound, size=fan_out).astype(dtype))
    return MlpNetwork(ws, bs, head, float(a_max), hidden)


def count_macs(net: MlpNetwork) -> int:
    """Multiply-accumulates of one forward pass: sum of fan_in*fan_out."""
    return int(sum(w.shape[0] * w.shape[1] for w in net.weights))


# --- fused kernels for the production shape (2 hidden ReLU layers) -----


@maybe_jit
def _fwd3(x, w0, b0, w1, b1, w2, b2, head_code, a_max, zero):
    # a_max and zero arrive pre-cast to the array dtype so float32 nets
    # never promote to float64 under jit semantics.
    h0 = np.maximum(np.dot(x, w0) + b0, zero)
    h1 = np.maximum(np.dot(h0, w1) + b1, zero)
    y = np.dot(h1, w2) + b2
    if head_code == HEAD_TANH:
        y = np.tanh(y) * a_max
    return h0, h1, y


@maybe_jit
def _bwd3(x, h0, h1, y, gy, w0, w1, w2, head_code, a_max, zero):
    if head_code == HEAD_TANH:
        gz = gy * (a_max - y * y / a_max)
    else:
        gz = gy
    gw2 = np.dot(h1.T, gz)
    gb2 = np.sum(gz, axis=0)
    gh1 = np.dot(gz, w2.T)
    gh1 = np.where(h1 > zero, gh1, zero)
    gw1 = np.dot(h0.T, gh1)
    gb1 = np.sum(gh1, axis=0)
    gh0 = np.dot(gh1, w1.T)
    gh0 = np.where(h0 > zero, gh0, zero)
    gw0 = np.dot(x.T, gh0)
    gb0 = np.sum(gh0, axis=0)
    gx = np.dot(gh0, w0.T)
    return gw0, gb0, gw1, gb1, gw2, gb2, gx


def _uses_fast_path(net: MlpNetwork) -> bool:
    return len(net.weights) == 3 and net.hidden == "relu"


def _as_batch(net: MlpNetwork, x) -> tuple[np.ndarray, bool]:
    x = np.ascontiguousarray(np.asarray(x, dtype=net.dtype))
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def forward_cached(net: MlpNetwork, x):
    """Forward pass keeping activations for backward.

    Returns (y, caches) where caches = (x2d, [hidden activations], y2d).
    """
    x2d, squeeze = _as_batch(net, x)
    head_code = _HEAD_CODES[net.head]
    if _uses_fast_path(net):
        h0, h1, y = _fwd3(
            x2d,
            net.weights[0],
            net.biases[0],
            net.weights[1],
            net.biases[1],
            net.weights[2],
            net.biases[2],
            head_code,
            net.dtype.type(net.a_max),
            net.dtype.type(0.0),
        )
        hs = [h0, h1]
    else:
        h = x2d
        hs = []
        for w, b in zip(net.weights[:-1], net.biases[:-1]):
            h = np.dot(h, w) + b
            if net.hidden == "relu":
                h = np.maximum(h, 0.0)
            hs.append(h)
        y = np.dot(h, net.weights[-1]) + net.biases[-1]
        if head_code == HEAD_TANH:
            y = np.tanh(y) * net.dtype.type(net.a_max)
    return (y[0] if squeeze else y), (x2d, hs, y)


def forward(net: MlpNetwork, x):
    y, _ = forward_cached(net, x)
    return y


def backward(net: MlpNetwork, caches, gy):
    """Gradients of sum(y * gy) w.r.t. parameters and the input.

    Returns (grads_w, grads_b, gx) matching net.weights / net.biases.
    """
    x2d, hs, y = caches
    gy2d = np.ascontiguousarray(np.asarray(gy, dtype=net.dtype))
    if gy2d.ndim == 1:
        gy2d = gy2d[None, :]
    head_code = _HEAD_CODES[net.head]
    if _uses_fast_path(net):
        gw0, gb0, gw1, gb1, gw2, gb2, gx = _bwd3(
            x2d,
            hs[0],
            hs[1],
            y,
            gy2d,
            net.weights[0],
            net.weights[1],
            net.weights[2],
            head_code,
            net.dtype.type(net.a_max),
            net.dtype.type(0.0),
        )
        return [gw0, gw1, gw2], [gb0, gb1, gb2], gx
    a_max = net.dtype.type(net.a_max)
    gz = gy2d * (a_max - y * y / a_max) if head_code == HEAD_TANH else gy2d
    acts = [x2d] + hs
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    g = gz
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = np.dot(acts[i].T, g)
        grads_b[i] = np.sum(g, axis=0)
        g = np.dot(g, net.weights[i].T)
        if i > 0 and net.hidden == "relu":
            g = np.where(acts[i] > 0.0, g, 0.0)
    return grads_w, grads_b, g


# --- optimizer ---------------------------------------------------------


def _adam_update_numpy(p, g, m, v, lr, b1, b2, one_m_b1, one_m_b2, eps, c1, c2):
    # all scalars pre-cast to p.dtype by the caller
    m[:] = b1 * m + one_m_b1 * g
    v[:] = b2 * v + one_m_b2 * g * g
    p[:] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)


if JIT_ENABLED:
    # single fused pass; matches the NumPy expression to a few ulp
    # (fastmath lets LLVM vectorize the per-element divide and sqrt)
    @maybe_jit(fastmath=True)
    def _adam_update(p, g, m, v, lr, b1, b2, one_m_b1, one_m_b2, eps, c1, c2):
        for i in range(p.shape[0]):
            mi = b1 * m[i] + one_m_b1 * g[i]
            vi = b2 * v[i] + one_m_b2 * g[i] * g[i]
            m[i] = mi
            v[i] = vi
            p[i] = p[i] - lr * (mi / c1) / (np.sqrt(vi / c2) + eps)

else:
    _adam_update = _adam_update_numpy


@dataclass
class Adam:
    """Bias-corrected Adam over one network's parameters."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, net: MlpNetwork, grads_w, grads_b) -> None:
        params = net.weights + net.biases
        grads = list(grads_w) + list(grads_b)
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        cast = params[0].dtype.type
        lr, b1, b2 = cast(self.lr), cast(self.beta1), cast(self.beta2)
        one_m_b1, one_m_b2, eps = cast(1.0 - self.beta1), cast(1.0 - self.beta2), cast(self.eps)
        c1 = cast(1.0 - self.beta1**self.t)
        c2 = cast(1.0 - self.beta2**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            _adam_update(
                p.reshape(-1),
                np.ascontiguousarray(g, dtype=p.dtype).reshape(-1),
                m.reshape(-1),
                v.reshape(-1),
                lr,
                b1,
                b2,
                one_m_b1,
                one_m_b2,
                eps,
                c1,
                c2,
            )


def _soft_update_numpy(target, source, rho, one_m_rho):
    target[:] = one_m_rho * target + rho * source


if JIT_ENABLED:

    @maybe_jit
    def _soft_update_kernel(target, source, rho, one_m_rho):
        for i in range(target.shape[0]):
            target[i] = one_m_rho * target[i] + rho * source[i]

else:
    _soft_update_kernel = _soft_update_numpy


def soft_update(target: MlpNetwork, source: MlpNetwork, rho: float = 0.005) -> None:
    """Polyak move of target toward source: target <- (1-rho)*target + rho*source."""
    cast = target.dtype.type
    r, omr = cast(rho), cast(1.0 - rho)
    for tp, sp in zip(target.weights + target.biases, source.weights + source.biases):
        _soft_update_kernel(tp.reshape(-1), sp.reshape(-1), r, omr)


# --- checkpoints --------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_network(path, net: MlpNetwork) -> None:
    """Versioned .npz checkpoint with a dims header."""
    payload = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "layer_sizes": np.array(net.layer_sizes),
        "head": np.array(_HEAD_CODES[net.head]),
        "hidden": np.array(_HIDDEN_CODES[net.hidden]),
        "a_max": np.array(net.a_max),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    np.savez(path, **payload)


def load_network(path) -> MlpNetwork:
    with np.load(path) as z:
        version = int(z["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = z["layer_sizes"]
        n_layers = len(sizes) - 1
        ws = [z[f"w{i}"] for i in range(n_layers)]
        bs = [z[f"b{i}"] for i in range(n_layers)]
        head = {v: k for k, v in _HEAD_CODES.items()}[int(z["head"])]
        hidden = {v: k for k, v in _HIDDEN_CODES.items()}[int(z["hidden"])]
        return MlpNetwork(ws, bs, head, float(z["a_max"]), hidden)
