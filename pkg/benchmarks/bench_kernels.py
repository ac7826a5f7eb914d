"""Timing comparison: jitted kernels vs the pure-NumPy fallback.

The package's hot kernels (fused 3-layer forward/backward, Adam, soft
update) are vectorized NumPy functions passed through ``maybe_jit``;
this script times each one both ways, plus a full TD3 train step at
production sizes, and prints a table.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from dbrl.accel import JIT_ENABLED, py_func
from dbrl.agents import DeepParams, ReplayBuffer, Td3Core
from dbrl.core import RngStream
from dbrl.neural import (
    HEAD_TANH,
    _adam_update,
    _adam_update_numpy,
    _bwd3,
    _fwd3,
    _soft_update_kernel,
    _soft_update_numpy,
    mlp_init,
)

BATCH = 256
OBS, ACT, HID = 3, 1, 256


def timeit(fn, repeats):
    fn()  # warm start: first call pays any compilation
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e3  # ms/call


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    actor = mlp_init([OBS, HID, HID, ACT], rng, head="tanh", a_max=2.0)
    x = rng.normal(size=(BATCH, OBS)).astype(np.float32)
    w = actor.weights
    b = actor.biases
    zero = np.float32(0.0)
    a_max = np.float32(2.0)
    args = (x, w[0], b[0], w[1], b[1], w[2], b[2], HEAD_TANH, a_max, zero)

    h0, h1, y = _fwd3(*args)
    gy = rng.normal(size=y.shape).astype(np.float32)
    bwd_args = (x, h0, h1, y, gy, w[0], w[1], w[2], HEAD_TANH, a_max, zero)

    # optimizer kernels run on flattened parameter views
    p = w[1].copy().reshape(-1)
    g = rng.normal(size=p.shape).astype(np.float32)
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    f32 = np.float32
    adam_args = (p, g, m, v, f32(3e-4), f32(0.9), f32(0.999), f32(0.1), f32(0.001), f32(1e-8), f32(1.0), f32(1.0))
    soft_args = (p.copy(), g, f32(0.005), f32(0.995))

    rows = []
    # The forward/backward kernels are numpy expressions either way, so their
    # untraced .py_func is the fallback path.  The element-wise kernels have a
    # separate vectorized numpy fallback; time that, not the fused loop.
    for name, kernel, baseline, call_args in (
        ("forward (256x[3,256,256,1])", _fwd3, py_func(_fwd3), args),
        ("backward (same net)", _bwd3, py_func(_bwd3), bwd_args),
        ("adam update (256x256)", _adam_update, _adam_update_numpy, adam_args),
        ("soft update (256x256)", _soft_update_kernel, _soft_update_numpy, soft_args),
    ):
        fast = timeit(lambda: kernel(*call_args), repeats)
        slow = timeit(lambda: baseline(*call_args), repeats)
        rows.append((name, fast, slow))
    return rows


def bench_train_step(repeats):
    """Full TD3 train step (both critics + delayed actor) at production sizes."""
    params = DeepParams()
    core = Td3Core(OBS, ACT, 2.0, params, RngStream(0))
    buffer = ReplayBuffer(10_000, OBS, ACT)
    rng = np.random.default_rng(1)
    for _ in range(2_000):
        s = rng.normal(size=OBS).astype(np.float32)
        buffer.add(s, rng.uniform(-2, 2, ACT), rng.normal(), s, False)
    train_rng = np.random.default_rng(2)
    return timeit(lambda: core.train_step(buffer, train_rng), repeats)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()

    if not JIT_ENABLED:
        print("acceleration is disabled in this process (DBRL_DISABLE_NUMBA/NUMBA_DISABLE_JIT);")
        print("numbers below compare the fallback against itself.\n")

    rows = bench_kernels(args.repeats)
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'jitted ms':>10}  {'numpy ms':>10}  {'speedup':>8}")
    for name, fast, slow in rows:
        print(f"{name:<{width}}  {fast:>10.4f}  {slow:>10.4f}  {slow / fast:>7.2f}x")

    step_ms = bench_train_step(max(20, args.repeats // 10))
    print(f"\ntd3 train step (batch {BATCH}, jit={'on' if JIT_ENABLED else 'off'}): {step_ms:.3f} ms")


if __name__ == "__main__":
    main()
