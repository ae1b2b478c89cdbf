#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Times the two hot kernels (single-state forward pass and fused state
gradient) and an end-to-end evaluation rollout under each backend.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""
import argparse
import time

import numpy as np

from synstress._kernels import py_backend
from synstress.envs import pendulum_spec, rollout_return
from synstress.numerics import RngStream, derive, gaussian_draw
from synstress.policy import MlpSpec, PolicyParams, _layout

try:
    from synstress._kernels import _core
except ImportError:
    _core = None


def make_params(spec: MlpSpec, seed: int = 0) -> PolicyParams:
    rng = RngStream(seed)
    theta = gaussian_draw(derive(rng, "t"), spec.param_count) * 0.3
    return PolicyParams(spec=spec, theta=theta, log_std=np.zeros(spec.output_dim))


def time_kernel(fn, args, repeats: int) -> float:
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_kernels(spec: MlpSpec, repeats: int):
    lay = _layout(spec)
    p = make_params(spec)
    s = gaussian_draw(RngStream(1), spec.input_dim)
    a = gaussian_draw(RngStream(2), spec.output_dim)
    fwd_args = (p.theta, lay.w_offs, lay.b_offs, lay.in_dims, lay.out_dims, s)
    grad_args = (
        p.theta, lay.w_offs, lay.b_offs, lay.in_dims, lay.out_dims, p.log_std, s, a
    )
    rows = []
    for name, impl in (("numpy", py_backend), ("compiled", _core)):
        if impl is None:
            continue
        rows.append(
            (
                name,
                time_kernel(impl.mlp_forward, fwd_args, repeats),
                time_kernel(impl.mlp_state_grad, grad_args, repeats),
            )
        )
    return rows


def bench_rollout(spec: MlpSpec, episodes: int):
    import synstress._kernels as kern
    import synstress.policy as pol

    env = pendulum_spec()
    p = make_params(spec)
    results = []
    for name, impl in (("numpy", py_backend), ("compiled", _core)):
        if impl is None:
            continue
        # route the policy through one backend without reimporting
        saved = (kern.mlp_forward, kern.mlp_state_grad, pol._k_forward, pol._k_state_grad)
        kern.mlp_forward = pol._k_forward = impl.mlp_forward
        kern.mlp_state_grad = pol._k_state_grad = impl.mlp_state_grad
        try:
            t0 = time.perf_counter()
            for seed in range(episodes):
                rollout_return(env, p, seed)
            results.append((name, (time.perf_counter() - t0) / episodes))
        finally:
            kern.mlp_forward, kern.mlp_state_grad, pol._k_forward, pol._k_state_grad = saved
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20000)
    parser.add_argument("--episodes", type=int, default=20)
    args = parser.parse_args()

    if _core is None:
        print("compiled core not built; timing the numpy fallback only\n")

    for label, hidden in (("desk preset", (64, 64)), ("large preset", (512, 256, 128))):
        spec = MlpSpec(input_dim=3, hidden=hidden, output_dim=1)
        print(f"== {label}: 3-{'-'.join(map(str, hidden))}-1 ==")
        rows = bench_kernels(spec, args.repeats)
        print(f"{'backend':<10} {'forward':>12} {'state_grad':>12}")
        for name, fwd, grad in rows:
            print(f"{name:<10} {fwd * 1e6:>10.2f}us {grad * 1e6:>10.2f}us")
        if len(rows) == 2:
            print(
                f"{'speedup':<10} {rows[0][1] / rows[1][1]:>11.1f}x "
                f"{rows[0][2] / rows[1][2]:>11.1f}x"
            )
        print()

    spec = MlpSpec(input_dim=3, hidden=(64, 64), output_dim=1)
    print("== full pendulum evaluation episode (200 steps, mean actions) ==")
    rows = bench_rollout(spec, args.episodes)
    for name, per_ep in rows:
        print(f"{name:<10} {per_ep * 1e3:>10.2f}ms/episode")
    if len(rows) == 2:
        print(f"{'speedup':<10} {rows[0][1] / rows[1][1]:>11.1f}x")


if __name__ == "__main__":
    main()
