"""Benchmark the compiled loss kernel against the numpy fallback.

Runs the same workloads through both backends and reports wall time and
speedup. The numbers cover the raw loss/gradient kernel and a full model
fit, at a few problem sizes.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fairsched.kernels import _fallback
from fairsched.logistic import TrainConfig, minimize_logistic

try:
    from fairsched.kernels import _native
except ImportError:
    _native = None


def _problem(n: int, d: int, seed: int):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    true_w = rng.normal(size=d)
    p = 1.0 / (1.0 + np.exp(-(X @ true_w)))
    y = (rng.random(n) < p).astype(np.float64)
    w = rng.normal(scale=0.1, size=d)
    return X, y, w


def _time_kernel(fn, X, y, w, repeats: int) -> float:
    sw = np.ones(X.shape[0])
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(X, y, w, 0.1, 1e-4, sw)
        best = min(best, time.perf_counter() - start)
    return best


def _time_fit(X, y, repeats: int, pure: bool) -> float:
    import fairsched.kernels as kernels

    saved = kernels.logistic_loss_grad
    if pure:
        kernels.logistic_loss_grad = _fallback.logistic_loss_grad
    try:
        config = TrainConfig(max_iterations=300, convergence_tolerance=1e-6)
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            minimize_logistic(X, y, config, warn=False)
            best = min(best, time.perf_counter() - start)
        return best
    finally:
        kernels.logistic_loss_grad = saved


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats, best-of")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _native is None:
        print("compiled kernel unavailable; build it with: pip install -e . --no-build-isolation")
        return 1

    print(f"{'workload':<28}{'numpy':>12}{'native':>12}{'speedup':>10}")
    for n, d in ((2_000, 16), (20_000, 16), (100_000, 16), (20_000, 128)):
        X, y, w = _problem(n, d, args.seed)
        t_np = _time_kernel(_fallback.logistic_loss_grad, X, y, w, args.repeats)
        t_cy = _time_kernel(_native.logistic_loss_grad, X, y, w, args.repeats)
        loss_np, grad_np = _fallback.logistic_loss_grad(X, y, w, 0.1, 1e-4, np.ones(n))
        loss_cy, grad_cy = _native.logistic_loss_grad(X, y, w, 0.1, 1e-4, np.ones(n))
        assert abs(loss_np - loss_cy) < 1e-12 * max(1.0, abs(loss_np))
        assert np.allclose(grad_np, grad_cy, rtol=1e-12, atol=1e-12)
        print(f"{'loss/grad n=%d d=%d' % (n, d):<28}{t_np * 1e3:>10.3f}ms{t_cy * 1e3:>10.3f}ms{t_np / t_cy:>9.2f}x")

    X, y, _ = _problem(20_000, 16, args.seed)
    t_np = _time_fit(X, y, max(1, args.repeats // 2), pure=True)
    t_cy = _time_fit(X, y, max(1, args.repeats // 2), pure=False)
    print(f"{'full fit n=20000 d=16':<28}{t_np * 1e3:>10.3f}ms{t_cy * 1e3:>10.3f}ms{t_np / t_cy:>9.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
