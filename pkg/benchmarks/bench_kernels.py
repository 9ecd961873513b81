"""Compare the compiled jet kernels against the pure-numpy fallback.

Runs matched forward and forward+backward passes for a few representative
network shapes and prints per-call timings plus the speedup.  Both
implementations are imported directly, so results do not depend on the
``MIXRES_BACKEND`` environment variable.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mixres.activations import REQU
from mixres.autodiff import kernels_np
from mixres.networks import ResNetSpec, init_resnet, unpack_resnet

try:
    from mixres import _kernels
except ImportError:
    _kernels = None


CASES = [
    # (label, dim, width, blocks, out, batch, order)
    ("phi d=2 w=10", 2, 10, 10, 1, 1000, 1),
    ("psi d=2 w=20", 2, 20, 10, 2, 1000, 1),
    ("phi d=2 w=23 lap", 2, 23, 10, 1, 1000, 2),
    ("phi d=10 w=50", 10, 50, 10, 1, 1000, 1),
    ("psi d=10 w=100", 10, 100, 10, 10, 1000, 1),
    ("sweep d=10 w=20", 10, 20, 2, 1, 1000, 2),
]


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_impl(impl, spec: ResNetSpec, X: np.ndarray, order: int, repeats: int):
    A, W, b, U = unpack_resnet(spec, init_resnet(spec, np.random.default_rng(0)))
    power = spec.activation.power
    fwd = time_call(
        lambda: impl.resnet_forward(X, A, W, b, U, power, order, False), repeats
    )

    def fwd_bwd():
        Y, J, L, tape = impl.resnet_forward(X, A, W, b, U, power, order, True)
        Ybar = np.ones_like(Y)
        Jbar = None if J is None else np.ones_like(J)
        Lbar = None if L is None else np.ones_like(L)
        impl.resnet_backward(A, W, b, U, power, tape, Ybar, Jbar, Lbar)

    both = time_call(fwd_bwd, repeats)
    return fwd, both


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled kernels unavailable; showing numpy fallback only")
    header = f"{'case':22s} {'order':5s} {'numpy fwd':>10s} {'numpy f+b':>10s}"
    if _kernels is not None:
        header += f" {'comp fwd':>10s} {'comp f+b':>10s} {'speedup':>8s}"
    print(header)
    for label, dim, width, blocks, out, batch, order in CASES:
        spec = ResNetSpec(
            input_dim=dim, width=width, blocks=blocks, output_dim=out, activation=REQU
        )
        X = np.random.default_rng(1).uniform(size=(batch, dim))
        nf, nb = bench_impl(kernels_np, spec, X, order, args.repeats)
        row = f"{label:22s} {order:5d} {nf * 1e3:9.2f}m {nb * 1e3:9.2f}m"
        if _kernels is not None:
            cf, cb = bench_impl(_kernels, spec, X, order, args.repeats)
            row += f" {cf * 1e3:9.2f}m {cb * 1e3:9.2f}m {nb / cb:7.2f}x"
        print(row)


if __name__ == "__main__":
    main()
