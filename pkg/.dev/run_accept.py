"""Produce the six 20k-iteration reference runs used by the acceptance tests.

Writes checkpoint.json + history.csv per (method, problem) pair under
.dev/accept/<method>_<problem>/ so the acceptance fixture can reuse them
during development (MIXRES_ACCEPT_CACHE).
"""

import pathlib
import sys
import time

sys.path.insert(0, "/root/pkg/src")

from mixres.networks import matched_single_net_width
from mixres.training import TrainConfig, train

ROOT = pathlib.Path("/root/pkg/.dev/accept")

for problem in ("dirichlet", "neumann"):
    for method in ("mix", "drm", "dgm"):
        width = 10 if method == "mix" else matched_single_net_width(10)
        config = TrainConfig(
            method=method,
            problem=problem,
            dim=2,
            width=width,
            blocks=10,
            activation="requ",
            iterations=20_000,
            seed=0,
        )
        out = ROOT / f"{method}_{problem}"
        out.mkdir(parents=True, exist_ok=True)
        if (out / "history.csv").exists():
            print(f"{method} {problem}: already done", flush=True)
            continue
        t0 = time.time()
        ckpt, rows = train(
            config,
            checkpoint_path=out / "checkpoint.json",
            history_path=out / "history.csv",
        )
        last = rows[-1]
        print(
            f"{method:>3s} {problem:<9s} w={width:<3d} {time.time() - t0:7.1f}s"
            f"  e0={last['e0']:.5f} e1={last['e1']:.5f} e2={last['e2']:.5f}",
            flush=True,
        )
print("accept runs done")
