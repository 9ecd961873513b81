"""Probe: per-layer 1/sqrt(fan_in) uniform init (framework default style)."""
import math
import sys

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from mixres import training
from mixres.networks import pack_resnet


def make_variant(name):
    def init(spec, rng):
        w, d, o, L = spec.width, spec.input_dim, spec.output_dim, spec.blocks

        def unif(fo, fi):
            k = 1.0 / math.sqrt(fi)
            return rng.uniform(-k, k, size=(fo, fi))

        A = unif(w, d)
        Ws, bs = [], []
        for _ in range(L):
            Ws.append(unif(w, w))
            if name == "v5":  # random biases too
                bs.append(rng.uniform(-1.0 / math.sqrt(w), 1.0 / math.sqrt(w), size=w))
            else:  # v6: zero biases
                bs.append(np.zeros(w))
        U = unif(o, w)
        return pack_resnet(spec, A, np.stack(Ws), np.stack(bs), U)

    return init


for name in ("v5", "v6"):
    training.init_resnet = make_variant(name)
    for seed in (7, 11):
        cfg = training.TrainConfig(
            method="mix", problem="dirichlet", dim=2, width=10, blocks=10,
            activation="requ", iterations=4000, n_interior=1000, n_boundary=1000,
            lr=1e-4, eval_every=1000, seed=seed,
        )
        try:
            _, rows = training.train(cfg)
            for row in rows:
                print(
                    f"{name} seed {seed} iter {row['iter']:6d} "
                    f"e0 {row['e0']:.5f} e1 {row['e1']:.5f} e2 {row['e2']:.5f} "
                    f"total {row['total']:.3e}", flush=True,
                )
        except Exception as exc:
            print(f"{name} seed {seed} FAILED: {exc}", flush=True)
print("probe2 done", flush=True)
