"""Short-horizon probe of ResNet init variants on the d=2 Mix Dirichlet run."""
import math
import sys

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from mixres import training
from mixres.networks import init_resnet as base_init, pack_resnet

VARIANTS = ["v1", "v2", "v3", "v4"]


def make_variant(name):
    if name == "v0":
        return base_init

    def init(spec, rng):
        w, d, o, L = spec.width, spec.input_dim, spec.output_dim, spec.blocks

        def glorot(fo, fi, scale=1.0):
            limit = scale * math.sqrt(6.0 / (fi + fo))
            return rng.uniform(-limit, limit, size=(fo, fi))

        damp = 1.0 / math.sqrt(L)
        if name == "v1":  # undamped blocks
            A, Ws, U = glorot(w, d), [glorot(w, w) for _ in range(L)], glorot(o, w)
        elif name == "v2":  # stronger damping 1/L
            A, Ws, U = glorot(w, d), [glorot(w, w, 1.0 / L) for _ in range(L)], glorot(o, w)
        elif name == "v3":  # head x2
            A, Ws, U = glorot(w, d), [glorot(w, w, damp) for _ in range(L)], glorot(o, w, 2.0)
        elif name == "v4":  # lift x sqrt(2)
            A, Ws, U = glorot(w, d, math.sqrt(2.0)), [glorot(w, w, damp) for _ in range(L)], glorot(o, w)
        else:
            raise ValueError(name)
        return pack_resnet(spec, A, np.stack(Ws), np.zeros((L, w)), U)

    return init


for name in VARIANTS:
    training.init_resnet = make_variant(name)
    for seed in (7, 11):
        cfg = training.TrainConfig(
            method="mix", problem="dirichlet", dim=2, width=10, blocks=10,
            activation="requ", iterations=4000, n_interior=1000, n_boundary=1000,
            lr=1e-4, eval_every=1000, seed=seed,
        )
        _, rows = training.train(cfg)
        for row in rows:
            print(
                f"{name} seed {seed} iter {row['iter']:6d} "
                f"e0 {row['e0']:.5f} e1 {row['e1']:.5f} e2 {row['e2']:.5f} "
                f"total {row['total']:.3e}",
                flush=True,
            )
print("probe done", flush=True)
