"""Compare candidate block-init scales with short training probes."""
import math
import sys
import time

sys.path.insert(0, "/root/pkg/src")

import numpy as np

import mixres.networks as networks
from mixres.training import TrainConfig, train

ORIG = networks.init_resnet


def make_init(block_scale_fn):
    def init(spec, rng):
        w, d, o, L = spec.width, spec.input_dim, spec.output_dim, spec.blocks

        def glorot(fan_out, fan_in, scale=1.0):
            limit = scale * math.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_out, fan_in))

        A = glorot(w, d)
        s = block_scale_fn(L)
        W = np.empty((L, w, w))
        for j in range(L):
            W[j] = glorot(w, w, s)
        b = np.zeros((L, w))
        U = glorot(o, w)
        return networks.pack_resnet(spec, A, W, b, U)

    return init


CANDIDATES = {
    "A_inv_sqrtL": lambda L: 1.0 / math.sqrt(L),
    "B_half_inv_sqrtL": lambda L: 0.5 / math.sqrt(L),
    "C_inv_L": lambda L: 1.0 / L,
}

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 1200

for name, fn in CANDIDATES.items():
    networks.init_resnet = make_init(fn)
    cfg = TrainConfig(
        method="mix", problem="dirichlet", dim=2, width=10, blocks=10,
        activation="requ", iterations=iters, eval_every=200, seed=7,
        n_interior=1000, n_boundary=1000,
    )
    t0 = time.time()
    ckpt, hist = train(cfg)
    dt = time.time() - t0
    print(f"=== {name} ({dt:.1f}s, {1000*dt/iters:.1f} ms/iter) ===")
    for row in hist:
        print(
            f"  iter {row['iter']:>6} total {row['total']:.4e} "
            f"e0 {row['e0']:.4e} e1 {row['e1']:.4e} e2 {row['e2']:.4e}"
        )
    sys.stdout.flush()

networks.init_resnet = ORIG
