import time
import numpy as np
from mixres.training import TrainConfig, train

cfg = TrainConfig(method="mix", problem="dirichlet", dim=2, width=10, blocks=10,
                  iterations=2000, n_interior=1000, n_boundary=1000,
                  lr=1e-4, eval_every=250, eval_points=10000, seed=0)
t0 = time.perf_counter()
ck, hist = train(cfg, history_path="/root/pkg/.dev/probe_mix.csv")
dt = time.perf_counter() - t0
print(f"2000 iters in {dt:.1f}s -> {dt/2000*1e3:.1f} ms/iter")
for r in hist:
    print(f"iter {r['iter']:5d}  total {r['total']:.5f}  r_g {r['r_g']:.5f}  "
          f"e0 {r['e0']:.4f}  e1 {r['e1']:.4f}  e2 {r['e2']:.4f}")
