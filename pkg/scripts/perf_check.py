"""Per-round wall time of CLUB on a synthetic stream, at n and 2n users.

    python3 scripts/perf_check.py --n 1000 --d 25 --T 50000
"""

import argparse
import time

import numpy as np

from clubbandit.club import ClubModel
from clubbandit.environments import SyntheticConfig, SyntheticEnv, world_for_seed
from clubbandit.estimators import AlgoParams
from clubbandit.graph import GraphConfig, init_graph


def timed(n, d, T, warmup, seed, impl):
    cfg = SyntheticConfig(n=n, d=d, m=4, T=T, seed=seed)
    env = SyntheticEnv(world_for_seed(cfg, seed), cfg)
    start = time.perf_counter()
    graph = init_graph(n, GraphConfig(), np.random.default_rng(seed), impl=impl)
    edges0 = graph.num_edges
    model = ClubModel(n, d, AlgoParams(0.25, 1.0), graph=graph)
    warm = start
    for rnd in env.rounds():
        model.step(rnd)
        if rnd.t == warmup:
            warm = time.perf_counter()
    end = time.perf_counter()
    print(f"n={n:5d} impl={impl:6s} edges {edges0}->{graph.num_edges} components={model.num_components} "
          f"total={end - start:.2f}s per-round={(end - warm) / (T - warmup) * 1e3:.3f}ms")
    return end - start


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--d", type=int, default=25)
    ap.add_argument("--T", type=int, default=50_000)
    ap.add_argument("--warmup", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=14)
    ap.add_argument("--impl", default="forest", choices=["forest", "bfs"])
    args = ap.parse_args()
    small = timed(args.n // 2, args.d, args.T, args.warmup, args.seed, args.impl)
    big = timed(args.n, args.d, args.T, args.warmup, args.seed, args.impl)
    print(f"time ratio at 2x users: {big / small:.2f}")


if __name__ == "__main__":
    main()
