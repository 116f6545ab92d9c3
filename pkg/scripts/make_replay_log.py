"""Write a synthetic replay log (uniform logged choices, Bernoulli clicks).

    python3 scripts/make_replay_log.py --records 100000 --c 10 --click-rate 0.2 --out data/log.csv
"""

import argparse
from pathlib import Path

import numpy as np

from clubbandit.environments import synthetic_replay_log, write_replay_log


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--records", type=int, default=100_000)
    ap.add_argument("--c", type=int, default=10)
    ap.add_argument("--click-rate", type=float, default=0.2)
    ap.add_argument("--users", type=int, default=500)
    ap.add_argument("--items", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    recs = synthetic_replay_log(args.records, args.c, args.click_rate, args.users, args.items,
                                np.random.default_rng(args.seed))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_replay_log(args.out, recs)
    print(f"wrote {len(recs)} records to {args.out}")


if __name__ == "__main__":
    main()
