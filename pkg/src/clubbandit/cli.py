"""Command-line entry point: ``run``, ``tune-only``, ``summarize``, ``gen-synthetic``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from clubbandit.environments import SyntheticConfig, expected_sd, world_for_seed
from clubbandit.harness import ExperimentConfig, run, summarize, tune_all


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    seeds = [args.seed] if args.seed is not None else None
    for p in run(cfg, seeds=seeds, out=args.out):
        print(p)
    return 0


def _cmd_tune(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    result = {str(s): tune_all(cfg, s) for s in seeds}
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def _cmd_summarize(args) -> int:
    summarize(args.files, out=args.out)
    return 0


def _cmd_gen(args) -> int:
    cfg = SyntheticConfig(n=args.n, d=args.d, m=args.m, z=args.z, sigma=args.sigma, c=args.c,
                          seed=args.seed)
    world = world_for_seed(cfg, args.seed)
    doc = {"config": asdict(cfg), "world": world.to_json(), "expected_sd": expected_sd(world)}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(doc) + "\n")
    print(f"wrote {args.out}: sizes={world.sizes} gamma={world.gamma:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clubbandit", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="tune, evaluate and write metrics CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("tune-only", help="print the tuned parameters per seed")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("summarize", help="final-round mean and std over metrics files")
    p.add_argument("files", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("gen-synthetic", help="write a reusable synthetic world file")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--d", type=int, default=25)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--z", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--c", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
