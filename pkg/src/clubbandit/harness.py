"""Experiment runner: two-phase tuning, paired multi-policy runs and CSV metrics.

Every policy in one run consumes the same environment stream. Tuning scores
each grid point on rounds ``1..t0``; evaluation covers rounds ``t0+1..T``
with fresh estimators unless ``carry_state`` is set, in which case the best
tuned instance simply keeps going.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from clubbandit.baselines import (
    UCBV,
    Clairvoyant,
    LinUCBInd,
    LinUCBOne,
    RandomPolicy,
    UCBInd,
    UCBOne,
)
from clubbandit.club import ClubModel
from clubbandit.environments import (
    DatasetEnv,
    EndOfLog,
    ReplayEnv,
    SyntheticConfig,
    SyntheticEnv,
    TrueWorld,
    load_interactions,
    load_items,
    world_for_seed,
)
from clubbandit.estimators import AlgoParams, TheoreticalParams
from clubbandit.graph import GraphConfig, init_graph
from clubbandit.policy import ConfigError

log = logging.getLogger(__name__)

_GRAPH_TAG, _RAN_TAG = 19, 23

ALPHA_GRID = [0.1, 0.25, 0.5, 1.0, 1.5, 2.5]
ALPHA2_GRID = [0.1, 0.25, 0.5, 1.0, 2.0]
DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "club": {"alpha": ALPHA_GRID, "alpha2": ALPHA2_GRID},
    "linucb_one": {"alpha": ALPHA_GRID},
    "linucb_ind": {"alpha": ALPHA_GRID},
    "clairvoyant": {"alpha": ALPHA_GRID},
    "ucb_one": {"alpha": ALPHA_GRID},
    "ucb_ind": {"alpha": ALPHA_GRID},
    "ucbv": {},
    "ran": {},
}
LINEAR = {"club", "linucb_one", "linucb_ind", "clairvoyant"}
SENTINEL = "nan"


@dataclass
class PolicySpec:
    name: str
    grid: dict[str, list] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.name not in DEFAULT_GRIDS:
            raise ConfigError(f"unknown policy {self.name!r}")
        if not self.grid:
            self.grid = dict(DEFAULT_GRIDS[self.name])
        for k, v in self.grid.items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"grid for {self.name}.{k} must be a nonempty list")
        self.label = self.label or self.name

    def points(self) -> list[dict[str, Any]]:
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]


@dataclass
class ExperimentConfig:
    environment: dict
    policies: list[PolicySpec]
    T: int = 55000
    t0: int = 5000
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    graph: GraphConfig = field(default_factory=GraphConfig)
    confidence_mode: str = "practical"
    theory: dict | None = None
    carry_state: bool = False
    out: str = "results"

    def __post_init__(self):
        if not 0 <= self.t0 < self.T:
            raise ConfigError(f"need 0 <= t0 < T, got t0={self.t0}, T={self.T}")
        if self.confidence_mode not in ("practical", "theoretical"):
            raise ConfigError(f"unknown confidence_mode {self.confidence_mode!r}")
        if self.confidence_mode == "theoretical" and not self.theory:
            raise ConfigError("theoretical mode needs a 'theory' block (sigma, delta, lam)")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError("policy labels must be unique")
        kind = self.environment.get("kind")
        if kind not in ("synthetic", "dataset", "replay"):
            raise ConfigError(f"unknown environment kind {kind!r}")
        if kind != "replay" and "ran" not in labels:
            self.policies.append(PolicySpec("ran"))

    @property
    def kind(self) -> str:
        return self.environment["kind"]

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        doc["policies"] = [PolicySpec(**p) if isinstance(p, dict) else PolicySpec(p)
                           for p in doc.get("policies", [])]
        if "graph" in doc:
            doc["graph"] = GraphConfig(**doc["graph"])
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


# --- environment and policy construction ------------------------------------------


def make_env(cfg: ExperimentConfig, seed: int):
    env = cfg.environment
    if cfg.kind == "synthetic":
        if env.get("world_file"):
            doc = json.loads(Path(env["world_file"]).read_text())
            world = TrueWorld.from_json(doc["world"])
            base = dict(doc.get("config", {}))
            base.update({k: v for k, v in env.items() if k in ("sigma", "c")})
            scfg = SyntheticConfig(n=world.n, d=world.models.shape[1], m=world.m,
                                   z=base.get("z", 0.0), sigma=base.get("sigma", 0.1),
                                   c=base.get("c", 10), T=cfg.T, seed=seed)
        else:
            keys = ("n", "d", "m", "z", "sigma", "c")
            scfg = SyntheticConfig(**{k: env[k] for k in keys if k in env}, T=cfg.T, seed=seed)
            world = world_for_seed(scfg, seed)
        return SyntheticEnv(world, scfg, seed)
    if cfg.kind == "dataset":
        ids, X = load_items(env["items"])
        _, positives = load_interactions(env["interactions"], ids)
        return DatasetEnv(X, positives, c=env.get("c", 25), seed=seed, T=cfg.T)
    renv = ReplayEnv.from_file(env["log"], env.get("item_features"))
    if cfg.T > len(renv):
        raise ConfigError(f"T={cfg.T} exceeds the {len(renv)} records in the log")
    return renv


def make_theory(cfg: ExperimentConfig, env) -> TheoreticalParams | None:
    if cfg.confidence_mode != "theoretical":
        return None
    th = dict(cfg.theory)
    theorem = th.pop("theorem_mode", False)
    th.setdefault("n_users", env.n)
    th.setdefault("dim", env.d)
    return TheoreticalParams.theorem_mode(**th) if theorem else TheoreticalParams(**th)


def make_policy(name: str, params: dict, env, seed: int, cfg: ExperimentConfig):
    if name in LINEAR and env.d is None:
        raise ConfigError(f"{name} needs item features; this {env.kind} environment is featureless")
    if name in ("ucb_one", "ucb_ind", "ucbv") and getattr(env, "n_items", None) is None:
        raise ConfigError(f"{name} needs stable item ids; the {env.kind} environment has none")
    if name == "club":
        rng = np.random.default_rng(np.random.SeedSequence([seed, _GRAPH_TAG]))
        graph = init_graph(env.n, cfg.graph, rng)
        theory = make_theory(cfg, env)
        ap = AlgoParams(params.get("alpha", 0.25), params.get("alpha2", 1.0))
        return ClubModel(env.n, env.d, ap, graph=graph, theory=theory)
    if name == "linucb_one":
        return LinUCBOne(env.d, params.get("alpha", 0.25))
    if name == "linucb_ind":
        return LinUCBInd(env.d, params.get("alpha", 0.25))
    if name == "clairvoyant":
        return Clairvoyant(env.d, env.partition, params.get("alpha", 0.25))
    if name == "ucb_one":
        return UCBOne(env.n_items, params.get("alpha", 1.0))
    if name == "ucb_ind":
        return UCBInd(env.n_items, params.get("alpha", 1.0))
    if name == "ucbv":
        return UCBV(env.n_items)
    if name == "ran":
        return RandomPolicy(np.random.default_rng(np.random.SeedSequence([seed, _RAN_TAG])))
    raise ConfigError(f"unknown policy {name!r}")


# --- running one policy over a stream -----------------------------------------------


def _round_digest(prev: bytes, rnd) -> bytes:
    h = hashlib.blake2b(prev, digest_size=8)
    h.update(int(rnd.user).to_bytes(8, "little", signed=True))
    if rnd.contexts is not None:
        h.update(np.ascontiguousarray(rnd.contexts).tobytes())
    if rnd.items is not None:
        h.update(np.ascontiguousarray(rnd.items, dtype=np.int64).tobytes())
    return h.digest()


@dataclass
class Trace:
    """Per-round cumulative metrics of one policy over rounds ``start..stop``."""

    rounds: np.ndarray
    checksum: list[str]
    cum_regret: np.ndarray | None = None
    retained: np.ndarray | None = None
    clicks: np.ndarray | None = None
    components: np.ndarray | None = None

    @property
    def final_score(self) -> float:
        """Higher is better: negated regret, or CTR on replay logs."""
        if self.cum_regret is not None:
            return -float(self.cum_regret[-1]) if len(self.cum_regret) else 0.0
        if not len(self.retained) or self.retained[-1] == 0:
            return -math.inf
        return float(self.clicks[-1] / self.retained[-1])


def run_policy(policy, env, start: int, stop: int) -> Trace:
    """Drive ``policy`` over rounds ``start..stop`` and record cumulative metrics."""
    size = stop - start + 1
    is_club = isinstance(policy, ClubModel)
    comps = np.zeros(size, dtype=np.int64) if is_club else None
    checks: list[str] = []
    digest = b""
    if env.kind == "replay":
        retained = np.zeros(size, dtype=np.int64)
        clicks = np.zeros(size)
        r = c = 0
        env.reset(start - 1)
        for j in range(size):
            try:
                rnd = env.current()
            except EndOfLog:
                raise ConfigError("replay log exhausted before the requested horizon")
            digest = _round_digest(digest, rnd)
            checks.append(digest.hex())
            k = policy.act(rnd)
            out = env.step(rnd.items[k])
            if out.retained:
                r += 1
                c += out.payoff
                policy.observe(rnd, k, out.payoff)
            retained[j], clicks[j] = r, c
            if is_club:
                comps[j] = policy.num_components
        return Trace(np.arange(start, stop + 1), checks, retained=retained, clicks=clicks,
                     components=comps)
    regret = np.zeros(size)
    total = 0.0
    for j, rnd in enumerate(env.rounds(start, stop)):
        digest = _round_digest(digest, rnd)
        checks.append(digest.hex())
        k = policy.act(rnd)
        policy.observe(rnd, k, rnd.payoff(k))
        total += rnd.regret(k)
        regret[j] = total
        if is_club:
            comps[j] = policy.num_components
    return Trace(np.arange(start, stop + 1), checks, cum_regret=regret, components=comps)


# --- tuning and full runs -------------------------------------------------------------


def tune(cfg: ExperimentConfig, spec: PolicySpec, seed: int, env=None):
    """Best grid point on rounds ``1..t0`` (ties -> first in declared order).

    Returns ``(params, trained_policy)``; the policy is only reused with ``carry_state``.
    """
    env = env if env is not None else make_env(cfg, seed)
    points = spec.points()
    if cfg.t0 == 0:
        return points[0], None
    best, best_score, best_policy = None, -math.inf, None
    for params in points:
        policy = make_policy(spec.name, params, env, seed, cfg)
        score = run_policy(policy, env, 1, cfg.t0).final_score
        log.info("tune %s %s seed=%d score=%.6g", spec.label, params, seed, score)
        if best is None or score > best_score:
            best, best_score, best_policy = params, score, policy
    return best, best_policy


def tune_all(cfg: ExperimentConfig, seed: int) -> dict[str, dict]:
    env = make_env(cfg, seed)
    return {spec.label: tune(cfg, spec, seed, env)[0] for spec in cfg.policies}


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return SENTINEL
    return f"{v:.12g}"


def run_seed(cfg: ExperimentConfig, seed: int) -> tuple[list[str], list[list[str]], dict]:
    """Tune and evaluate every policy on one seed; returns (header, rows, chosen params)."""
    env = make_env(cfg, seed)
    start, stop = cfg.t0 + 1, cfg.T
    traces: dict[str, Trace] = {}
    chosen: dict[str, dict] = {}
    for spec in cfg.policies:
        params, tuned = tune(cfg, spec, seed, env)
        chosen[spec.label] = params
        if cfg.carry_state and tuned is not None:
            policy = tuned
        else:
            policy = make_policy(spec.name, params, env, seed, cfg)
        traces[spec.label] = run_policy(policy, env, start, stop)
    ref = next(iter(traces.values())).checksum
    for label, tr in traces.items():
        if tr.checksum != ref:
            raise RuntimeError(f"policy {label} saw a different environment stream")

    header = ["round", "env_checksum"]
    cols: list[Sequence] = [traces[next(iter(traces))].rounds, ref]
    if cfg.kind == "replay":
        for label, tr in traces.items():
            with np.errstate(divide="ignore", invalid="ignore"):
                ctr = np.where(tr.retained > 0, tr.clicks / np.maximum(tr.retained, 1), np.nan)
            header += [f"{label}_retained", f"{label}_clicks", f"{label}_ctr"]
            cols += [tr.retained, tr.clicks, ctr]
    else:
        ran = traces["ran"].cum_regret
        for label, tr in traces.items():
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(ran > 0, tr.cum_regret / np.where(ran > 0, ran, 1.0), np.nan)
            header += [f"{label}_cum_regret", f"{label}_ratio_vs_ran"]
            cols += [tr.cum_regret, ratio]
    for spec in cfg.policies:
        if spec.name == "club":
            suffix = "" if spec.label == "club" else f"_{spec.label}"
            header.append(f"club_components{suffix}")
            cols.append(traces[spec.label].components)
    rows = []
    for j in range(len(ref)):
        row = []
        for col in cols:
            v = col[j]
            if isinstance(v, str):
                row.append(v)
            elif isinstance(v, (np.integer, int)):
                row.append(str(int(v)))
            else:
                row.append(_fmt(float(v)))
        rows.append(row)
    return header, rows, chosen


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run(cfg: ExperimentConfig, seeds: Sequence[int] | None = None, out: str | None = None) -> list[Path]:
    """Run every seed, write one metrics CSV per seed plus a mean-over-seeds CSV."""
    seeds = list(seeds) if seeds is not None else cfg.seeds
    out_dir = Path(out or cfg.out)
    paths, all_rows, header = [], [], None
    params_log = {}
    for seed in seeds:
        header, rows, chosen = run_seed(cfg, seed)
        p = out_dir / f"metrics_seed{seed}.csv"
        write_csv(p, header, rows)
        paths.append(p)
        all_rows.append(rows)
        params_log[str(seed)] = chosen
    (out_dir / "tuned_params.json").write_text(json.dumps(params_log, indent=2, sort_keys=True) + "\n")
    numeric = [j for j, h in enumerate(header) if h != "env_checksum"]
    mean_rows = []
    for i in range(len(all_rows[0])):
        row = []
        for j in numeric:
            vals = np.array([float(r[i][j]) for r in all_rows])
            row.append(str(all_rows[0][i][j]) if j == 0 else _fmt(float(vals.mean())))
        mean_rows.append(row)
    mean_path = out_dir / "metrics_mean.csv"
    write_csv(mean_path, [header[j] for j in numeric], mean_rows)
    paths.append(mean_path)
    return paths


def summarize(paths: Sequence, out: str | None = None) -> list[tuple[str, float, float, int]]:
    """Final-round value of every metric column: mean and population std over files.

    Output rows keep the column order of the input files.
    """
    if not paths:
        raise ValueError("summarize needs at least one metrics file")
    header, finals = None, []
    for p in paths:
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise ValueError(f"{p}: no data rows")
        if header is None:
            header = rows[0]
        elif rows[0] != header:
            raise ValueError(f"{p}: column schema differs from {paths[0]}")
        finals.append(rows[-1])
    table = []
    for j, name in enumerate(header):
        if name in ("round", "env_checksum"):
            continue
        vals = np.array([float(r[j]) for r in finals])
        table.append((name, float(vals.mean()), float(vals.std()), len(vals)))
    lines = ["metric,mean,std,n_files"] + [f"{n},{_fmt(m)},{_fmt(s)},{k}" for n, m, s, k in table]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    return table
