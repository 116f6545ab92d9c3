"""Round generators with payoff and regret oracles.

* :class:`SyntheticEnv` - clustered linear users, unit-sphere contexts, uniform noise.
* :class:`DatasetEnv` - item features plus per-user positive sets; each round
  mixes ``c - 1`` random items with one positive.
* :class:`ReplayEnv` - logged records replayed with retention on matching choices.

Streams are deterministic functions of the seed. Synthetic and dataset rounds
are drawn in fixed-size chunks, each from its own seeded generator, so any
round can be reached without replaying earlier ones and the stream never
depends on which policy consumes it. Noise for every candidate arm is drawn
up front from a separate stream, so two policies choosing the same arm in the
same round observe the same payoff.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from clubbandit.linalg import sample_unit_sphere, sample_unit_sphere_batch
from clubbandit.policy import ConfigError

CHUNK = 1000
_STREAM, _NOISE, _WORLD = 11, 13, 17


@dataclass(slots=True)
class Round:
    """One interaction: served user, candidates, and the oracle values for each candidate."""

    t: int
    user: int
    contexts: np.ndarray | None
    expected: np.ndarray | None = None
    noise: np.ndarray | None = None
    items: np.ndarray | None = None
    logged: int | None = None
    logged_payoff: float | None = None

    def payoff(self, k: int) -> float:
        p = float(self.expected[k])
        if self.noise is not None:
            p += float(self.noise[k])
        return p

    def regret(self, k: int) -> float:
        return float(self.expected.max() - self.expected[k])


# --- synthetic ----------------------------------------------------------------


@dataclass
class SyntheticConfig:
    n: int = 500
    d: int = 25
    m: int = 4
    z: float = 0.0
    sigma: float = 0.1
    c: int = 10
    T: int = 55000
    seed: int = 1

    def __post_init__(self):
        if not 1 <= self.m <= self.n:
            raise ConfigError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.c < 1 or self.d < 1:
            raise ConfigError("need c >= 1 and d >= 1")


@dataclass
class TrueWorld:
    models: np.ndarray  # (m, d), unit rows
    sizes: list[int]
    node_to_cluster: np.ndarray  # (n,)
    gamma: float

    @property
    def m(self) -> int:
        return self.models.shape[0]

    @property
    def n(self) -> int:
        return int(self.node_to_cluster.shape[0])

    def user_model(self, user: int) -> np.ndarray:
        return self.models[self.node_to_cluster[user]]

    def to_json(self) -> dict:
        return {
            "models": self.models.tolist(),
            "sizes": list(self.sizes),
            "node_to_cluster": self.node_to_cluster.tolist(),
            "gamma": None if math.isinf(self.gamma) else self.gamma,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TrueWorld":
        models = np.asarray(doc["models"], dtype=float)
        gamma = doc.get("gamma")
        return cls(models, list(doc["sizes"]), np.asarray(doc["node_to_cluster"], dtype=np.int64),
                   math.inf if gamma is None else float(gamma))


def cluster_sizes(n: int, m: int, z: float) -> list[int]:
    """Sizes proportional to ``j^-z``, floored, with the leftover users added to the first cluster."""
    if not 1 <= m <= n:
        raise ConfigError(f"need 1 <= m <= n, got m={m}, n={n}")
    weights = [j ** (-z) for j in range(1, m + 1)]
    total = sum(weights)
    # guard against shares like 249.99999999 that are integral in exact arithmetic
    sizes = [int(math.floor(n * w / total + 1e-9)) for w in weights]
    sizes[0] += n - sum(sizes)
    if min(sizes) < 1:
        raise ConfigError(f"cluster of size 0 for n={n}, m={m}, z={z}")
    return sizes


def separation(models: np.ndarray) -> float:
    m = models.shape[0]
    if m < 2:
        return math.inf
    diff = models[:, None, :] - models[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return float(dist[np.triu_indices(m, k=1)].min())


def gen_world(cfg: SyntheticConfig, rng: np.random.Generator, max_attempts: int = 100) -> TrueWorld:
    sizes = cluster_sizes(cfg.n, cfg.m, cfg.z)
    node_to_cluster = np.repeat(np.arange(cfg.m), sizes)
    for _ in range(max_attempts):
        models = np.stack([sample_unit_sphere(cfg.d, rng) for _ in range(cfg.m)])
        gamma = separation(models)
        if gamma >= 1e-6:
            return TrueWorld(models, sizes, node_to_cluster, gamma)
    raise ConfigError("could not draw well-separated cluster models")


def synth_round(world: TrueWorld, cfg: SyntheticConfig, rng: np.random.Generator, t: int):
    """Single draw of ``(user, contexts)``: a uniform user and ``c`` unit-sphere contexts."""
    user = int(rng.integers(cfg.n))
    contexts = sample_unit_sphere_batch((cfg.c,), cfg.d, rng)
    return user, contexts


def synth_payoff(world: TrueWorld, user: int, x: np.ndarray, rng: np.random.Generator,
                 sigma: float) -> float:
    return float(world.user_model(user) @ x + rng.uniform(-sigma, sigma))


def instant_regret(world: TrueWorld, user: int, contexts: np.ndarray, chosen: int) -> float:
    vals = np.asarray(contexts) @ world.user_model(user)
    return float(vals.max() - vals[chosen])


def expected_sd(world: TrueWorld) -> float:
    """Size-weighted sum of distances between cluster models."""
    models = world.models
    dist = np.linalg.norm(models[:, None, :] - models[None, :, :], axis=-1)
    v = np.asarray(world.sizes, dtype=float) / world.n
    return float(v @ dist.sum(axis=1))


def _chunk_rng(seed: int, tag: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag, chunk]))


def world_for_seed(cfg: SyntheticConfig, seed: int) -> TrueWorld:
    return gen_world(cfg, np.random.default_rng(np.random.SeedSequence([seed, _WORLD])))


class SyntheticEnv:
    kind = "synthetic"

    def __init__(self, world: TrueWorld, cfg: SyntheticConfig, seed: int | None = None):
        if world.n != cfg.n or world.models.shape[1] != cfg.d:
            raise ConfigError("world shape does not match config")
        self.world = world
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.n, self.d, self.c = cfg.n, cfg.d, cfg.c
        self.n_items = None

    @property
    def partition(self) -> np.ndarray:
        return self.world.node_to_cluster

    def _chunk(self, k: int):
        rng = _chunk_rng(self.seed, _STREAM, k)
        users = rng.integers(self.n, size=CHUNK)
        contexts = sample_unit_sphere_batch((CHUNK, self.c), self.d, rng)
        noise = _chunk_rng(self.seed, _NOISE, k).uniform(-self.cfg.sigma, self.cfg.sigma,
                                                         size=(CHUNK, self.c))
        models = self.world.models[self.world.node_to_cluster[users]]
        expected = np.einsum("rcd,rd->rc", contexts, models)
        return users, contexts, noise, expected

    def rounds(self, start: int = 1, stop: int | None = None) -> Iterator[Round]:
        """Rounds ``start..stop`` inclusive (1-based)."""
        stop = self.cfg.T if stop is None else stop
        t = start
        while t <= stop:
            k, off = divmod(t - 1, CHUNK)
            users, contexts, noise, expected = self._chunk(k)
            while off < CHUNK and t <= stop:
                yield Round(t, int(users[off]), contexts[off], expected[off], noise[off])
                off += 1
                t += 1


# --- dataset (one positive per round) -------------------------------------------


def load_items(path) -> tuple[list[str], np.ndarray]:
    """Items CSV with header ``item_id,f1,...,fd``."""
    ids, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "item_id":
            raise ConfigError(f"{path}: first column must be item_id")
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.asarray(rows, dtype=float)


def load_interactions(path, item_ids: Sequence[str]) -> tuple[list[str], list[np.ndarray]]:
    """``user_id,item_id`` payoff-1 pairs -> (user keys, sorted positive item indices per user)."""
    index = {iid: k for k, iid in enumerate(item_ids)}
    positives: dict[str, set[int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0] == "user_id":
                continue
            user, item = row[0], row[1]
            if item not in index:
                raise ConfigError(f"{path}: unknown item id {item!r}")
            positives.setdefault(user, set()).add(index[item])
    # users without positives never appear here, so they are dropped by construction
    users = sorted(positives)
    return users, [np.array(sorted(positives[u]), dtype=np.int64) for u in users]


class DatasetEnv:
    kind = "dataset"

    def __init__(self, items: np.ndarray, positives: Sequence[np.ndarray], c: int = 25,
                 seed: int = 1, T: int = 55000):
        self.items = np.asarray(items, dtype=float)
        self.positives = [np.asarray(p, dtype=np.int64) for p in positives]
        self.pos_sets = [set(p.tolist()) for p in self.positives]
        if any(len(p) == 0 for p in self.positives):
            raise ConfigError("every user needs at least one positive item")
        self.n_items, self.d = self.items.shape
        if self.n_items < c:
            raise ConfigError(f"catalog has {self.n_items} items, fewer than c={c}")
        self.n = len(self.positives)
        self.c = c
        self.seed = seed
        self.T = T
        self.partition = None

    def draw(self, rng: np.random.Generator, t: int = 1) -> Round:
        """Served user, ``c - 1`` distinct random items and one of the user's positives, shuffled."""
        user = int(rng.integers(self.n))
        pos = self.positives[user]
        chosen_pos = int(pos[rng.integers(len(pos))])
        others = rng.choice(self.n_items - 1, size=self.c - 1, replace=False)
        others = others + (others >= chosen_pos)  # skip the positive's slot
        ids = np.concatenate([others, [chosen_pos]]).astype(np.int64)
        ids = ids[rng.permutation(self.c)]
        mask = np.fromiter((i in self.pos_sets[user] for i in ids.tolist()), dtype=float, count=self.c)
        return Round(t, user, self.items[ids], mask, None, ids)

    def rounds(self, start: int = 1, stop: int | None = None) -> Iterator[Round]:
        stop = self.T if stop is None else stop
        t = start
        while t <= stop:
            k, off = divmod(t - 1, CHUNK)
            rng = _chunk_rng(self.seed, _STREAM, k)
            batch = [self.draw(rng, k * CHUNK + j + 1) for j in range(CHUNK)]
            while off < CHUNK and t <= stop:
                yield batch[off]
                off += 1
                t += 1


def dataset_round(env: DatasetEnv, rng: np.random.Generator):
    """``(user, contexts, positive_mask)`` for one round."""
    r = env.draw(rng)
    return r.user, r.contexts, r.expected.astype(bool)


# --- replay -----------------------------------------------------------------------


class EndOfLog(Exception):
    """The replay log has no more records."""


@dataclass(slots=True)
class ReplayRecord:
    user: int
    candidates: np.ndarray
    logged: int
    payoff: float


@dataclass
class ReplayOutcome:
    retained: bool
    payoff: float | None = None


def load_replay_log(path) -> tuple[list[ReplayRecord], list[str], list[str]]:
    """Parse ``user_key,chosen_item_id,payoff,cand1|cand2|...`` lines.

    Returns records with dense ids, plus the user-key and item-id vocabularies.
    """
    users: dict[str, int] = {}
    items: dict[str, int] = {}
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0] == "user_key":
                continue
            if len(row) != 4:
                raise ConfigError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            ukey, chosen, payoff, cands = row
            cand_keys = cands.split("|")
            if chosen not in cand_keys:
                raise ConfigError(f"{path}:{lineno}: logged choice not among candidates")
            u = users.setdefault(ukey, len(users))
            cand = np.array([items.setdefault(c, len(items)) for c in cand_keys], dtype=np.int64)
            records.append(ReplayRecord(u, cand, items[chosen], float(payoff)))
    return records, list(users), list(items)


def write_replay_log(path, records: Sequence[ReplayRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in records:
            w.writerow([f"u{r.user}", f"i{r.logged}", int(r.payoff),
                        "|".join(f"i{c}" for c in r.candidates.tolist())])


class ReplayEnv:
    """Offline log with a cursor. A policy's choice is scored only when it matches the log."""

    kind = "replay"

    def __init__(self, records: Sequence[ReplayRecord], n_users: int, n_items: int,
                 item_features: np.ndarray | None = None):
        self.records = list(records)
        self.n = n_users
        self.n_items = n_items
        self.features = item_features
        self.d = None if item_features is None else item_features.shape[1]
        self.partition = None
        self.cursor = 0

    @classmethod
    def from_file(cls, path, item_features: str | None = None) -> "ReplayEnv":
        """``item_features``: None (featureless), ``"versor"`` (one-hot per item) or an items CSV."""
        records, users, items = load_replay_log(path)
        feats = None
        if item_features == "versor":
            feats = np.eye(len(items))
        elif item_features is not None:
            ids, X = load_items(item_features)
            index = {iid: k for k, iid in enumerate(ids)}
            missing = [i for i in items if i not in index]
            if missing:
                raise ConfigError(f"items file lacks {len(missing)} logged ids, e.g. {missing[0]!r}")
            feats = X[[index[i] for i in items]]
        return cls(records, len(users), len(items), feats)

    def __len__(self) -> int:
        return len(self.records)

    def reset(self, start: int = 0) -> None:
        self.cursor = start

    def current(self) -> Round:
        if self.cursor >= len(self.records):
            raise EndOfLog
        return self.as_round(self.cursor)

    def as_round(self, idx: int) -> Round:
        r = self.records[idx]
        ctx = None if self.features is None else self.features[r.candidates]
        return Round(idx + 1, r.user, ctx, None, None, r.candidates, r.logged, r.payoff)

    def step(self, choice_id: int) -> ReplayOutcome:
        """Score ``choice_id`` against the record at the cursor; the cursor always advances."""
        if self.cursor >= len(self.records):
            raise EndOfLog
        r = self.records[self.cursor]
        self.cursor += 1
        if int(choice_id) == r.logged:
            return ReplayOutcome(True, r.payoff)
        return ReplayOutcome(False)

    def rounds(self, start: int = 1, stop: int | None = None) -> Iterator[Round]:
        stop = len(self.records) if stop is None else min(stop, len(self.records))
        for idx in range(start - 1, stop):
            yield self.as_round(idx)


def replay_step(env: ReplayEnv, policy_choice_id: int) -> ReplayOutcome:
    return env.step(policy_choice_id)


def synthetic_replay_log(n_records: int, c: int, click_rate: float, n_users: int, n_items: int,
                         rng: np.random.Generator) -> list[ReplayRecord]:
    """Log with uniformly random candidates, uniformly logged choices and Bernoulli clicks."""
    out = []
    for _ in range(n_records):
        cand = rng.choice(n_items, size=c, replace=False).astype(np.int64)
        logged = int(cand[rng.integers(c)])
        out.append(ReplayRecord(int(rng.integers(n_users)), cand, logged,
                                float(rng.random() < click_rate)))
    return out
