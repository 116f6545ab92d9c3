"""Comparison policies: LinUCB (ONE / IND / CLAIRVOYANT), UCB1 (ONE / IND), UCB-V and random."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from clubbandit.estimators import NodeState, node_update, practical_cb, select_arm
from clubbandit.policy import ConfigError, ItemPolicy, LinearPolicy


class _LinUCBBase(LinearPolicy):
    """LinUCB instances routed by ``_key(user)``, sharing one global round counter."""

    def __init__(self, d: int, alpha: float = 0.25):
        self.d = d
        self.alpha = alpha
        self.round = 0
        self.states: dict[int, NodeState] = {}

    def _key(self, user: int) -> int:
        raise NotImplementedError

    def state_for(self, user: int) -> NodeState:
        key = self._key(user)
        st = self.states.get(key)
        if st is None:
            st = self.states[key] = NodeState(self.d)
        return st

    def choose(self, user, contexts):
        contexts = np.asarray(contexts, dtype=float)
        if contexts.ndim != 2 or contexts.shape[0] == 0:
            raise ValueError("contexts must be a nonempty (c, d) array")
        st = self.state_for(user)
        cb = practical_cb(st, contexts, self.round + 1, self.alpha)
        return select_arm(st.w, contexts, cb)

    def update(self, user, x, payoff):
        node_update(self.state_for(user), x, payoff)
        self.round += 1


class LinUCBOne(_LinUCBBase):
    """A single LinUCB shared by all users."""

    name = "linucb_one"

    def _key(self, user):
        return 0

    @property
    def node(self) -> NodeState:
        return self.state_for(0)


class LinUCBInd(_LinUCBBase):
    """An independent LinUCB per user (created lazily on first contact)."""

    name = "linucb_ind"

    def _key(self, user):
        return int(user)


class Clairvoyant(_LinUCBBase):
    """One LinUCB per true cluster, routed by the known partition."""

    name = "clairvoyant"

    def __init__(self, d: int, partition: Sequence[int] | None, alpha: float = 0.25):
        if partition is None:
            raise ConfigError("CLAIRVOYANT needs the ground-truth partition")
        super().__init__(d, alpha)
        self.partition = np.asarray(partition, dtype=np.int64)

    def _key(self, user):
        return int(self.partition[user])


class ItemStats:
    """Per-item pull counts, running means and Welford sums of squares."""

    def __init__(self, n_items: int):
        self.count = np.zeros(n_items, dtype=np.int64)
        self.mean = np.zeros(n_items)
        self.m2 = np.zeros(n_items)
        self.total = 0

    def add(self, item: int, payoff: float) -> None:
        self.count[item] += 1
        self.total += 1
        delta = payoff - self.mean[item]
        self.mean[item] += delta / self.count[item]
        self.m2[item] += delta * (payoff - self.mean[item])

    def var(self, items=None) -> np.ndarray:
        """Population variance (zero for items seen fewer than twice)."""
        c = self.count if items is None else self.count[items]
        m2 = self.m2 if items is None else self.m2[items]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(c > 0, m2 / np.maximum(c, 1), 0.0)


def _first_unseen(counts: np.ndarray) -> int | None:
    zero = np.flatnonzero(counts == 0)
    return int(zero[0]) if zero.size else None


def ucb1_choose(stats: ItemStats, items: np.ndarray, t: int, alpha: float = 1.0) -> int:
    """Index into ``items`` maximizing ``mean + alpha sqrt(2 ln t / count)``; unseen items first."""
    items = np.asarray(items, dtype=np.int64)
    counts = stats.count[items]
    unseen = _first_unseen(counts)
    if unseen is not None:
        return unseen
    lt = math.log(max(t, 1))
    scores = stats.mean[items] + alpha * np.sqrt(2.0 * lt / counts)
    return int(np.argmax(scores))


def ucbv_choose(stats: ItemStats, items: np.ndarray, t: int) -> int:
    """Variance-aware index ``mean + sqrt(2 var ln t / count) + 3 ln t / count`` (b = c = 1)."""
    items = np.asarray(items, dtype=np.int64)
    counts = stats.count[items]
    unseen = _first_unseen(counts)
    if unseen is not None:
        return unseen
    lt = math.log(max(t, 1))
    scores = stats.mean[items] + np.sqrt(2.0 * stats.var(items) * lt / counts) + 3.0 * lt / counts
    return int(np.argmax(scores))


class UCBOne(ItemPolicy):
    name = "ucb_one"

    def __init__(self, n_items: int, alpha: float = 1.0):
        self.alpha = alpha
        self.stats = ItemStats(n_items)

    def choose(self, user, items):
        return ucb1_choose(self.stats, items, self.stats.total, self.alpha)

    def update(self, user, item, payoff):
        self.stats.add(item, payoff)


class UCBInd(ItemPolicy):
    name = "ucb_ind"

    def __init__(self, n_items: int, alpha: float = 1.0):
        self.alpha = alpha
        self.n_items = n_items
        self.per_user: dict[int, ItemStats] = {}

    def _stats(self, user) -> ItemStats:
        st = self.per_user.get(user)
        if st is None:
            st = self.per_user[user] = ItemStats(self.n_items)
        return st

    def choose(self, user, items):
        st = self._stats(user)
        return ucb1_choose(st, items, st.total, self.alpha)

    def update(self, user, item, payoff):
        self._stats(user).add(item, payoff)


class UCBV(ItemPolicy):
    name = "ucbv"

    def __init__(self, n_items: int):
        self.stats = ItemStats(n_items)

    def choose(self, user, items):
        return ucbv_choose(self.stats, items, self.stats.total)

    def update(self, user, item, payoff):
        self.stats.add(item, payoff)


def ran_choose(c: int, rng: np.random.Generator) -> int:
    if c < 1:
        raise ValueError("empty context set")
    return int(rng.integers(c))


class RandomPolicy:
    """Uniform choice over the round's candidates from a dedicated stream."""

    name = "ran"
    needs_features = False

    def __init__(self, rng: np.random.Generator | int | None = None):
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def act(self, rnd) -> int:
        c = len(rnd.items) if rnd.items is not None else rnd.contexts.shape[0]
        return ran_choose(c, self.rng)

    def observe(self, rnd, k, payoff) -> None:
        pass
