"""Per-user and per-cluster least-squares estimators and their confidence bounds.

All logarithms are natural. Round indices ``t`` are global and 1-based.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from clubbandit.linalg import REINVERT_EVERY, NumericDriftError, rank_one_update

log = logging.getLogger(__name__)

COND_WARN = 1e12


@dataclass
class AlgoParams:
    """Exploration factor ``alpha`` and edge-deletion factor ``alpha2``.

    ``alpha2 = inf`` never deletes an edge; ``alpha2 = 0`` deletes on any difference.
    """

    alpha: float = 0.25
    alpha2: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if math.isnan(self.alpha2) or self.alpha2 < 0.0:
            raise ValueError(f"alpha2 must be >= 0 (inf allowed), got {self.alpha2}")


@dataclass
class TheoreticalParams:
    """Constants used by the theoretical confidence bounds.

    ``gamma``, ``m_true`` and ``c_max`` are analysis-only and never read by the
    algorithm itself, except ``m_true`` for the cluster-scope radius.
    """

    sigma: float
    delta: float
    lam: float
    n_users: int
    dim: int
    gamma: float | None = None
    m_true: int | None = None
    c_max: int | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.lam <= 0.0 or self.sigma < 0.0:
            raise ValueError("need lam > 0 and sigma >= 0")

    @classmethod
    def theorem_mode(cls, **kwargs) -> "TheoreticalParams":
        """Build params with ``delta`` shrunk by 10.5, as the regret guarantee requires."""
        kwargs["delta"] = kwargs["delta"] / 10.5
        return cls(**kwargs)


class RidgeState:
    """Ridge-regression state ``M = I + sum x x^T``, ``b = sum a x``, ``w = M^{-1} b``.

    ``M`` itself is kept alongside its inverse so aggregates can be rebuilt by
    summation and the inverse can be refreshed periodically.
    """

    __slots__ = ("M", "M_inv", "b", "w", "log_det", "_since_reinvert")

    def __init__(self, d: int):
        self.M = np.eye(d)
        self.M_inv = np.eye(d)
        self.b = np.zeros(d)
        self.w = np.zeros(d)
        self.log_det = 0.0
        self._since_reinvert = 0

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def _absorb(self, x: np.ndarray, payoff: float) -> None:
        self.M += x[:, None] * x
        self._since_reinvert += 1
        if self._since_reinvert >= REINVERT_EVERY:
            self.reinvert()
        else:
            try:
                self.M_inv, gain = rank_one_update(self.M_inv, x)
                self.log_det += gain
            except NumericDriftError:
                log.warning("rank-one inverse drifted; re-inverting from the accumulated matrix")
                self.reinvert()
        self.b += payoff * x
        self.w = self.M_inv @ self.b

    def reinvert(self) -> None:
        """Recompute ``M_inv`` and ``log_det`` directly from ``M``."""
        inv = np.linalg.inv(self.M)
        self.M_inv = 0.5 * (inv + inv.T)
        self.log_det = float(np.linalg.slogdet(self.M)[1])
        self._since_reinvert = 0


class NodeState(RidgeState):
    """Estimator of a single user; ``serve_count`` is the number of updates received."""

    __slots__ = ("serve_count",)

    def __init__(self, d: int):
        super().__init__(d)
        self.serve_count = 0

    def copy(self) -> "NodeState":
        out = NodeState(self.dim)
        out.M, out.M_inv = self.M.copy(), self.M_inv.copy()
        out.b, out.w = self.b.copy(), self.w.copy()
        out.log_det, out.serve_count = self.log_det, self.serve_count
        out._since_reinvert = self._since_reinvert
        return out


class ClusterState(RidgeState):
    """Aggregate estimator of a connected component, as if its members were one user."""

    __slots__ = ("members", "total_serves")

    def __init__(self, d: int, members: Iterable[int] = ()):
        super().__init__(d)
        self.members = frozenset(members)
        self.total_serves = 0


def node_update(node: NodeState, x: np.ndarray, payoff: float) -> NodeState:
    """Absorb one served round into ``node`` (in place) and return it."""
    node._absorb(x, payoff)
    node.serve_count += 1
    return node


def cluster_from_nodes(nodes: Sequence[NodeState], members: Iterable[int]) -> ClusterState:
    """Pool member estimators: ``M = I + sum (M_i - I)``, ``b = sum b_i``, inverted directly."""
    members = frozenset(members)
    if not members:
        raise ValueError("a cluster needs at least one member")
    d = nodes[next(iter(members))].dim
    out = ClusterState(d, members)
    eye = np.eye(d)
    for i in sorted(members):
        node = nodes[i]
        out.M += node.M - eye
        out.b += node.b
        out.total_serves += node.serve_count
    out.reinvert()
    out.w = out.M_inv @ out.b
    if out.total_serves:
        cond = np.linalg.cond(out.M)
        if cond > COND_WARN:
            log.warning("cluster matrix condition number %.3g exceeds %.0e", cond, COND_WARN)
    return out


def cluster_serve_update(cluster: ClusterState, x: np.ndarray, payoff: float) -> ClusterState:
    """Incremental counterpart of rebuilding after one member's update (in place)."""
    cluster._absorb(x, payoff)
    cluster.total_serves += 1
    return cluster


def _quad(M_inv: np.ndarray, X: np.ndarray) -> np.ndarray | float:
    """``x^T M_inv x`` for a single vector or for each row of a matrix."""
    if X.ndim == 1:
        return float(X @ M_inv @ X)
    return ((X @ M_inv) * X).sum(axis=1)


def practical_cb(state: RidgeState, x: np.ndarray, t: int, alpha: float):
    """Simplified payoff confidence width ``alpha * sqrt(x^T M^{-1} x * ln(t+1))``.

    ``x`` may be a single context or a ``(c, d)`` matrix of contexts.
    """
    q = np.maximum(_quad(state.M_inv, x), 0.0)
    return alpha * np.sqrt(q * math.log(t + 1))


def practical_cb_tilde(serve_count, alpha2: float):
    """Simplified parameter confidence radius used by the edge-deletion test.

    Accepts a count or an array of counts.
    """
    if isinstance(serve_count, (int, np.integer)):
        if math.isinf(alpha2):
            return math.inf
        return alpha2 * math.sqrt((1.0 + math.log1p(serve_count)) / (1.0 + serve_count))
    T = np.asarray(serve_count, dtype=float)
    if math.isinf(alpha2):
        out = np.full(T.shape, math.inf)
    else:
        out = alpha2 * np.sqrt((1.0 + np.log1p(T)) / (1.0 + T))
    return float(out) if out.ndim == 0 else out


def a_lambda(T, delta: float, lam: float):
    """Eigenvalue-growth term ``(lam*T/4 - 8 ln((T+3)/delta) - 2 sqrt(T ln((T+3)/delta)))_+``."""
    T = np.asarray(T, dtype=float)
    lg = np.log((T + 3.0) / delta)
    out = np.maximum(lam * T / 4.0 - 8.0 * lg - 2.0 * np.sqrt(T * lg), 0.0)
    return float(out) if out.ndim == 0 else out


def theoretical_tcb(state: RidgeState, x: np.ndarray, params: TheoreticalParams):
    """Theoretical payoff confidence width built from the maintained log-determinant.

    Works for clusters and, with a node in place of the cluster, for single users.
    """
    q = np.maximum(_quad(state.M_inv, x), 0.0)
    scale = params.sigma * math.sqrt(2.0 * (state.log_det + math.log(2.0 / params.delta))) + 1.0
    return np.sqrt(q) * scale


def theoretical_tcb_tilde(serves, t: int, params: TheoreticalParams, scope: str = "node"):
    """Theoretical parameter confidence radius for a node or a cluster.

    ``serves`` is ``T_i`` (node scope) or the cluster's pooled count (cluster
    scope, which needs ``params.m_true``).
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    d = params.dim
    if scope == "node":
        inner_delta = params.delta / (2.0 * params.n_users * d)
    elif scope == "cluster":
        if params.m_true is None:
            raise ValueError("cluster-scope radius needs m_true (analysis mode only)")
        inner_delta = params.delta / (2.0 ** (params.m_true + 1) * d)
    else:
        raise ValueError(f"unknown scope {scope!r}")
    num = params.sigma * math.sqrt(2.0 * d * math.log(t) + 2.0 * math.log(2.0 / params.delta)) + 1.0
    return num / np.sqrt(1.0 + a_lambda(serves, inner_delta, params.lam))


def select_arm(w_bar: np.ndarray, contexts: np.ndarray, cb_values) -> int:
    """Index maximizing ``w_bar . x_k + cb_k``; ties go to the lowest index."""
    contexts = np.asarray(contexts, dtype=float)
    if contexts.shape[0] == 0:
        raise ValueError("empty context set")
    scores = contexts @ w_bar + np.asarray(cb_values, dtype=float)
    return int(np.argmax(scores))
