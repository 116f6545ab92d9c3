"""The CLUB algorithm: bandits sharing estimators over connected components of a user graph."""

from __future__ import annotations

import json
import math
from typing import TextIO

import numpy as np

from clubbandit.estimators import (
    AlgoParams,
    ClusterState,
    NodeState,
    TheoreticalParams,
    cluster_from_nodes,
    cluster_serve_update,
    node_update,
    practical_cb,
    practical_cb_tilde,
    select_arm,
    theoretical_tcb,
    theoretical_tcb_tilde,
)
from clubbandit.graph import DynGraph, GraphConfig, init_graph
from clubbandit.policy import LinearPolicy


class ClubModel(LinearPolicy):
    """Online clustering of linear bandits.

    Each round: look up the served user's component, pick the arm maximizing
    the aggregate estimate plus its confidence width, update the user's own
    estimator and the component aggregate, then delete every edge at the user
    whose endpoint estimators are further apart than the sum of their
    confidence radii. Components that split get their aggregates rebuilt from
    the member matrices.

    With ``theory`` set, both confidence families switch to their theoretical
    forms and ``params.alpha``/``params.alpha2`` are ignored.
    """

    name = "club"

    def __init__(self, n: int, d: int, params: AlgoParams | None = None,
                 graph: DynGraph | None = None, graph_cfg: GraphConfig | None = None,
                 rng: np.random.Generator | None = None, theory: TheoreticalParams | None = None,
                 event_sink: TextIO | None = None):
        self.n, self.d = n, d
        self.params = params or AlgoParams()
        self.theory = theory
        if graph is None:
            graph = init_graph(n, graph_cfg or GraphConfig(), rng)
        if graph.n != n:
            raise ValueError(f"graph has {graph.n} nodes, expected {n}")
        self.graph = graph
        self.nodes = [NodeState(d) for _ in range(n)]
        self.W = np.zeros((n, d))
        self.counts = np.zeros(n, dtype=np.int64)
        self.clusters: dict[int, ClusterState] = {}
        for cid, members in graph.members.items():
            self.clusters[cid] = cluster_from_nodes(self.nodes, members)
        self.round = 0
        self.event_sink = event_sink
        self._last = None  # (user, w before update, serve count before update)
        self._last_choice = None

    @property
    def num_components(self) -> int:
        return self.graph.num_components

    def cluster_of(self, user: int) -> ClusterState:
        return self.clusters[int(self.graph.comp[user])]

    def node_cluster(self) -> np.ndarray:
        return self.graph.comp.copy()

    def choose(self, user: int, contexts: np.ndarray) -> int:
        contexts = np.asarray(contexts, dtype=float)
        if contexts.ndim != 2 or contexts.shape[0] == 0:
            raise ValueError("contexts must be a nonempty (c, d) array")
        cluster = self.cluster_of(user)
        if self.theory is None:
            cb = practical_cb(cluster, contexts, self.round + 1, self.params.alpha)
        else:
            cb = theoretical_tcb(cluster, contexts, self.theory)
        k = select_arm(cluster.w, contexts, cb)
        self._last_choice = (user, int(self.graph.comp[user]), k)
        return k

    def update(self, user: int, x: np.ndarray, payoff: float) -> None:
        node = self.nodes[user]
        self._last = (user, node.w.copy(), node.serve_count)
        node_update(node, x, payoff)
        cluster_serve_update(self.cluster_of(user), x, payoff)
        self.W[user] = node.w
        self.counts[user] += 1
        self.round += 1

    def _radii(self, counts, t: int):
        if self.theory is None:
            return practical_cb_tilde(counts, self.params.alpha2)
        return theoretical_tcb_tilde(counts, t, self.theory, scope="node")

    def prune(self, user: int) -> int:
        """Edge-deletion step for the served user; returns the number of deleted edges.

        The test compares estimators as they stood before this round's update,
        so the served user's previous ``w`` and serve count are used.
        """
        if self.theory is None and math.isinf(self.params.alpha2):
            return 0
        nbrs = self.graph.neighbors(user)
        if not nbrs:
            return 0
        if self._last is not None and self._last[0] == user:
            w_user, t_user = self._last[1], self._last[2]
        else:
            w_user, t_user = self.W[user], int(self.counts[user])
        t = max(self.round, 1)
        idx = np.fromiter(nbrs, dtype=np.int64, count=len(nbrs))
        diff = self.W[idx] - w_user
        dist = np.sqrt((diff * diff).sum(axis=1))
        thresh = self._radii(t_user, t) + self._radii(self.counts[idx], t)
        doomed = idx[dist > thresh]
        if doomed.size == 0:
            return 0
        old_cid = int(self.graph.comp[user])
        old_members = self.clusters[old_cid].members
        split = False
        for l in doomed.tolist():
            if self.graph.delete_edge(user, l) is not None:
                split = True
        if split:
            del self.clusters[old_cid]
            for cid in {int(self.graph.comp[v]) for v in old_members}:
                self.clusters[cid] = cluster_from_nodes(self.nodes, self.graph.members[cid])
        return int(doomed.size)

    def learn(self, user: int, x: np.ndarray, payoff: float) -> None:
        self.update(user, x, payoff)
        deleted = self.prune(user)
        if self.event_sink is not None:
            cid, k = (self._last_choice[1], self._last_choice[2]) if self._last_choice else (-1, -1)
            self.event_sink.write(json.dumps({
                "round": self.round, "user": int(user), "cluster_id": cid, "chosen_index": k,
                "payoff": float(payoff), "deletions_count": deleted,
                "num_components": self.num_components,
            }) + "\n")

    def step(self, rnd) -> tuple[int, float, float]:
        """choose -> observe payoff -> update -> prune for one environment round."""
        k = self.choose(rnd.user, rnd.contexts)
        payoff = rnd.payoff(k)
        self.learn(rnd.user, rnd.contexts[k], payoff)
        return k, payoff, rnd.regret(k)

    def rebuild_check(self, tol: float = 1e-8) -> float:
        """Max entrywise gap between maintained aggregates and a fresh rebuild."""
        worst = 0.0
        for cid, cl in self.clusters.items():
            ref = cluster_from_nodes(self.nodes, cl.members)
            for a, b in ((cl.M, ref.M), (cl.M_inv, ref.M_inv), (cl.b, ref.b), (cl.w, ref.w)):
                worst = max(worst, float(np.max(np.abs(a - b))))
        return worst
