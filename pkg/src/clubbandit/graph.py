"""Undirected user graph with edge deletion and connected-component tracking.

Two implementations share the :class:`DynGraph` interface:

* :class:`BfsGraph` answers each deletion with a BFS from one endpoint,
  confined to the component that held the edge.
* :class:`ForestGraph` keeps a spanning forest. Deleting a non-tree edge is
  O(1); deleting a tree edge walks the two tree halves in lockstep and scans
  the smaller half for a replacement edge.

Component ids are always the smallest member id.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np


class GraphInitError(RuntimeError):
    pass


@dataclass(frozen=True)
class SplitReport:
    """A component ``old_id`` broke into ``parts`` after an edge deletion."""

    old_id: int
    parts: tuple[frozenset, frozenset]


@dataclass
class GraphConfig:
    mode: str = "erdos_renyi"  # or "complete"
    p: float | None = None  # None -> 3 ln(n) / n
    max_retries: int = 100
    seed: int | None = None

    def edge_prob(self, n: int) -> float:
        if self.p is not None:
            return self.p
        return default_er_p(n)


def default_er_p(n: int) -> float:
    if n < 2:
        return 1.0
    return min(1.0, 3.0 * math.log(n) / n)


def karger_p(n: int, s: int, delta: float) -> float:
    """Edge probability sufficient for all true clusters of size >= s to be connected w.p. 1-delta."""
    if s < 2:
        raise ValueError("cluster size must be >= 2")
    return min(1.0, 12.0 * math.log(6.0 * n * n / delta) / (s - 1))


class DynGraph:
    """Decremental graph over nodes ``0..n-1``."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 1:
            raise ValueError("graph needs at least one node")
        self.n = n
        self.adj: list[set[int]] = [set() for _ in range(n)]
        self.num_edges = 0
        for i, l in edges:
            if i == l:
                raise ValueError(f"self-loop at {i}")
            if l not in self.adj[i]:
                self.adj[i].add(l)
                self.adj[l].add(i)
                self.num_edges += 1
        self.comp = np.empty(n, dtype=np.int64)
        self.members: dict[int, set[int]] = {}
        self._label_all()

    @classmethod
    def complete(cls, n: int):
        return cls(n, ((i, l) for i in range(n) for l in range(i + 1, n)))

    def _label_all(self) -> None:
        seen = np.zeros(self.n, dtype=bool)
        self.members.clear()
        for s in range(self.n):
            if seen[s]:
                continue
            comp = bfs_component(self.adj, s)
            for v in comp:
                seen[v] = True
                self.comp[v] = s
            self.members[s] = comp

    @property
    def num_components(self) -> int:
        return len(self.members)

    def has_edge(self, i: int, l: int) -> bool:
        return l in self.adj[i]

    def neighbors(self, i: int) -> set[int]:
        return self.adj[i]

    def edges(self) -> Iterator[tuple[int, int]]:
        for i, nb in enumerate(self.adj):
            for l in nb:
                if i < l:
                    yield i, l

    def component_id(self, i: int) -> int:
        return int(self.comp[i])

    def component_members(self, i: int) -> frozenset:
        return frozenset(self.members[int(self.comp[i])])

    def connected(self, i: int, l: int) -> bool:
        return self.comp[i] == self.comp[l]

    def delete_edge(self, i: int, l: int) -> SplitReport | None:
        """Remove edge (i, l); return a report if its component split."""
        if l not in self.adj[i]:
            raise KeyError(f"edge ({i}, {l}) does not exist")
        self.adj[i].discard(l)
        self.adj[l].discard(i)
        self.num_edges -= 1
        side = self._side_if_split(i, l)
        if side is None:
            return None
        return self._split(int(self.comp[i]), side)

    def _side_if_split(self, i: int, l: int) -> set[int] | None:
        raise NotImplementedError

    def _split(self, old_id: int, side: set[int]) -> SplitReport:
        old = self.members.pop(old_id)
        rest = old - side
        for part in (side, rest):
            new_id = min(part)
            if new_id != old_id:
                self.comp[list(part)] = new_id
            self.members[new_id] = part
        a, b = sorted((frozenset(side), frozenset(rest)), key=min)
        return SplitReport(old_id, (a, b))

    def dump_edges(self, path) -> None:
        """Write one ``"i l"`` line per edge, 0-based, ``i < l``, sorted."""
        lines = [f"{i} {l}\n" for i, l in sorted(self.edges())]
        Path(path).write_text("".join(lines))

    @classmethod
    def load_edges(cls, n: int, path):
        edges = []
        for line in Path(path).read_text().splitlines():
            if line.strip():
                i, l = line.split()
                edges.append((int(i), int(l)))
        return cls(n, edges)


def bfs_component(adj, s: int) -> set[int]:
    seen = {s}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


class BfsGraph(DynGraph):
    """Reference implementation: BFS from one endpoint after every deletion."""

    def _side_if_split(self, i, l):
        seen = {i}
        queue = deque([i])
        adj = self.adj
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v == l:
                    return None
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen


class ForestGraph(DynGraph):
    """Spanning-forest implementation with replacement-edge search."""

    def __init__(self, n, edges=()):
        super().__init__(n, edges)
        self.tree: list[set[int]] = [set() for _ in range(n)]
        seen = np.zeros(n, dtype=bool)
        for s in range(n):
            if seen[s]:
                continue
            seen[s] = True
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v in self.adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        self.tree[u].add(v)
                        self.tree[v].add(u)
                        queue.append(v)

    def _side_if_split(self, i, l):
        tree = self.tree
        if l not in tree[i]:
            return None
        tree[i].discard(l)
        tree[l].discard(i)
        side = _smaller_tree_half(tree, i, l)
        adj = self.adj
        for u in side:
            for v in adj[u]:
                if v not in side:
                    tree[u].add(v)
                    tree[v].add(u)
                    return None
        return side


def _smaller_tree_half(tree, a: int, b: int) -> set[int]:
    """Walk the two trees containing ``a`` and ``b`` in lockstep; return the one finished first."""
    seen = ({a}, {b})
    stacks = ([a], [b])
    while True:
        for k in (0, 1):
            stack = stacks[k]
            if not stack:
                return seen[k]
            u = stack.pop()
            for v in tree[u]:
                if v not in seen[k]:
                    seen[k].add(v)
                    stack.append(v)


GRAPH_IMPLS = {"bfs": BfsGraph, "forest": ForestGraph}


def is_connected(adj) -> bool:
    return len(bfs_component(adj, 0)) == len(adj)


def sample_er_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Each of the C(n, 2) edges present independently with probability ``p``."""
    if n < 2:
        return []
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def init_graph(n: int, cfg: GraphConfig | None = None, rng: np.random.Generator | None = None,
               impl: str = "forest") -> DynGraph:
    """Initial connected user graph: complete, or Erdos-Renyi redrawn until connected."""
    cfg = cfg or GraphConfig()
    cls = GRAPH_IMPLS[impl]
    if cfg.mode == "complete":
        return cls.complete(n)
    if cfg.mode != "erdos_renyi":
        raise ValueError(f"unknown graph mode {cfg.mode!r}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p = cfg.edge_prob(n)
    for _ in range(cfg.max_retries):
        edges = sample_er_edges(n, p, rng)
        adj = [set() for _ in range(n)]
        for i, l in edges:
            adj[i].add(l)
            adj[l].add(i)
        if is_connected(adj):
            return cls(n, edges)
    raise GraphInitError(f"no connected G({n}, {p:.4g}) within {cfg.max_retries} draws")
