import io
import json
import math

import numpy as np
import pytest

from clubbandit.baselines import Clairvoyant, LinUCBInd, LinUCBOne
from clubbandit.club import ClubModel
from clubbandit.estimators import AlgoParams, NodeState, TheoreticalParams, node_update
from clubbandit.environments import SyntheticConfig, SyntheticEnv, world_for_seed
from clubbandit.graph import BfsGraph, ForestGraph, GraphConfig, bfs_component, init_graph


def make_env(n=30, d=5, m=3, T=3000, seed=1, sigma=0.1, z=0.0):
    cfg = SyntheticConfig(n=n, d=d, m=m, z=z, sigma=sigma, c=10, T=T, seed=seed)
    return SyntheticEnv(world_for_seed(cfg, seed), cfg)


def two_node_model(alpha2, w_user, w_other, count):
    model = ClubModel(2, 2, AlgoParams(0.25, alpha2), graph=ForestGraph(2, [(0, 1)]))
    model.W[0], model.W[1] = w_user, w_other
    model.counts[:] = count
    return model


@pytest.mark.parametrize("alpha2,count,deleted", [(1.0, 9, 1), (2.0, 9, 0), (1.0, 0, 0)])
def test_prune_examples(alpha2, count, deleted):
    model = two_node_model(alpha2, [1.0, 0.0], [0.0, 1.0], count)
    assert model.prune(0) == deleted
    assert model.num_components == 1 + deleted


def test_prune_uses_pre_update_estimate():
    # user 0 served for the first time: its previous estimate is 0, like its fresh neighbour
    model = ClubModel(2, 2, AlgoParams(0.25, 0.0), graph=ForestGraph(2, [(0, 1)]))
    model.learn(0, np.array([1.0, 0.0]), 1.0)
    assert model.graph.num_edges == 1
    # now user 1 (still at w = 0) is served; neighbour 0 sits at w = (0.5, 0)
    model.learn(1, np.array([0.0, 1.0]), 1.0)
    assert model.graph.num_edges == 0
    assert model.num_components == 2


def test_choose_fresh_and_greedy():
    model = ClubModel(3, 4, AlgoParams(0.5, 1.0), graph_cfg=GraphConfig(mode="complete"))
    X = np.eye(4)
    assert model.choose(1, X) == 0
    model = ClubModel(1, 3, AlgoParams(0.0, 1.0), graph_cfg=GraphConfig(mode="complete"))
    model.cluster_of(0).w = np.array([1.0, 0.0, 0.0])
    assert model.choose(0, np.array([[0, 1.0, 0], [1.0, 0, 0]])) == 1
    with pytest.raises(ValueError):
        model.choose(0, np.zeros((0, 3)))


def test_single_user_is_node_update():
    model = ClubModel(1, 3, graph_cfg=GraphConfig(mode="complete"))
    ref = NodeState(3)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.standard_normal(3)
        x /= np.linalg.norm(x)
        a = float(rng.uniform(-1.2, 1.2))  # payoffs outside [-1, 1] are accepted
        model.learn(0, x, a)
        node_update(ref, x, a)
    np.testing.assert_array_equal(model.nodes[0].w, ref.w)
    np.testing.assert_array_equal(model.cluster_of(0).w, ref.w)
    assert model.round == 50


def test_zero_steps_leave_model_unchanged():
    model = ClubModel(5, 3, graph_cfg=GraphConfig(mode="complete"))
    assert model.round == 0 and model.graph.num_edges == 10 and model.num_components == 1


def test_infinite_alpha2_never_deletes():
    env = make_env(n=20, T=1500)
    model = ClubModel(20, 5, AlgoParams(0.3, math.inf), graph_cfg=GraphConfig(mode="complete"))
    for rnd in env.rounds():
        model.step(rnd)
    assert model.graph.num_edges == 190 and model.num_components == 1


def test_zero_alpha2_empties_small_graph():
    env = make_env(n=5, T=400, m=2, seed=3)
    model = ClubModel(5, 5, AlgoParams(0.3, 0.0), graph_cfg=GraphConfig(mode="complete"))
    served = np.zeros(5, dtype=int)
    for rnd in env.rounds():
        model.step(rnd)
        served[rnd.user] += 1
        if served.min() >= 2:
            break
    assert served.min() >= 2
    assert model.graph.num_edges == 0 and model.num_components == 5


def test_one_equivalence():
    env = make_env(n=20, T=1200)
    club = ClubModel(20, 5, AlgoParams(0.4, math.inf), graph=init_graph(20, GraphConfig(), np.random.default_rng(2)))
    one = LinUCBOne(5, 0.4)
    for rnd in env.rounds():
        k1, _, _ = club.step(rnd)
        k2 = one.act(rnd)
        one.observe(rnd, k2, rnd.payoff(k2))
        assert k1 == k2
        assert np.max(np.abs(club.cluster_of(0).w - one.node.w)) <= 1e-9


def test_ind_convergence():
    env = make_env(n=8, T=2000, m=2, seed=5)
    club = ClubModel(8, 5, AlgoParams(0.3, 0.0), graph_cfg=GraphConfig(mode="complete"))
    it = env.rounds()
    for rnd in it:
        club.step(rnd)
        if club.graph.num_edges == 0:
            break
    assert club.graph.num_edges == 0
    ind = LinUCBInd(5, 0.3)
    ind.states = {i: club.nodes[i].copy() for i in range(8)}
    ind.round = club.round
    for rnd in it:
        k1, _, _ = club.step(rnd)
        k2 = ind.act(rnd)
        ind.observe(rnd, k2, rnd.payoff(k2))
        assert k1 == k2


def test_clairvoyant_equals_club_on_true_partition():
    env = make_env(n=24, T=1500, m=3, seed=7)
    part = env.partition
    edges = [(i, l) for i in range(24) for l in range(i + 1, 24) if part[i] == part[l]]
    club = ClubModel(24, 5, AlgoParams(0.5, math.inf), graph=BfsGraph(24, edges))
    assert club.num_components == 3
    clair = Clairvoyant(5, part, 0.5)
    for rnd in env.rounds():
        k1, _, _ = club.step(rnd)
        k2 = clair.act(rnd)
        clair.observe(rnd, k2, rnd.payoff(k2))
        assert k1 == k2


@pytest.mark.parametrize("impl", ["bfs", "forest"])
def test_consistency_and_monotone_components(impl):
    env = make_env(n=40, T=3000, m=4, seed=11)
    graph = init_graph(40, GraphConfig(), np.random.default_rng(5), impl=impl)
    model = ClubModel(40, 5, AlgoParams(0.25, 0.3), graph=graph)
    prev = 1
    for rnd in env.rounds():
        model.step(rnd)
        assert model.num_components >= prev
        prev = model.num_components
        if rnd.t % 500 == 0:
            assert model.rebuild_check() <= 1e-8
            labels = model.node_cluster()
            seen = set()
            for s in range(40):
                if s in seen:
                    continue
                comp = bfs_component(model.graph.adj, s)
                seen |= comp
                assert {int(labels[v]) for v in comp} == {min(comp)}
            assert set(model.clusters) == set(np.unique(labels).tolist())
            for cid, cl in model.clusters.items():
                assert cl.members == frozenset(np.flatnonzero(labels == cid).tolist())
                assert cl.total_serves == int(model.counts[list(cl.members)].sum())
    assert prev > 1


def test_theoretical_mode_refines_partition():
    # well separated, low noise: components never outnumber the true clusters
    violations = 0
    for seed in range(1, 11):
        env = make_env(n=20, d=5, m=2, T=2000, seed=seed)
        assert env.world.gamma >= 0.5
        th = TheoreticalParams(sigma=0.1, delta=0.2, lam=0.2, n_users=20, dim=5)
        model = ClubModel(20, 5, graph_cfg=GraphConfig(mode="complete"), theory=th)
        for rnd in env.rounds():
            model.step(rnd)
            if model.num_components > 2:
                violations += 1
                break
    assert violations == 0


def test_event_log():
    sink = io.StringIO()
    env = make_env(n=6, T=50, m=2)
    model = ClubModel(6, 5, AlgoParams(0.3, 0.0), graph_cfg=GraphConfig(mode="complete"), event_sink=sink)
    for rnd in env.rounds():
        model.step(rnd)
    recs = [json.loads(ln) for ln in sink.getvalue().splitlines()]
    assert len(recs) == 50
    assert set(recs[0]) == {"round", "user", "cluster_id", "chosen_index", "payoff",
                            "deletions_count", "num_components"}
    assert [r["round"] for r in recs] == list(range(1, 51))
    assert sum(r["deletions_count"] for r in recs) == 15 - model.graph.num_edges


def test_graph_size_mismatch():
    with pytest.raises(ValueError):
        ClubModel(4, 2, graph=ForestGraph(3))
