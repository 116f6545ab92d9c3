import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clubbandit.estimators import (
    AlgoParams,
    NodeState,
    TheoreticalParams,
    a_lambda,
    cluster_from_nodes,
    cluster_serve_update,
    node_update,
    practical_cb,
    practical_cb_tilde,
    select_arm,
    theoretical_tcb,
    theoretical_tcb_tilde,
)
from clubbandit.linalg import REINVERT_EVERY

# Reference constants evaluated independently at 30 digits (mpmath).
SQRT_LN2 = 0.832554611157697756
SQRT_LN10 = 1.517427129385146351
CBT_9 = 0.574681224070705627
A_10K = 1729.271314032182614
TCB_EX = 2.665109222315395513
TCBT_EX = 4.716922188849838447


def e(i, d=5):
    v = np.zeros(d)
    v[i] = 1.0
    return v


def test_node_init():
    nd = NodeState(4)
    assert np.array_equal(nd.M_inv, np.eye(4)) and nd.serve_count == 0 and nd.log_det == 0.0
    assert not nd.b.any() and not nd.w.any()


def test_node_update_examples():
    nd = node_update(NodeState(5), e(0), 1.0)
    np.testing.assert_allclose(nd.w, [0.5, 0, 0, 0, 0])
    nd = node_update(NodeState(5), e(0), 0.0)
    assert not nd.w.any() and nd.serve_count == 1
    nd = node_update(node_update(NodeState(5), e(0), 1.0), e(1), 1.0)
    np.testing.assert_allclose(nd.w, [0.5, 0.5, 0, 0, 0])


def test_cluster_from_nodes_examples():
    nodes = [NodeState(5) for _ in range(2)]
    cl = cluster_from_nodes(nodes, {0})
    np.testing.assert_array_equal(cl.M_inv, np.eye(5))
    assert not cl.w.any()
    node_update(nodes[0], e(0), 1.0)
    cl = cluster_from_nodes(nodes, {0, 1})
    np.testing.assert_allclose(cl.M, np.eye(5) + np.outer(e(0), e(0)))
    np.testing.assert_allclose(cl.w, [0.5, 0, 0, 0, 0])
    assert cl.total_serves == 1
    with pytest.raises(ValueError):
        cluster_from_nodes(nodes, set())


def test_cluster_serve_update_small():
    nodes = [NodeState(5) for _ in range(3)]
    cl = cluster_from_nodes(nodes, {0, 1, 2})
    node_update(nodes[1], e(0), 1.0)
    cluster_serve_update(cl, e(0), 1.0)
    np.testing.assert_allclose(cl.w, [0.5, 0, 0, 0, 0])
    b = cl.b.copy()
    node_update(nodes[2], e(3), 0.0)
    cluster_serve_update(cl, e(3), 0.0)
    np.testing.assert_array_equal(cl.b, b)


def _random_stream(rng, rounds, n, d):
    X = rng.standard_normal((rounds, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    users = rng.integers(n, size=rounds)
    pay = rng.uniform(-1, 1, size=rounds)
    return users, X, pay


def test_cluster_serve_update_matches_rebuild(rng):
    n, d = 4, 6
    nodes = [NodeState(d) for _ in range(n)]
    cl = cluster_from_nodes(nodes, range(n))
    for u, x, a in zip(*_random_stream(rng, 200, n, d)):
        node_update(nodes[u], x, a)
        cluster_serve_update(cl, x, a)
        ref = cluster_from_nodes(nodes, range(n))
        for got, want in ((cl.M_inv, ref.M_inv), (cl.b, ref.b), (cl.w, ref.w)):
            assert np.max(np.abs(got - want)) <= 1e-8
        assert cl.log_det == pytest.approx(ref.log_det, abs=1e-8)
        assert cl.total_serves == ref.total_serves


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 6), st.integers(1, 120))
def test_pooled_data_identity(seed, n, d, rounds):
    rng = np.random.default_rng(seed)
    nodes = [NodeState(d) for _ in range(n)]
    pooled = NodeState(d)
    for u, x, a in zip(*_random_stream(rng, rounds, n, d)):
        node_update(nodes[u], x, a)
        node_update(pooled, x, a)
    cl = cluster_from_nodes(nodes, range(n))
    for got, want in ((cl.M, pooled.M), (cl.M_inv, pooled.M_inv), (cl.b, pooled.b), (cl.w, pooled.w)):
        assert np.max(np.abs(got - want)) <= 1e-8
    assert cl.total_serves == pooled.serve_count
    np.testing.assert_allclose(pooled.w, pooled.M_inv @ pooled.b, atol=1e-8)
    assert pooled.log_det >= 0.0


def test_periodic_reinversion_keeps_inverse(rng):
    d = 3
    nd = NodeState(d)
    for u, x, a in zip(*_random_stream(rng, REINVERT_EVERY + 5, 1, d)):
        node_update(nd, x, a)
    assert nd._since_reinvert == 5
    np.testing.assert_allclose(nd.M_inv @ nd.M, np.eye(d), atol=1e-10)
    assert nd.log_det == pytest.approx(np.linalg.slogdet(nd.M)[1], abs=1e-8)


def test_practical_cb_examples():
    nd = NodeState(3)
    x = e(0, 3)
    for alpha in (0.5, 1.0, 2.0):
        assert practical_cb(nd, x, 1, alpha) == pytest.approx(SQRT_LN2 * alpha, abs=1e-12)
        assert practical_cb(nd, x, 9, alpha) == pytest.approx(SQRT_LN10 * alpha, abs=1e-12)
    assert practical_cb(nd, x, 5, 0.0) == 0.0
    np.testing.assert_allclose(practical_cb(nd, np.eye(3), 9, 1.0), SQRT_LN10, atol=1e-12)


def test_practical_cb_tilde_examples():
    assert practical_cb_tilde(0, 0.7) == pytest.approx(0.7)
    assert practical_cb_tilde(9, 1.0) == pytest.approx(CBT_9, abs=1e-12)
    assert practical_cb_tilde(9, 2.5) == pytest.approx(2.5 * CBT_9, abs=1e-12)
    assert practical_cb_tilde(17, 0.0) == 0.0
    assert practical_cb_tilde(4, math.inf) == math.inf
    np.testing.assert_allclose(practical_cb_tilde(np.array([0, 9]), 1.0), [1.0, CBT_9])
    assert np.all(np.isinf(practical_cb_tilde(np.array([0, 9]), math.inf)))


@given(st.integers(2, 10**6), st.floats(0.01, 10))
def test_cb_tilde_strictly_decreasing(T, a2):
    assert practical_cb_tilde(T + 1, a2) < practical_cb_tilde(T, a2)


def test_cb_tilde_first_step_decreases():
    assert practical_cb_tilde(1, 1.0) < practical_cb_tilde(0, 1.0)


def test_a_lambda_values():
    assert a_lambda(0, 0.1, 1.0) == 0.0
    assert a_lambda(0, 0.9, 7.0) == 0.0
    assert a_lambda(10_000, 0.1, 1.0) == pytest.approx(A_10K, abs=0.01)


def test_a_lambda_monotone_past_clamp():
    T = np.arange(0, 200_000, 37)
    v = a_lambda(T, 0.05, 0.2)
    pos = np.flatnonzero(v > 0)
    assert pos.size and np.all(np.diff(v[pos[0]:]) >= 0)


def _theory(**kw):
    base = dict(sigma=1.0, delta=0.5, lam=1.0, n_users=1, dim=2)
    base.update(kw)
    return TheoreticalParams(**base)


def test_theoretical_tcb_examples():
    nd = NodeState(2)
    x = e(0, 2)
    assert theoretical_tcb(nd, x, _theory(sigma=0.0)) == pytest.approx(1.0)
    assert theoretical_tcb(nd, x, _theory()) == pytest.approx(TCB_EX, abs=1e-12)
    # homogeneity in sqrt(x^T M^-1 x)
    for k in (2.0, 4.0, 9.0):
        assert theoretical_tcb(nd, x * math.sqrt(k), _theory()) == pytest.approx(math.sqrt(k) * TCB_EX)


def test_theoretical_tcb_tilde_examples():
    assert theoretical_tcb_tilde(0, 7, _theory(sigma=0.0)) == pytest.approx(1.0)
    th = _theory(delta=0.2, n_users=3, dim=2)
    assert a_lambda(5, 0.2 / (2 * 3 * 2), 1.0) == 0.0
    assert theoretical_tcb_tilde(5, 10, th) == pytest.approx(TCBT_EX, abs=1e-9)


def test_theoretical_tcb_tilde_nonincreasing():
    th = _theory(sigma=0.1, delta=0.1, lam=0.5, n_users=10, dim=3)
    T = np.arange(0, 50_000, 101)
    v = theoretical_tcb_tilde(T, 100, th)
    assert np.all(np.diff(v) <= 0) and v[-1] < v[0]


def test_theoretical_tcb_tilde_cluster_scope():
    th = _theory(delta=0.2, dim=2)
    with pytest.raises(ValueError):
        theoretical_tcb_tilde(5, 10, th, scope="cluster")
    th = _theory(delta=0.2, dim=2, m_true=3)
    big = 10**7
    # cluster scope uses delta / (2^(m+1) d) inside A_lambda
    num = 1.0 * math.sqrt(2 * 2 * math.log(10) + 2 * math.log(10)) + 1.0
    want = num / math.sqrt(1 + a_lambda(big, 0.2 / (2**4 * 2), 1.0))
    assert theoretical_tcb_tilde(big, 10, th, scope="cluster") == pytest.approx(want)
    with pytest.raises(ValueError):
        theoretical_tcb_tilde(5, 0, th)


def test_theorem_mode_rescales_delta():
    th = TheoreticalParams.theorem_mode(sigma=0.1, delta=0.21, lam=0.2, n_users=5, dim=3)
    assert th.delta == pytest.approx(0.02)


def test_param_validation():
    AlgoParams(alpha=0.1, alpha2=math.inf)
    with pytest.raises(ValueError):
        AlgoParams(alpha=-1.0)
    with pytest.raises(ValueError):
        AlgoParams(alpha2=float("nan"))
    with pytest.raises(ValueError):
        _theory(delta=1.0)


def test_select_arm_examples():
    assert select_arm(np.array([1.0, 0.0]), np.eye(2), [0.0, 0.0]) == 0
    assert select_arm(np.zeros(2), np.eye(2), [0.3, 0.3]) == 0
    nd = NodeState(2)
    nd.M = np.diag([10.0, 1.0])
    nd.M_inv = np.diag([0.1, 1.0])
    w = np.array([0.1, 0.0])
    cb = practical_cb(nd, np.eye(2), 9, 1.0)
    scores = np.eye(2) @ w + cb
    np.testing.assert_allclose(scores, [0.579852591218808, SQRT_LN10], atol=1e-12)
    assert select_arm(w, np.eye(2), cb) == 1
    with pytest.raises(ValueError):
        select_arm(w, np.zeros((0, 2)), [])


@settings(max_examples=80)
@given(st.integers(0, 2**31), st.integers(1, 12), st.floats(-5, 5))
def test_select_arm_shift_and_permutation(seed, c, shift):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((c, 3))
    w = rng.standard_normal(3)
    cb = rng.random(c)
    k = select_arm(w, X, cb)
    # shifting every score leaves the winner alone (random scores: no ties)
    assert select_arm(w, X, cb + shift) == k
    perm = rng.permutation(c)
    kp = select_arm(w, X[perm], cb[perm])
    assert perm[kp] == k
