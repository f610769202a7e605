import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matweight.analysis import VerdictKind, classify
from matweight.dynamics import (
    LocalStepper, Mode, SignError, StateEnsemble, StopReason, TauRangeError, agent_to_dim_permutation,
    assemble_blocks, async_blocks, build_async_operator, build_sync_operator, gauge_build, initial_state,
    permutation_matrix, simulate, step_async_local, step_sync, to_agent_major, to_dimension_major,
)
from matweight.graph import (
    FIVE_AGENT_EDGES, MatrixWeightedGraph, gen_directed, gen_regular_ring, induced_graph, make_partition,
    union_graphs,
)
from matweight.seeding import substream
from matweight.weights import WeightMode, WeightPolicy, assign_weights, default_tau, step_size_upper


def random_instance(seed, mode=WeightMode.ALL_POSITIVE_DEFINITE, n_max=8, d_max=3):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    k = 2 * int(rng.integers(1, (n - 1) // 2 + 1))
    g = assign_weights(gen_regular_ring(n, k, d), WeightPolicy(mode, seed=seed))
    return g, default_tau(step_size_upper(g))


def test_two_agent_operator():
    g = MatrixWeightedGraph(2, 1, {(0, 1): [[2.0]], (1, 0): [[2.0]]})
    ops = build_sync_operator(g, 0.2)
    assert np.allclose(ops.P_full, [[0.6, 0.4], [0.4, 0.6]], atol=1e-15, rtol=0)
    # tau = 0.25 is the open end of the range; the matrix form still evaluates by hand
    ops = build_sync_operator(g, 0.25, check_tau=False)
    assert np.array_equal(ops.P_full, [[0.5, 0.5], [0.5, 0.5]])


def test_edgeless_is_identity():
    ops = build_sync_operator(MatrixWeightedGraph(3, 2), 0.1)
    assert np.array_equal(ops.P_full, np.eye(6))


def test_tau_and_sign_errors(pd_ring):
    upper = step_size_upper(pd_ring).upper
    with pytest.raises(TauRangeError):
        build_sync_operator(pd_ring, upper)
    with pytest.raises(TauRangeError):
        build_sync_operator(pd_ring, -0.1)
    bad = MatrixWeightedGraph(2, 2, {(0, 1): [[1.0, 2.0], [2.0, 1.0]]})
    with pytest.raises(SignError):
        build_sync_operator(bad, 0.01, check_tau=False)


def test_permutation_examples():
    assert np.array_equal(agent_to_dim_permutation(1, 4), np.arange(4))
    assert np.array_equal(agent_to_dim_permutation(4, 1), np.arange(4))
    # 1-based {1->1, 2->3, 3->2, 4->4}
    assert agent_to_dim_permutation(2, 2).tolist() == [0, 2, 1, 3]
    x = np.arange(6.0)
    assert np.array_equal(to_agent_major(to_dimension_major(x, 3, 2), 3, 2), x)
    pi = permutation_matrix(agent_to_dim_permutation(3, 2))
    assert np.array_equal(pi @ x, to_dimension_major(x, 3, 2))


@pytest.mark.parametrize("seed", range(20))
def test_permuted_operator_matches_blocks_exactly(seed):
    mode = [WeightMode.ALL_POSITIVE_DEFINITE, WeightMode.ALL_NEGATIVE_DEFINITE][seed % 2]
    g, tau = random_instance(seed, mode)
    ops = build_sync_operator(g, tau)
    pi = permutation_matrix(agent_to_dim_permutation(g.n, g.d))
    assert np.array_equal(pi @ ops.P_full @ pi.T, ops.script_F())


def test_pd_blocks_structure(pd_ring):
    ops = build_sync_operator(pd_ring, default_tau(step_size_upper(pd_ring)))
    for p in ops.P_blocks:
        assert np.abs(p.sum(axis=1) - 1).max() <= 1e-12
        assert np.all(np.diag(p) > 0)
    assert np.abs(ops.Q_blocks.sum(axis=3)).max() <= 1e-12
    for i in range(pd_ring.d):
        assert not ops.Q_blocks[i, i].any()


def test_async_operator_rows(pd_ring):
    ops = build_sync_operator(pd_ring, default_tau(step_size_upper(pd_ring)))
    pi = permutation_matrix(agent_to_dim_permutation(10, 3))
    for l in range(10):
        u = build_async_operator(ops, l)
        rows = ops.agent_rows(l)
        assert np.array_equal(u[rows], ops.P_full[rows])
        others = np.setdiff1d(np.arange(30), np.arange(30)[rows])
        assert np.array_equal(u[others], np.eye(30)[others])
        pb, qb = async_blocks(ops, l)
        assert np.array_equal(pi @ u @ pi.T, assemble_blocks(pb, qb))
        for p in pb:
            assert np.abs(p.sum(axis=1) - 1).max() <= 1e-12 and np.all(np.diag(p) > 0)
        assert np.abs(qb.sum(axis=3)).max() <= 1e-12


def test_single_agent_async_is_sync():
    g = MatrixWeightedGraph(1, 2)
    ops = build_sync_operator(g, 0.1)
    assert np.array_equal(build_async_operator(ops, 0), ops.P_full)


def test_epoch_product_contains_union(pd_ring):
    ops = build_sync_operator(pd_ring, default_tau(step_size_upper(pd_ring)))
    order = np.random.default_rng(1).permutation(10)
    prod = np.eye(30)
    graphs = []
    for l in order:
        pb, qb = async_blocks(ops, int(l))
        f = assemble_blocks(pb, np.zeros_like(qb))
        graphs.append(induced_graph(f))
        prod = f @ prod
    assert induced_graph(prod).issuperset(union_graphs(graphs))
    assert not np.array_equal(prod, ops.script_P())


@pytest.mark.parametrize("seed", range(20))
def test_local_step_matches_matrix_step(seed):
    mode = [WeightMode.ALL_POSITIVE_DEFINITE, WeightMode.ALL_NEGATIVE_DEFINITE][seed % 2]
    g, tau = random_instance(seed, mode)
    ops = build_sync_operator(g, tau)
    stepper = LocalStepper(ops)
    rng = substream(seed, "oracle")
    x_local = rng.uniform(-1, 1, g.n * g.d)
    x_matrix = x_local.copy()
    us = [build_async_operator(ops, l) for l in range(g.n)]
    x2 = x_local.reshape(g.n, g.d)
    worst = 0.0
    for l in rng.integers(0, g.n, size=1000):
        stepper.step(x2, int(l))
        x_matrix = us[l] @ x_matrix
        worst = max(worst, float(np.abs(x_local - x_matrix).max()))
    assert worst <= 1e-12


def test_step_functions(pd_ring):
    tau = default_tau(step_size_upper(pd_ring))
    ops = build_sync_operator(pd_ring, tau)
    v = np.array([0.3, -1.2, 2.0])
    same = StateEnsemble(10, 3, np.tile(v, 10))
    assert np.abs(step_sync(ops, same).x - same.x).max() <= 1e-12
    assert np.abs(step_async_local(pd_ring, tau, same, 4).x - same.x).max() <= 1e-12
    zero = np.zeros(30)
    assert not step_sync(ops, zero).x.any()
    x = np.random.default_rng(0).uniform(-1, 1, 30)
    y = step_async_local(pd_ring, tau, x, 4)
    assert np.allclose(y.x, build_async_operator(ops, 4) @ x, atol=1e-12, rtol=0)
    assert np.array_equal(np.delete(y.as_matrix(), 4, 0), np.delete(x.reshape(10, 3), 4, 0))
    with pytest.raises(ValueError):
        step_sync(ops, np.zeros(29))


def test_gauge(balanced_ring):
    tau = default_tau(step_size_upper(balanced_ring))
    ops = build_sync_operator(balanced_ring, tau)
    part = make_partition([0, 2, 4, 6, 8], 10)
    gauge = gauge_build(ops, part)
    assert np.array_equal(gauge.delta @ gauge.delta, np.eye(30))
    assert np.array_equal(gauge.D_full, gauge.delta @ ops.P_full @ gauge.delta)
    pi = permutation_matrix(agent_to_dim_permutation(10, 3))
    assert np.allclose(pi @ gauge.D_full @ pi.T, gauge.script_D(), atol=1e-15, rtol=0)
    for s in gauge.S_blocks:
        assert np.abs(s.sum(axis=1) - 1).max() <= 1e-12 and np.all(np.diag(s) > 0)
    assert np.abs(gauge.T_blocks.sum(axis=3)).max() <= 1e-12
    ev_p = np.sort_complex(np.linalg.eigvals(ops.P_full))
    ev_d = np.sort_complex(np.linalg.eigvals(gauge.D_full))
    assert np.abs(ev_p - ev_d).max() <= 1e-9


def test_gauge_trivial_partition(pd_ring):
    ops = build_sync_operator(pd_ring, default_tau(step_size_upper(pd_ring)))
    gauge = gauge_build(ops, (frozenset(range(10)), frozenset()))
    assert np.array_equal(gauge.delta, np.eye(30))
    assert np.array_equal(gauge.D_full, ops.P_full)
    twice = gauge.delta @ gauge.D_full @ gauge.delta
    assert np.array_equal(twice, ops.P_full)


def test_simulate_global(pd_ring):
    tr = simulate(pd_ring, default_tau(step_size_upper(pd_ring)), "async", seed=3)
    assert tr.converged
    assert len(tr.agent_sequence) == tr.steps_run
    assert classify(tr).kind is VerdictKind.GLOBAL
    assert tr.sample_steps[0] == 0 and tr.sample_steps[-1] == tr.steps_run


def test_simulate_sync(pd_ring):
    tr = simulate(pd_ring, default_tau(step_size_upper(pd_ring)), Mode.SYNC, seed=3)
    assert tr.converged and tr.agent_sequence.size == 0
    assert set(tr.sample_agents.tolist()) == {-1}


def test_two_sample_paths_reach_different_consensus(pd_ring):
    tau = default_tau(step_size_upper(pd_ring))
    x0 = initial_state(10, 3, 4)
    a = classify(simulate(pd_ring, tau, seed=4, initial=x0))
    b = classify(simulate(pd_ring, tau, seed=5, initial=x0))
    assert a.kind is b.kind is VerdictKind.GLOBAL
    assert np.abs(a.consensus_vector - b.consensus_vector).max() > 1e-6


def test_divergence_flag(pd_ring):
    upper = step_size_upper(pd_ring).upper
    tr = simulate(pd_ring, 6 * upper, Mode.ASYNC, seed=0, max_steps=10_000, check_tau=False)
    assert tr.diverged
    assert tr.stop_reason is StopReason.DIVERGED
    assert classify(tr).kind is VerdictKind.DIVERGED


def test_determinism(pd_ring):
    tau = default_tau(step_size_upper(pd_ring))
    a = simulate(pd_ring, tau, seed=8, max_steps=3000)
    b = simulate(pd_ring, tau, seed=8, max_steps=3000)
    assert np.array_equal(a.agent_sequence, b.agent_sequence)
    assert np.array_equal(a.samples, b.samples)


def test_stop_rule_waits_for_every_agent():
    # agent 0 hears nobody, so its own updates never move it
    g = assign_weights(gen_directed(5, 2, FIVE_AGENT_EDGES), WeightPolicy(seed=7))
    tau = default_tau(step_size_upper(g))
    for seed in range(5):
        tr = simulate(g, tau, seed=seed)
        assert tr.converged
        assert classify(tr).kind is VerdictKind.GLOBAL


@given(st.integers(0, 2**64 - 1))
def test_initial_state_range(seed):
    x = initial_state(4, 3, seed)
    assert x.shape == (12,) and np.all(np.abs(x) < 1)
