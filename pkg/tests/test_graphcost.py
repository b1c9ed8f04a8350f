"""Coupling graphs, the intra/inter-cluster split, and communication metrics."""

import numpy as np
import pytest

from hlqr import graphcost, sim
from hlqr.errors import DimensionMismatch, InvalidDecomposition, NotALaplacian
from hlqr.graphcost import (
    CostGraph,
    CostSpec,
    Decomposition,
    assemble_q,
    check_assumptions,
    cluster_costs,
    comm_links,
    kappa,
    split_graph,
)


def random_graph(rng, n, p=0.5):
    """Connected unit-weight random graph on n nodes (spanning chain + extras)."""
    edges = {(i, i + 1) for i in range(n - 1)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    return CostGraph.from_edges(n, sorted(edges))


def random_decomposition(rng, n, s):
    while True:
        assignment = rng.integers(0, s, size=n)
        if len(set(assignment.tolist())) == s:
            return Decomposition.from_assignment(assignment.tolist())


def laplacian_invariant(g):
    g = np.asarray(g)
    off = g - np.diag(np.diag(g))
    assert np.allclose(g, g.T, atol=1e-12)
    assert np.all(off <= graphcost.ADJACENCY_TOL)
    assert np.allclose(np.diag(g), np.abs(off).sum(axis=1), atol=1e-9)
    assert np.linalg.eigvalsh((g + g.T) / 2.0)[0] >= -1e-10


class TestCostGraph:
    def test_from_edges_roundtrip(self):
        g = CostGraph.from_edges(3, [(0, 1), (1, 2, 2.0)])
        assert g.edges() == [(0, 1, 1.0), (1, 2, 2.0)]
        laplacian_invariant(g.laplacian)

    def test_positive_offdiagonal_rejected(self):
        m = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(NotALaplacian):
            CostGraph(2, m)

    def test_wrong_diagonal_rejected(self):
        m = np.array([[2.0, -1.0], [-1.0, 1.0]])
        with pytest.raises(NotALaplacian):
            CostGraph(2, m)

    def test_asymmetric_rejected(self):
        m = np.array([[1.0, -1.0], [0.0, 0.0]])
        with pytest.raises(NotALaplacian):
            CostGraph(2, m)

    def test_bad_edges_rejected(self):
        with pytest.raises(NotALaplacian):
            CostGraph.from_edges(2, [(0, 0)])
        with pytest.raises(NotALaplacian):
            CostGraph.from_edges(2, [(0, 5)])
        with pytest.raises(NotALaplacian):
            CostGraph.from_edges(2, [(0, 1, -1.0)])

    def test_connectivity(self):
        g = CostGraph.from_edges(4, [(0, 1), (2, 3)])
        assert not g.connected()
        assert g.connected([0, 1])
        assert g.connected([2, 3])
        assert not g.connected([1, 2])

    def test_zero_graph_valid(self):
        g = CostGraph(2, np.zeros((2, 2)))
        assert g.edges() == []
        assert not g.connected()


class TestDecomposition:
    def test_canonical_ids(self):
        d1 = Decomposition.from_assignment([2, 2, 0, 1])
        d2 = Decomposition.from_assignment([0, 0, 1, 2])
        assert d1 == d2
        assert d1.sizes() == [2, 1, 1]

    def test_from_clusters(self):
        d = Decomposition.from_clusters([[0, 1], [2]], 3)
        assert d.clusters() == [[0, 1], [2]]
        assert d.label() == "1,2|3"

    def test_from_clusters_errors(self):
        with pytest.raises(InvalidDecomposition):
            Decomposition.from_clusters([[0], [0, 1]], 2)
        with pytest.raises(InvalidDecomposition):
            Decomposition.from_clusters([[0]], 2)

    def test_index_slices(self):
        d = Decomposition.from_assignment([0, 1, 0])
        assert d.state_indices(0, 2).tolist() == [0, 1, 4, 5]
        assert d.input_indices(1, 3).tolist() == [3, 4, 5]


class TestSplitGraph:
    def test_five_node_cut(self):
        _, spec = sim.five_node_scenario()
        dec = Decomposition.from_clusters([[0, 1], [2], [3, 4]], 5)
        parts = split_graph(spec.graph, dec)
        assert np.trace(parts.g2) == pytest.approx(6.0)
        assert kappa(spec.graph, dec) == 2

    def test_five_node_all_adjacent(self):
        _, spec = sim.five_node_scenario()
        dec = Decomposition.from_clusters([[0], [1, 2], [3, 4]], 5)
        assert kappa(spec.graph, dec) == 0
        parts = split_graph(spec.graph, dec)
        assert np.trace(parts.g2) == pytest.approx(6.0)

    def test_single_cluster_trivial(self):
        _, spec = sim.five_node_scenario()
        dec = Decomposition.from_assignment([0] * 5)
        parts = split_graph(spec.graph, dec)
        assert np.allclose(parts.g2, 0.0)
        assert np.allclose(parts.g1, spec.graph.laplacian)
        assert kappa(spec.graph, dec) == 0

    def test_clique_path_rows(self):
        graph = sim.clique_path_graph(3, 3)
        cases = [
            ([0, 0, 1, 1, 1, 1, 1, 2, 2], 4, 8.0),
            ([0, 0, 0, 1, 1, 1, 2, 2, 2], 9, 4.0),
            ([0, 0, 0, 1, 2, 2, 2, 2, 2], 15, 6.0),
        ]
        for assignment, want_kappa, want_tr in cases:
            dec = Decomposition.from_assignment(assignment)
            assert kappa(graph, dec) == want_kappa
            parts = split_graph(graph, dec)
            assert np.trace(parts.g2) == pytest.approx(want_tr)

    def test_exact_reconstruction(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            n = int(rng.integers(4, 12))
            graph = random_graph(rng, n)
            dec = random_decomposition(rng, n, int(rng.integers(2, min(n, 5))))
            parts = split_graph(graph, dec)
            assert np.array_equal(parts.g1 + parts.g2, graph.laplacian)
            laplacian_invariant(parts.g1)
            laplacian_invariant(parts.g2)

    def test_trace_counts_cut_edges_twice(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(4, 12))
            graph = random_graph(rng, n)
            dec = random_decomposition(rng, n, 3)
            parts = split_graph(graph, dec)
            assign = dec.assignment
            cut = sum(1 for i, j, _ in graph.edges() if assign[i] != assign[j])
            assert np.trace(parts.g2) == pytest.approx(2.0 * cut)

    def test_wrong_size_rejected(self):
        _, spec = sim.five_node_scenario()
        with pytest.raises(InvalidDecomposition):
            split_graph(spec.graph, Decomposition.from_assignment([0, 1, 0]))


class TestKappa:
    def test_relabel_invariance(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            n = 8
            graph = random_graph(rng, n)
            dec = random_decomposition(rng, n, 3)
            base = kappa(graph, dec)
            # permute cluster ids
            perm = rng.permutation(dec.s)
            relabeled = Decomposition.from_assignment(
                [int(perm[c]) for c in dec.assignment])
            assert kappa(graph, relabeled) == base
            # permute agents and conjugate the graph accordingly
            p = rng.permutation(n)
            lap = graph.laplacian[np.ix_(p, p)]
            permuted_graph = CostGraph(n, lap)
            permuted_dec = Decomposition.from_assignment(
                [dec.assignment[u] for u in p])
            assert kappa(permuted_graph, permuted_dec) == base

    def test_singletons_count_zero_pairs(self):
        rng = np.random.default_rng(43)
        for _ in range(10):
            n = int(rng.integers(4, 10))
            graph = random_graph(rng, n)
            dec = Decomposition.from_assignment(list(range(n)))
            off = graph.laplacian[np.triu_indices(n, 1)]
            zero_pairs = int(np.sum(np.abs(off) <= graphcost.ADJACENCY_TOL))
            assert kappa(graph, dec) == zero_pairs


class TestCommLinks:
    def test_block_diagonal_gain(self):
        k = np.zeros((6, 12))
        k[0:2, 0:4] = 1.0
        k[2:4, 4:8] = 1.0
        k[4:6, 8:12] = 1.0
        edges, n_c = comm_links(k, 4, 2)
        assert edges == []
        assert n_c == 0

    def test_dense_gain(self):
        edges, n_c = comm_links(np.ones((18, 36)), 4, 2)
        assert n_c == 36

    def test_single_cross_block(self):
        k = np.zeros((4, 8))
        k[0, 7] = 1.0
        edges, n_c = comm_links(k, 4, 2)
        assert edges == [(0, 1)]
        assert n_c == 1

    def test_shape_guard(self):
        with pytest.raises(DimensionMismatch):
            comm_links(np.ones((5, 8)), 4, 2)
        with pytest.raises(DimensionMismatch):
            comm_links(np.ones((4, 12)), 4, 2)


class TestCostAssembly:
    def test_edgeless_graph(self):
        graph = CostGraph(2, np.zeros((2, 2)))
        spec = CostSpec.homogeneous(graph, 0.5 * np.eye(3), np.eye(3), np.eye(1))
        assert np.allclose(assemble_q(spec), 0.5 * np.eye(6))

    def test_uniform_penalties(self):
        _, spec = sim.clique_path_scenario(3, 3)
        q = assemble_q(spec)
        lap = spec.graph.laplacian
        assert np.allclose(q, np.kron(lap, np.eye(4)) + 0.5 * np.eye(36))

    def test_singleton_clusters_strip_coupling(self):
        _, spec = sim.five_node_scenario()
        dec = Decomposition.from_assignment(list(range(5)))
        parts = split_graph(spec.graph, dec)
        assert np.allclose(parts.g1, 0.0)
        qhat = spec.qbar + np.kron(parts.g1, spec.qtilde)
        assert np.allclose(qhat, spec.qbar)

    def test_split_cost_identity(self):
        _, spec = sim.clique_path_scenario(3, 3)
        dec = sim.clique_decomposition(3, 3)
        parts = split_graph(spec.graph, dec)
        q = assemble_q(spec)
        qhat = spec.qbar + np.kron(parts.g1, spec.qtilde)
        assert np.allclose(q, qhat + np.kron(parts.g2, spec.qtilde), atol=1e-12)

    def test_decomposed_cost_never_exceeds_full(self):
        rng = np.random.default_rng(47)
        _, spec = sim.clique_path_scenario(3, 3)
        q = assemble_q(spec)
        for _ in range(10):
            dec = random_decomposition(rng, 9, 3)
            parts = split_graph(spec.graph, dec)
            qhat = spec.qbar + np.kron(parts.g1, spec.qtilde)
            diff = np.linalg.eigvalsh((q - qhat + (q - qhat).T) / 2.0)
            assert diff[0] >= -1e-10

    def test_cluster_blocks_match_full(self):
        _, spec = sim.clique_path_scenario(3, 3)
        dec = sim.clique_decomposition(3, 3)
        parts = split_graph(spec.graph, dec)
        qhat = spec.qbar + np.kron(parts.g1, spec.qtilde)
        for j, (qj, rj) in enumerate(cluster_costs(spec, dec)):
            six = dec.state_indices(j, spec.n)
            iix = dec.input_indices(j, spec.m)
            assert np.allclose(qj, qhat[np.ix_(six, six)], atol=1e-12)
            assert np.allclose(rj, spec.r[np.ix_(iix, iix)], atol=1e-12)


class TestAssumptionChecks:
    def test_standard_scenario_passes(self):
        mas, spec = sim.clique_path_scenario(3, 3)
        dec = sim.clique_decomposition(3, 3)
        report = check_assumptions(mas, spec, dec)
        assert report.ok
        assert all(report.controllable)
        assert all(report.observable)
        assert report.graph_connected
        assert all(report.cluster_connected)

    def test_anchorless_cluster_not_observable(self):
        # a cluster with no anchored agent leaves its consensus direction
        # unpenalized: positions drift without showing up in the cost
        mas, spec, _, _ = sim.formation_scenario()
        dec = Decomposition.from_clusters(
            [[0], [1, 2], [3, 4, 5, 6, 7, 8, 9, 10, 11]], 12)
        report = check_assumptions(mas, spec, dec)
        assert report.observable[0]
        assert not report.observable[1]
        assert report.cluster_connected[1]

    def test_disconnected_graph_flagged(self):
        graph = CostGraph.from_edges(4, [(0, 1), (2, 3)])
        mas = sim.MasSystem(sim.example1_agents(4))
        spec = CostSpec.homogeneous(graph, 0.5 * np.eye(4), np.eye(4), np.eye(2))
        dec = Decomposition.from_assignment([0, 0, 1, 1])
        report = check_assumptions(mas, spec, dec)
        assert not report.graph_connected
        assert not report.ok
