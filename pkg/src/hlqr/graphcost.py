"""Coupling-graph cost structures and the intra/inter-cluster split.

The quadratic state penalty has the form Q = Qbar + G (x) Qtilde where G is a
Laplacian coupling agents through the cost only.  For a cluster decomposition,
G splits as G = G1 + G2 with G1 collecting intra-cluster coupling (so
Qhat = Qbar + G1 (x) Qtilde is block-diagonal cluster by cluster) and G2 the
inter-cluster remainder.  This module owns those structures plus the
communication metrics kappa, tr(G2) and the gain-sparsity link count n_c.

Agent and cluster indices are 0-based throughout; human-readable labels are
1-based to match the usual tabulated form.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .errors import DimensionMismatch, InvalidDecomposition, NotALaplacian
from .matops import is_psd, symmetrize

__all__ = [
    "CostGraph",
    "CostSpec",
    "Decomposition",
    "SplitGraphs",
    "AssumptionReport",
    "split_graph",
    "kappa",
    "cluster_adjacency",
    "comm_links",
    "assemble_q",
    "cluster_costs",
    "check_assumptions",
]

#: absolute tolerance below which a coupling weight is treated as zero
ADJACENCY_TOL = 1e-12


@dataclass(frozen=True)
class CostGraph:
    """Laplacian coupling graph on n_agents nodes.

    laplacian has nonpositive off-diagonal entries and diagonal equal to the
    row sums of the off-diagonal magnitudes; node_weights is an optional
    diagonal payload (e.g. leader weights) carried alongside.
    """

    n_agents: int
    laplacian: np.ndarray
    node_weights: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.laplacian, dtype=float)
        n = self.n_agents
        if n < 1 or g.shape != (n, n):
            raise NotALaplacian(f"expected {n}x{n} matrix, got {g.shape}")
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-12):
            raise NotALaplacian("matrix is not symmetric")
        off = g - np.diag(np.diag(g))
        if np.any(off > ADJACENCY_TOL):
            raise NotALaplacian("positive off-diagonal entry")
        row_abs = np.abs(off).sum(axis=1)
        if not np.allclose(np.diag(g), row_abs, rtol=0.0, atol=1e-9):
            raise NotALaplacian("diagonal does not equal row absolute sums")
        if not is_psd(g):
            raise NotALaplacian("matrix is not PSD")
        object.__setattr__(self, "laplacian", symmetrize(g))

    @classmethod
    def from_edges(cls, n_agents, edges, node_weights=None):
        """Build from undirected edges (i, j) or (i, j, weight), 0-based ids."""
        g = np.zeros((n_agents, n_agents))
        for edge in edges:
            i, j = edge[0], edge[1]
            w = float(edge[2]) if len(edge) > 2 else 1.0
            if i == j or not (0 <= i < n_agents and 0 <= j < n_agents):
                raise NotALaplacian(f"bad edge ({i},{j})")
            if w <= 0:
                raise NotALaplacian(f"nonpositive weight on edge ({i},{j})")
            g[i, j] -= w
            g[j, i] -= w
        np.fill_diagonal(g, np.abs(g - np.diag(np.diag(g))).sum(axis=1))
        return cls(n_agents, g, node_weights)

    def adjacency(self):
        """Boolean matrix: True where agents are coupled (off-diagonal)."""
        a = np.abs(self.laplacian) > ADJACENCY_TOL
        np.fill_diagonal(a, False)
        return a

    def edges(self):
        """Sorted list of (i, j, weight) with i < j."""
        out = []
        g = self.laplacian
        for i in range(self.n_agents):
            for j in range(i + 1, self.n_agents):
                if abs(g[i, j]) > ADJACENCY_TOL:
                    out.append((i, j, float(-g[i, j])))
        return out

    def connected(self, nodes=None):
        """True when the induced subgraph on nodes (default: all) is connected."""
        nodes = list(range(self.n_agents)) if nodes is None else sorted(nodes)
        if not nodes:
            return False
        adj = self.adjacency()
        seen = {nodes[0]}
        stack = [nodes[0]]
        while stack:
            u = stack.pop()
            for v in nodes:
                if v not in seen and adj[u, v]:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(nodes)


@dataclass(frozen=True)
class Decomposition:
    """Partition of agents into s clusters, stored as an assignment vector.

    assignment[u] is the 0-based cluster id of agent u; ids are canonicalized
    to first-use order (agent 0 is always in cluster 0), so two decompositions
    are equal iff they induce the same partition.
    """

    assignment: tuple
    s: int

    def __post_init__(self):
        a = tuple(int(v) for v in self.assignment)
        if not a:
            raise InvalidDecomposition("empty assignment")
        seen = {}
        canon = []
        for v in a:
            if v not in seen:
                seen[v] = len(seen)
            canon.append(seen[v])
        if sorted(seen.values()) != list(range(len(seen))):
            raise InvalidDecomposition("cluster ids are not contiguous")
        if self.s != len(seen):
            raise InvalidDecomposition(f"s={self.s} but assignment uses {len(seen)} clusters")
        object.__setattr__(self, "assignment", tuple(canon))

    @classmethod
    def from_assignment(cls, assignment):
        ids = []
        seen = {}
        for v in assignment:
            if v not in seen:
                seen[v] = len(seen)
            ids.append(seen[v])
        return cls(tuple(ids), len(seen))

    @classmethod
    def from_clusters(cls, clusters, n_agents):
        """Build from explicit clusters (lists of 0-based agent ids)."""
        assignment = [-1] * n_agents
        for cid, members in enumerate(clusters):
            for u in members:
                if not 0 <= u < n_agents or assignment[u] != -1:
                    raise InvalidDecomposition(f"agent {u} missing or repeated")
                assignment[u] = cid
        if -1 in assignment:
            raise InvalidDecomposition("clusters do not cover all agents")
        return cls.from_assignment(assignment)

    @property
    def n_agents(self):
        return len(self.assignment)

    def clusters(self):
        """List of s agent-index lists, each ascending, in cluster-id order."""
        out = [[] for _ in range(self.s)]
        for u, c in enumerate(self.assignment):
            out[c].append(u)
        return out

    def sizes(self):
        return [len(c) for c in self.clusters()]

    def state_indices(self, j, n):
        """Flat state indices of cluster j when each agent carries n states."""
        members = self.clusters()[j]
        return np.concatenate([np.arange(u * n, (u + 1) * n) for u in members])

    def input_indices(self, j, m):
        members = self.clusters()[j]
        return np.concatenate([np.arange(u * m, (u + 1) * m) for u in members])

    def label(self):
        """Human-readable 1-based form, e.g. '1,2|3,4,5,6,7|8,9'."""
        return "|".join(",".join(str(u + 1) for u in c) for c in self.clusters())


@dataclass(frozen=True)
class SplitGraphs:
    """The split G = g1 + g2 (intra-cluster and inter-cluster Laplacians)."""

    g1: np.ndarray
    g2: np.ndarray


@dataclass(frozen=True)
class CostSpec:
    """Quadratic cost structure Q = Qbar + G (x) Qtilde, R = diag(R_i).

    qbar_blocks are the per-agent n x n diagonal blocks of Qbar, qtilde the
    shared n x n coupling penalty, r_blocks the per-agent m x m input
    penalties (PD).
    """

    graph: CostGraph
    qbar_blocks: list = field(repr=False)
    qtilde: np.ndarray = field(repr=False)
    r_blocks: list = field(repr=False)

    def __post_init__(self):
        n = self.n
        m = self.m
        if len(self.qbar_blocks) != self.graph.n_agents or len(self.r_blocks) != self.graph.n_agents:
            raise DimensionMismatch("need one qbar block and one r block per agent")
        for blk in self.qbar_blocks:
            if blk.shape != (n, n):
                raise DimensionMismatch(f"qbar block shape {blk.shape} != ({n},{n})")
            if not is_psd(blk):
                raise NotALaplacian("qbar block not PSD")
        if not is_psd(self.qtilde):
            raise NotALaplacian("qtilde not PSD")
        for blk in self.r_blocks:
            if blk.shape != (m, m):
                raise DimensionMismatch(f"r block shape {blk.shape} != ({m},{m})")
            if np.linalg.eigvalsh(symmetrize(blk))[0] <= 0:
                raise NotALaplacian("r block not PD")

    @classmethod
    def homogeneous(cls, graph, qbar_block, qtilde, r_block):
        """Same Qbar/R block for every agent."""
        n_agents = graph.n_agents
        return cls(
            graph,
            [np.asarray(qbar_block, dtype=float)] * n_agents,
            np.asarray(qtilde, dtype=float),
            [np.asarray(r_block, dtype=float)] * n_agents,
        )

    @property
    def n(self):
        return self.qtilde.shape[0]

    @property
    def m(self):
        return self.r_blocks[0].shape[0]

    @property
    def qbar(self):
        return block_diag(*self.qbar_blocks)

    @property
    def r(self):
        return block_diag(*self.r_blocks)


def split_graph(graph, dec):
    """Split G into intra-cluster g1 and inter-cluster g2 with g1 + g2 = G.

    g2 keeps only couplings between agents in different clusters and carries
    its own row-absolute-sum diagonal; g1 is the exact remainder and is
    block-diagonal under any cluster-contiguous ordering.
    """
    if dec.n_agents != graph.n_agents:
        raise InvalidDecomposition(
            f"decomposition covers {dec.n_agents} agents, graph has {graph.n_agents}"
        )
    g = graph.laplacian
    assign = np.asarray(dec.assignment)
    same = assign[:, None] == assign[None, :]
    g2 = np.where(same, 0.0, g)
    np.fill_diagonal(g2, np.abs(g2).sum(axis=1))
    g1 = g - g2
    return SplitGraphs(g1=g1, g2=g2)


def cluster_adjacency(graph, dec):
    """s x s boolean matrix: True where two clusters share any coupling."""
    gbar = np.abs(graph.laplacian)
    adj = np.zeros((dec.s, dec.s), dtype=bool)
    clusters = dec.clusters()
    for i in range(dec.s):
        for j in range(i + 1, dec.s):
            w = gbar[np.ix_(clusters[i], clusters[j])].sum()
            adj[i, j] = adj[j, i] = w > ADJACENCY_TOL
    return adj


def kappa(graph, dec):
    """Number of unordered agent pairs spanning non-adjacent clusters.

    Pairs counted by kappa need no communication link under the hierarchical
    gain; n_c = N(N-1)/2 - kappa is the matching link count.
    """
    adj = cluster_adjacency(graph, dec)
    sizes = dec.sizes()
    total = 0
    for i in range(dec.s):
        for j in range(i + 1, dec.s):
            if not adj[i, j]:
                total += sizes[i] * sizes[j]
    return total


def comm_links(k, n, m, tol=None):
    """Communication edges implied by a gain matrix.

    The gain is partitioned into m x n agent blocks; the unordered pair
    (i, j) is a link when either cross block has a max-abs entry above tol
    (default 1e-8 times the gain's own max-abs entry).  Returns
    (sorted edge list, n_c).
    """
    k = np.asarray(k, dtype=float)
    if k.shape[0] % m or k.shape[1] % n:
        raise DimensionMismatch(f"gain shape {k.shape} not divisible into {m}x{n} blocks")
    n_in, n_st = k.shape[0] // m, k.shape[1] // n
    if n_in != n_st:
        raise DimensionMismatch(f"{n_in} input blocks vs {n_st} state blocks")
    if tol is None:
        tol = 1e-8 * np.abs(k).max()
    edges = []
    for i in range(n_in):
        for j in range(i + 1, n_in):
            bij = k[i * m:(i + 1) * m, j * n:(j + 1) * n]
            bji = k[j * m:(j + 1) * m, i * n:(i + 1) * n]
            if np.abs(bij).max() > tol or np.abs(bji).max() > tol:
                edges.append((i, j))
    return edges, len(edges)


def assemble_q(spec):
    """Full state penalty Q = Qbar + G (x) Qtilde."""
    return spec.qbar + np.kron(spec.graph.laplacian, spec.qtilde)


def cluster_costs(spec, dec):
    """Per-cluster (Qhat_j, Rhat_j) blocks of the decomposed cost.

    Qhat = Qbar + g1 (x) Qtilde restricted to each cluster's states; the full
    Q satisfies Q = Qhat + g2 (x) Qtilde exactly.
    """
    parts = split_graph(spec.graph, dec)
    qhat = spec.qbar + np.kron(parts.g1, spec.qtilde)
    out = []
    for j in range(dec.s):
        six = dec.state_indices(j, spec.n)
        qj = symmetrize(qhat[np.ix_(six, six)])
        rj = block_diag(*[spec.r_blocks[u] for u in dec.clusters()[j]])
        out.append((qj, rj))
    return out


def _psd_sqrt(m):
    w, v = np.linalg.eigh(symmetrize(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def _pbh_controllable(a, b, tol=1e-7):
    n = a.shape[0]
    for lam in np.linalg.eigvals(a):
        stacked = np.hstack([lam * np.eye(n) - a, b.astype(complex)])
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[n - 1] <= tol * max(1.0, sv[0]):
            return False
    return True


def _pbh_observable(c, a, tol=1e-7):
    n = a.shape[0]
    for lam in np.linalg.eigvals(a):
        stacked = np.vstack([lam * np.eye(n) - a, c.astype(complex)])
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[n - 1] <= tol * max(1.0, sv[0]):
            return False
    return True


@dataclass(frozen=True)
class AssumptionReport:
    """PBH and connectivity checks behind the controller guarantees."""

    controllable: list
    observable: list
    graph_connected: bool
    cluster_connected: list

    @property
    def ok(self):
        return (
            all(self.controllable)
            and all(self.observable)
            and self.graph_connected
        )


def check_assumptions(mas, spec, dec):
    """Report per-cluster controllability of (A_j, B_j), observability of
    (Qhat_j^{1/2}, A_j), and connectivity of the coupling graph and each
    cluster subgraph.  Never raises; the report carries any failures.
    """
    costs = cluster_costs(spec, dec)
    controllable, observable, connected = [], [], []
    for j in range(dec.s):
        a_j, b_j = mas.cluster(dec, j)
        qhat_j, _ = costs[j]
        controllable.append(_pbh_controllable(a_j, b_j))
        observable.append(_pbh_observable(_psd_sqrt(qhat_j), a_j))
        connected.append(spec.graph.connected(dec.clusters()[j]))
    return AssumptionReport(
        controllable=controllable,
        observable=observable,
        graph_connected=spec.graph.connected(),
        cluster_connected=connected,
    )
