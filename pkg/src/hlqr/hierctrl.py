"""Hierarchical LQR synthesis and suboptimality reporting.

Pipeline: solve one Riccati equation per cluster (block-diagonal value matrix
scriptP), compute the coupling weight Rtilde = (scriptP B)^+ (G2 (x) Qtilde)
((scriptP B)^+)^T in closed form, and assemble the two-level gain
K_h = (R^{-1} + Rtilde) B^T scriptP.  The local term -R^{-1} B^T scriptP x
needs only in-cluster state; the global term routes through Rtilde, whose
block sparsity matches the inter-cluster adjacency, so non-adjacent clusters
never exchange state.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnstableClosedLoop
from .graphcost import assemble_q, cluster_costs, split_graph
from .matops import (
    TOL_RESIDUAL,
    abscissa,
    pinv,
    solve_care,
    solve_lyapunov,
    spectral,
    symmetrize,
)

__all__ = [
    "HierarchicalGain",
    "GapReport",
    "solve_clusters",
    "compute_rtilde",
    "assemble_gain",
    "hierarchical_gain",
    "gap_report",
]

ZERO_BLOCK_TOL = 1e-10


@dataclass(frozen=True)
class HierarchicalGain:
    """Assembled two-level gain with its building blocks.

    k_h = k_local + k_global where k_local = R^{-1} bt_p and
    k_global = r_tilde bt_p; bt_p is B^T scriptP in the original agent
    ordering and p_blocks are the per-cluster value matrices.
    """

    p_blocks: list
    r_tilde: np.ndarray
    k_local: np.ndarray
    k_global: np.ndarray
    k_h: np.ndarray
    bt_p: np.ndarray
    dec: object
    agent_m: int

    def agent_gain(self, i):
        """Rows of k_h commanding agent i's inputs (m x nN)."""
        m = self.agent_m
        return self.k_h[m * i:m * (i + 1)]

    @property
    def p_full(self):
        """scriptP as a dense matrix in the original agent ordering."""
        n_total = self.k_h.shape[1]
        n = n_total // self.dec.n_agents
        p = np.zeros((n_total, n_total))
        for j, p_j in enumerate(self.p_blocks):
            six = self.dec.state_indices(j, n)
            p[np.ix_(six, six)] = p_j
        return p


def solve_clusters(mas, spec, dec, tol_residual=TOL_RESIDUAL):
    """Per-cluster Riccati solutions.

    Returns (p_blocks, pb_blocks) where p_blocks[j] solves the cluster
    Riccati equation for (A_j, B_j, Qhat_j, Rhat_j) and pb_blocks[j] is
    scriptP_j B_j (the only cluster quantity the coupling stage needs).
    """
    costs = cluster_costs(spec, dec)
    p_blocks, pb_blocks = [], []
    for j in range(dec.s):
        a_j, b_j = mas.cluster(dec, j)
        qhat_j, rhat_j = costs[j]
        p_j = solve_care(a_j, b_j, qhat_j, rhat_j, tol_residual=tol_residual)
        p_blocks.append(p_j)
        pb_blocks.append(p_j @ b_j)
    return p_blocks, pb_blocks


def compute_rtilde(pb_blocks, g2q, dec, n, m):
    """Minimum-norm PSD coupling weight Rtilde.

    Rtilde = Xi g2q Xi^T with Xi the block-diagonal (per cluster) scatter of
    (scriptP_j B_j)^+ into the original agent ordering.  Because g2q carries
    zero blocks between non-adjacent clusters and Xi is cluster-block-diagonal,
    the same blocks of Rtilde are exactly zero.
    """
    n_agents = dec.n_agents
    if g2q.shape != (n * n_agents, n * n_agents):
        raise DimensionMismatch(
            f"g2q shape {g2q.shape} != {(n * n_agents, n * n_agents)}"
        )
    xi = np.zeros((m * n_agents, n * n_agents))
    for j, pb_j in enumerate(pb_blocks):
        six = dec.state_indices(j, n)
        iix = dec.input_indices(j, m)
        if pb_j.shape != (len(six), len(iix)):
            raise DimensionMismatch(
                f"cluster {j}: scriptP_j B_j shape {pb_j.shape} != "
                f"{(len(six), len(iix))}"
            )
        xi[np.ix_(iix, six)] = pinv(pb_j)
    return symmetrize(xi @ g2q @ xi.T)


def assemble_gain(p_blocks, pb_blocks, r_tilde, spec, dec):
    """Assemble the hierarchical gain from cluster solutions and Rtilde."""
    n, m = spec.n, spec.m
    n_agents = dec.n_agents
    bt_p = np.zeros((m * n_agents, n * n_agents))
    for j, pb_j in enumerate(pb_blocks):
        six = dec.state_indices(j, n)
        iix = dec.input_indices(j, m)
        bt_p[np.ix_(iix, six)] = pb_j.T
    k_local = np.linalg.solve(spec.r, bt_p)
    k_global = r_tilde @ bt_p
    return HierarchicalGain(
        p_blocks=list(p_blocks),
        r_tilde=r_tilde,
        k_local=k_local,
        k_global=k_global,
        k_h=k_local + k_global,
        bt_p=bt_p,
        dec=dec,
        agent_m=m,
    )


def hierarchical_gain(mas, spec, dec, tol_residual=TOL_RESIDUAL):
    """One-call synthesis: cluster solves, coupling weight, assembly."""
    p_blocks, pb_blocks = solve_clusters(mas, spec, dec, tol_residual)
    split = split_graph(spec.graph, dec)
    g2q = np.kron(split.g2, spec.qtilde)
    r_tilde = compute_rtilde(pb_blocks, g2q, dec, spec.n, spec.m)
    return assemble_gain(p_blocks, pb_blocks, r_tilde, spec, dec)


@dataclass(frozen=True)
class GapReport:
    """Optimal-vs-hierarchical cost comparison for one instance.

    j_approx <= j_opt <= j_h always; expected_gap = sigma^2 tr(V) is the mean
    excess cost over random initial states with covariance sigma^2 I; f1 + f2
    upper-bound tr(W) (vacuous=True when B has no nonzero singular value or
    Qbar is not PD, in which case the bound divides by zero and is skipped).
    """

    j_opt: float
    j_h: float
    j_approx: float
    delta_j: float
    expected_gap: float
    f1: float
    f2: float
    cond_p: float
    trace_g2: float
    sop: float
    trace_v: float
    trace_w: float
    trace_v_bound: float
    vacuous: bool


def gap_report(mas, spec, dec, gain, x0=None, sigma=1.0,
               tol_residual=TOL_RESIDUAL):
    """Quantify the suboptimality of a hierarchical gain.

    Costs are evaluated analytically: J(x0, K) = x0' X x0 with X solving the
    closed-loop Lyapunov equation.  When x0 is None the j_* fields report
    traces instead (the expectation over x0 with covariance I).  Raises
    UnstableClosedLoop when either closed loop is not Hurwitz.
    """
    a, b = mas.a_full, mas.b_full
    q = assemble_q(spec)
    r = spec.r

    p_opt = solve_care(a, b, q, r, tol_residual=tol_residual)
    k_opt = np.linalg.solve(r, b.T @ p_opt)

    k_h = gain.k_h
    a_s = a - b @ k_h
    if abscissa(a_s) >= 0.0:
        raise UnstableClosedLoop("hierarchical closed loop is not Hurwitz")

    u = solve_lyapunov(a_s, symmetrize(q + k_h.T @ r @ k_h))
    w = symmetrize((k_h - k_opt).T @ r @ (k_h - k_opt))
    v = solve_lyapunov(a_s, w)

    p_script = gain.p_full
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        j_opt = float(x0 @ p_opt @ x0)
        j_h = float(x0 @ u @ x0)
        j_approx = float(x0 @ p_script @ x0)
    else:
        j_opt = float(np.trace(p_opt))
        j_h = float(np.trace(u))
        j_approx = float(np.trace(p_script))

    split = split_graph(spec.graph, dec)
    trace_g2 = float(np.trace(split.g2))

    sp = spectral(p_script)
    sb = spectral(b)
    qbar = spec.qbar
    lam_min_qbar = float(np.linalg.eigvalsh(symmetrize(qbar)).min())

    vacuous = sb.sigma_l <= 0.0 or lam_min_qbar <= 0.0 or sp.lambda_min <= 0.0
    if vacuous:
        f1 = f2 = trace_v_bound = float("nan")
    else:
        tr_g2q = trace_g2 * float(np.trace(spec.qtilde))
        denom = sp.lambda_min ** 2 * sb.sigma_l ** 2
        f1 = tr_g2q ** 2 * spectral(r).lambda_max / denom
        sig_max_b = float(np.linalg.svd(b, compute_uv=False).max())
        f2 = (spectral(p_opt).lambda_max - sp.lambda_min) * (
            float(np.trace(b @ np.linalg.solve(r, b.T)))
            + sig_max_b ** 2 * tr_g2q / denom
        )
        trace_v_bound = sp.lambda_max * sp.cond * (f1 + f2) / lam_min_qbar

    delta_j = j_h - j_opt
    return GapReport(
        j_opt=j_opt,
        j_h=j_h,
        j_approx=j_approx,
        delta_j=delta_j,
        expected_gap=float(sigma ** 2 * np.trace(v)),
        f1=f1,
        f2=f2,
        cond_p=sp.cond,
        trace_g2=trace_g2,
        sop=delta_j / j_opt if j_opt > 0 else 0.0,
        trace_v=float(np.trace(v)),
        trace_w=float(np.trace(w)),
        trace_v_bound=float("nan") if vacuous else float(trace_v_bound),
        vacuous=vacuous,
    )
