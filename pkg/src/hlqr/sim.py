"""Multi-agent system models, time-domain simulation, and scenario builders.

Systems are block-diagonal compositions of per-agent LTI dynamics
xdot_i = A_i x_i + B_i (u_i + d_i) with an optional measurable disturbance d.
Integration is classical fixed-step RK4 with running cost integrals carried on
the same grid (see _kernels).  Scenario builders cover the clique-path
benchmark family, a five-node demo graph, and the 12-agent planar formation
maneuver with its baseline stabilization law.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from . import _kernels
from .errors import (
    DimensionMismatch,
    InvalidConfig,
    StateBlowup,
    UnstableClosedLoop,
)
from .graphcost import CostGraph, CostSpec, Decomposition, assemble_q, cluster_costs
from .matops import abscissa, solve_care, solve_lyapunov, symmetrize

__all__ = [
    "MasSystem",
    "BlackBoxPlant",
    "Trajectory",
    "FormationScenario",
    "integrate",
    "evaluate_cost",
    "quadrature_cost",
    "clique_path_graph",
    "clique_decomposition",
    "clique_path_scenario",
    "five_node_scenario",
    "default_formation",
    "build_formation",
    "formation_scenario",
    "anchoring_check",
    "initial_gains",
    "cluster_plants",
]

DEFAULT_GUARD = 1e6


@dataclass
class MasSystem:
    """Block-diagonal multi-agent LTI system.

    agents is a list of (A_i, B_i) pairs with uniform per-agent dimensions;
    disturbance, when present, maps time to the stacked (m*N,) input-channel
    disturbance.  In black-box access mode the composed matrices are not
    exposed; use black_box()/cluster_plants() handles instead.
    """

    agents: list
    disturbance: object = None
    access_mode: str = "white-box"

    def __post_init__(self):
        if not self.agents:
            raise InvalidConfig("need at least one agent")
        n, m = self.agents[0][1].shape
        for a_i, b_i in self.agents:
            if a_i.shape != (n, n) or b_i.shape != (n, m):
                raise DimensionMismatch("agents must share dimensions")

    @property
    def n_agents(self):
        return len(self.agents)

    @property
    def n(self):
        return self.agents[0][0].shape[0]

    @property
    def m(self):
        return self.agents[0][1].shape[1]

    def _matrices(self):
        if self.access_mode != "white-box":
            raise InvalidConfig("black-box system does not expose matrices")
        return (
            block_diag(*[a for a, _ in self.agents]),
            block_diag(*[b for _, b in self.agents]),
        )

    @property
    def a_full(self):
        return self._matrices()[0]

    @property
    def b_full(self):
        return self._matrices()[1]

    def cluster(self, dec, j):
        """(A_j, B_j) of the cluster's agents (white-box only)."""
        if self.access_mode != "white-box":
            raise InvalidConfig("black-box system does not expose matrices")
        members = dec.clusters()[j]
        return (
            block_diag(*[self.agents[u][0] for u in members]),
            block_diag(*[self.agents[u][1] for u in members]),
        )

    def black_box(self):
        """Data-only handle to the full system (hides matrices)."""
        a = block_diag(*[ai for ai, _ in self.agents])
        b = block_diag(*[bi for _, bi in self.agents])
        return BlackBoxPlant(a, b, self.disturbance)


class BlackBoxPlant:
    """Simulation handle exposing dimensions and trajectory data only.

    Wraps private dynamics matrices and the (measurable) disturbance; the
    learning pipeline interacts with plants exclusively through rollout() and
    collect(), never reading A or B.
    """

    def __init__(self, a, b, disturbance=None):
        self._a = np.ascontiguousarray(a, dtype=float)
        self._b = np.ascontiguousarray(b, dtype=float)
        self._dist = disturbance

    @property
    def n_states(self):
        return self._b.shape[0]

    @property
    def n_inputs(self):
        return self._b.shape[1]

    def _dist_table(self, dt, n_steps):
        return tabulate_signal(self._dist, dt, n_steps, self.n_inputs)

    def rollout(self, k, exo_cmd, x0, dt, n_steps, q=None, r=None,
                guard=DEFAULT_GUARD, stop_rtol=0.0, check_every=1000):
        """Closed-loop run under u = -K x + e; returns the raw kernel tuple."""
        n, m = self.n_states, self.n_inputs
        if q is None:
            q = np.zeros((n, n))
        if r is None:
            r = np.zeros((m, m))
        exo_cmd = _check_table(exo_cmd, dt, n_steps, m)
        return _kernels.rollout_kernel(
            self._a, self._b, np.ascontiguousarray(k, dtype=float),
            exo_cmd, self._dist_table(dt, n_steps),
            np.ascontiguousarray(x0, dtype=float), float(dt), int(n_steps),
            np.ascontiguousarray(q, dtype=float),
            np.ascontiguousarray(r, dtype=float),
            float(guard), float(stop_rtol), int(check_every),
        )

    def collect(self, k0, exo_cmd, x0, dt, steps_per_window, n_windows,
                guard=DEFAULT_GUARD):
        """Learning-data run under u = -K0 x + e; the recorded applied input
        is v = u + d.  Returns the raw kernel tuple."""
        n_steps = steps_per_window * n_windows
        exo_cmd = _check_table(exo_cmd, dt, n_steps, self.n_inputs)
        return _kernels.collect_kernel(
            self._a, self._b, np.ascontiguousarray(k0, dtype=float),
            exo_cmd, self._dist_table(dt, n_steps),
            np.ascontiguousarray(x0, dtype=float), float(dt),
            int(steps_per_window), int(n_windows), float(guard),
        )


def tabulate_signal(f, dt, n_steps, m):
    """Tabulate a time signal on the RK4 half-grid: (2*n_steps+1, m).

    f may be None (zeros), a callable t -> (m,), or carry a vectorized
    .table(ts) method.
    """
    n_half = 2 * n_steps + 1
    if f is None:
        return np.zeros((n_half, m))
    ts = np.arange(n_half) * (dt / 2.0)
    if hasattr(f, "table"):
        out = np.asarray(f.table(ts), dtype=float)
    else:
        out = np.asarray([np.broadcast_to(f(float(t)), (m,)) for t in ts], dtype=float)
    if out.shape != (n_half, m):
        raise DimensionMismatch(f"signal table shape {out.shape} != {(n_half, m)}")
    return np.ascontiguousarray(out)


def _check_table(table, dt, n_steps, m):
    if table is None:
        return np.zeros((2 * n_steps + 1, m))
    table = np.ascontiguousarray(table, dtype=float)
    if table.shape != (2 * n_steps + 1, m):
        raise DimensionMismatch(
            f"exogenous table shape {table.shape} != {(2 * n_steps + 1, m)}"
        )
    return table


@dataclass(frozen=True)
class Trajectory:
    """Uniform-grid simulation record with running cost integrals."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    running_cost: np.ndarray
    running_ju: np.ndarray
    stopped_early: bool = False

    @property
    def cost(self):
        return float(self.running_cost[-1])

    @property
    def ju(self):
        return float(self.running_ju[-1])


def integrate(sys, controller, x0, t_final, dt, cost=None, stop_rtol=0.0,
              guard=DEFAULT_GUARD):
    """Simulate the closed loop and return a Trajectory.

    controller is either a gain matrix K (meaning u = -K x, fast kernel path)
    or a callable u(t, x) evaluated at every RK4 stage (python path).  cost
    may be a CostSpec or a (Q, R) pair; running_ju accumulates u'u always.
    Raises StateBlowup when the state norm exceeds guard.
    """
    x0 = np.asarray(x0, dtype=float)
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise InvalidConfig(f"t_final={t_final} shorter than one step dt={dt}")

    if isinstance(cost, CostSpec):
        q, r = assemble_q(cost), cost.r
    elif cost is None:
        q = r = None
    else:
        q, r = cost

    if callable(controller):
        return _integrate_callable(sys, controller, x0, dt, n_steps, q, r,
                                   stop_rtol, guard)

    k = np.asarray(controller, dtype=float)
    plant = sys.black_box() if isinstance(sys, MasSystem) else sys
    if q is None:
        q = np.zeros((plant.n_states, plant.n_states))
        r = np.zeros((plant.n_inputs, plant.n_inputs))
    xs, us, c, ju, status, last = plant.rollout(
        k, None, x0, dt, n_steps, q=q, r=r, guard=guard,
        stop_rtol=stop_rtol, check_every=1000,
    )
    if status == _kernels.BLOWUP:
        raise StateBlowup(f"state exceeded guard {guard:g} at step {last}")
    end = last + 1
    return Trajectory(
        times=np.arange(end) * dt,
        states=xs[:end],
        inputs=us[:end],
        running_cost=c[:end],
        running_ju=ju[:end],
        stopped_early=status == _kernels.EARLY_STOP,
    )


def _integrate_callable(sys, controller, x0, dt, n_steps, q, r, stop_rtol, guard):
    """RK4 with an arbitrary state-feedback callable (mirrors the kernel)."""
    plant = sys.black_box() if isinstance(sys, MasSystem) else sys
    a, b, dist = plant._a, plant._b, plant._dist
    n, m = b.shape
    if q is None:
        q = np.zeros((n, n))
        r = np.zeros((m, m))
    d_tab = tabulate_signal(dist, dt, n_steps, m)

    xs = np.zeros((n_steps + 1, n))
    us = np.zeros((n_steps + 1, m))
    cost = np.zeros(n_steps + 1)
    ju = np.zeros(n_steps + 1)
    x = x0.copy()
    xs[0] = x
    us[0] = controller(0.0, x)
    stopped_early = False
    end = n_steps + 1

    def stage(xst, tst, tix):
        u = np.asarray(controller(tst, xst), dtype=float)
        f = a @ xst + b @ (u + d_tab[tix])
        c = float(xst @ q @ xst + u @ r @ u)
        return f, c, float(u @ u)

    for step in range(n_steps):
        t = step * dt
        f1, c1, j1 = stage(x, t, 2 * step)
        x2 = x + 0.5 * dt * f1
        f2, c2, j2 = stage(x2, t + 0.5 * dt, 2 * step + 1)
        x3 = x + 0.5 * dt * f2
        f3, c3, j3 = stage(x3, t + 0.5 * dt, 2 * step + 1)
        x4 = x + dt * f3
        f4, c4, j4 = stage(x4, t + dt, 2 * step + 2)

        x = x + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        xs[step + 1] = x
        us[step + 1] = controller(t + dt, x)
        cost[step + 1] = cost[step] + (dt / 6.0) * (c1 + 2 * c2 + 2 * c3 + c4)
        ju[step + 1] = ju[step] + (dt / 6.0) * (j1 + 2 * j2 + 2 * j3 + j4)

        if not np.all(np.isfinite(x)) or np.abs(x).max() > guard:
            raise StateBlowup(f"state exceeded guard {guard:g} at step {step + 1}")
        if stop_rtol > 0.0 and (step + 1) % 1000 == 0 and step + 1 >= 2000:
            tail = cost[step + 1] - cost[step + 1 - 1000]
            if tail < stop_rtol * max(cost[step + 1], 1e-300):
                stopped_early = True
                end = step + 2
                break

    return Trajectory(
        times=np.arange(end) * dt,
        states=xs[:end],
        inputs=us[:end],
        running_cost=cost[:end],
        running_ju=ju[:end],
        stopped_early=stopped_early,
    )


def evaluate_cost(sys, spec, k, x0):
    """Analytic closed-loop costs (J, J_u) for the gain K from x0.

    J = x0' X x0 with (A-BK)' X + X (A-BK) + Q + K'RK = 0 and J_u likewise
    with K'K.  Raises UnstableClosedLoop when A - BK is not Hurwitz.
    """
    a, b = sys.a_full, sys.b_full
    k = np.asarray(k, dtype=float)
    a_cl = a - b @ k
    if abscissa(a_cl) >= 0.0:
        raise UnstableClosedLoop("A - BK is not Hurwitz")
    q = assemble_q(spec)
    r = spec.r
    x = solve_lyapunov(a_cl, symmetrize(q + k.T @ r @ k))
    x_u = solve_lyapunov(a_cl, symmetrize(k.T @ k))
    x0 = np.asarray(x0, dtype=float)
    return float(x0 @ x @ x0), float(x0 @ x_u @ x0)


def quadrature_cost(sys, spec, k, x0, dt=1e-3, tail=1e-6):
    """Time-domain (J, J_u) cross-check of evaluate_cost.

    The horizon is chosen so exp(abscissa * T) < tail, making the truncated
    integral agree with the analytic value to well under 0.1%.
    """
    a_cl = sys.a_full - sys.b_full @ np.asarray(k, dtype=float)
    alpha = abscissa(a_cl)
    if alpha >= 0.0:
        raise UnstableClosedLoop("A - BK is not Hurwitz")
    t_final = math.log(tail) / alpha
    traj = integrate(sys, k, x0, t_final, dt, cost=spec)
    return traj.cost, traj.ju


# ---------------------------------------------------------------------------
# scenario builders
# ---------------------------------------------------------------------------


def example1_agents(n_agents, n=4, m=2):
    """Benchmark agent family: stable two-block dynamics, heavier actuation
    for later agents.  n=4/m=2 is the base size; n=8/m=4 is its 2x lift."""
    if (n, m) not in ((4, 2), (8, 4)):
        raise InvalidConfig(f"supported agent sizes are (4,2) and (8,4), got ({n},{m})")
    agents = []
    for i in range(1, n_agents + 1):
        gain = i / (i + 1.0)
        a = np.block([
            [-np.eye(2), np.eye(2)],
            [np.zeros((2, 2)), -gain * np.eye(2)],
        ])
        b = np.vstack([np.zeros((2, 2)), gain * np.eye(2)])
        if n == 8:
            a = np.kron(a, np.eye(2))
            b = np.kron(b, np.eye(2))
        agents.append((a, b))
    return agents


def clique_path_graph(s_cliques, c):
    """Chain of s complete graphs on c nodes, joined by single edges from the
    last node of each clique to the first node of the next."""
    if s_cliques < 1 or c < 1:
        raise InvalidConfig("need s_cliques >= 1 and c >= 1")
    n_agents = s_cliques * c
    edges = []
    for k in range(s_cliques):
        base = k * c
        edges.extend((base + i, base + j) for i in range(c) for j in range(i + 1, c))
    for k in range(s_cliques - 1):
        edges.append(((k + 1) * c - 1, (k + 1) * c))
    return CostGraph.from_edges(n_agents, edges)


def clique_decomposition(s_cliques, c):
    """Decomposition whose clusters are the consecutive cliques."""
    return Decomposition.from_assignment(
        [k for k in range(s_cliques) for _ in range(c)]
    )


def clique_path_scenario(s_cliques, c, n=4, m=2):
    """(MasSystem, CostSpec) for the clique-path benchmark.

    Cost: Qbar = 0.5 I, Qtilde = I_n, G = clique-path Laplacian, R = I.
    """
    graph = clique_path_graph(s_cliques, c)
    mas = MasSystem(example1_agents(graph.n_agents, n, m))
    spec = CostSpec.homogeneous(graph, 0.5 * np.eye(n), np.eye(n), np.eye(m))
    return mas, spec


def five_node_scenario():
    """(MasSystem, CostSpec) for the five-node demo graph.

    Unit-weight edges {1-2, 2-3, 1-4, 2-5, 4-5} (1-based); the decomposition
    {1,2},{3},{4,5} leaves clusters {3} and {4,5} uncoupled (kappa = 2,
    tr(G2) = 6), while {1},{2,3},{4,5} couples every cluster pair (kappa = 0).
    """
    graph = CostGraph.from_edges(5, [(0, 1), (1, 2), (0, 3), (1, 4), (3, 4)])
    mas = MasSystem(example1_agents(5))
    spec = CostSpec.homogeneous(graph, 0.5 * np.eye(4), np.eye(4), np.eye(2))
    return mas, spec


@dataclass(frozen=True)
class FormationScenario:
    """Planar point-mass formation maneuver parameters.

    States per agent are (position error, velocity) in the target-relative
    coordinates x_i = (q_i - h_i, qdot_i).  Leaders anchor the formation via
    the diagonal weight lambda (leader_weight) in the cost.
    """

    masses: list
    damping: list
    formation_graph: CostGraph
    leaders: tuple
    targets: np.ndarray
    initial_positions: np.ndarray
    initial_velocities: np.ndarray
    disturbance_amps: np.ndarray | None = None
    leader_weight: float = 1.0

    @property
    def n_agents(self):
        return self.formation_graph.n_agents


class _CosDecayDisturbance:
    """d(t) = amps * cos(t)/(t+1), stacked over agents; vectorized table."""

    def __init__(self, amps_flat):
        self.amps = np.asarray(amps_flat, dtype=float)

    def __call__(self, t):
        return self.amps * (math.cos(t) / (t + 1.0))

    def table(self, ts):
        return np.outer(np.cos(ts) / (ts + 1.0), self.amps)


def default_formation(n_cols=4, n_rows=3, leaders=(0, 7, 11)):
    """The documented 12-agent mesh formation.

    Agents sit on an n_cols x n_rows unit grid, numbered column-major (agent 0
    bottom-left, columns left to right).  The mesh has all horizontal and
    vertical grid edges.  The maneuver translates the group +6 in x while
    compressing row spacing to 0.4 (a gathering pass through a narrow gap).
    Masses M_i = diag((i+1)/2, i/2), damping C_i = diag(i/4, i/5), and
    disturbance amplitudes (0.05 i, 0.1 i), all for 1-based agent number i.
    """
    n_agents = n_cols * n_rows
    for u in leaders:
        if not 0 <= u < n_agents:
            raise InvalidConfig(f"leader {u} out of range")

    def node(col, row):
        return col * n_rows + row

    edges = []
    for col in range(n_cols):
        for row in range(n_rows - 1):
            edges.append((node(col, row), node(col, row + 1)))
    for row in range(n_rows):
        for col in range(n_cols - 1):
            edges.append((node(col, row), node(col + 1, row)))
    graph = CostGraph.from_edges(n_agents, edges)

    positions = np.zeros((n_agents, 2))
    targets = np.zeros((n_agents, 2))
    for col in range(n_cols):
        for row in range(n_rows):
            u = node(col, row)
            positions[u] = (1.0 * col, 1.0 * row)
            targets[u] = (1.0 * col + 6.0, 1.0 + (row - 1) * 0.4)

    masses, damping, amps = [], [], np.zeros((n_agents, 2))
    for u in range(n_agents):
        i = u + 1
        masses.append(np.diag([(i + 1) / 2.0, i / 2.0]))
        damping.append(np.diag([i / 4.0, i / 5.0]))
        amps[u] = (0.05 * i, 0.1 * i)

    return FormationScenario(
        masses=masses,
        damping=damping,
        formation_graph=graph,
        leaders=tuple(leaders),
        targets=targets,
        initial_positions=positions,
        initial_velocities=np.zeros((n_agents, 2)),
        disturbance_amps=amps,
    )


def build_formation(scn):
    """Realize a FormationScenario as (MasSystem, CostSpec, baseline_k, x0).

    Dynamics per agent: A_i = [[0, I], [0, -M_i^{-1} C_i]], B_i = [0; M_i^{-1}]
    on the state (q_i - h_i, qdot_i).  Cost: Q = (L + Lambda) (x) I_4 with
    Lambda the leader-weight diagonal, R = I.  The baseline stabilization law
    is position-only feedback over the complete graph:
    u = -((L_complete + Lambda) (x) [I 0]) x.
    """
    n_agents = scn.n_agents
    if not scn.leaders:
        raise InvalidConfig("formation needs at least one leader")
    if not scn.formation_graph.connected():
        raise InvalidConfig("formation graph must be connected")

    agents = []
    for m_i, c_i in zip(scn.masses, scn.damping):
        m_inv = np.linalg.inv(m_i)
        a = np.block([
            [np.zeros((2, 2)), np.eye(2)],
            [np.zeros((2, 2)), -m_inv @ c_i],
        ])
        b = np.vstack([np.zeros((2, 2)), m_inv])
        agents.append((a, b))

    lam = np.zeros(n_agents)
    lam[list(scn.leaders)] = scn.leader_weight
    qbar_blocks = [lam[u] * np.eye(4) for u in range(n_agents)]
    spec = CostSpec(
        graph=scn.formation_graph,
        qbar_blocks=qbar_blocks,
        qtilde=np.eye(4),
        r_blocks=[np.eye(2)] * n_agents,
    )

    disturbance = None
    if scn.disturbance_amps is not None:
        disturbance = _CosDecayDisturbance(np.asarray(scn.disturbance_amps).reshape(-1))
    mas = MasSystem(agents, disturbance=disturbance)

    complete = CostGraph.from_edges(
        n_agents,
        [(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)],
    )
    s1 = np.hstack([np.eye(2), np.zeros((2, 2))])
    baseline_k = np.kron(complete.laplacian + np.diag(lam), s1)

    x0 = np.zeros(4 * n_agents)
    for u in range(n_agents):
        x0[4 * u:4 * u + 2] = scn.initial_positions[u] - scn.targets[u]
        x0[4 * u + 2:4 * u + 4] = scn.initial_velocities[u]

    return mas, spec, baseline_k, x0


def formation_scenario(cfg=None):
    """(MasSystem, CostSpec, baseline gain, x0) for a FormationScenario
    (default: the documented 12-agent mesh)."""
    scn = cfg if cfg is not None else default_formation()
    return build_formation(scn)


def anchoring_check(scn, dec):
    """True iff every cluster holds a leader and its formation subgraph is
    connected, the combinatorial feasibility test for cluster-level
    observability of the formation cost."""
    leaders = set(scn.leaders)
    for members in dec.clusters():
        if not leaders.intersection(members):
            return False
        if not scn.formation_graph.connected(members):
            return False
    return True


def initial_gains(mas, spec, dec):
    """White-box stabilizing initial gains per cluster (zero when the cluster
    is already open-loop stable).  Used to seed the model-free learner.

    Unstable clusters get the unit-cost LQR gain, which is stabilizing with
    moderate norm; aggressive pre-stabilizers flatten the state response and
    degrade the learner's regressor conditioning.
    """
    del spec
    out = []
    for j in range(dec.s):
        a_j, b_j = mas.cluster(dec, j)
        if abscissa(a_j) < -1e-9:
            out.append(np.zeros((b_j.shape[1], b_j.shape[0])))
        else:
            p0 = solve_care(a_j, b_j, np.eye(a_j.shape[0]), np.eye(b_j.shape[1]))
            out.append(b_j.T @ p0)
    return out


def cluster_plants(mas, dec):
    """Black-box plant handles for each cluster of a white-box system.

    Each handle wraps (A_j, B_j) and the disturbance restricted to the
    cluster's input channels; downstream callers only see trajectory data.
    """
    plants = []
    m = mas.m
    for j in range(dec.s):
        a_j, b_j = mas.cluster(dec, j)
        dist_j = None
        if mas.disturbance is not None:
            iix = dec.input_indices(j, m)
            dist_j = _SliceSignal(mas.disturbance, iix)
        plants.append(BlackBoxPlant(a_j, b_j, dist_j))
    return plants


class _SliceSignal:
    """Channel-sliced view of a stacked time signal."""

    def __init__(self, f, indices):
        self.f = f
        self.indices = np.asarray(indices, dtype=int)

    def __call__(self, t):
        return np.asarray(self.f(t), dtype=float)[self.indices]

    def table(self, ts):
        if hasattr(self.f, "table"):
            return np.asarray(self.f.table(ts), dtype=float)[:, self.indices]
        return np.asarray([np.asarray(self.f(float(t)), dtype=float)[self.indices] for t in ts])


def cost_matrices(spec):
    """(Q, R) dense pair for a CostSpec."""
    return assemble_q(spec), spec.r


def cluster_cost_matrices(spec, dec):
    """Per-cluster (Qhat_j, Rhat_j) list (delegates to graphcost)."""
    return cluster_costs(spec, dec)
