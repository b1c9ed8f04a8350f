"""Model-free per-cluster LQR learning via off-policy integral policy
iteration, and the two-level orchestration that assembles the hierarchical
gain from learned pieces.

The learner never reads plant matrices.  A behavior policy u = -k0 x + e(t)
excites the plant while window integrals of x (x) x and x (x) v (v = applied
input, including any measurable disturbance) are recorded.  Each policy
evaluation then solves one linear least-squares problem jointly for the value
matrix P (symmetric basis) and for B'P, from the identity

  x'Px|window ends = -int x'(Q + K'RK)x dtau + 2 int (v + Kx)'(B'P)x dtau,

followed by the policy update K <- R^{-1}(B'P).  Since B'P = R K at the fixed
point, the coupling stage needs no separate estimate of B.
"""

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import InvalidConfig, NoConvergence, RankDeficient, StateBlowup
from .graphcost import cluster_costs, split_graph
from .hierctrl import assemble_gain, compute_rtilde
from .sim import tabulate_signal

__all__ = [
    "Excitation",
    "Dataset",
    "LearnResult",
    "LearnConfig",
    "collect",
    "policy_iteration",
    "learn_cluster",
    "learn_hierarchical",
    "estimate_b",
]

COND_GUARD = 1e8


@dataclass(frozen=True)
class Excitation:
    """Per-channel sum-of-sinusoids exploration signal.

    Frequencies and phases are drawn deterministically from the seed; the
    amplitude bounds each channel's peak value.  Exposes both pointwise
    evaluation and a vectorized table(ts) for the simulator half-grid.
    """

    seed: int
    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray

    @classmethod
    def make(cls, seed, m, n_sin=10, amplitude=0.5, freq_range=(0.5, 20.0)):
        rng = np.random.default_rng(seed)
        freqs = rng.uniform(freq_range[0], freq_range[1], size=(m, n_sin))
        phases = rng.uniform(0.0, 2.0 * math.pi, size=(m, n_sin))
        amps = np.full((m, n_sin), amplitude / n_sin)
        return cls(seed=int(seed), amplitudes=amps, frequencies=freqs,
                   phases=phases)

    @property
    def n_channels(self):
        return self.frequencies.shape[0]

    def __call__(self, t):
        return np.sum(
            self.amplitudes * np.sin(self.frequencies * t + self.phases),
            axis=1,
        )

    def table(self, ts):
        ts = np.asarray(ts, dtype=float)
        arg = self.frequencies[None, :, :] * ts[:, None, None] + self.phases
        return np.sum(self.amplitudes[None] * np.sin(arg), axis=2)


def _sym_indices(n):
    return np.triu_indices(n, 1)


def phi(x):
    """Quadratic feature map: [x_i^2 ...; 2 x_i x_j (i<j) ...].

    Satisfies phi(x) . svec(P) = x'Px for the matching svec ordering; accepts
    a single state or a stack of states (rows).
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    iu, ju = _sym_indices(arr.shape[1])
    out = np.hstack([arr ** 2, 2.0 * arr[:, iu] * arr[:, ju]])
    return out[0] if single else out


def svec(p):
    """[P_11..P_nn, P_12, P_13, .., P_{n-1,n}] vector of a symmetric matrix."""
    p = np.asarray(p, dtype=float)
    iu, ju = _sym_indices(p.shape[0])
    return np.concatenate([np.diag(p), p[iu, ju]])


def unsvec(v, n):
    """Inverse of svec."""
    p = np.zeros((n, n))
    np.fill_diagonal(p, v[:n])
    iu, ju = _sym_indices(n)
    p[iu, ju] = v[n:]
    p[ju, iu] = v[n:]
    return p


@dataclass(frozen=True)
class Dataset:
    """Window integrals recorded during the data collection phase.

    delta_xx[w] = phi(x(t_{w+1})) - phi(x(t_w)); i_xx[w] = int x x' dtau and
    i_xu[w] = int x v' dtau over window w with v the applied input.  The raw
    per-step samples are retained for diagnostic model fitting.  cond is the
    condition number of the column-equilibrated joint regressor at the
    behavior gain (the system the solver actually factors); rank_ok reflects
    the conditioning guard.
    """

    delta_xx: np.ndarray
    i_xx: np.ndarray
    i_xu: np.ndarray
    raw_x: np.ndarray
    raw_v: np.ndarray
    dt: float
    k0: np.ndarray
    cond: float
    rank_ok: bool

    @property
    def M(self):
        return self.delta_xx.shape[0]

    @property
    def n(self):
        return self.i_xx.shape[1]

    @property
    def m(self):
        return self.i_xu.shape[2]


def _regressor(data, k, qk):
    """(A, rhs) of the joint least-squares system at policy gain k."""
    m_windows = data.M
    ixv_t = data.i_xu.transpose(0, 2, 1)
    k_ixx = np.einsum("an,wnb->wab", k, data.i_xx)
    a2 = -2.0 * (ixv_t + k_ixx).reshape(m_windows, -1)
    a_mat = np.hstack([data.delta_xx, a2])
    rhs = -np.einsum("wij,ij->w", data.i_xx, qk)
    return a_mat, rhs


def _equilibrated_lstsq(a_mat, rhs):
    """Column-equilibrated least squares: (theta, rank, cond).

    Scaling each column to unit norm before the solve removes the artificial
    ill-conditioning caused by mixed magnitudes of the quadratic-state and
    bilinear features; the returned cond is that of the scaled system (the
    one actually solved).
    """
    scale = np.linalg.norm(a_mat, axis=0)
    scale[scale == 0.0] = 1.0
    a_scaled = a_mat / scale
    sv = np.linalg.svd(a_scaled, compute_uv=False)
    cond = float("inf") if sv[-1] == 0.0 else float(sv[0] / sv[-1])
    theta, _, rank, _ = np.linalg.lstsq(a_scaled, rhs, rcond=None)
    return theta / scale, rank, cond


def collect(plant, k0, exc, horizon, dt, window, x0=None, guard=1e6):
    """Run the behavior policy u = -k0 x + e(t) and record window integrals.

    horizon and window are in seconds; dt must divide window.  When a
    measurable disturbance is attached to the plant, the recorded applied
    input is u + d.  x0 defaults to a standard normal draw from the
    excitation seed.
    """
    n, m = plant.n_states, plant.n_inputs
    k0 = np.zeros((m, n)) if k0 is None else np.asarray(k0, dtype=float)
    steps_per_window = int(round(window / dt))
    if abs(steps_per_window * dt - window) > 1e-9 * max(1.0, window):
        raise InvalidConfig(f"dt={dt} does not divide window={window}")
    n_windows = int(round(horizon / window))
    if n_windows < 1:
        raise InvalidConfig("horizon shorter than one window")
    if x0 is None:
        x0 = np.random.default_rng(exc.seed).standard_normal(n)

    n_steps = steps_per_window * n_windows
    exo_cmd = tabulate_signal(exc, dt, n_steps, m)
    xb, i_xx, i_xv, raw_x, raw_v, status, done = plant.collect(
        k0, exo_cmd, x0, dt, steps_per_window, n_windows, guard=guard,
    )
    if status == _kernels.BLOWUP:
        raise StateBlowup(
            f"collection diverged in window {done}: behavior gain not "
            f"stabilizing or excitation too large"
        )

    phis = phi(xb)
    data = Dataset(
        delta_xx=phis[1:] - phis[:-1],
        i_xx=i_xx,
        i_xu=i_xv,
        raw_x=raw_x,
        raw_v=raw_v,
        dt=float(dt),
        k0=k0,
        cond=float("nan"),
        rank_ok=False,
    )
    a_mat, _ = _regressor(data, k0, np.eye(n))
    scale = np.linalg.norm(a_mat, axis=0)
    scale[scale == 0.0] = 1.0
    sv = np.linalg.svd(a_mat / scale, compute_uv=False)
    cond = float("inf") if sv[-1] == 0.0 else float(sv[0] / sv[-1])
    rank_ok = a_mat.shape[0] >= a_mat.shape[1] and cond < COND_GUARD
    return replace(data, cond=cond, rank_ok=rank_ok)


@dataclass(frozen=True)
class LearnResult:
    """Converged (or not) policy-iteration output for one cluster."""

    p_hat: np.ndarray
    k_hat: np.ndarray
    btp_hat: np.ndarray
    iterations: int
    converged: bool
    wall_time: float = 0.0
    cond: float = float("nan")


def policy_iteration(data, qhat, rhat, k0, tol_pi=1e-8, max_iter=30):
    """Off-policy integral policy iteration on recorded data.

    Each pass solves one least-squares system jointly for svec(P) and B'P,
    then updates K = Rhat^{-1} (B'P).  Stops when |P_k - P_{k-1}|_F <
    tol_pi * max(1, |P_k|_F); the scale factor keeps the tolerance meaningful
    for large value matrices whose data-driven iterates plateau at a relative
    accuracy floor.  Raises RankDeficient for an unidentifiable regressor and
    NoConvergence when max_iter passes without meeting tol_pi.
    """
    n, m = data.n, data.m
    n_unknowns = n * (n + 1) // 2 + m * n
    if data.M < n_unknowns:
        raise RankDeficient(
            f"{data.M} windows < {n_unknowns} unknowns; collect more data"
        )
    if not data.rank_ok:
        raise RankDeficient(
            f"regressor condition {data.cond:.3g} exceeds guard {COND_GUARD:g}"
        )
    qhat = np.asarray(qhat, dtype=float)
    rhat = np.asarray(rhat, dtype=float)
    k = np.asarray(k0, dtype=float)
    p_prev = None
    for it in range(1, max_iter + 1):
        a_mat, rhs = _regressor(data, k, qhat + k.T @ rhat @ k)
        theta, rank, _ = _equilibrated_lstsq(a_mat, rhs)
        if rank < a_mat.shape[1]:
            raise RankDeficient(
                f"joint regressor rank {rank} < {a_mat.shape[1]} unknowns"
            )
        n_sym = n * (n + 1) // 2
        p_hat = unsvec(theta[:n_sym], n)
        btp = theta[n_sym:].reshape(m, n)
        k = np.linalg.solve(rhat, btp)
        if p_prev is not None and np.linalg.norm(p_hat - p_prev) < tol_pi * max(
                1.0, np.linalg.norm(p_hat)):
            return LearnResult(
                p_hat=p_hat, k_hat=k, btp_hat=rhat @ k,
                iterations=it, converged=True, cond=data.cond,
            )
        p_prev = p_hat
    raise NoConvergence(f"policy iteration did not converge in {max_iter} passes")


@dataclass(frozen=True)
class LearnConfig:
    """Knobs for the data collection and learning pipeline."""

    seed: int = 0
    dt: float = 1e-3
    window: float = 0.1
    horizon: float | None = None
    tol_pi: float = 1e-8
    max_iter: int = 30
    amplitude: float = 0.5
    n_sin: int = 10
    guard: float = 1e6
    oversample: float = 1.2


def _auto_horizon(cfg, n, m):
    """Windows needed: a 20% oversample of the unknown count plus margin."""
    n_unknowns = n * (n + 1) // 2 + m * n
    windows = math.ceil(cfg.oversample * n_unknowns) + 10
    return windows * cfg.window


def learn_cluster(plant, qhat, rhat, cfg, k0=None, tag=0):
    """Collect data and run policy iteration for one black-box cluster.

    If the regressor conditioning guard trips, the horizon is grown by
    50% (up to three times) and collection repeats before giving up.
    """
    t0 = time.perf_counter()
    n, m = plant.n_states, plant.n_inputs
    horizon = cfg.horizon if cfg.horizon is not None else _auto_horizon(cfg, n, m)
    exc = Excitation.make(cfg.seed + 7919 * tag, m, n_sin=cfg.n_sin,
                          amplitude=cfg.amplitude)
    data = collect(plant, k0, exc, horizon, cfg.dt, cfg.window,
                   guard=cfg.guard)
    for _ in range(3):
        if data.rank_ok:
            break
        horizon *= 1.5
        data = collect(plant, k0, exc, horizon, cfg.dt, cfg.window,
                       guard=cfg.guard)
    k0_arr = np.zeros((m, n)) if k0 is None else np.asarray(k0, dtype=float)
    result = policy_iteration(data, qhat, rhat, k0_arr,
                              tol_pi=cfg.tol_pi, max_iter=cfg.max_iter)
    return replace(result, wall_time=time.perf_counter() - t0)


def learn_hierarchical(plants, spec, dec, cfg=None, k0_list=None):
    """Learn every cluster model-free, then assemble the hierarchical gain.

    plants are black-box cluster handles ordered like dec's clusters.
    Returns (HierarchicalGain, list of LearnResult).  Cluster learning tasks
    run in a thread pool when HLQR_WORKERS is set above 1 (the kernels hold
    no interpreter state); the coupling stage waits for all of them.
    """
    cfg = cfg if cfg is not None else LearnConfig()
    if len(plants) != dec.s:
        raise InvalidConfig(f"{len(plants)} plants for {dec.s} clusters")
    if k0_list is None:
        k0_list = [None] * dec.s
    costs = cluster_costs(spec, dec)

    def task(j):
        qhat_j, rhat_j = costs[j]
        return learn_cluster(plants[j], qhat_j, rhat_j, cfg,
                             k0=k0_list[j], tag=j)

    workers = int(os.environ.get("HLQR_WORKERS", "1") or "1")
    if workers > 1 and dec.s > 1:
        with ThreadPoolExecutor(max_workers=min(workers, dec.s)) as pool:
            results = list(pool.map(task, range(dec.s)))
    else:
        results = [task(j) for j in range(dec.s)]

    pb_blocks = [res.btp_hat.T for res in results]
    split = split_graph(spec.graph, dec)
    g2q = np.kron(split.g2, spec.qtilde)
    r_tilde = compute_rtilde(pb_blocks, g2q, dec, spec.n, spec.m)
    p_blocks = [res.p_hat for res in results]
    gain = assemble_gain(p_blocks, pb_blocks, r_tilde, spec, dec)
    return gain, results


def estimate_b(data, dt=None):
    """Diagnostic least-squares fit of (A, B) from raw samples.

    Central differences approximate xdot at interior samples; the regressor
    [x; v] then yields [A B] row-wise.  Returns (a_hat, b_hat).  Raises
    RankDeficient when the samples do not excite all input directions.  The
    learning pipeline itself never calls this: B'P comes from Rhat k_hat.
    """
    raw_x, raw_v = data.raw_x, data.raw_v
    dt = float(data.dt if dt is None else dt)
    if raw_x.shape[0] < 3:
        raise RankDeficient("need at least 3 samples for central differences")
    xdot = (raw_x[2:] - raw_x[:-2]) / (2.0 * dt)
    reg = np.hstack([raw_x[1:-1], raw_v[1:-1]])
    sv = np.linalg.svd(reg, compute_uv=False)
    if reg.shape[0] < reg.shape[1] or sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficient("trajectory does not excite all state/input directions")
    theta, _, _, _ = np.linalg.lstsq(reg, xdot, rcond=None)
    n = raw_x.shape[1]
    a_hat = theta[:n].T
    b_hat = theta[n:].T
    return a_hat, b_hat
