"""Command-line experiment orchestration.

Subcommands:
  decompose  choose a clustering (max coupling savings or min cut)
  solve      model-based hierarchical synthesis + suboptimality report
  learn      model-free hierarchical learning + the same report
  simulate   closed-loop trajectory under a saved or freshly built gain
  run        full decompose -> (learn|solve) -> evaluate pipeline
  bench      regenerate the comparison tables at desk scale

All randomness flows from --seed; identical config and seed give byte-identical
CSV output (wall-clock columns vary by machine and are documented as such).
The HLQR_WORKERS environment variable sizes the per-cluster worker pool and
HLQR_PURE_NUMPY=1 selects the plain numpy kernels.
"""

import argparse
import math
import sys
import time
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import fileio
from .adp import LearnConfig, learn_hierarchical
from .errors import HlqrError, InvalidConfig, UnstableClosedLoop
from .graphcost import (
    Decomposition,
    assemble_q,
    comm_links,
    kappa,
    split_graph,
)
from .hierctrl import gap_report, hierarchical_gain
from .matops import abscissa, solve_care, solve_lyapunov, spectral, symmetrize
from .partition import ConstraintSet, PartitionProblem, max_kappa, min_scut
from .sim import (
    build_formation,
    clique_decomposition,
    clique_path_scenario,
    cluster_plants,
    default_formation,
    five_node_scenario,
    initial_gains,
    integrate,
    anchoring_check,
)

__all__ = ["ExperimentConfig", "ReportRow", "run_experiment", "bench_tables", "main"]

REPORT_COLUMNS = [
    "label", "kappa", "trace_g2", "cond_p", "j_mean", "j_u", "n_c",
    "learn_time", "sop",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one end-to-end experiment."""

    scenario: str = "example1"
    s: int = 3
    c: int = 3
    n: int = 4
    m: int = 2
    objective: str = "cliques"
    assignment: tuple | None = None
    dec_sizes: tuple | None = None
    seed: int = 0
    sigma: float = 1.0
    n_draws: int = 1000
    x0_scheme: str = "uniform_pm1"
    learn: bool = False
    dt: float = 1e-3
    window: float = 0.1
    horizon: float | None = None
    tol_pi: float = 1e-8
    max_iter: int = 30
    amplitude: float = 0.5
    t_final: float = 30.0
    out_dir: str = "out"

    def __post_init__(self):
        if self.scenario not in ("example1", "five_node", "formation"):
            raise InvalidConfig(f"unknown scenario {self.scenario!r}")
        if self.sigma <= 0:
            raise InvalidConfig("sigma must be positive")
        if self.n_draws < 1:
            raise InvalidConfig("n_draws must be at least 1")
        if self.x0_scheme not in ("uniform_pm1", "normal05", "scenario"):
            raise InvalidConfig(f"unknown x0 scheme {self.x0_scheme!r}")
        if self.objective not in ("cliques", "kappa", "scut", "assignment"):
            raise InvalidConfig(f"unknown objective {self.objective!r}")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("assignment", "dec_sizes"):
            if d.get(key) is not None:
                d[key] = tuple(int(v) for v in d[key])
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        for key in ("assignment", "dec_sizes"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    def learn_config(self):
        return LearnConfig(
            seed=self.seed, dt=self.dt, window=self.window,
            horizon=self.horizon, tol_pi=self.tol_pi,
            max_iter=self.max_iter, amplitude=self.amplitude,
        )


@dataclass(frozen=True)
class ReportRow:
    """One comparison-table row; the column set is fixed and documented."""

    label: str
    kappa: float
    trace_g2: float
    cond_p: float
    j_mean: float
    j_u: float
    n_c: int
    learn_time: float
    sop: float

    def cells(self):
        return [getattr(self, c) for c in REPORT_COLUMNS]


@dataclass(frozen=True)
class Scenario:
    """Realized scenario bundle."""

    mas: object
    spec: object
    formation: object = None
    baseline_k: np.ndarray | None = None
    x0: np.ndarray | None = None


def build_scenario(cfg):
    if cfg.scenario == "example1":
        mas, spec = clique_path_scenario(cfg.s, cfg.c, cfg.n, cfg.m)
        return Scenario(mas=mas, spec=spec)
    if cfg.scenario == "five_node":
        mas, spec = five_node_scenario()
        return Scenario(mas=mas, spec=spec)
    scn = default_formation()
    mas, spec, baseline_k, x0 = build_formation(scn)
    return Scenario(mas=mas, spec=spec, formation=scn, baseline_k=baseline_k,
                    x0=x0)


def _sizes_to_assignment(sizes, n_agents):
    if sum(sizes) != n_agents:
        raise InvalidConfig(f"cluster sizes {sizes} do not sum to {n_agents}")
    assignment = []
    for j, size in enumerate(sizes):
        assignment.extend([j] * size)
    return assignment


def choose_decomposition(cfg, scenario):
    """Decomposition per config: explicit assignment/sizes, clique blocks,
    or an exact search for the requested objective.  Returns
    (Decomposition, PartitionResult or None)."""
    spec = scenario.spec
    n_agents = spec.graph.n_agents
    if cfg.assignment is not None:
        return Decomposition.from_assignment(cfg.assignment), None
    if cfg.dec_sizes is not None:
        return (
            Decomposition.from_assignment(
                _sizes_to_assignment(cfg.dec_sizes, n_agents)
            ),
            None,
        )
    if cfg.objective == "cliques":
        if cfg.scenario != "example1":
            raise InvalidConfig("objective 'cliques' needs the example1 scenario")
        return clique_decomposition(cfg.s, cfg.c), None
    if cfg.objective == "assignment":
        raise InvalidConfig("objective 'assignment' needs an explicit "
                            "assignment or cluster sizes")
    constraints = None
    if scenario.formation is not None:
        indicator = np.zeros(n_agents)
        indicator[list(scenario.formation.leaders)] = 1.0
        constraints = ConstraintSet(
            leader_indicator=indicator,
            require_leader=True,
            require_connected=True,
        )
    problem = PartitionProblem(graph=spec.graph, s=cfg.s, constraints=constraints)
    result = max_kappa(problem) if cfg.objective == "kappa" else min_scut(problem)
    return result.dec, result


def _closed_loop_mats(mas, spec, k):
    a_cl = mas.a_full - mas.b_full @ np.asarray(k, dtype=float)
    if abscissa(a_cl) >= 0.0:
        raise UnstableClosedLoop("closed loop is not Hurwitz")
    q = assemble_q(spec)
    u = solve_lyapunov(a_cl, symmetrize(q + k.T @ spec.r @ k))
    xu = solve_lyapunov(a_cl, symmetrize(k.T @ k))
    return u, xu


def draw_x0(scheme, rng, dim, n_draws):
    if scheme == "uniform_pm1":
        return rng.choice(np.array([1.0, -1.0, 0.0]), size=(n_draws, dim))
    if scheme == "normal05":
        return rng.normal(0.0, math.sqrt(0.5), size=(n_draws, dim))
    raise InvalidConfig(f"x0 scheme {scheme!r} needs explicit draws")


def _quad_mean(x0s, mat):
    return float(np.einsum("bi,ij,bj->b", x0s, mat, x0s).mean())


def make_report_row(cfg, scenario, dec, gain, learn_time=float("nan")):
    """Evaluate a gain into a ReportRow (and the underlying GapReport)."""
    mas, spec = scenario.mas, scenario.spec
    report = gap_report(mas, spec, dec, gain, sigma=cfg.sigma)
    _, n_c = comm_links(gain.k_h, spec.n, spec.m)

    if cfg.x0_scheme == "scenario":
        if scenario.x0 is None:
            raise InvalidConfig("scenario x0 scheme needs a scenario initial state")
        traj = integrate(mas, gain.k_h, scenario.x0, cfg.t_final, cfg.dt,
                         cost=spec)
        j_mean, j_u = traj.cost, traj.ju
        sop = report.sop
    else:
        rng = np.random.default_rng(cfg.seed + 1)
        x0s = draw_x0(cfg.x0_scheme, rng, spec.n * mas.n_agents, cfg.n_draws)
        u_mat, xu_mat = _closed_loop_mats(mas, spec, gain.k_h)
        p_opt = solve_care(mas.a_full, mas.b_full, assemble_q(spec), spec.r)
        j_mean = _quad_mean(x0s, u_mat)
        j_u = _quad_mean(x0s, xu_mat)
        j_opt_mean = _quad_mean(x0s, p_opt)
        sop = (j_mean - j_opt_mean) / j_opt_mean if j_opt_mean > 0 else 0.0

    row = ReportRow(
        label=dec.label(),
        kappa=kappa(spec.graph, dec),
        trace_g2=report.trace_g2,
        cond_p=report.cond_p,
        j_mean=j_mean,
        j_u=j_u,
        n_c=n_c,
        learn_time=learn_time,
        sop=sop,
    )
    return row, report


def run_experiment(cfg):
    """Execute the configured pipeline and write all report files.

    Returns (rows, paths) where rows is the list of ReportRow written to
    report.csv.
    """
    scenario = build_scenario(cfg)
    dec, _ = choose_decomposition(cfg, scenario)
    mas, spec = scenario.mas, scenario.spec

    learn_time = float("nan")
    results = None
    if cfg.learn:
        plants = cluster_plants(mas, dec)
        k0_list = initial_gains(mas, spec, dec)
        t0 = time.perf_counter()
        gain, results = learn_hierarchical(
            plants, spec, dec, cfg.learn_config(), k0_list=k0_list,
        )
        learn_time = time.perf_counter() - t0
    else:
        gain = hierarchical_gain(mas, spec, dec)

    row, report = make_report_row(cfg, scenario, dec, gain, learn_time)

    out = cfg.out_dir
    paths = {
        "report": fileio.write_csv(
            f"{out}/report.csv", REPORT_COLUMNS, [row.cells()]
        ),
        "gain": fileio.save_gain(f"{out}/gain.npz", gain),
        "config": fileio.save_json(f"{out}/config_echo.json", cfg.to_dict()),
        "gap": fileio.save_json(f"{out}/gap_report.json", asdict(report)),
    }
    if results is not None:
        paths["learn"] = fileio.write_csv(
            f"{out}/learn_summary.csv",
            ["cluster", "iterations", "converged", "wall_time", "cond"],
            [
                [j, r.iterations, int(r.converged), r.wall_time, r.cond]
                for j, r in enumerate(results)
            ],
        )
    if cfg.x0_scheme == "scenario":
        traj = integrate(mas, gain.k_h, scenario.x0, cfg.t_final, cfg.dt,
                         cost=spec)
        paths["trajectory"] = fileio.write_trajectory_csv(
            f"{out}/trajectory.csv", traj, stride=10,
        )
    return [row], paths


# ---------------------------------------------------------------------------
# benchmark tables
# ---------------------------------------------------------------------------


def _bench_rl_compare(out_dir, seed):
    header = [
        "s", "c", "n_states", "unknowns_hier", "unknowns_central",
        "learn_time_hier", "learn_time_central", "iters_hier", "iters_central",
        "sop_mean", "note",
    ]
    rows = []
    for s, c in ((3, 2), (3, 3), (3, 4)):
        mas, spec = clique_path_scenario(s, c)
        dec = clique_decomposition(s, c)
        n_states = spec.n * mas.n_agents
        n_j = spec.n * c
        m_j = spec.m * c
        unknowns_h = n_j * (n_j + 1) // 2 + m_j * n_j
        n_all = n_states
        m_all = spec.m * mas.n_agents
        unknowns_c = n_all * (n_all + 1) // 2 + m_all * n_all
        cfg = LearnConfig(seed=seed)
        note = ""

        plants = cluster_plants(mas, dec)
        t0 = time.perf_counter()
        gain, results = learn_hierarchical(plants, spec, dec, cfg)
        t_h = time.perf_counter() - t0
        iters_h = max(r.iterations for r in results)

        dec_all = Decomposition.from_assignment([0] * mas.n_agents)
        try:
            t0 = time.perf_counter()
            _, res_c = learn_hierarchical(
                cluster_plants(mas, dec_all), spec, dec_all, cfg,
            )
            t_c = time.perf_counter() - t0
            iters_c = res_c[0].iterations
        except HlqrError as exc:
            t_c, iters_c = float("nan"), 0
            note = f"centralized learning failed: {type(exc).__name__}"

        rng = np.random.default_rng(seed + 1)
        x0s = draw_x0("uniform_pm1", rng, n_states, 200)
        u_mat, _ = _closed_loop_mats(mas, spec, gain.k_h)
        p_opt = solve_care(mas.a_full, mas.b_full, assemble_q(spec), spec.r)
        js = np.einsum("bi,ij,bj->b", x0s, u_mat, x0s)
        jo = np.einsum("bi,ij,bj->b", x0s, p_opt, x0s)
        keep = jo > 0
        sop_mean = float(((js[keep] - jo[keep]) / jo[keep]).mean())

        rows.append([s, c, n_states, unknowns_h, unknowns_c, t_h, t_c,
                     iters_h, iters_c, sop_mean, note])
    path = fileio.write_csv(f"{out_dir}/rl_compare.csv", header, rows)
    fileio.save_json(
        f"{out_dir}/rl_compare_annotations.json",
        {
            "machine_dependent": ["learn_time_hier", "learn_time_central"],
            "distribution_dependent": ["sop_mean"],
        },
    )
    return path


def _bench_decomposition_compare(out_dir, seed):
    mas, spec = clique_path_scenario(3, 3)
    n_states = spec.n * mas.n_agents
    scenario = Scenario(mas=mas, spec=spec)
    named = [
        ("{1,2}|{3..7}|{8,9}", [0, 0, 1, 1, 1, 1, 1, 2, 2]),
        ("{1,2,3}|{4,5,6}|{7,8,9}", [0, 0, 0, 1, 1, 1, 2, 2, 2]),
        ("{1,2,3}|{4}|{5..9}", [0, 0, 0, 1, 2, 2, 2, 2, 2]),
    ]
    cfg = ExperimentConfig(scenario="example1", s=3, c=3, seed=seed,
                           x0_scheme="normal05", n_draws=1000)
    rows = []
    for label, assignment in named:
        dec = Decomposition.from_assignment(assignment)
        gain = hierarchical_gain(mas, spec, dec)
        row, _ = make_report_row(cfg, scenario, dec, gain)
        rows.append([label, *row.cells()[1:]])

    rng = np.random.default_rng(seed + 1)
    x0s = draw_x0("normal05", rng, n_states, 1000)
    p_opt = solve_care(mas.a_full, mas.b_full, assemble_q(spec), spec.r)
    k_opt = np.linalg.solve(spec.r, mas.b_full.T @ p_opt)
    _, xu_mat = _closed_loop_mats(mas, spec, k_opt)
    rows.append([
        "undecomposed", "n/a", "n/a", spectral(p_opt).cond,
        _quad_mean(x0s, p_opt), _quad_mean(x0s, xu_mat),
        mas.n_agents * (mas.n_agents - 1) // 2, float("nan"), 0.0,
    ])
    path = fileio.write_csv(
        f"{out_dir}/decomposition_compare.csv",
        ["decomposition", *REPORT_COLUMNS[1:]], rows,
    )
    fileio.save_json(
        f"{out_dir}/decomposition_compare_annotations.json",
        {
            "machine_dependent": ["learn_time"],
            "distribution_dependent": ["j_mean", "j_u", "sop"],
        },
    )
    return path


def _bench_formation(out_dir, seed):
    scn = default_formation()
    mas, spec, baseline_k, x0 = build_formation(scn)
    scenario = Scenario(mas=mas, spec=spec, formation=scn,
                        baseline_k=baseline_k, x0=x0)
    cfg = ExperimentConfig(scenario="formation", seed=seed,
                           x0_scheme="scenario", learn=True)
    rows = []
    for sizes in ((6, 3, 3), (1, 10, 1), (7, 2, 3)):
        dec = Decomposition.from_assignment(
            _sizes_to_assignment(sizes, mas.n_agents)
        )
        if not anchoring_check(scn, dec):
            continue
        note = ""
        learn_time = float("nan")
        try:
            plants = cluster_plants(mas, dec)
            k0_list = initial_gains(mas, spec, dec)
            t0 = time.perf_counter()
            gain, _ = learn_hierarchical(plants, spec, dec,
                                         cfg.learn_config(), k0_list=k0_list)
            learn_time = time.perf_counter() - t0
        except HlqrError as exc:
            gain = hierarchical_gain(mas, spec, dec)
            note = f"learning failed ({type(exc).__name__}); model-based gain"
        row, _ = make_report_row(cfg, scenario, dec, gain, learn_time)
        rows.append([*row.cells(), note])
    path = fileio.write_csv(
        f"{out_dir}/formation.csv", [*REPORT_COLUMNS, "note"], rows,
    )
    fileio.save_json(
        f"{out_dir}/formation_annotations.json",
        {
            "machine_dependent": ["learn_time"],
            "distribution_dependent": [],
            "feasibility": "rows limited to leader-per-cluster connected decompositions",
        },
    )
    return path


def bench_tables(which, out_dir="out", seed=0):
    """Regenerate one of the comparison tables; returns the CSV path."""
    if which == "rl-compare":
        return _bench_rl_compare(out_dir, seed)
    if which == "decomposition-compare":
        return _bench_decomposition_compare(out_dir, seed)
    if which == "formation":
        return _bench_formation(out_dir, seed)
    raise InvalidConfig(f"unknown bench table {which!r}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--seed", type=int, help="master RNG seed")
    p.add_argument("--out", help="output directory")


def _add_scenario_flags(p):
    p.add_argument("scenario", nargs="?", help="example1 | five_node | formation")
    p.add_argument("--s", type=int, help="number of clusters / cliques")
    p.add_argument("--c", type=int, help="clique size (example1)")
    p.add_argument("--n", type=int, help="agent state dimension (example1)")
    p.add_argument("--m", type=int, help="agent input dimension (example1)")
    p.add_argument("--objective", choices=["cliques", "kappa", "scut"],
                   help="decomposition objective")
    p.add_argument("--clusters", choices=["cliques"],
                   help="alias: --clusters cliques")
    p.add_argument("--assignment",
                   help="explicit 0-based assignment, e.g. 0,0,1,1,2")
    p.add_argument("--dec", help="cluster sizes over consecutive agents, e.g. 6,3,3")


def _add_learn_flags(p):
    p.add_argument("--horizon", type=float, help="collection horizon (s)")
    p.add_argument("--dt", type=float, help="integration step (s)")
    p.add_argument("--window", type=float, help="integral window length (s)")
    p.add_argument("--tol-pi", type=float, dest="tol_pi",
                   help="policy-iteration stop tolerance")
    p.add_argument("--max-iter", type=int, dest="max_iter",
                   help="policy-iteration pass limit")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hlqr",
        description="Hierarchical LQR for multi-agent systems: decompose, "
                    "learn cluster controllers model-free, assemble, evaluate.",
        epilog="Environment: HLQR_WORKERS sizes the per-cluster worker pool; "
               "HLQR_PURE_NUMPY=1 forces the plain numpy kernels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="search for a decomposition")
    _add_scenario_flags(p)
    _add_common(p)

    p = sub.add_parser("solve", help="model-based hierarchical synthesis")
    _add_scenario_flags(p)
    _add_common(p)
    p.add_argument("--sigma", type=float, help="initial-state std for the gap report")

    p = sub.add_parser("learn", help="model-free hierarchical learning")
    _add_scenario_flags(p)
    _add_learn_flags(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="closed-loop trajectory")
    _add_scenario_flags(p)
    _add_common(p)
    p.add_argument("--gain", help="saved gain file (default: model-based synthesis)")
    p.add_argument("--baseline", action="store_true",
                   help="use the formation baseline law")
    p.add_argument("--t-final", type=float, dest="t_final", help="horizon (s)")
    p.add_argument("--dt", type=float, help="integration step (s)")

    p = sub.add_parser("run", help="full pipeline from config")
    _add_scenario_flags(p)
    _add_learn_flags(p)
    _add_common(p)
    p.add_argument("--learn", action="store_true", default=None,
                   help="learn cluster gains model-free")
    p.add_argument("--sigma", type=float)
    p.add_argument("--n-draws", type=int, dest="n_draws")
    p.add_argument("--x0-scheme", dest="x0_scheme",
                   choices=["uniform_pm1", "normal05", "scenario"])
    p.add_argument("--t-final", type=float, dest="t_final")

    p = sub.add_parser("bench", help="regenerate comparison tables")
    p.add_argument("--which", required=True,
                   choices=["rl-compare", "decomposition-compare", "formation"])
    _add_common(p)

    return parser


def _config_from_args(args):
    base = {}
    if getattr(args, "config", None):
        base = fileio.load_json(args.config)
    cfg = ExperimentConfig.from_dict(base)

    updates = {}
    mapping = {
        "scenario": "scenario", "s": "s", "c": "c", "n": "n", "m": "m",
        "seed": "seed", "sigma": "sigma", "n_draws": "n_draws",
        "x0_scheme": "x0_scheme", "learn": "learn", "dt": "dt",
        "window": "window", "horizon": "horizon", "tol_pi": "tol_pi",
        "max_iter": "max_iter", "t_final": "t_final", "out": "out_dir",
    }
    for arg_name, field in mapping.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            updates[field] = value
    if getattr(args, "objective", None):
        updates["objective"] = args.objective
    if getattr(args, "clusters", None):
        updates["objective"] = "cliques"
    if getattr(args, "assignment", None):
        updates["assignment"] = tuple(
            int(v) for v in args.assignment.split(",")
        )
        updates["objective"] = "assignment"
    if getattr(args, "dec", None):
        updates["dec_sizes"] = tuple(int(v) for v in args.dec.split(","))
        updates["objective"] = "assignment"
    return replace(cfg, **updates)


def cmd_decompose(args):
    cfg = _config_from_args(args)
    explicit = getattr(args, "clusters", None) or cfg.objective in ("kappa", "scut") \
        or cfg.assignment is not None or cfg.dec_sizes is not None
    if not explicit:
        cfg = replace(cfg, objective="kappa")
    scenario = build_scenario(cfg)
    dec, result = choose_decomposition(cfg, scenario)
    split = split_graph(scenario.spec.graph, dec)
    kap = kappa(scenario.spec.graph, dec)
    n_agents = scenario.spec.graph.n_agents
    info = {
        "assignment": list(dec.assignment),
        "label": dec.label(),
        "kappa": kap,
        "trace_g2": float(np.trace(split.g2)),
        "n_c_upper": n_agents * (n_agents - 1) // 2 - kap,
        "objective": cfg.objective,
        "optimal": None if result is None else result.optimal,
        "nodes_explored": None if result is None else result.nodes,
        "miqp_objective": None if result is None else result.miqp_objective,
    }
    fileio.save_json(f"{cfg.out_dir}/decomposition.json", info)
    print(f"decomposition {info['label']}")
    print(f"kappa={info['kappa']} trace_g2={info['trace_g2']} "
          f"n_c_upper={info['n_c_upper']} optimal={info['optimal']}")
    return 0


def cmd_solve(args):
    cfg = _config_from_args(args)
    scenario = build_scenario(cfg)
    dec, _ = choose_decomposition(cfg, scenario)
    gain = hierarchical_gain(scenario.mas, scenario.spec, dec)
    row, report = make_report_row(cfg, scenario, dec, gain)
    fileio.save_gain(f"{cfg.out_dir}/gain.npz", gain)
    fileio.save_json(f"{cfg.out_dir}/gap_report.json", asdict(report))
    fileio.write_csv(f"{cfg.out_dir}/report.csv", REPORT_COLUMNS, [row.cells()])
    print(f"decomposition {row.label}")
    print(f"kappa={row.kappa} trace_g2={row.trace_g2} n_c={row.n_c} "
          f"cond_p={row.cond_p:.4g} sop={row.sop:.4%}")
    return 0


def cmd_learn(args):
    cfg = _config_from_args(args)
    cfg = replace(cfg, learn=True)
    rows, paths = run_experiment(cfg)
    row = rows[0]
    print(f"decomposition {row.label}")
    print(f"learned gain in {row.learn_time:.3f}s; sop={row.sop:.4%} "
          f"n_c={row.n_c}")
    print(f"report: {paths['report']}")
    return 0


def cmd_simulate(args):
    cfg = _config_from_args(args)
    scenario = build_scenario(cfg)
    if getattr(args, "baseline", False):
        if scenario.baseline_k is None:
            raise InvalidConfig("baseline law exists only for the formation scenario")
        k = scenario.baseline_k
        label = "baseline"
    elif getattr(args, "gain", None):
        k = fileio.load_gain(args.gain)["k_h"]
        n_total = scenario.spec.n * scenario.mas.n_agents
        m_total = scenario.spec.m * scenario.mas.n_agents
        if k.shape != (m_total, n_total):
            raise InvalidConfig(
                f"gain shape {k.shape} does not match scenario "
                f"({m_total}, {n_total})")
        label = "loaded"
    else:
        dec, _ = choose_decomposition(cfg, scenario)
        k = hierarchical_gain(scenario.mas, scenario.spec, dec).k_h
        label = "hierarchical"
    x0 = scenario.x0
    if x0 is None:
        rng = np.random.default_rng(cfg.seed + 1)
        x0 = draw_x0("uniform_pm1", rng, scenario.spec.n * scenario.mas.n_agents, 1)[0]
    traj = integrate(scenario.mas, k, x0, cfg.t_final, cfg.dt,
                     cost=scenario.spec)
    path = fileio.write_trajectory_csv(f"{cfg.out_dir}/trajectory.csv", traj,
                                       stride=10)
    print(f"{label} controller: J={traj.cost:.6g} J_u={traj.ju:.6g} "
          f"over {cfg.t_final}s")
    print(f"trajectory: {path}")
    return 0


def cmd_run(args):
    cfg = _config_from_args(args)
    rows, paths = run_experiment(cfg)
    header = ",".join(REPORT_COLUMNS)
    print(header)
    for row in rows:
        print(",".join(str(v) for v in row.cells()))
    print(f"report: {paths['report']}")
    return 0


def cmd_bench(args):
    out_dir = args.out or "out"
    seed = args.seed if args.seed is not None else 0
    path = bench_tables(args.which, out_dir=out_dir, seed=seed)
    print(f"table: {path}")
    return 0


_COMMANDS = {
    "decompose": cmd_decompose,
    "solve": cmd_solve,
    "learn": cmd_learn,
    "simulate": cmd_simulate,
    "run": cmd_run,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except HlqrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
