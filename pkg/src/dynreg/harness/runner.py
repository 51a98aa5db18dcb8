"""Batch experiment runner: bundle construction, solves, diagnostics and reports."""

from __future__ import annotations

import csv
import io as _io
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..continuous import cfl_check, euler_lagrange_residual_continuous, solve_continuous
from ..core import Problem, TimeGrid, operator_norm_max
from ..discrete import ORACLE_MAX_UNKNOWNS, direct_tikhonov_oracle, solve_discrete
from ..eit.forward import EITExperiment, build_eit_experiment
from ..eit.mesh import Mesh2D
from ..errors import ConfigError, DegenerateFrame, OracleMismatch, SolverError
from ..synthetic import SmoothBenchmark, random_problem, zero_operator_problem
from .config import ExperimentConfig
from .io import format_number, grid_image, load_problem, scale_frame, write_mesh, write_pgm
from .metrics import center_of_mass_error, relative_error, trajectory_at

__all__ = [
    "REPORT_FORMAT",
    "CSV_COLUMNS",
    "STREAM_NAMES",
    "experiment_streams",
    "Bundle",
    "build_bundle",
    "MethodResult",
    "RunReport",
    "run_experiment",
    "oracle_tolerance",
    "oracle_check",
]

REPORT_FORMAT = "dynreg-report/1"
CSV_COLUMNS = (
    "method", "alpha", "status", "el_residual", "cost", "oracle_gap",
    "cfl_pass", "cfl_margin", "spectrum_ok", "q_norm_max", "q_norm_bound",
    "q_norm_bound_ok", "recon_error", "self_convergence", "center_error_max",
    "frame_min", "frame_max",
)
STREAM_NAMES = ("problem", "noise", "eit")


def experiment_streams(seed: int) -> dict:
    """Independent named generators spawned from one seed.

    ``SeedSequence(seed).spawn(3)`` in the order ``problem`` (operators,
    exact solutions, random bundles), ``noise`` (data perturbations) and
    ``eit`` (an integer seed for the data mesh and measurement noise).
    All are NumPy ``PCG64`` streams.
    """
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAM_NAMES))
    out = {name: np.random.default_rng(c) for name, c in zip(STREAM_NAMES, children)}
    out["eit"] = int(out["eit"].integers(2**31))
    return out


@dataclass(eq=False)
class Bundle:
    """A problem at the first sweep ``alpha`` plus what is needed to judge it."""

    problem: Problem
    truth: np.ndarray | None = None
    experiment: EITExperiment | None = None
    refine: Callable[[TimeGrid, float], Problem] | None = None

    @property
    def mesh(self) -> Mesh2D | None:
        return None if self.experiment is None else self.experiment.mesh

    def at_alpha(self, alpha: float) -> "Bundle":
        if self.experiment is not None:
            exp = self.experiment.with_alpha(alpha)
            return Bundle(exp.problem, self.truth, exp, self.refine)
        return Bundle(self.problem.with_alpha(alpha), self.truth, None, self.refine)


def build_bundle(config: ExperimentConfig, n_steps: int | None = None) -> Bundle:
    """Construct the configured problem; ``n_steps`` overrides the synthetic grid."""
    streams = experiment_streams(config.seed)
    alpha = config.alpha[0]
    if config.problem == "bundle":
        return Bundle(load_problem(config.bundle_path).with_alpha(alpha))
    if config.problem == "eit":
        e = config.eit
        exp = build_eit_experiment(e.scenario, alpha, mode=e.data,
                                   data_subdivisions=e.data_subdivisions,
                                   seed=streams["eit"], u0=e.initial_guess)
        truth = np.array([exp.truth(t) for t in e.scenario.time_grid.nodes])
        return Bundle(exp.problem, truth, exp)

    s = config.synthetic
    grid = TimeGrid(s.t_end, n_steps or s.n_steps)
    rng = streams["problem"]
    if s.family == "random":
        return Bundle(random_problem(rng, s.m, s.d, grid.n_steps, alpha, s.t_end))
    if s.family == "zero":
        return Bundle(zero_operator_problem(rng, s.m, s.d, grid.n_steps, alpha, s.t_end))
    bench = SmoothBenchmark(rng, s.m, s.d, s.t_end, s.drift)
    problem = bench.sample(grid, alpha, s.noise, streams["noise"], s.u0)

    def refine(g, a):
        return bench.sample(g, a, 0.0, None, s.u0)

    return Bundle(problem, bench.truth(grid.nodes), None, refine)


@dataclass(eq=False)
class MethodResult:
    """One report row (one method at one ``alpha``)."""

    method: str
    alpha: float
    status: str = "ok"
    el_residual: float | None = None
    cost: float | None = None
    oracle_gap: float | None = None
    cfl_pass: bool | None = None
    cfl_margin: float | None = None
    spectrum_ok: bool | None = None
    q_norm_max: float | None = None
    q_norm_bound: float | None = None
    q_norm_bound_ok: bool | None = None
    recon_error: float | None = None
    self_convergence: float | None = None
    center_errors: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    trajectory: np.ndarray | None = field(default=None, repr=False)

    @property
    def center_error_max(self) -> float | None:
        vals = [c["error"] for c in self.center_errors if c["error"] is not None]
        return max(vals) if vals else None

    @property
    def frame_min(self):
        return min(f["min"] for f in self.frames) if self.frames else None

    @property
    def frame_max(self):
        return max(f["max"] for f in self.frames) if self.frames else None

    def csv_row(self) -> list:
        return [self.method if c == "method" else
                self.status if c == "status" else format_number(getattr(self, c))
                for c in CSV_COLUMNS]

    def as_dict(self) -> dict:
        d = {c: getattr(self, c) for c in CSV_COLUMNS}
        d["center_errors"] = self.center_errors
        d["frames"] = self.frames
        d["timings"] = self.timings
        return _plain(d)


@dataclass(eq=False)
class RunReport:
    config: ExperimentConfig
    rows: list
    files: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def row(self, method: str, alpha: float) -> MethodResult:
        for r in self.rows:
            if r.method == method and r.alpha == alpha:
                return r
        raise KeyError((method, alpha))

    def csv_text(self) -> str:
        buf = _io.StringIO()
        buf.write(f"# {REPORT_FORMAT} columns={len(CSV_COLUMNS)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def json_text(self) -> str:
        c = self.config
        doc = {
            "format": REPORT_FORMAT,
            "seed": c.seed,
            "problem": c.problem,
            "method": c.method,
            "alpha": list(c.alpha),
            "streams": list(STREAM_NAMES),
            "notes": self.notes,
            "rows": [r.as_dict() for r in self.rows],
        }
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"


@contextmanager
def _phase(tag: str):
    """Attach a phase tag to solver errors escaping the block."""
    try:
        yield
    except SolverError as exc:
        if getattr(exc, "phase", None) is None:
            exc.phase = tag
            msg = exc.args[0] if exc.args else ""
            exc.args = (f"[{tag}] {msg}",) + exc.args[1:]
        raise


def _plain(x):
    """JSON-friendly copy of report values (numpy scalars to Python ones)."""
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _judge(result: MethodResult, bundle: Bundle, config: ExperimentConfig) -> None:
    U = result.trajectory
    if bundle.truth is not None:
        result.recon_error = relative_error(U, bundle.truth)
    exp = bundle.experiment
    if exp is not None:
        grid = exp.problem.grid
        for t in config.eit.center_times:
            frame = trajectory_at(U, grid, t)
            try:
                err = center_of_mass_error(frame, exp.mesh.vertices, exp.scenario.center(t))
                result.center_errors.append({"t": float(t), "error": err, "degenerate": False})
            except DegenerateFrame:
                result.center_errors.append({"t": float(t), "error": None, "degenerate": True})


def _run_discrete(bundle: Bundle, config: ExperimentConfig, notes: list) -> MethodResult:
    p = bundle.problem
    with _phase("discrete"):
        rep = solve_discrete(p)
    r = MethodResult("discrete", p.alpha, el_residual=rep.el_residual, cost=rep.cost,
                     q_norm_max=rep.q_norm_max, q_norm_bound=rep.q_norm_bound,
                     q_norm_bound_ok=rep.q_norm_bound_ok, trajectory=rep.trajectory.values,
                     timings=dict(rep.timings))
    if config.oracle:
        if p.N * p.m <= ORACLE_MAX_UNKNOWNS:
            t0 = time.perf_counter()
            with _phase("oracle"):
                ref = direct_tikhonov_oracle(p)
            r.timings["oracle"] = time.perf_counter() - t0
            r.oracle_gap = float(np.max(np.abs(ref.values - rep.trajectory.values)))
        else:
            notes.append(f"oracle skipped at alpha={p.alpha!r}: "
                         f"{p.N * p.m} unknowns > {ORACLE_MAX_UNKNOWNS}")
    return r


def _run_continuous(bundle: Bundle, config: ExperimentConfig, notes: list) -> MethodResult:
    p = bundle.problem
    cfl = cfl_check(p.ops, p.grid, p.alpha, p.residual_weight_norm())
    r = MethodResult("continuous", p.alpha, cfl_pass=cfl.passed, cfl_margin=cfl.margin)
    if not cfl.passed:
        r.status = "cfl_violation"
        notes.append(f"continuous skipped at alpha={p.alpha!r}: step exceeds "
                     f"max_dt={cfl.max_dt!r}")
        return r
    refine = None
    if config.refine and bundle.refine is not None:
        def refine(g):
            return bundle.refine(g, p.alpha)
    with _phase("continuous"):
        rep = solve_continuous(p, refine=refine)
    t0 = time.perf_counter()
    r.el_residual = euler_lagrange_residual_continuous(p, rep.trajectory)
    r.timings = dict(rep.timings)
    r.timings["diagnostics"] += time.perf_counter() - t0
    r.cost = rep.cost
    r.spectrum_ok = rep.spectrum_ok
    r.self_convergence = rep.self_convergence
    r.q_norm_max = float(np.max(rep.riccati.norms()))
    r.trajectory = rep.trajectory.values
    return r


def _emit_frames(result: MethodResult, index: int, bundle: Bundle, out: Path) -> None:
    d = out / "frames" / result.method / f"alpha_{index}"
    d.mkdir(parents=True, exist_ok=True)
    for k, values in enumerate(result.trajectory):
        px, lo, hi = scale_frame(grid_image(values, bundle.mesh))
        path = d / f"t{k:03d}.pgm"
        write_pgm(path, px, f"{result.method} alpha={result.alpha!r} t_index={k} "
                            f"min={lo!r} max={hi!r}")
        result.frames.append({"index": k, "path": str(path.relative_to(out)),
                              "min": lo, "max": hi})


def run_experiment(config: ExperimentConfig, write: bool = True,
                   bundle: Bundle | None = None) -> RunReport:
    """Solve the configured problem for every ``alpha`` and method.

    Writes ``report.csv`` (columns :data:`CSV_COLUMNS`, no timings, so it
    is byte-identical across runs), ``report.json`` (everything including
    timings), ``mesh.txt`` for EIT problems and, with ``emit_frames``,
    ``frames/<method>/alpha_<i>/t<k>.pgm``.

    Raises
    ------
    ConfigError, ProblemError
        The config or the resulting problem is invalid.
    SolverError
        A solver failed; ``exc.phase`` names the stage. A CFL failure of the
        continuous method is recorded in its row instead.
    """
    if config.refine and config.problem == "synthetic" and config.synthetic.noise:
        raise ConfigError("solver.refine", "self-convergence needs noise = 0")
    if bundle is None:
        bundle = build_bundle(config)
    notes = []
    if config.refine and bundle.refine is None:
        notes.append("refine ignored: only the smooth synthetic family can be resampled")
    if config.problem == "synthetic" and config.synthetic.family == "zero":
        notes.append(f"operator norm {operator_norm_max(bundle.problem.ops)!r}")
    rows = []
    out = Path(config.output_dir)
    for i, alpha in enumerate(config.alpha):
        b = bundle.at_alpha(alpha)
        for method in config.methods:
            run = _run_discrete if method == "discrete" else _run_continuous
            r = run(b, config, notes)
            if r.trajectory is not None:
                _judge(r, b, config)
                if config.emit_frames and write:
                    _emit_frames(r, i, b, out)
            for key in ("el_residual", "cost", "oracle_gap", "cfl_margin", "q_norm_max",
                        "recon_error", "self_convergence"):
                v = getattr(r, key)
                if v is not None and not np.isfinite(v):
                    raise SolverError(f"[{method}] non-finite {key} at alpha={alpha!r}")
            rows.append(r)
    report = RunReport(config, rows, notes=notes)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report.csv_text())
        (out / "report.json").write_text(report.json_text())
        report.files = {"csv": str(out / "report.csv"), "json": str(out / "report.json")}
        if bundle.mesh is not None:
            write_mesh(out / "mesh.txt", bundle.mesh)
            report.files["mesh"] = str(out / "mesh.txt")
    return report


def oracle_tolerance(problem: Problem) -> float:
    """``1e-8 (1 + ||u0|| + ||y||)``."""
    return 1e-8 * (1 + np.linalg.norm(problem.cfg.u0) + problem.data.norm)


def oracle_check(config: ExperimentConfig, bundle: Bundle | None = None) -> list:
    """Compare the discrete solve with the dense reference for every ``alpha``.

    Returns ``[(alpha, gap, tolerance), ...]``.

    Raises
    ------
    ProblemTooLarge
        The dense system exceeds the size guard.
    OracleMismatch
        Some gap exceeds its tolerance (raised after all values are computed).
    """
    if bundle is None:
        bundle = build_bundle(config)
    out = []
    for alpha in config.alpha:
        p = bundle.at_alpha(alpha).problem
        with _phase("oracle"):
            ref = direct_tikhonov_oracle(p)
        with _phase("discrete"):
            sol = solve_discrete(p)
        gap = float(np.max(np.abs(ref.values - sol.trajectory.values)))
        out.append((alpha, gap, oracle_tolerance(p)))
    bad = [(a, g, t) for a, g, t in out if not g <= t]
    if bad:
        exc = OracleMismatch(
            "; ".join(f"alpha={a!r}: gap {g:.3e} > {t:.3e}" for a, g, t in bad))
        exc.results = out
        raise exc
    return out
