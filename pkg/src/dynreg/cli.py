"""Command-line entry point.

    dynreg run CONFIG [--seed N] [--out DIR]
    dynreg oracle-check CONFIG [--seed N] [--out DIR]
    dynreg timing CONFIG [--nt 50,100,200] [--seed N] [--out DIR]

Exit status is 0 on success, 1 for configuration or problem errors and 2
for solver failures. ``run`` still writes its report when a continuous
solve is skipped for violating the step-size condition, then exits with 2;
``oracle-check`` exits with 2 on a mismatch.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, ProblemError, SolverError
from .harness.config import load_config
from .harness.runner import oracle_check, run_experiment
from .harness.timing import timing_scaling_suite


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", type=Path, help="experiment config file (INI)")
    common.add_argument("--seed", type=int, default=None, help="override [run] seed")
    common.add_argument("--out", type=Path, default=None, help="override [run] output_dir")

    p = argparse.ArgumentParser(prog="dynreg", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="solve and write reports")
    sub.add_parser("oracle-check", parents=[common],
                   help="compare the discrete solve with the dense reference")
    t = sub.add_parser("timing", parents=[common], help="wall time versus number of steps")
    t.add_argument("--nt", type=_int_list, default=None, help="step counts, e.g. 50,100,200")
    t.add_argument("--repeats", type=int, default=None)
    return p


def _run(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    report = run_experiment(cfg)
    for r in report.rows:
        extra = "" if r.center_error_max is None else f" center_err={r.center_error_max:.4g}"
        el = "-" if r.el_residual is None else f"{r.el_residual:.3e}"
        print(f"{r.method:10s} alpha={r.alpha:<10.4g} {r.status:13s} el_residual={el}{extra}")
    for note in report.notes:
        print(f"note: {note}")
    print(f"wrote {report.files['csv']}")
    failed = [r for r in report.rows if r.status != "ok"]
    if failed:
        print(f"solver error: {len(failed)} row(s) not solved "
              f"({', '.join(sorted({r.status for r in failed}))})", file=sys.stderr)
        return 2
    return 0


def _oracle(args) -> None:
    cfg = load_config(args.config, args.seed, args.out)
    try:
        results = oracle_check(cfg)
    except SolverError as exc:
        for a, g, t in getattr(exc, "results", []):
            print(f"alpha={a:<10.4g} gap={g:.3e} tol={t:.3e} {'ok' if g <= t else 'FAIL'}")
        raise
    for a, g, t in results:
        print(f"alpha={a:<10.4g} gap={g:.3e} tol={t:.3e} ok")


def _timing(args) -> None:
    cfg = load_config(args.config, args.seed, args.out)
    table = timing_scaling_suite(cfg, args.nt, args.repeats)
    for n, s in zip(table.n_steps, table.seconds):
        print(f"n_steps={n:<8d} seconds={s:.6f}")
    print(f"log-log slope {table.slope:.3f}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "timing.csv").write_text(table.csv_text())
    print(f"wrote {out / 'timing.csv'}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _run, "oracle-check": _oracle, "timing": _timing}[args.command]
    try:
        code = handler(args) or 0
    except (ConfigError, ProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
