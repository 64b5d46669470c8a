"""Command-line front end: solve, sweep, critical, verify, simulate, extremality.

Exit codes: 0 ok, 1 verification failed, 2 usage, 3 guard, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from . import __version__
from .chain_sim import THREADS_ENV, chi_square, empirical_stats, sample, solution_field, write_batch
from .extremality import kesten_stigum
from .gibbs_oracle import (
    BoundaryLawField,
    EnumerationGuardError,
    check_enumeration_guard,
    compatibility_residual,
    finite_measure,
)
from .lattice import ModelSpec, build_ball
from .psos_limit import PSOSOverflowError, PSOSParams, classify_psos, theta0, THETA0_PRIME
from .ti_solver import (
    PhaseRecord,
    TISolution,
    classify,
    count_transition,
    critical_values,
    solve_x1,
    theta_c_numeric,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_GUARD, EXIT_IO = 0, 1, 2, 3, 4
SWEEP_SCHEMA = "sos-tree-sweep/1"
SOLVE_SCHEMA = "sos-tree-solve/1"
COLUMNS = ("theta", "k", "model", "p", "count", "index", "branch", "multiplicity",
           "x", "y", "lambda1", "lambda2", "eta", "verdict")
VERIFY_TOL = 1e-9
MAX_K = 6
VERIFY_MAX_K, VERIFY_MAX_N = 3, 2


class GuardError(Exception):
    """A request outside the supported or enumerable range."""


class UsageError(Exception):
    pass


def fmt(v) -> str:
    """17 significant digits for floats, so values round-trip exactly."""
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def parse_p(text: str) -> float:
    if text.strip().lower() == "inf":
        return math.inf
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"p must be a positive real or 'inf', got {text!r}")
    if not p > 0 or math.isnan(p):
        raise argparse.ArgumentTypeError(f"p must be positive, got {text!r}")
    return p


def threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1") or 1))
    except ValueError:
        return 1


# ------------------------------------------------------------------ models

def check_model(args) -> None:
    """Validate the (model, k, m, p) combination; raises UsageError or GuardError."""
    if args.m != 2:
        raise GuardError(f"only m = 2 is supported, got m={args.m}")
    if args.model == "p-sos":
        if args.k != 2:
            raise UsageError("the p-sos model is implemented for k = 2 only")
        if args.p is None:
            args.p = math.inf
    elif not 2 <= args.k <= MAX_K:
        raise UsageError(f"k must lie in [2, {MAX_K}], got {args.k}")


def model_spec(args, theta: float) -> ModelSpec:
    if args.model == "p-sos":
        return ModelSpec.p_sos(theta, args.p, args.m)
    return ModelSpec.inf_sos(theta, args.m)


def two_step(args, theta: float) -> float:
    return PSOSParams(theta, args.p).s if args.model == "p-sos" else 0.0


def record_at(args, theta: float) -> PhaseRecord:
    if args.model == "p-sos":
        return classify_psos(theta, args.p)
    return classify(theta, args.k)


def solution_rows(args, rec: PhaseRecord) -> list[dict]:
    s = two_step(args, rec.theta)
    rows = []
    for i, sol in enumerate(rec.solutions):
        ks = kesten_stigum(sol, rec.theta, rec.k, check_residual=False, s=s)
        rows.append({
            "theta": rec.theta, "k": rec.k, "model": args.model,
            "p": args.p if args.model == "p-sos" else None,
            "count": rec.count, "index": i, "branch": sol.branch,
            "multiplicity": sol.multiplicity, "x": sol.x, "y": sol.y,
            "lambda1": ks.lambda1, "lambda2": ks.lambda2, "eta": ks.eta,
            "verdict": ks.verdict,
        })
    return rows


# ------------------------------------------------------------------ output

def echo(args, command: str, schema: str) -> dict:
    """Resolved configuration: every flag with its default filled in."""
    conf = {"tool": f"sos-tree {__version__}", "schema": schema, "command": command}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "command", "out", "format"):
            continue
        conf[key] = val
    return conf


def render_csv(header: dict, rows: list[dict]) -> str:
    lines = [f"# {k}: {fmt(v)}" for k, v in header.items()]
    lines.append(",".join(COLUMNS))
    lines += [",".join(fmt(r[c]) for c in COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def render_json(header: dict, rows: list[dict]) -> str:
    doc = {"header": {k: _json_value(v) for k, v in header.items()},
           "columns": list(COLUMNS),
           "rows": [{c: _json_value(r[c]) for c in COLUMNS} for r in rows]}
    return json.dumps(doc, indent=1) + "\n"


def render_text(header: dict, rows: list[dict], columns: Sequence[str] = COLUMNS) -> str:
    lines = [f"# {k}: {fmt(v)}" for k, v in header.items()]
    cells = [list(columns)] + [[fmt(r[c]) if not isinstance(r[c], float) else f"{r[c]:.12g}"
                                for c in columns] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(columns))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def render(fmt_name: str, header: dict, rows: list[dict]) -> str:
    if fmt_name == "json":
        return render_json(header, rows)
    if fmt_name == "csv":
        return render_csv(header, rows)
    return render_text(header, rows)


def emit(text: str, out: Optional[str]) -> None:
    """Write to a path or stdout; OSError propagates and maps to exit 4."""
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


# ------------------------------------------------------------------ commands

def cmd_solve(args) -> int:
    check_model(args)
    rec = record_at(args, args.theta)
    rows = solution_rows(args, rec)
    header = echo(args, "solve", SOLVE_SCHEMA)
    header["count"] = rec.count
    emit(render(args.format or "text", header, rows), args.out)
    return EXIT_OK


def sweep_grid(args) -> list[float]:
    lo, hi, step = args.theta_min, args.theta_max, args.step
    if hi < lo:
        return []
    n = int(math.floor((hi - lo) / step + 1e-9))
    grid = [lo + i * step for i in range(n + 1)]
    if args.critical:
        grid += [t for t in critical_points(args) if lo <= t <= hi]
    return sorted(set(grid))


def critical_points(args) -> list[float]:
    if args.model == "p-sos":
        return [theta0(), THETA0_PRIME] if math.isinf(args.p) else []
    if args.k in (2, 3):
        return critical_values(args.k).transition_points()
    return []


def cmd_sweep(args) -> int:
    check_model(args)
    if not (args.step > 0 and args.theta_min > 0):
        raise UsageError("need --step > 0 and --theta-min > 0")
    grid = sweep_grid(args)

    def one(theta):
        return solution_rows(args, record_at(args, theta))

    workers = threads()
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, grid))
    else:
        parts = [one(t) for t in grid]
    rows = [r for part in parts for r in part]
    header = echo(args, "sweep", SWEEP_SCHEMA)
    header["points"] = len(grid)
    emit(render(args.format or "csv", header, rows), args.out)
    return EXIT_OK


def cmd_critical(args) -> int:
    check_model(args)
    report = {"tool": f"sos-tree {__version__}", "command": "critical", "model": args.model, "k": args.k}
    if args.model == "p-sos" or args.k == 2:
        t0 = theta0()
        t0_count = count_transition(lambda t: len(solve_x1(t, 2)) >= 3, 0.1, 0.2)
        t0p_count = count_transition(lambda t: classify_psos(t).count >= 5, 0.2, 0.4)
        report.update({
            "theta0": t0, "theta0_count_transition": t0_count, "theta0_delta": abs(t0 - t0_count),
            "theta0_prime": THETA0_PRIME, "theta0_prime_count_transition": t0p_count,
            "theta0_prime_delta": abs(THETA0_PRIME - t0p_count),
        })
    elif args.k == 3:
        cv = critical_values(3)
        tc_num = theta_c_numeric()
        hat_b = cv.extra["hat_theta_c_bisection"]
        report.update({
            "theta_c_closed": cv.theta_c, "theta_c_numeric": tc_num,
            "theta_c_delta": abs(cv.theta_c - tc_num),
            "hat_theta_c_newton": cv.hat_theta_c, "hat_theta_c_bisection": hat_b,
            "hat_theta_c_delta": abs(cv.hat_theta_c - hat_b),
            "tilde_theta": cv.tilde_theta, "eta_c": cv.eta_c, "y0": cv.extra["y0"],
        })
    else:
        raise UsageError("critical values are available for k in {2, 3} or the p-sos model")
    if args.format == "json":
        text = json.dumps({k: _json_value(v) for k, v in report.items()}, indent=1) + "\n"
    else:
        text = "".join(f"{k}: {fmt(v)}\n" for k, v in report.items())
    emit(text, args.out)
    return EXIT_OK


def perturbed_field(ball, sol: TISolution, k: int, eps: float) -> BoundaryLawField:
    return BoundaryLawField.constant(ball, [(sol.x + eps) ** k, sol.y ** k, 1.0])


def cmd_verify(args) -> int:
    check_model(args)
    if args.k > VERIFY_MAX_K or args.n > VERIFY_MAX_N:
        raise GuardError(f"verify is limited to k <= {VERIFY_MAX_K}, n <= {VERIFY_MAX_N}")
    if args.n < 1:
        raise UsageError("verify needs --n >= 1")
    ball = build_ball(args.k, args.n)
    model = model_spec(args, args.theta)
    check_enumeration_guard(ball, model)
    rec = record_at(args, args.theta)
    lines = [f"# tool: sos-tree {__version__}", "# command: verify"]
    lines += [f"# {k}: {fmt(v)}" for k, v in sorted(vars(args).items()) if k not in ("func", "command")]
    worst = 0.0
    for i, sol in enumerate(rec.solutions):
        z = perturbed_field(ball, sol, args.k, args.perturb)
        res = compatibility_residual(ball, model, z)
        rel = compatibility_residual(ball, model, z, relative=True)
        worst = max(worst, res)
        lines.append(f"solution {i}: x={fmt(sol.x)} y={fmt(sol.y)} residual={res:.3e} relative={rel:.3e}")
    ok = worst <= VERIFY_TOL
    lines.append(f"max residual: {worst:.3e} ({'pass' if ok else 'FAIL'} at {VERIFY_TOL:g})")
    emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    check_model(args)
    if args.count < 0 or args.n < 0:
        raise UsageError("--count and --n must be nonnegative")
    rec = record_at(args, args.theta)
    if not 0 <= args.solution < rec.count:
        raise UsageError(f"solution index {args.solution} out of range 0..{rec.count - 1}")
    sol = rec.solutions[args.solution]
    ball = build_ball(args.k, args.n)
    model = model_spec(args, args.theta)
    batch = sample(ball, model, sol, args.count, args.seed)
    header = echo(args, "simulate", "sos-tree-batch/1")
    header.update({"x": sol.x, "y": sol.y, "vertex_order": "breadth-first"})
    if args.out is not None:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            write_batch(batch, fh, {k: fmt(v) for k, v in header.items()})
    report = [f"# {k}: {fmt(v)}" for k, v in header.items()]
    if args.count > 0:
        st = empirical_stats(batch, args.m)
        for d, law in st["site"].items():
            report.append(f"site depth {d}: " + " ".join(f"{v:.6f}" for v in law))
        for i, row in enumerate(st["pair"]):
            report.append(f"pair row {i}: " + " ".join(f"{v:.6f}" for v in row))
        try:
            check_enumeration_guard(ball, model)
        except EnumerationGuardError:
            report.append("chi-square: skipped (ball too large to enumerate)")
        else:
            measure = finite_measure(ball, model, solution_field(ball, sol))
            stat, pvalue, dof = chi_square(batch, measure)
            report.append(f"chi-square: stat={stat:.4f} dof={dof} p={pvalue:.4g}")
    sys.stdout.write("\n".join(report) + "\n")
    return EXIT_OK


def cmd_extremality(args) -> int:
    check_model(args)
    rec = record_at(args, args.theta)
    s = two_step(args, args.theta)
    header = echo(args, "extremality", "sos-tree-ks/1")
    cols = ("index", "branch", "x", "y", "lambda1", "lambda2", "eta", "eta_lambda2", "verdict")
    rows = []
    for i, sol in enumerate(rec.solutions):
        ks = kesten_stigum(sol, rec.theta, rec.k, check_residual=False, s=s)
        rows.append({"index": i, "branch": sol.branch, "x": sol.x, "y": sol.y,
                     "lambda1": ks.lambda1, "lambda2": ks.lambda2, "eta": ks.eta,
                     "eta_lambda2": ks.eta_lambda2, "verdict": ks.verdict})
    if args.format == "json":
        text = json.dumps({"header": {k: _json_value(v) for k, v in header.items()},
                           "rows": rows}, indent=1) + "\n"
    else:
        text = render_text(header, rows, cols)
    emit(text, args.out)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive finite number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=("inf-sos", "p-sos"), default="inf-sos")
    common.add_argument("--k", type=int, default=2, help="tree order (branching number)")
    common.add_argument("--m", type=int, default=2, help="largest spin value")
    common.add_argument("--p", type=parse_p, default=None, help="p-SOS exponent or 'inf'")
    common.add_argument("--out", default=None, help="output path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json", "text"), default=None)

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--theta", type=positive_float, required=True)

    parser = argparse.ArgumentParser(prog="sos-tree",
                                     description="Translation-invariant Gibbs measures of SOS models on Cayley trees.")
    parser.add_argument("--version", action="version", version=f"sos-tree {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, point], help="all TI solutions at one theta")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="phase diagram over a theta grid")
    p.add_argument("--theta-min", type=float, default=0.01)
    p.add_argument("--theta-max", type=float, default=0.7)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--no-critical", dest="critical", action="store_false",
                   help="do not insert critical points into the grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("critical", parents=[common], help="critical values with cross-checks")
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("verify", parents=[common, point], help="Kolmogorov compatibility by enumeration")
    p.add_argument("--n", type=int, default=2, help="ball radius")
    p.add_argument("--perturb", type=float, default=0.0, help="add EPS to x before checking")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common, point], help="exact sampling on a ball")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--count", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--solution", type=int, default=0, help="index into the solve output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extremality", parents=[common, point], help="Kesten-Stigum test per solution")
    p.set_defaults(func=cmd_extremality)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sos-tree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GuardError, EnumerationGuardError, PSOSOverflowError) as exc:
        print(f"sos-tree: guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"sos-tree: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
