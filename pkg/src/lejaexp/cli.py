"""Command-line harness: single solves, convergence and work-precision sweeps.

Examples
--------
lejaexp solve --case c --method exprb43 --tol 1e-8
lejaexp convergence --case a --method exprb32 --out conv.csv
lejaexp work-precision --case b --method exprb53s3 --out wp.csv
lejaexp leja-points --leja-count 100 --out nodes.txt
"""
import argparse
import csv
import enum
import io
import math
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import LejaError, RejectionBudgetExceeded, StepFailure
from .integrators import MethodId, method_names
from .leja import (DEFAULT_GRID_RESOLUTION, DEFAULT_MAX_POINTS, default_leja,
                   format_leja_points, generate_leja_points, save_leja_points)
from .problems import CASES, ProblemName, make_problem
from .stepper import ControllerConfig, integrate_adaptive, integrate_constant
from . import studies

CONVERGENCE_HEADER = ("dt", "l2_global_error", "total_mv", "total_rhs_evals")
WORK_PRECISION_HEADER = ("tol", "l2_global_error", "total_mv", "accepted", "rejected",
                         "wall_seconds")
SOLVE_LEJA_TOL = 1e-12
SOLVE_ADAPTIVE_TOL = 1e-8


class Mode(enum.Enum):
    CONSTANT = "constant"
    ADAPTIVE = "adaptive"
    CONVERGENCE = "convergence"
    WORK_PRECISION = "work-precision"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    mode: Mode
    problem: str = None
    case: str = None
    n: int = None
    eta: float = None
    t_final: float = None
    method: str = None
    tol: float = None
    tols: list = field(default_factory=list)
    dt: float = None
    dts: list = field(default_factory=list)
    leja_count: int = DEFAULT_MAX_POINTS
    domain: str = None
    refresh_every: int = 25
    richardson: bool = False
    error: bool = False
    jobs: int = 1
    out: str = None

    def spec(self):
        try:
            return make_problem(self.problem, self.case, self.n, self.eta, self.t_final)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def method_id(self):
        if not self.method:
            raise ConfigError(f"--method is required; valid methods: {', '.join(method_names())}")
        try:
            return MethodId.parse(self.method)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self):
        method = self.method_id()
        spec = self.spec()
        if self.leja_count < 2:
            raise ConfigError("--leja-count must be at least 2")
        if self.refresh_every < 1:
            raise ConfigError("--refresh-every must be positive")
        if self.domain is not None and self.domain not in ("real", "imag", "auto"):
            raise ConfigError("--domain must be one of real, imag, auto")
        for name in ("tol", "dt"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"--{name} must be positive")
        if any(not v > 0 for v in self.tols) or any(not v > 0 for v in self.dts):
            raise ConfigError("sweep values must be positive")
        if self.dt is not None and self.dt > spec.t_final * (1 + 1e-12):
            raise ConfigError(f"--dt must not exceed t_final = {spec.t_final:g}")
        if self.mode in (Mode.ADAPTIVE, Mode.WORK_PRECISION):
            if not method.embedded and not self.richardson:
                raise ConfigError(f"{method.label} has no embedded error estimate; pass "
                                  "--richardson or choose one of: "
                                  + ", ".join(m.label for m in MethodId if m.embedded))
        return self


# ------------------------------------------------------------------ parsing


def _float_list(text):
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _bool(text):
    key = str(text).strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# option name -> converter for values read from a config file
_CONVERTERS = {
    "problem": str, "case": str, "n": int, "eta": float, "t_final": float, "method": str,
    "tol": float, "tols": _float_list, "dt": float, "dts": _float_list, "leja_count": int,
    "domain": str, "refresh_every": int, "richardson": _bool, "error": _bool, "jobs": int,
    "out": str, "grid_resolution": int,
}


def read_config(path):
    """Parse a key=value file; ``#`` starts a comment, dashes equal underscores."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}; valid keys: "
                              + ", ".join(sorted(_CONVERTERS)))
        try:
            values[key] = _CONVERTERS[key](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lejaexp",
        description="Exponential integrators with Leja interpolation: solves and studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sweep):
        p.add_argument("--config", help="key=value file; command-line flags take precedence")
        p.add_argument("--problem", help="burgers, allen-cahn or lin-adv-diff")
        p.add_argument("--case", choices=sorted(CASES), help="benchmark case label")
        p.add_argument("--n", type=int, help="override the number of grid points")
        p.add_argument("--eta", type=float, help="override the advection coefficient")
        p.add_argument("--t-final", dest="t_final", type=float, help="override the end time")
        p.add_argument("--method", help="integrator name, e.g. exprb43")
        p.add_argument("--leja-count", dest="leja_count", type=int,
                       help=f"Leja nodes available per call (default {DEFAULT_MAX_POINTS})")
        p.add_argument("--domain", choices=("real", "imag", "auto"),
                       help="spectral domain; default is the problem's recommendation")
        p.add_argument("--refresh-every", dest="refresh_every", type=int,
                       help="accepted steps between spectrum estimates (default 25)")
        p.add_argument("--richardson", action="store_const", const=True,
                       help="estimate errors by step doubling")
        p.add_argument("--out", help="output file (default: standard output)")
        if sweep:
            p.add_argument("--jobs", type=int, help="worker threads for sweep points")

    p = sub.add_parser("solve", help="one integration with a summary")
    common(p, sweep=False)
    p.add_argument("--tol", type=float, help="adaptive tolerance; Leja tolerance with --dt")
    p.add_argument("--dt", type=float, help="constant step size (disables adaptivity)")
    p.add_argument("--error", action="store_const", const=True,
                   help="report the l2 error against the reference solution")

    p = sub.add_parser("convergence", help="constant-step sweep, CSV output")
    common(p, sweep=True)
    p.add_argument("--tol", type=float, help="Leja tolerance (default 1e-14)")
    p.add_argument("--dts", type=_float_list, help="step sizes (default t_final/2**k, k=0..10)")

    p = sub.add_parser("work-precision", help="tolerance sweep, CSV output")
    common(p, sweep=True)
    p.add_argument("--tols", type=_float_list, help="tolerances (default 1e-4 .. 1e-10)")

    p = sub.add_parser("leja-points", help="write Leja nodes, one per line")
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--leja-count", dest="leja_count", type=int, help="number of nodes")
    p.add_argument("--grid-resolution", dest="grid_resolution", type=int,
                   help=f"candidate grid size (default {DEFAULT_GRID_RESOLUTION})")
    p.add_argument("--out", help="output file (default: standard output)")
    return parser


def _merged(args):
    """Config-file values overlaid by explicitly given flags."""
    values = read_config(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        values[key] = value
    return values


def config_from_args(args):
    values = _merged(args)
    if args.command == "solve":
        mode = Mode.CONSTANT if values.get("dt") is not None else Mode.ADAPTIVE
    else:
        mode = Mode(args.command)
    known = {f.name for f in fields(RunConfig)}
    ignored = sorted(set(values) - known)
    if ignored:
        raise ConfigError(f"options not used by {args.command}: {', '.join(ignored)}")
    return RunConfig(mode=mode, **values).validate()


# ------------------------------------------------------------------ output


def _fmt(value):
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def format_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(line, cfg):
    # keep stdout clean for CSV when no output file is given
    print(line, file=sys.stdout if cfg.out else sys.stderr)


# ----------------------------------------------------------------- commands


def _leja(cfg):
    return default_leja(cfg.leja_count)


def run_solve(cfg):
    """One integration. Returns ``(RunRecord, summary_text)``."""
    spec, method = cfg.spec(), cfg.method_id()
    f = spec.operator()
    policy = studies.make_policy(spec, cfg.domain, cfg.refresh_every)
    u0 = spec.initial_condition()
    if cfg.mode is Mode.CONSTANT:
        tol = cfg.tol if cfg.tol is not None else SOLVE_LEJA_TOL
        rec = integrate_constant(method, f, u0, cfg.dt, spec.t_final, policy, _leja(cfg), tol)
    else:
        tol = cfg.tol if cfg.tol is not None else SOLVE_ADAPTIVE_TOL
        rec = integrate_adaptive(method, f, u0, ControllerConfig(tol), spec.t_final, policy,
                                 _leja(cfg), cfg.richardson)
    lines = [
        f"problem: {spec.label}",
        f"method: {method.label}",
        f"mode: {cfg.mode.value}",
        f"final time: {rec.t_final!r}",
        f"accepted steps: {rec.accepted_steps}",
        f"rejected steps: {rec.rejected_steps}",
        f"matrix-vector products: {rec.total_mv}",
        f"rhs evaluations: {rec.total_rhs_evals}",
        f"spectrum refreshes: {rec.spectrum_refreshes}",
    ]
    if cfg.error or spec.name is ProblemName.LINEAR_ADV_DIFF:
        ref = studies.reference_solution(spec)
        err = float(np.linalg.norm(rec.final_state - ref.state))
        lines.append(f"l2 error vs {ref.source}: {err:.6e}")
    return rec, "\n".join(lines)


def run_convergence(cfg):
    """Constant-step sweep. Returns ``(csv_text, slope)``."""
    spec = cfg.spec()
    dts = cfg.dts or studies.default_dts(spec.t_final)
    ref = studies.reference_solution(spec)
    tol = cfg.tol if cfg.tol is not None else studies.CONVERGENCE_LEJA_TOL
    rows = studies.convergence_sweep(spec, cfg.method_id(), dts, ref.state, tol, cfg.domain,
                                     cfg.refresh_every, _leja(cfg), cfg.jobs)
    floor = studies.error_floor(float(np.linalg.norm(ref.state)), ref.discrepancy)
    slope = studies.fit_slope([r.dt for r in rows], [r.l2_global_error for r in rows], floor)
    text = format_csv(CONVERGENCE_HEADER,
                      [(r.dt, r.l2_global_error, r.total_mv, r.total_rhs_evals) for r in rows])
    return text, slope


def run_work_precision(cfg):
    """Tolerance sweep. Returns ``(csv_text, rows)``."""
    spec = cfg.spec()
    tols = cfg.tols or list(studies.WORK_PRECISION_TOLS)
    ref = studies.reference_solution(spec)
    rows = studies.work_precision_sweep(spec, cfg.method_id(), tols, ref.state, cfg.domain,
                                        cfg.refresh_every, _leja(cfg), cfg.richardson, cfg.jobs)
    text = format_csv(WORK_PRECISION_HEADER,
                      [(r.tol, r.l2_global_error, r.total_mv, r.accepted, r.rejected,
                        float(f"{r.wall_seconds:.6f}")) for r in rows])
    return text, rows


def run_leja_points(values):
    count = values.get("leja_count", DEFAULT_MAX_POINTS)
    grid = values.get("grid_resolution", DEFAULT_GRID_RESOLUTION)
    if count < 1:
        raise ConfigError("--leja-count must be positive")
    try:
        leja = generate_leja_points(count, grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = values.get("out")
    if out:
        save_leja_points(leja, out)
    else:
        sys.stdout.write(format_leja_points(leja))
    return leja


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "leja-points":
            run_leja_points(_merged(args))
            return 0
        cfg = config_from_args(args)
        if cfg.mode in (Mode.CONSTANT, Mode.ADAPTIVE):
            rec, summary = run_solve(cfg)
            if cfg.out:
                spec = cfg.spec()
                _emit(format_csv(("x", "u"), zip(spec.grid.x.tolist(),
                                                 rec.final_state.tolist())), cfg.out)
            print(summary)
        elif cfg.mode is Mode.CONVERGENCE:
            text, slope = run_convergence(cfg)
            _emit(text, cfg.out)
            _report(f"least-squares slope of log(error) vs log(dt): {slope:.3f}", cfg)
        else:
            text, rows = run_work_precision(cfg)
            _emit(text, cfg.out)
            failed = sum(r.failed for r in rows)
            _report(f"work-precision: {len(rows)} tolerances, {failed} failed", cfg)
    except ConfigError as exc:
        parser.exit(2, f"lejaexp: error: {exc}\n")
    except (StepFailure, LejaError, RejectionBudgetExceeded) as exc:
        parser.exit(1, f"lejaexp: integration failed: {exc}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
