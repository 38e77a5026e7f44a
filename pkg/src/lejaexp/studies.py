"""Reference solutions, step-size sweeps and tolerance sweeps.

The CLI and the acceptance tests share this module so both measure the same
quantities the same way.
"""
import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LejaError, RejectionBudgetExceeded, StepFailure
from .integrators import MethodId
from .leja import SpectralKind
from .linops import SpectrumCache, cfl_domain, jacobian_vector
from .problems import ProblemName
from .stepper import ControllerConfig, integrate_adaptive, integrate_constant

REFERENCE_METHOD = MethodId.EXPRB54s4
CHECK_METHOD = MethodId.EPIRK5P1
REFERENCE_TOL = 1e-13
# Leja tolerance of reference runs, relative to the controller tolerance.
REFERENCE_LEJA_FACTOR = 1e-2
CONVERGENCE_LEJA_TOL = 1e-14
WORK_PRECISION_TOLS = tuple(10.0 ** -k for k in range(4, 11))
CONVERGENCE_LEVELS = 11
# Errors below this many roundoff units of ||reference|| are not fitted.
ROUNDOFF_UNITS = 1e3
# Errors below this multiple of the reference discrepancy are not fitted.
REFERENCE_MARGIN = 100.0
SLOPE_POINTS = 3

_FAILURES = (StepFailure, LejaError, RejectionBudgetExceeded, FloatingPointError)


def cache_dir():
    """Directory for cached reference solutions.

    ``LEJAEXP_CACHE_DIR`` overrides the default ``~/.cache/lejaexp``.
    """
    root = os.environ.get("LEJAEXP_CACHE_DIR")
    return Path(root) if root else Path.home() / ".cache" / "lejaexp"


@dataclass(frozen=True)
class Reference:
    """Reference final state with an estimate of its own error.

    ``discrepancy`` is the l2 distance between two independent high-order
    runs; zero for the dense oracle.
    """

    state: np.ndarray
    discrepancy: float
    source: str


def make_policy(spec, domain=None, refresh_every=25):
    """SpectrumCache for ``spec``.

    ``domain`` is ``None`` (problem default), ``"auto"`` (CFL comparison) or a
    SpectralKind name.
    """
    if domain is None:
        kind = spec.recommended_domain
    elif str(domain).lower() == "auto":
        kind = cfl_domain(spec.grid.h, spec.eta)
    else:
        kind = SpectralKind.parse(domain)
    return SpectrumCache(kind=kind, refresh_every=refresh_every)


def dense_jacobian(f, u):
    """Assemble J(u) column by column; test and oracle use only."""
    u = np.asarray(u, dtype=np.float64)
    f_of_u = f(u)
    cols = [jacobian_vector(f, u, e, f_of_u) for e in np.eye(u.size)]
    return np.column_stack(cols)


def linear_matrix(spec):
    """Exact matrix of the linear problem, assembled from unit vectors."""
    if spec.name is not ProblemName.LINEAR_ADV_DIFF:
        raise ValueError("only the linear problem has a constant matrix")
    f = spec.operator()
    return np.column_stack([f(e) for e in np.eye(spec.n)])


def dense_oracle(spec, u0=None, t=None):
    """exp(t A) u0 for the linear problem via scipy's scaling and squaring."""
    from scipy.linalg import expm

    u0 = spec.initial_condition() if u0 is None else np.asarray(u0, dtype=np.float64)
    t = spec.t_final if t is None else t
    return expm(t * linear_matrix(spec)) @ u0


def _cache_key(spec, method, tol):
    raw = (f"{__version__}|{spec.name.value}|{spec.n}|{spec.eta!r}|{spec.t_final!r}|"
           f"{method.value}|{tol!r}|{REFERENCE_LEJA_FACTOR!r}")
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def _adaptive_reference(spec, method, tol):
    ctrl = ControllerConfig(tol=tol, leja_tol=tol * REFERENCE_LEJA_FACTOR)
    rec = integrate_adaptive(method, spec.operator(), spec.initial_condition(), ctrl,
                             spec.t_final, make_policy(spec))
    return rec.final_state


def reference_solution(spec, use_cache=True, tol=REFERENCE_TOL):
    """Reference solution of ``spec`` at ``t_final``.

    The linear problem uses the dense oracle. Otherwise two adaptive runs at
    ``tol`` are made (the highest-order embedded method and a second
    fifth-order method); their difference is reported as the discrepancy.
    Results are cached as ``.npz`` files keyed by problem, case and settings.
    """
    if spec.name is ProblemName.LINEAR_ADV_DIFF:
        return Reference(dense_oracle(spec), 0.0, "dense-expm")
    path = cache_dir() / f"ref-{spec.label}-{_cache_key(spec, REFERENCE_METHOD, tol)}.npz"
    if use_cache and path.exists():
        with np.load(path) as data:
            return Reference(data["state"], float(data["discrepancy"]), str(data["source"]))
    state = _adaptive_reference(spec, REFERENCE_METHOD, tol)
    check = _adaptive_reference(spec, CHECK_METHOD, tol)
    discrepancy = float(np.linalg.norm(state - check))
    source = f"{REFERENCE_METHOD.label}@{tol:g}"
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.tmp.npz")
        np.savez(tmp, state=state, discrepancy=discrepancy, source=source)
        os.replace(tmp, path)
    return Reference(state, discrepancy, source)


def default_dts(t_final, levels=CONVERGENCE_LEVELS):
    """t_final / 2**k for k = 0 .. levels-1."""
    return [t_final / 2.0 ** k for k in range(levels)]


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    l2_global_error: float
    total_mv: int
    total_rhs_evals: int


@dataclass(frozen=True)
class WorkPrecisionRow:
    tol: float
    l2_global_error: float
    total_mv: int
    accepted: int
    rejected: int
    wall_seconds: float

    @property
    def failed(self):
        return not math.isfinite(self.l2_global_error)


def _map(fn, items, jobs):
    if jobs is None or jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def convergence_sweep(spec, method, dts=None, reference=None, leja_tol=CONVERGENCE_LEJA_TOL,
                      domain=None, refresh_every=25, leja=None, jobs=1):
    """Constant-step runs, one row per dt, in the order given.

    A run that fails becomes a row with NaN error and -1 counters.
    """
    method = MethodId.parse(method)
    dts = default_dts(spec.t_final) if dts is None else list(dts)
    ref = reference if reference is not None else reference_solution(spec).state
    u0 = spec.initial_condition()

    def one(dt):
        try:
            rec = integrate_constant(method, spec.operator(), u0, dt, spec.t_final,
                                     make_policy(spec, domain, refresh_every), leja, leja_tol)
        except _FAILURES:
            return ConvergenceRow(dt, math.nan, -1, -1)
        err = float(np.linalg.norm(rec.final_state - ref))
        if not math.isfinite(err):
            return ConvergenceRow(dt, math.nan, -1, -1)
        return ConvergenceRow(dt, err, rec.total_mv, rec.total_rhs_evals)

    return _map(one, dts, jobs)


def work_precision_sweep(spec, method, tols=WORK_PRECISION_TOLS, reference=None, domain=None,
                         refresh_every=25, leja=None, richardson=False, jobs=1):
    """Adaptive runs, one row per tolerance, in the order given.

    A run that fails becomes a row with NaN error and -1 counters.
    """
    method = MethodId.parse(method)
    ref = reference if reference is not None else reference_solution(spec).state
    u0 = spec.initial_condition()

    def one(tol):
        start = time.perf_counter()
        try:
            rec = integrate_adaptive(method, spec.operator(), u0, ControllerConfig(tol),
                                     spec.t_final, make_policy(spec, domain, refresh_every),
                                     leja, richardson)
        except _FAILURES:
            return WorkPrecisionRow(tol, math.nan, -1, -1, -1, time.perf_counter() - start)
        err = float(np.linalg.norm(rec.final_state - ref))
        return WorkPrecisionRow(tol, err if math.isfinite(err) else math.nan, rec.total_mv,
                                rec.accepted_steps, rec.rejected_steps,
                                time.perf_counter() - start)

    return _map(one, list(tols), jobs)


def error_floor(reference_norm, discrepancy=0.0):
    """Smallest error treated as truncation error rather than noise."""
    eps = np.finfo(np.float64).eps
    return max(REFERENCE_MARGIN * discrepancy, ROUNDOFF_UNITS * eps * reference_norm)


def fit_slope(dts, errors, floor=0.0, points=SLOPE_POINTS):
    """Least-squares slope of log(error) against log(dt).

    Uses the ``points`` smallest step sizes whose error is finite and above
    ``floor``. Returns NaN when fewer than two such points exist.
    """
    dts = np.asarray(dts, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    order = np.argsort(dts)[::-1]
    dts, errors = dts[order], errors[order]
    keep = np.flatnonzero(np.isfinite(errors) & (errors > floor))[-points:]
    if keep.size < 2:
        return math.nan
    return float(np.polyfit(np.log(dts[keep]), np.log(errors[keep]), 1)[0])


def within_jitter(values, increasing, factor=2.0):
    """True if ``values`` is monotone up to a multiplicative ``factor``.

    Each entry may undershoot (``increasing``) or overshoot the running
    extreme of its predecessors by at most ``factor``.
    """
    vals = [float(v) for v in values]
    if increasing:
        best = -math.inf
        for v in vals:
            if v * factor < best:
                return False
            best = max(best, v)
    else:
        best = math.inf
        for v in vals:
            if v > best * factor:
                return False
            best = min(best, v)
    return True
