"""Time-integration drivers: constant step, adaptive embedded, Richardson."""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectionBudgetExceeded, StepFailure
from .integrators import MethodId, StepOutput, step
from .leja import SpectralBounds
from .linops import RhsOperator, SpectrumCache

# Remaining time below this fraction of t_end counts as "arrived".
_LANDING_RTOL = 1e-12


@dataclass(frozen=True)
class ControllerConfig:
    """Elementary step-size controller settings.

    dt_new = dt * clamp(safety * (tol / err)**(1 / (order_low + 1)), fac_min, fac_max)
    """

    tol: float
    safety: float = 0.9
    fac_min: float = 0.2
    fac_max: float = 5.0
    dt_init: float = None
    max_rejections_per_step: int = 30
    leja_tol: float = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.fac_min < 1 < self.fac_max:
            raise ValueError("need fac_min < 1 < fac_max")
        if self.dt_init is not None and not self.dt_init > 0:
            raise ValueError("dt_init must be positive")
        if self.max_rejections_per_step < 1:
            raise ValueError("max_rejections_per_step must be >= 1")

    def factor(self, err, order_low):
        if err == 0.0:
            return self.fac_max
        raw = self.safety * (self.tol / err) ** (1.0 / (order_low + 1))
        return min(self.fac_max, max(self.fac_min, raw))


@dataclass(frozen=True)
class TraceEntry:
    t: float
    dt: float
    error_estimate: float
    accepted: bool
    mv_products: int = 0


@dataclass
class RunRecord:
    final_state: np.ndarray
    t_final: float
    accepted_steps: int = 0
    rejected_steps: int = 0
    total_mv: int = 0
    total_rhs_evals: int = 0
    step_trace: list = field(default_factory=list)
    spectrum_refreshes: int = 0


def _as_operator(f, u0):
    return f if isinstance(f, RhsOperator) else RhsOperator(f, np.size(u0))


class _FixedBounds:
    def __init__(self, bounds):
        self._bounds = bounds
        self.refresh_count = 0

    def bounds(self, f, u, f_of_u=None):
        return self._bounds

    def record_accepted(self):
        pass


def _as_policy(bounds_policy):
    if bounds_policy is None:
        return SpectrumCache()
    if isinstance(bounds_policy, SpectralBounds):
        return _FixedBounds(bounds_policy)
    return bounds_policy


def richardson_step(method, f, u_n, dt, bounds, leja=None, tol=1e-10, step_fn=step):
    """One full step against two half steps.

    Returns a StepOutput with ``u_low`` the full-step result, ``u_high`` the
    two-half-step result and ``error_estimate = ||u_high - u_low|| / (2**p - 1)``.
    """
    method = MethodId.parse(method)
    full = step_fn(method, f, u_n, dt, bounds, leja, tol)
    half1 = step_fn(method, f, u_n, 0.5 * dt, bounds, leja, tol)
    half2 = step_fn(method, f, half1.u_high, 0.5 * dt, bounds, leja, tol)
    p = method.order_high
    est = float(np.linalg.norm(half2.u_high - full.u_high)) / (2.0 ** p - 1.0)
    mv = full.mv_products + half1.mv_products + half2.mv_products
    evals = full.rhs_evals + half1.rhs_evals + half2.rhs_evals
    return StepOutput(full.u_high, half2.u_high, est, mv, evals)


def richardson_error(method, f, u_n, dt, bounds, leja=None, tol=1e-10):
    """Return ``(two_half_step_solution, error_estimate)``."""
    out = richardson_step(method, f, u_n, dt, bounds, leja, tol)
    return out.u_high, out.error_estimate


def integrate_constant(method, f, u0, dt, t_end, bounds_policy=None, leja=None, tol=1e-10,
                       step_fn=step):
    """Fixed-step integration from 0 to ``t_end``; the last step is shortened to land."""
    method = MethodId.parse(method)
    if not dt > 0 or not t_end > 0:
        raise ValueError("dt and t_end must be positive")
    if dt > t_end * (1 + _LANDING_RTOL):
        raise ValueError("dt must not exceed t_end")
    f = _as_operator(f, u0)
    policy = _as_policy(bounds_policy)
    evals0 = f.eval_count
    u = np.array(u0, dtype=np.float64)
    rec = RunRecord(final_state=u, t_final=0.0)
    t = 0.0
    nsteps = max(1, int(math.ceil(t_end / dt * (1 - _LANDING_RTOL))))
    for k in range(nsteps):
        h = dt if k < nsteps - 1 else t_end - t
        t_start = t
        bounds = policy.bounds(f, u)
        try:
            out = step_fn(method, f, u, h, bounds, leja, tol)
        except StepFailure as exc:
            exc.t = t
            raise
        u = out.u_high
        t = t_end if k == nsteps - 1 else t + h
        policy.record_accepted()
        rec.accepted_steps += 1
        rec.total_mv += out.mv_products
        rec.step_trace.append(TraceEntry(t_start, h, out.error_estimate, True, out.mv_products))
    rec.final_state = u
    rec.t_final = t
    rec.total_rhs_evals = f.eval_count - evals0
    rec.spectrum_refreshes = policy.refresh_count
    return rec


def integrate_adaptive(method, f, u0, controller, t_end, bounds_policy=None, leja=None,
                       richardson=False, step_fn=step):
    """Adaptive integration with an embedded error estimate.

    A step is accepted when its estimate is <= ``controller.tol``. Interpolation
    failures halve the step. Non-embedded methods need ``richardson=True``.
    """
    method = MethodId.parse(method)
    if not method.embedded and not richardson:
        raise ValueError(f"{method.value} has no embedded estimate; enable Richardson "
                         "extrapolation or choose an embedded method")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    f = _as_operator(f, u0)
    policy = _as_policy(bounds_policy)
    leja_tol = controller.leja_tol if controller.leja_tol is not None else controller.tol
    order_low = method.order_low
    evals0 = f.eval_count

    u = np.array(u0, dtype=np.float64)
    t = 0.0
    dt = controller.dt_init if controller.dt_init is not None else t_end / 1000.0
    rec = RunRecord(final_state=u, t_final=0.0)
    consecutive = 0
    while t_end - t > _LANDING_RTOL * t_end:
        last = dt >= t_end - t
        h = t_end - t if last else dt
        t_start = t
        bounds = policy.bounds(f, u)
        try:
            if richardson:
                out = richardson_step(method, f, u, h, bounds, leja, leja_tol, step_fn)
            else:
                out = step_fn(method, f, u, h, bounds, leja, leja_tol)
            err = out.error_estimate
            ok = err <= controller.tol
            mv = out.mv_products
        except StepFailure as exc:
            # interpolation trouble: discard everything and halve
            err, ok, mv = math.inf, False, exc.mv_products
            rec.rejected_steps += 1
            rec.total_mv += mv
            rec.step_trace.append(TraceEntry(t, h, err, False, mv))
            consecutive += 1
            if consecutive > controller.max_rejections_per_step:
                raise RejectionBudgetExceeded(
                    f"{consecutive} consecutive rejections at t={t:.6g}", rec.step_trace) from exc
            dt = 0.5 * h
            continue
        rec.total_mv += mv
        if ok:
            u = out.u_high
            t = t_end if last else t + h
            policy.record_accepted()
            rec.accepted_steps += 1
            consecutive = 0
        else:
            rec.rejected_steps += 1
            consecutive += 1
            if consecutive > controller.max_rejections_per_step:
                rec.step_trace.append(TraceEntry(t, h, err, False, mv))
                raise RejectionBudgetExceeded(
                    f"{consecutive} consecutive rejections at t={t:.6g}", rec.step_trace)
        rec.step_trace.append(TraceEntry(t_start, h, err, ok, mv))
        dt = h * controller.factor(err, order_low)
    rec.final_state = u
    rec.t_final = t
    rec.total_rhs_evals = f.eval_count - evals0
    rec.spectrum_refreshes = policy.refresh_count
    return rec
