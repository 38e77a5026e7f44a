"""Exponential Rosenbrock (EXPRB) and EPIRK integrators.

Every method linearizes about the current state ``u`` with ``J = f'(u)`` and
writes ``f(v) = J v + r(v)``. Stage corrections use the remainder differences
``D_i = r(U_i) - r(u) = f(U_i) - f(u) - J (U_i - u)``. With ``Z = dt J``,
``F = f(u)`` and ``P(c) = phi_1(c Z) dt F``:

* RosenbrockEuler (2): u + P(1)
* EXPRB32 (2,3): U2 = u + P(1); high = U2 + 2 dt phi_3(Z) D2
* EXPRB42 (4): U2 = u + 3/4 P(3/4); u + P(1) + 32/9 dt phi_3(Z) D2
* EXPRB43 (3,4): c = (1/2, 1); U3 = u + P(1) + dt phi_1(Z) D2
* EXPRB53s3 (3,5), EXPRB54s4 (4,5): c = (1/2, 9/10) and (1/4, 1/2, 9/10)
* EPIRK4s3 (3,4), EPIRK4s3A (3,4), EPIRK4s3B (4): two phi_1 stages, then
  phi_3/phi_4 corrections built from D2 and D3
* EPIRK5P1 (4,5), EPIRK5P2 (5): EPIRK three-stage form
  u + dt phi_1(Z) F + b2 dt phi_1(g32 Z) D2 + b3 dt phi_k(g33 Z)(-2 D2 + D3)

Per-method coefficients are in the step functions below. Actions sharing an
input vector and a phi index are batched into one ``leja_phi`` call.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .errors import LejaError, StepFailure
from .leja import leja_phi
from .linops import JacobianAction, RhsOperator


@dataclass(frozen=True)
class StepOutput:
    u_low: np.ndarray
    u_high: np.ndarray
    error_estimate: float
    mv_products: int
    rhs_evals: int = 0


def nonlinear_remainder(f, u_n, v, jv):
    """``r(v) = f(v) - J(u_n) v`` with ``jv`` the matrix-free action of J(u_n)."""
    v = np.asarray(v, dtype=np.float64)
    return f(v) - jv(v)


class _StepContext:
    """Shared state of one attempted step: cached f(u), J action, mv tally."""

    def __init__(self, f, u, dt, bounds, leja, tol):
        self.f = f
        self.u = u
        self.dt = dt
        self.bounds = bounds
        self.leja = leja
        self.tol = tol
        self.fu = f(u)
        self.J = JacobianAction(f, u, self.fu)
        self.hF = dt * self.fu
        self.mv = 0
        self.leja_calls = 0

    def phi(self, l, vec, fractions):
        self.leja_calls += 1
        out, rep = leja_phi(self.J, vec, self.dt, fractions, l, self.bounds, self.leja, self.tol)
        self.mv += rep.mv_products
        return out

    def phi1(self, l, vec, fraction=1.0):
        return self.phi(l, vec, [fraction])[0]

    def rdiff(self, U):
        """D = r(U) - r(u): two RHS evaluations and one Jacobian action."""
        d = U - self.u
        if not np.any(d):
            return np.zeros_like(d)
        self.mv += 1
        return self.f(U) - self.fu - self.J(d)


# --------------------------------------------------------------- methods


def _rosenbrock_euler(s):
    u1 = s.u + s.phi1(1, s.hF)
    return u1, u1


def _exprb32(s):
    U2 = s.u + s.phi1(1, s.hF)
    D2 = s.rdiff(U2)
    high = U2 + s.phi1(3, 2.0 * s.dt * D2)
    return U2, high


def _exprb42(s):
    P = s.phi(1, s.hF, [0.75, 1.0])
    U2 = s.u + 0.75 * P[0]
    D2 = s.rdiff(U2)
    high = s.u + P[1] + s.phi1(3, (32.0 / 9.0) * s.dt * D2)
    return high, high


def _exprb43(s):
    h = s.dt
    P = s.phi(1, s.hF, [0.5, 1.0])
    U2 = s.u + 0.5 * P[0]
    D2 = s.rdiff(U2)
    U3 = s.u + P[1] + s.phi1(1, h * D2)
    D3 = s.rdiff(U3)
    base = s.u + P[1]
    t3 = s.phi1(3, h * (16.0 * D2 - 2.0 * D3))
    t4 = s.phi1(4, h * (-48.0 * D2 + 12.0 * D3))
    return base + t3, base + t3 + t4


# Stage-4 coefficient of EXPRB54s4: makes U4 a third-order stage at c = 9/10.
EXPRB54_KAPPA = 729.0 / 125.0
# Stage-3 coefficient of EXPRB53s3. U2 carries a stage defect here, so U3 must
# offset it: sum_i b_i(0) c_i psi_i = 0 needs psi_3 = 9/400, i.e. 864/125.
EXPRB53_KAPPA = 864.0 / 125.0


def _fifth_order_tail(s, Da, Db):
    # nodes (1/2, 9/10): sum b_i c_i^2 = 2 phi_3, sum b_i c_i^3 = 6 phi_4
    h = s.dt
    t3 = s.phi1(3, h * (18.0 * Da - (250.0 / 81.0) * Db))
    t4 = s.phi1(4, h * (-60.0 * Da + (500.0 / 27.0) * Db))
    return t3, t4


def _exprb53s3(s):
    h = s.dt
    P = s.phi(1, s.hF, [0.5, 0.9, 1.0])
    U2 = s.u + 0.5 * P[0]
    D2 = s.rdiff(U2)
    U3 = s.u + 0.9 * P[1] + s.phi1(3, EXPRB53_KAPPA * h * D2, 0.9)
    D3 = s.rdiff(U3)
    base = s.u + P[2]
    t3, t4 = _fifth_order_tail(s, D2, D3)
    return base + t3, base + t3 + t4


def _exprb54s4(s):
    h = s.dt
    P = s.phi(1, s.hF, [0.25, 0.5, 0.9, 1.0])
    U2 = s.u + 0.25 * P[0]
    D2 = s.rdiff(U2)
    U3 = s.u + 0.5 * P[1] + s.phi1(3, 4.0 * h * D2, 0.5)
    D3 = s.rdiff(U3)
    U4 = s.u + 0.9 * P[2] + s.phi1(3, EXPRB54_KAPPA * h * D3, 0.9)
    D4 = s.rdiff(U4)
    base = s.u + P[3]
    t3, t4 = _fifth_order_tail(s, D3, D4)
    low = base + s.phi1(3, h * (64.0 * D2 - 8.0 * D3)) + s.phi1(4, h * (-384.0 * D2 + 96.0 * D3))
    return low, base + t3 + t4


def _two_stage_phi34(c2, c3):
    """Weights (w3, w4) with D-combinations meeting the phi_3/phi_4 conditions.

    Solves  c2^2 x + c3^2 y = 2, c2^3 x + c3^3 y = 0  (phi_3 term) and
            c2^2 x + c3^2 y = 0, c2^3 x + c3^3 y = 6  (phi_4 term).
    """
    m = np.array([[c2 ** 2, c3 ** 2], [c2 ** 3, c3 ** 3]])
    w3 = np.linalg.solve(m, [2.0, 0.0])
    w4 = np.linalg.solve(m, [0.0, 6.0])
    return w3, w4


def _epirk_two_stage(c2, c3, embedded):
    w3, w4 = _two_stage_phi34(c2, c3)

    def step(s):
        h = s.dt
        P = s.phi(1, s.hF, [c2, c3, 1.0] if c3 > c2 else [c3, c2, 1.0])
        p2, p3 = (P[0], P[1]) if c3 > c2 else (P[1], P[0])
        U2 = s.u + c2 * p2
        U3 = s.u + c3 * p3
        D2 = s.rdiff(U2)
        D3 = s.rdiff(U3)
        base = s.u + P[2]
        t3 = s.phi1(3, h * (w3[0] * D2 + w3[1] * D3))
        t4 = s.phi1(4, h * (w4[0] * D2 + w4[1] * D3))
        high = base + t3 + t4
        return (base + t3 if embedded else high), high

    return step


# EPIRK5P1 coefficients (fifth order; embedded fourth order via g32, g33 below)
P1_A11 = 0.35129592695058193092
P1_A21 = 0.84405472011657126298
P1_A22 = 1.6905891609568963624
P1_B2 = 1.2727127317356892397
P1_B3 = 2.2714599265422622275
P1_G32 = 0.71111095364366870359
P1_G33 = 0.62378111953371494809
P1_G32_LOW = 0.5
P1_G33_LOW = 1.0

# EPIRK5P2: same stage layout, phi_2 on the second difference (own solution of
# the classical order-five conditions)
P2_A11 = 0.32748912933423954957
P2_A21 = 0.83875511283510967683
P2_A22 = 1.8926940206209579648
P2_B2 = 1.3226715926727670976
P2_B3 = 0.7831218992282683942
P2_G32 = 0.73960526421350655375
P2_G33 = 0.48373466149467096952


def _epirk5p1(s):
    h = s.dt
    P = s.phi(1, s.hF, [P1_A11, P1_A21, 1.0])
    U2 = s.u + P1_A11 * P[0]
    D2 = s.rdiff(U2)
    Q = s.phi(1, h * D2, [P1_G32_LOW, P1_G32, 1.0])
    U3 = s.u + P1_A21 * P[1] + P1_A22 * Q[2]
    D3 = s.rdiff(U3)
    R = s.phi(3, h * (-2.0 * D2 + D3), [P1_G33, P1_G33_LOW])
    base = s.u + P[2]
    high = base + P1_B2 * Q[1] + P1_B3 * R[0]
    low = base + P1_B2 * Q[0] + P1_B3 * R[1]
    return low, high


def _epirk5p2(s):
    h = s.dt
    P = s.phi(1, s.hF, [P2_A11, P2_A21, 1.0])
    U2 = s.u + P2_A11 * P[0]
    D2 = s.rdiff(U2)
    Q = s.phi(1, h * D2, [P2_G32, 1.0])
    U3 = s.u + P2_A21 * P[1] + P2_A22 * Q[1]
    D3 = s.rdiff(U3)
    R = s.phi1(2, h * (-2.0 * D2 + D3), P2_G33)
    high = s.u + P[2] + P2_B2 * Q[0] + P2_B3 * R
    return high, high


# ---------------------------------------------------------------- registry


@dataclass(frozen=True)
class _MethodInfo:
    label: str
    order_low: int
    order_high: int
    embedded: bool
    fn: object


_METHODS = {
    "RosenbrockEuler": _MethodInfo("rosenbrock-euler", 2, 2, False, _rosenbrock_euler),
    "EXPRB32": _MethodInfo("exprb32", 2, 3, True, _exprb32),
    "EXPRB42": _MethodInfo("exprb42", 4, 4, False, _exprb42),
    "EXPRB43": _MethodInfo("exprb43", 3, 4, True, _exprb43),
    "EXPRB53s3": _MethodInfo("exprb53s3", 3, 5, True, _exprb53s3),
    "EXPRB54s4": _MethodInfo("exprb54s4", 4, 5, True, _exprb54s4),
    "EPIRK4s3": _MethodInfo("epirk4s3", 3, 4, True, _epirk_two_stage(1 / 8, 1 / 9, True)),
    "EPIRK4s3A": _MethodInfo("epirk4s3a", 3, 4, True, _epirk_two_stage(1 / 2, 2 / 3, True)),
    "EPIRK4s3B": _MethodInfo("epirk4s3b", 4, 4, False, _epirk_two_stage(1 / 2, 3 / 4, False)),
    "EPIRK5P1": _MethodInfo("epirk5p1", 4, 5, True, _epirk5p1),
    "EPIRK5P2": _MethodInfo("epirk5p2", 5, 5, False, _epirk5p2),
}


class MethodId(enum.Enum):
    RosenbrockEuler = "RosenbrockEuler"
    EXPRB32 = "EXPRB32"
    EXPRB42 = "EXPRB42"
    EXPRB43 = "EXPRB43"
    EXPRB53s3 = "EXPRB53s3"
    EXPRB54s4 = "EXPRB54s4"
    EPIRK4s3 = "EPIRK4s3"
    EPIRK4s3A = "EPIRK4s3A"
    EPIRK4s3B = "EPIRK4s3B"
    EPIRK5P1 = "EPIRK5P1"
    EPIRK5P2 = "EPIRK5P2"

    @property
    def order_low(self):
        return _METHODS[self.value].order_low

    @property
    def order_high(self):
        return _METHODS[self.value].order_high

    @property
    def embedded(self):
        return _METHODS[self.value].embedded

    @property
    def label(self):
        return _METHODS[self.value].label

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        for m in cls:
            if m.value.lower() == key:
                return m
        raise ValueError(f"unknown method {name!r}; valid methods: {', '.join(method_names())}")


def method_names():
    return [m.label for m in MethodId]


def step(method, f, u_n, dt, bounds, leja=None, tol=1e-10):
    """Attempt one step of ``method`` from ``u_n`` with step size ``dt``.

    Returns a StepOutput. Leja failures and non-finite results raise
    StepFailure so the caller can retry with a smaller step.
    """
    method = MethodId.parse(method)
    if not dt > 0:
        raise ValueError("dt must be positive")
    u_n = np.asarray(u_n, dtype=np.float64)
    counted = isinstance(f, RhsOperator)
    evals0 = f.eval_count if counted else 0
    ctx = _StepContext(f, u_n, dt, bounds, leja, tol)
    try:
        low, high = _METHODS[method.value].fn(ctx)
    except LejaError as exc:
        spent = ctx.mv + (exc.report.mv_products if exc.report is not None else 0)
        raise StepFailure(f"{method.value} step failed: {exc}", dt=dt, cause=exc,
                          mv_products=spent) from exc
    if not (np.all(np.isfinite(high)) and np.all(np.isfinite(low))):
        raise StepFailure(f"{method.value} step produced non-finite values", dt=dt,
                          mv_products=ctx.mv)
    err = 0.0 if low is high else float(np.linalg.norm(high - low))
    evals = f.eval_count - evals0 if counted else 0
    return StepOutput(low, high, err, ctx.mv, evals)
