"""Leja points, phi-functions and Newton-form polynomial interpolation.

The actions ``exp(dt A) v`` and ``phi_l(c_i dt A) v`` are approximated by a
Newton polynomial in the operator, interpolating the scalar function at Leja
points of the reference interval [-2, 2] mapped onto the estimated spectrum.
Only operator-vector products are needed.
"""
import enum
import functools
import math
import operator
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateSpectrumError, LejaConvergenceError, LejaDivergenceError

MAX_PHI_ORDER = 8
DEFAULT_MAX_POINTS = 500
DEFAULT_GRID_RESOLUTION = 100_001
# Effective stopping threshold is SAFETY_FACTOR * tol.
SAFETY_FACTOR = 0.1
# Abort once an increment exceeds DIVERGENCE_FACTOR * (1 + ||v||).
DIVERGENCE_FACTOR = 1.0e4
TIE_ATOL = 1.0e-10

_TAYLOR_TERMS = 40
_INV_FACT = np.array([1.0 / math.factorial(k) for k in range(_TAYLOR_TERMS + MAX_PHI_ORDER + 1)])


# --------------------------------------------------------------------------- phi


def _taylor_switch(l):
    return 2.0 + 0.5 * l


def phi(l, z):
    """Evaluate phi_l at scalar or array ``z``.

    phi_0 = exp and phi_{l+1}(z) = (phi_l(z) - 1/l!) / z. Near the origin a
    truncated Taylor series replaces the recurrence, which cancels badly there.
    Real input gives real output.
    """
    l = operator.index(l)
    if not 0 <= l <= MAX_PHI_ORDER:
        raise ValueError(f"phi order must lie in [0, {MAX_PHI_ORDER}], got {l}")
    scalar = np.ndim(z) == 0
    z = np.asarray(z)
    z = z.astype(np.result_type(z.dtype, np.float64), copy=False)
    if l == 0:
        out = np.exp(z)
        return out[()] if scalar else out

    out = np.empty_like(z)
    small = np.abs(z) < _taylor_switch(l)
    if np.any(small):
        zs = z[small]
        coef = _INV_FACT[l:l + _TAYLOR_TERMS]
        acc = np.full_like(zs, coef[-1])
        for k in range(_TAYLOR_TERMS - 2, -1, -1):
            acc = acc * zs + coef[k]
        out[small] = acc
    big = ~small
    if np.any(big):
        zb = z[big]
        acc = np.exp(zb)
        for k in range(l):
            acc = (acc - _INV_FACT[k]) / zb
        out[big] = acc
    return out[()] if scalar else out


# ------------------------------------------------------------------ data types


class SpectralKind(enum.Enum):
    REAL = "real"
    IMAGINARY = "imag"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"real": cls.REAL, "imag": cls.IMAGINARY, "imaginary": cls.IMAGINARY}
        if key not in aliases:
            raise ValueError(f"unknown spectral domain {name!r}; use 'real' or 'imag'")
        return aliases[key]


@dataclass(frozen=True)
class SpectralBounds:
    """Dominant eigenvalue estimates of the operator.

    Real: ``alpha <= 0`` is the most negative eigenvalue and ``beta = 0``.
    Imaginary: eigenvalues lie on i*[-alpha, alpha] and ``beta = -alpha``.
    """

    alpha: float
    beta: float
    kind: SpectralKind

    def __post_init__(self):
        if self.kind is SpectralKind.REAL:
            if self.beta != 0.0 or self.alpha > 0.0:
                raise ValueError("real bounds need beta == 0 and alpha <= 0")
        elif self.kind is SpectralKind.IMAGINARY:
            if self.beta != -self.alpha:
                raise ValueError("imaginary bounds need beta == -alpha")
        else:
            raise ValueError(f"bad spectral kind {self.kind!r}")

    @classmethod
    def real(cls, magnitude):
        return cls(-abs(float(magnitude)), 0.0, SpectralKind.REAL)

    @classmethod
    def imaginary(cls, magnitude):
        m = abs(float(magnitude))
        return cls(m, -m, SpectralKind.IMAGINARY)

    @classmethod
    def from_magnitude(cls, magnitude, kind):
        kind = SpectralKind.parse(kind)
        return cls.real(magnitude) if kind is SpectralKind.REAL else cls.imaginary(magnitude)


@dataclass(frozen=True)
class ShiftScale:
    c: float
    gamma: float


def shift_scale(bounds):
    """Map the spectral interval onto [-2, 2]: c = (a+b)/2, gamma = (b-a)/4."""
    if bounds.alpha == bounds.beta:
        raise DegenerateSpectrumError("spectral interval is a single point (alpha == beta)")
    return ShiftScale(c=(bounds.alpha + bounds.beta) / 2, gamma=(bounds.beta - bounds.alpha) / 4)


@dataclass(frozen=True, eq=False)
class LejaSequence:
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).ravel()
        if pts.size == 0:
            raise ValueError("empty Leja sequence")
        if np.any(np.abs(pts) > 2.0):
            raise ValueError("Leja points must lie in [-2, 2]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def count(self):
        return self.points.size

    def __len__(self):
        return self.points.size

    def save(self, path):
        save_leja_points(self, path)


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    last_increment: float
    converged: bool
    mv_products: int


# ------------------------------------------------------------------ leja points


def generate_leja_points(n, grid_resolution=DEFAULT_GRID_RESOLUTION):
    """Greedy (discrete) Leja points on [-2, 2].

    The first node maximizes |x|; node k maximizes the product of distances to
    nodes 0..k-1 over a uniform candidate grid. Ties go to the larger candidate.
    """
    n = operator.index(n)
    grid_resolution = operator.index(grid_resolution)
    if n < 1:
        raise ValueError("need at least one Leja point")
    if grid_resolution < 10 * n:
        raise ValueError(f"grid_resolution must be >= 10*n = {10 * n}")
    m = grid_resolution - 1
    # exact symmetry about 0 and exact endpoints +-2
    grid = 2.0 * (2.0 * np.arange(grid_resolution) - m) / m
    pts = _kernels.active.leja_greedy(grid, n, TIE_ATOL)
    return LejaSequence(np.asarray(pts))


@functools.lru_cache(maxsize=8)
def default_leja(n=DEFAULT_MAX_POINTS, grid_resolution=DEFAULT_GRID_RESOLUTION):
    """Cached Leja sequence used when callers don't supply one."""
    return generate_leja_points(n, grid_resolution)


def format_leja_points(leja):
    """One node per line, shortest repr that round-trips exactly."""
    pts = leja.points if isinstance(leja, LejaSequence) else np.asarray(leja, dtype=float)
    return "".join(f"{x!r}\n" for x in pts.tolist())


def save_leja_points(leja, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_leja_points(leja))


def load_leja_points(path):
    with open(path, encoding="utf-8") as fh:
        vals = [float(line) for line in fh if line.strip()]
    return LejaSequence(np.array(vals))


# ------------------------------------------------------------ divided differences


def divided_differences(f, nodes):
    """Newton coefficients d_0..d_m of the interpolant of ``f`` at ``nodes``."""
    x = np.asarray(nodes, dtype=np.complex128).ravel()
    if x.size == 0:
        raise ValueError("need at least one node")
    if np.unique(x).size != x.size:
        raise ValueError("interpolation nodes must be pairwise distinct")
    vals = np.asarray([f(xi) for xi in x], dtype=np.complex128)
    d = np.ascontiguousarray(vals.reshape(1, -1))
    _kernels.active.dd_extend(np.ascontiguousarray(x), d, 0, x.size)
    return d[0]


# --------------------------------------------------------------- interpolation


def _resolve_leja(leja, max_points):
    if leja is None:
        leja = default_leja()
    npts = leja.count if max_points is None else min(leja.count, max_points)
    return leja.points[:npts]


# Scaled interval half-widths |b| up to which divided differences come from the
# Taylor form (relative accuracy); beyond that the classical recurrence is used.
TAYLOR_DD_MAX_REAL = 300.0
TAYLOR_DD_MAX_IMAG = 3.0
_TAYLOR_RTOL = 1e-18
_TAYLOR_EXTRA_TERMS = 2000


class _NewtonCoefficients:
    """Divided differences of phi_l(s_i (c + gamma xi)) at the Leja nodes, per row.

    Rows whose scaled width ``b = s_i gamma`` is small use the Taylor form of
    exp on the bidiagonal node matrix: with ``z = a + b xi`` the differences of
    phi_l equal those of exp at ``l`` extra nodes ``-a/b`` followed by the Leja
    nodes, divided by ``b**l``. This keeps tiny coefficients accurate, which
    matters when the Newton basis grows. Other rows use the recurrence.
    """

    def __init__(self, l, scales, ss, imaginary, nodes):
        self.l = l
        self.nodes = nodes
        self.npts = nodes.size
        self.nrows = len(scales)
        unit = 1j if imaginary else 1.0
        a = np.array([unit * s * ss.c for s in scales], dtype=np.complex128)
        b = np.array([unit * s * ss.gamma for s in scales], dtype=np.complex128)
        limit = TAYLOR_DD_MAX_IMAG if imaginary else TAYLOR_DD_MAX_REAL
        self.taylor = [i for i in range(self.nrows) if abs(b[i]) <= limit]
        self.classic = [i for i in range(self.nrows) if abs(b[i]) > limit]
        self.a, self.b = a, b
        self.anchor = -ss.c / ss.gamma
        self.coef = np.zeros((self.nrows, self.npts), dtype=np.complex128)
        self.done_taylor = 0
        self.done_classic = 0
        self.x = np.ascontiguousarray(nodes, dtype=np.complex128)
        if self.classic:
            z = np.outer(b[self.classic], nodes) + a[self.classic][:, None]
            self.raw = np.ascontiguousarray(phi(l, z), dtype=np.complex128)

    def _taylor_rows(self, n):
        kern = _kernels.active
        xe = np.concatenate([np.full(self.l, self.anchor), self.nodes[:n]]).astype(np.complex128)
        for i in self.taylor:
            # seeding with exp(a) keeps partial sums near the result's scale
            d, _ = kern.dd_taylor_exp(xe, complex(self.b[i]), complex(np.exp(self.a[i])),
                                      _TAYLOR_RTOL, _TAYLOR_EXTRA_TERMS)
            self.coef[i, :n] = d[self.l:] / self.b[i] ** self.l

    def ensure(self, m):
        if self.taylor and m >= self.done_taylor:
            n = min(self.npts, max(m + 1, 2 * self.done_taylor, 32))
            self._taylor_rows(n)
            self.done_taylor = n
        if self.classic and m >= self.done_classic:
            stop = min(self.npts, max(m + 1, 2 * self.done_classic, 16))
            _kernels.active.dd_extend(self.x, self.raw, self.done_classic, stop)
            self.coef[self.classic, self.done_classic:stop] = \
                self.raw[:, self.done_classic:stop]
            self.done_classic = stop

    def column(self, m):
        self.ensure(m)
        return self.coef[:, m]


def _newton_series(apply, v, coeffs, ss, imaginary, nodes, tol):
    """Shared Newton iteration; one coefficient row per output vector."""
    v = np.asarray(v, dtype=np.float64)
    nf, npts = coeffs.nrows, coeffs.npts
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return [np.zeros_like(v) for _ in range(nf)], ConvergenceReport(0, 0.0, True, 0)
    if not tol > 0:
        raise ValueError("tolerance must be positive")

    c, gamma = ss.c, ss.gamma
    target = SAFETY_FACTOR * tol
    limit = DIVERGENCE_FACTOR * (1.0 + nv)

    if imaginary:
        y = v.astype(np.complex128)
        coef = coeffs.column(0)
    else:
        y = v.copy()
        coef = coeffs.column(0).real
    polys = [coef[i] * y for i in range(nf)]

    mv = 0
    incr = math.inf
    for m in range(1, npts):
        if imaginary:
            jy = apply(y.real) + 1j * apply(y.imag)
            mv += 2
            y = (-1j * jy - c * y) / gamma - nodes[m - 1] * y
            coef = coeffs.column(m)
        else:
            jy = apply(y)
            mv += 1
            y = (jy - c * y) / gamma - nodes[m - 1] * y
            coef = coeffs.column(m).real
        ny = float(np.linalg.norm(y))
        incr = float(np.max(np.abs(coef))) * ny
        for i in range(nf):
            polys[i] += coef[i] * y
        if not math.isfinite(incr) or incr > limit:
            report = ConvergenceReport(m, incr, False, mv)
            raise LejaDivergenceError(
                f"Leja increment {incr:.3e} exceeds divergence threshold {limit:.3e}", report)
        if incr < target:
            report = ConvergenceReport(m, incr, True, mv)
            break
    else:
        report = ConvergenceReport(npts - 1, incr, False, mv)
        raise LejaConvergenceError(
            f"no convergence after {npts - 1} Leja points (last increment {incr:.3e})", report)

    if imaginary:
        polys = [p.real.copy() for p in polys]
    return polys, report


def leja_phi(apply_J, v, dt, fractions, l, bounds, leja=None, tol=1e-10,
             max_points=DEFAULT_MAX_POINTS):
    """Approximate ``phi_l(f_i dt J) v`` for every fraction ``f_i`` at once.

    All fractions share the operator applications; only the divided
    differences differ. Returns ``(list_of_vectors, ConvergenceReport)``.
    """
    fractions = [float(f) for f in np.atleast_1d(fractions)]
    if not fractions:
        raise ValueError("need at least one fraction")
    if any(not (0.0 < f <= 1.0) for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    if any(b < a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("fractions must be ascending")
    if not dt > 0:
        raise ValueError("dt must be positive")
    l = operator.index(l)
    if not 0 <= l <= MAX_PHI_ORDER:
        raise ValueError(f"phi order must lie in [0, {MAX_PHI_ORDER}]")
    ss = shift_scale(bounds)
    nodes = _resolve_leja(leja, max_points)
    imaginary = bounds.kind is SpectralKind.IMAGINARY
    coeffs = _NewtonCoefficients(l, [f * dt for f in fractions], ss, imaginary, nodes)
    return _newton_series(apply_J, v, coeffs, ss, imaginary, nodes, tol)


def leja_exp(apply, v, dt, bounds, leja=None, tol=1e-10, max_points=DEFAULT_MAX_POINTS):
    """Approximate ``exp(dt A) v``. Returns ``(vector, ConvergenceReport)``."""
    out, report = leja_phi(apply, v, dt, [1.0], 0, bounds, leja, tol, max_points)
    return out[0], report


def leja_phi_nl(apply_A, u, source, dt, bounds, leja=None, tol=1e-10,
                max_points=DEFAULT_MAX_POINTS):
    """Exact-in-time step of du/dt = A u + S: ``u + dt phi_1(dt A)(A u + S)``."""
    u = np.asarray(u, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    if source.shape != u.shape:
        raise ValueError("source and state must have the same shape")
    rhs = dt * (np.asarray(apply_A(u), dtype=np.float64) + source)
    out, report = leja_phi(apply_A, rhs, dt, [1.0], 1, bounds, leja, tol, max_points)
    report = ConvergenceReport(report.iterations, report.last_increment, report.converged,
                               report.mv_products + 1)
    return u + out[0], report
