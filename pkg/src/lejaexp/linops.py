"""Matrix-free operators: RHS wrapper, Jacobian actions and spectrum estimates."""
import math
import threading

import numpy as np

from .errors import NumericalBreakdown
from .leja import SpectralBounds, SpectralKind

SQRT_EPS = math.sqrt(np.finfo(np.float64).eps)
POWER_SEED = 20220817


class RhsOperator:
    """Right-hand side ``f(u)`` of ``du/dt = f(u)`` with an evaluation counter.

    Parameters
    ----------
    fn : callable
        Maps a state vector to a vector of the same length.
    dimension : int
        Length of the state vector.
    """

    def __init__(self, fn, dimension):
        dimension = int(dimension)
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self._fn = fn
        self.dimension = dimension
        self._count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self):
        return self._count

    def eval(self, u):
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.dimension,):
            raise ValueError(f"state has shape {u.shape}, expected ({self.dimension},)")
        out = np.asarray(self._fn(u), dtype=np.float64)
        if out.shape != u.shape:
            raise ValueError(f"rhs returned shape {out.shape}, expected {u.shape}")
        with self._lock:
            self._count += 1
        return out

    __call__ = eval


def jacobian_vector(f, u, v, f_of_u=None):
    """Forward-difference approximation of ``J(u) v``.

    Uses ``eps = sqrt(machine eps) * (1 + ||u||) / ||v||``. One RHS evaluation
    if ``f_of_u`` is given, two otherwise.
    """
    v = np.asarray(v, dtype=np.float64)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise ValueError("direction vector must be nonzero")
    u = np.asarray(u, dtype=np.float64)
    if f_of_u is None:
        f_of_u = f(u)
    eps = SQRT_EPS * (1.0 + float(np.linalg.norm(u))) / nv
    return (f(u + eps * v) - f_of_u) / eps


class JacobianAction:
    """``v -> J(u) v`` at a frozen state, with the base RHS value cached.

    A zero direction maps to zero without touching the RHS. ``calls`` counts
    every application, so it can be compared with Leja mv counters.
    """

    def __init__(self, f, u, f_of_u=None):
        self.f = f
        self.u = np.asarray(u, dtype=np.float64)
        self.f_of_u = f(self.u) if f_of_u is None else np.asarray(f_of_u, dtype=np.float64)
        self.calls = 0

    def __call__(self, v):
        self.calls += 1
        v = np.asarray(v, dtype=np.float64)
        if not np.any(v):
            return np.zeros_like(v)
        return jacobian_vector(self.f, self.u, v, self.f_of_u)


def power_iterate(f, u, max_iters=200, rtol=1e-3, f_of_u=None, seed=POWER_SEED):
    """Estimate the dominant eigenvalue magnitude of ``J(u)``.

    Starts from a seeded random unit vector and iterates ``x <- Jx / ||Jx||``
    until successive estimates ``||Jx||`` agree to ``rtol``. The returned
    value is not inflated.

    Raises
    ------
    NumericalBreakdown
        If an iterate vanishes.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    u = np.asarray(u, dtype=np.float64)
    if f_of_u is None:
        f_of_u = f(u)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(u.size)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iters):
        y = jacobian_vector(f, u, x, f_of_u)
        ny = float(np.linalg.norm(y))
        if ny == 0.0 or not math.isfinite(ny):
            raise NumericalBreakdown("power iteration produced a zero or non-finite iterate")
        prev, est = est, ny
        x = y / ny
        if abs(est - prev) < rtol * est:
            break
    return est


def cfl_domain(h, eta):
    """Choose the spectral kind by comparing diffusion and advection CFL times.

    Diffusion-limited (``h**2 / 2 <= h / eta``) gives REAL, otherwise IMAGINARY.
    """
    dt_diff = 0.5 * h * h
    dt_adv = math.inf if eta == 0 else h / abs(eta)
    return SpectralKind.REAL if dt_diff <= dt_adv else SpectralKind.IMAGINARY


class SpectrumCache:
    """Dominant-magnitude estimate refreshed every ``refresh_every`` accepted steps.

    Parameters
    ----------
    kind : SpectralKind or str
    refresh_every : int
        Accepted steps between power iterations.
    inflation : float
        Safety factor (>= 1) applied to the raw estimate.
    magnitude : float, optional
        Fixed magnitude. When given, power iteration is never run.
    floor : float
        Lower bound on the stored magnitude; also used when power iteration
        breaks down (e.g. a zero Jacobian).
    """

    def __init__(self, kind=SpectralKind.REAL, refresh_every=25, inflation=1.1,
                 magnitude=None, floor=1.0, max_iters=200, rtol=1e-3):
        if refresh_every < 1:
            raise ValueError("refresh_every must be positive")
        if inflation < 1.0:
            raise ValueError("inflation must be >= 1")
        self.kind = SpectralKind.parse(kind)
        self.refresh_every = int(refresh_every)
        self.inflation = float(inflation)
        self.floor = float(floor)
        self.max_iters = max_iters
        self.rtol = rtol
        self.fixed = magnitude is not None
        self.magnitude = None if magnitude is None else max(float(magnitude), 0.0)
        self.steps_since_refresh = 0
        self.refresh_count = 0

    def needs_refresh(self):
        if self.fixed:
            return False
        return self.magnitude is None or self.steps_since_refresh >= self.refresh_every

    def bounds(self, f, u, f_of_u=None):
        """Current SpectralBounds, running power iteration if due."""
        if self.needs_refresh():
            try:
                raw = power_iterate(f, u, self.max_iters, self.rtol, f_of_u)
            except NumericalBreakdown:
                raw = 0.0
            self.magnitude = max(self.inflation * raw, self.floor)
            self.steps_since_refresh = 0
            self.refresh_count += 1
        mag = max(self.magnitude, self.floor)
        return SpectralBounds.from_magnitude(mag, self.kind)

    def record_accepted(self):
        self.steps_since_refresh += 1
