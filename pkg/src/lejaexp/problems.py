"""Periodic 1D benchmark PDEs discretized by the method of lines.

Burgers:       u_t = u_xx + (eta/2) (u^2)_x
Allen-Cahn:    u_t = u_xx + 100 (u - u^3)
LinearAdvDiff: u_t = u_xx + eta u_x

The Laplacian is the second-order centered stencil; first derivatives use a
third-order upwind-biased stencil.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .leja import SpectralKind
from .linops import RhsOperator

ALLEN_CAHN_REACTION = 100.0
BURGERS_X0 = 0.9
BURGERS_SIGMA = 0.02
ALLEN_CAHN_AMPLITUDE = 0.1

# Both advective PDEs above move profiles toward -x, so the stencil is biased
# to the right (downstream index i+1 is upwind). See upwind3_dx.
ADVECTION_TRANSPORT = -1


class ProblemName(enum.Enum):
    BURGERS = "burgers"
    ALLEN_CAHN = "allen-cahn"
    LINEAR_ADV_DIFF = "lin-adv-diff"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {"allencahn": "allen-cahn", "linearadvdiff": "lin-adv-diff",
                   "linear-adv-diff": "lin-adv-diff"}
        key = aliases.get(key, key)
        for member in cls:
            if member.value == key:
                return member
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown problem {name!r}; valid problems: {valid}")


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [0, 1) with nodes x_i = i/n."""

    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 grid points")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def x(self):
        return np.arange(self.n) * self.h

    @property
    def periodic(self):
        return True


@dataclass(frozen=True)
class ProblemSpec:
    name: ProblemName
    n: int
    t_final: float
    eta: float = 0.0
    recommended_domain: SpectralKind = SpectralKind.REAL
    case: str = ""

    @property
    def grid(self):
        return Grid1D(self.n)

    @property
    def label(self):
        return f"{self.name.value}-{self.case}" if self.case else f"{self.name.value}-n{self.n}"

    @classmethod
    def from_case(cls, case):
        key = str(case).strip().lower()
        if key not in CASES:
            raise ValueError(f"unknown case {case!r}; valid cases: {', '.join(sorted(CASES))}")
        return CASES[key]

    def rhs(self, u):
        return rhs_function(self)(u)

    def operator(self):
        return RhsOperator(rhs_function(self), self.n)

    def initial_condition(self):
        return initial_condition(self)


CASES = {
    "a": ProblemSpec(ProblemName.BURGERS, 64, 1e-3, 200.0, SpectralKind.REAL, "a"),
    "b": ProblemSpec(ProblemName.BURGERS, 256, 1e-2, 10.0, SpectralKind.REAL, "b"),
    "c": ProblemSpec(ProblemName.ALLEN_CAHN, 64, 0.1, 0.0, SpectralKind.REAL, "c"),
    "d": ProblemSpec(ProblemName.ALLEN_CAHN, 256, 0.1, 0.0, SpectralKind.REAL, "d"),
}
CASE_PROBLEM = {k: v.name for k, v in CASES.items()}

LINEAR_DEFAULT = ProblemSpec(ProblemName.LINEAR_ADV_DIFF, 64, 1e-2, 10.0, SpectralKind.REAL, "")


def make_problem(problem=None, case=None, n=None, eta=None, t_final=None):
    """Build a ProblemSpec from a case label and/or explicit fields."""
    if case:
        spec = ProblemSpec.from_case(case)
        if problem is not None and ProblemName.parse(problem) is not spec.name:
            raise ValueError(f"case {case!r} belongs to problem {spec.name.value!r}")
    elif problem is None:
        raise ValueError("need a problem name or a case label")
    else:
        name = ProblemName.parse(problem)
        if name is ProblemName.BURGERS:
            spec = CASES["a"]
        elif name is ProblemName.ALLEN_CAHN:
            spec = CASES["c"]
        else:
            spec = LINEAR_DEFAULT
    changes = {}
    if n is not None:
        changes["n"] = int(n)
    if eta is not None:
        changes["eta"] = float(eta)
    if t_final is not None:
        changes["t_final"] = float(t_final)
    if changes:
        fields = dict(spec.__dict__, **changes)
        fields["case"] = ""
        spec = ProblemSpec(**fields)
    return spec


# ----------------------------------------------------------------- stencils


def _contig(u):
    return np.ascontiguousarray(u, dtype=np.float64)


def laplacian(u, grid):
    """(u[i-1] - 2u[i] + u[i+1]) / h^2 with periodic indices."""
    u = _contig(u)
    if u.shape != (grid.n,):
        raise ValueError("vector length does not match grid")
    return _kernels.active.laplacian(u, 1.0 / grid.h ** 2)


def upwind3_dx(u, grid, transport=1):
    """Third-order upwind-biased first derivative with periodic wrap.

    ``transport=+1`` uses (2u[i+1] + 3u[i] - 6u[i-1] + u[i-2]) / 6h, the
    stencil for flow toward +x. ``transport=-1`` is its mirror image.
    """
    u = _contig(u)
    if u.shape != (grid.n,):
        raise ValueError("vector length does not match grid")
    return _kernels.active.upwind3(u, 1.0 / (6.0 * grid.h), 1 if transport > 0 else -1)


def burgers_rhs(u, grid, eta, transport=ADVECTION_TRANSPORT):
    """laplacian(u) + (eta/2) * upwind3_dx(u**2)."""
    u = _contig(u)
    if u.shape != (grid.n,):
        raise ValueError("vector length does not match grid")
    h = grid.h
    return _kernels.active.burgers_rhs(u, 1.0 / h ** 2, 0.5 * eta, 1.0 / (6.0 * h),
                                       1 if transport > 0 else -1)


def allen_cahn_rhs(u, grid):
    """laplacian(u) + 100 (u - u^3)."""
    u = _contig(u)
    if u.shape != (grid.n,):
        raise ValueError("vector length does not match grid")
    return _kernels.active.allen_cahn_rhs(u, 1.0 / grid.h ** 2, ALLEN_CAHN_REACTION)


def linear_adv_diff_rhs(u, grid, eta, transport=ADVECTION_TRANSPORT):
    """laplacian(u) + eta * upwind3_dx(u)."""
    return laplacian(u, grid) + eta * upwind3_dx(u, grid, transport)


def rhs_function(spec):
    grid = spec.grid
    if spec.name is ProblemName.BURGERS:
        return lambda u: burgers_rhs(u, grid, spec.eta)
    if spec.name is ProblemName.ALLEN_CAHN:
        return lambda u: allen_cahn_rhs(u, grid)
    return lambda u: linear_adv_diff_rhs(u, grid, spec.eta)


# ------------------------------------------------------------ initial data


def burgers_ic(x, x0=BURGERS_X0, sigma=BURGERS_SIGMA):
    x = np.asarray(x, dtype=np.float64)
    s = 2.0 * x - 1.0
    bump = np.zeros_like(x)
    inside = np.abs(s) < 1.0
    bump[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return 1.0 + bump + 0.5 * np.exp(-((x - x0) ** 2) / (2.0 * sigma ** 2))


def allen_cahn_ic(x, amplitude=ALLEN_CAHN_AMPLITUDE):
    x = np.asarray(x, dtype=np.float64)
    return amplitude * (1.0 + np.cos(2.0 * math.pi * x))


def initial_condition(spec):
    x = spec.grid.x
    if spec.name is ProblemName.ALLEN_CAHN:
        return allen_cahn_ic(x)
    # the linear problem reuses the Burgers profile
    return burgers_ic(x)
