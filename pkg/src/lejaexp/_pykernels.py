"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``LEJAEXP_PURE_PYTHON`` is set. Signatures mirror ``_ckernels``.
"""
import numpy as np

NAME = "python"


def leja_greedy(grid, n, tie_atol):
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    out = np.empty(n)
    # first node: largest |x|, ties toward the larger value
    score = np.abs(grid)
    logp = np.zeros_like(grid)
    for k in range(n):
        if k > 0:
            with np.errstate(divide="ignore"):
                logp += np.log(np.abs(grid - out[k - 1]))
            score = logp
        best = score.max()
        cand = np.flatnonzero(score >= best - tie_atol * max(1.0, abs(best)))
        # grid is ascending, so the last candidate is the numerically largest
        out[k] = grid[cand[-1]]
    return out


def dd_extend(x, d, start, stop):
    """Finalize divided differences ``d[:, start:stop]`` in place.

    ``d[:, :start]`` must already hold final coefficients and
    ``d[:, start:stop]`` the raw function values.
    """
    for j in range(stop - 1):
        lo = max(j + 1, start)
        d[:, lo:stop] = (d[:, j:j + 1] - d[:, lo:stop]) / (x[j] - x[lo:stop])


def laplacian(u, inv_h2):
    return (np.roll(u, 1) - 2.0 * u + np.roll(u, -1)) * inv_h2


def upwind3(u, inv_6h, transport):
    # np.roll(u, k)[i] == u[i - k]
    if transport > 0:
        return (2.0 * np.roll(u, -1) + 3.0 * u - 6.0 * np.roll(u, 1)
                + np.roll(u, 2)) * inv_6h
    return (-2.0 * np.roll(u, 1) - 3.0 * u + 6.0 * np.roll(u, -1)
            - np.roll(u, -2)) * inv_6h


def burgers_rhs(u, inv_h2, adv_coef, inv_6h, transport):
    return laplacian(u, inv_h2) + adv_coef * upwind3(u * u, inv_6h, transport)


def allen_cahn_rhs(u, inv_h2, react):
    return laplacian(u, inv_h2) + react * (u - u * u * u)


def dd_taylor_exp(x, b, scale, rtol, max_extra):
    """``scale`` times the first column of exp(b * X).

    X is lower bidiagonal with diagonal ``x`` and unit subdiagonal, so entry m
    is the m-th divided difference of scale * exp(b t) at x[0..m]. Summing the
    Taylor series keeps every entry accurate relative to its own size.
    Returns ``(d, terms)``.
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    n = x.size
    w = np.zeros(n, dtype=np.complex128)
    w[0] = scale
    d = w.copy()
    k = 0
    while k < n - 1 + max_extra:
        k += 1
        wn = x * w
        wn[1:] += w[:-1]
        w = wn * (b / k)
        d += w
        if k >= n - 1 and np.all(np.abs(w) <= rtol * np.abs(d)):
            break
    return d, k
