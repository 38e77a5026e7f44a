import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from lejaexp.errors import (DegenerateSpectrumError, LejaConvergenceError,
                            LejaDivergenceError)
from lejaexp.leja import (MAX_PHI_ORDER, LejaSequence, SpectralBounds, SpectralKind,
                          default_leja, divided_differences, generate_leja_points, leja_exp,
                          leja_phi, leja_phi_nl, load_leja_points, phi, save_leja_points,
                          shift_scale)

from conftest import (advection_matrix, centered_derivative_matrix, laplacian_matrix,
                      spectral_radius)


def mp_phi(l, z, dps=250):
    """phi_l by the recurrence in high precision (cancellation is harmless there)."""
    with mp.workdps(dps):
        z = mp.mpc(z)
        if z == 0:
            return mp.mpf(1) / mp.factorial(l)
        acc = mp.exp(z)
        for k in range(l):
            acc = (acc - mp.mpf(1) / mp.factorial(k)) / z
        return complex(acc)


# ----------------------------------------------------------------------- phi


@pytest.mark.parametrize("l, expected", [(0, 1.0), (1, 1.0), (2, 0.5), (3, 1 / 6)])
def test_phi_at_zero(l, expected):
    assert phi(l, 0.0) == pytest.approx(expected, rel=1e-15)


def test_phi1_at_one():
    assert phi(1, 1.0) == pytest.approx(math.e - 1, rel=1e-15)


def test_phi2_tiny_argument_matches_series():
    z = 1e-8
    series = 0.5 + z / 6 + z * z / 24
    assert abs(phi(2, z) - series) <= 1e-13 * series


@pytest.mark.parametrize("l", range(MAX_PHI_ORDER + 1))
def test_phi_matches_high_precision_oracle(l, rng):
    mags = 10.0 ** rng.uniform(-8, 2, 200)
    angles = rng.uniform(0, 2 * np.pi, 200)
    z = mags * np.exp(1j * angles)
    got = phi(l, z)
    want = np.array([mp_phi(l, zz) for zz in z])
    rel = np.abs(got - want) / np.abs(want)
    assert rel.max() <= 1e-13


def test_phi_real_input_gives_real_output():
    out = phi(3, np.linspace(-5, 5, 11))
    assert out.dtype == np.float64


@pytest.mark.parametrize("l", [-1, MAX_PHI_ORDER + 1])
def test_phi_order_out_of_range(l):
    with pytest.raises(ValueError):
        phi(l, 0.5)


@given(st.integers(0, 7), st.floats(1e-6, 1e2), st.floats(0, 2 * np.pi))
def test_phi_recurrence_identity(l, r, theta):
    z = r * complex(math.cos(theta), math.sin(theta))
    lhs = phi(l + 1, z)
    rhs = (phi(l, z) - 1 / math.factorial(l)) / z
    # forming the right-hand side in double precision cancels by ~eps/|z|
    cancel = 4 * np.finfo(float).eps * (abs(phi(l, z)) + 1) / abs(z)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs)) + cancel


# --------------------------------------------------------------- leja points


def test_first_leja_points():
    pts = generate_leja_points(4).points
    np.testing.assert_allclose(pts, [2.0, -2.0, 0.0, 2 / math.sqrt(3)], atol=1e-4)
    assert pts[:3].tolist() == [2.0, -2.0, 0.0]


def test_single_point():
    assert generate_leja_points(1).points.tolist() == [2.0]


def test_leja_points_validation():
    with pytest.raises(ValueError):
        generate_leja_points(0)
    with pytest.raises(ValueError):
        generate_leja_points(50, grid_resolution=499)


def test_leja_points_deterministic_and_nested():
    a = generate_leja_points(40, 4001).points
    b = generate_leja_points(60, 4001).points
    np.testing.assert_array_equal(a, b[:40])
    np.testing.assert_array_equal(a, generate_leja_points(40, 4001).points)


def test_leja_points_distinct_and_in_range():
    pts = default_leja().points
    assert pts.size == 500
    assert np.all(np.abs(pts) <= 2.0)
    assert np.unique(pts).size == pts.size


def test_leja_sequence_is_read_only():
    seq = generate_leja_points(5, 1001)
    with pytest.raises(ValueError):
        seq.points[0] = 1.0
    with pytest.raises(ValueError):
        LejaSequence([3.0])


def test_save_load_round_trip(tmp_path):
    seq = generate_leja_points(50, 5001)
    path = tmp_path / "nodes.txt"
    save_leja_points(seq, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 50
    np.testing.assert_array_equal(load_leja_points(path).points, seq.points)


# ------------------------------------------------------------- shift / scale


def test_shift_scale_real():
    ss = shift_scale(SpectralBounds.real(100))
    assert (ss.c, ss.gamma) == (-50.0, 25.0)


def test_shift_scale_imaginary():
    ss = shift_scale(SpectralBounds.imaginary(100))
    assert (ss.c, ss.gamma) == (0.0, -50.0)


def test_shift_scale_laplacian_interval():
    mag = spectral_radius(laplacian_matrix(64))
    ss = shift_scale(SpectralBounds.real(16384.0))
    assert (ss.c, ss.gamma) == (-8192.0, 4096.0)
    assert ss.c - 2 * ss.gamma == pytest.approx(-mag, rel=1e-12)
    assert ss.c + 2 * ss.gamma == 0.0


def test_degenerate_bounds():
    with pytest.raises(DegenerateSpectrumError):
        shift_scale(SpectralBounds.real(0.0))


def test_bounds_invariants():
    with pytest.raises(ValueError):
        SpectralBounds(1.0, 0.0, SpectralKind.REAL)
    with pytest.raises(ValueError):
        SpectralBounds(3.0, -2.0, SpectralKind.IMAGINARY)
    assert SpectralKind.parse("imaginary") is SpectralKind.IMAGINARY
    with pytest.raises(ValueError):
        SpectralKind.parse("complex")


# -------------------------------------------------------- divided differences


def test_divided_differences_small_cases():
    assert divided_differences(np.exp, [0.3])[0] == pytest.approx(np.exp(0.3))
    d = divided_differences(np.exp, [0.0, 1.0])
    np.testing.assert_allclose(d, [1.0, math.e - 1.0])


def test_divided_differences_duplicate_nodes():
    with pytest.raises(ValueError):
        divided_differences(np.exp, [0.0, 1.0, 0.0])


def test_divided_differences_extended_precision_oracle():
    # exp sampled at c + gamma*xi in [-1, 0], differences taken in the Leja variable
    xi = default_leja().points[:16]
    c, gamma = -0.5, 0.25
    got = divided_differences(lambda x: np.exp(c + gamma * x), xi).real
    with mp.workdps(60):
        x = [mp.mpf(float(v)) for v in xi]
        t = [mp.exp(c + gamma * v) for v in x]
        for k in range(1, len(x)):
            for i in range(len(x) - 1, k - 1, -1):
                t[i] = (t[i] - t[i - 1]) / (x[i] - x[i - k])
        want = np.array([float(v) for v in t])
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


@given(st.integers(0, 10), st.integers(0, 2 ** 32 - 1))
def test_newton_form_reproduces_polynomials(k, seed):
    r = np.random.default_rng(seed)
    coeffs = r.standard_normal(k + 1)
    poly = np.polynomial.Polynomial(coeffs)
    nodes = default_leja().points[:k + 1 + int(r.integers(0, 3))]
    d = divided_differences(poly, nodes).real
    x = r.uniform(-2, 2, 25)
    # Horner evaluation of the Newton form
    val = np.full_like(x, d[-1])
    for j in range(len(d) - 2, -1, -1):
        val = val * (x - nodes[j]) + d[j]
    want = poly(x)
    assert np.max(np.abs(val - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


# ------------------------------------------------------------- interpolation


def test_leja_exp_zero_operator():
    v = np.array([1.0, -2.0, 3.0])
    w, rep = leja_exp(lambda x: 0 * x, v, 1.0, SpectralBounds.real(1.0))
    np.testing.assert_allclose(w, v, atol=1e-12)
    assert rep.converged and rep.iterations < 40


def test_leja_exp_scalar():
    tol = 1e-12
    w, rep = leja_exp(lambda x: -x, np.array([1.0]), 1.0, SpectralBounds.real(1.0), tol=tol)
    assert abs(w[0] - math.exp(-1)) <= 10 * tol
    assert rep.converged and rep.last_increment < 0.1 * tol
    assert rep.mv_products == rep.iterations


def test_leja_exp_laplacian_n32(rng):
    m = laplacian_matrix(32)
    v = rng.standard_normal(32)
    dt = 1e-3
    w, _ = leja_exp(lambda x: m @ x, v, dt, SpectralBounds.real(spectral_radius(m)), tol=1e-10)
    assert np.linalg.norm(w - expm(dt * m) @ v) <= 1e-8


def test_leja_exp_zero_vector():
    w, rep = leja_exp(lambda x: x, np.zeros(4), 1.0, SpectralBounds.real(1.0))
    assert not np.any(w) and rep.mv_products == 0


def test_imaginary_domain_preserves_norm(rng):
    d = centered_derivative_matrix(64)
    rho = spectral_radius(d)
    tol = 1e-10
    for _ in range(5):
        v = rng.standard_normal(64)
        w, rep = leja_exp(lambda x: d @ x, v, 3.0 / rho, SpectralBounds.imaginary(rho), tol=tol)
        assert abs(np.linalg.norm(w) - np.linalg.norm(v)) <= 10 * tol
        assert rep.mv_products == 2 * rep.iterations
        assert np.linalg.norm(w - expm(3.0 / rho * d) @ v) <= 10 * tol


def test_imaginary_mode_on_upwind_advection(rng):
    a = advection_matrix(64)
    rho = spectral_radius(a)
    v = rng.standard_normal(64)
    w, _ = leja_exp(lambda x: a @ x, v, 2.0 / rho, SpectralBounds.imaginary(rho), tol=1e-10)
    assert np.linalg.norm(w - expm(2.0 / rho * a) @ v) <= 1e-9


def test_large_step_raises_instead_of_returning_garbage(rng):
    a = advection_matrix(64)
    rho = spectral_radius(a)
    with pytest.raises(LejaDivergenceError) as info:
        leja_exp(lambda x: a @ x, rng.standard_normal(64), 20.0 / rho,
                 SpectralBounds.imaginary(rho), tol=1e-10)
    assert info.value.report is not None and not info.value.report.converged


def test_exhausted_nodes_raise_convergence_error():
    m = -np.diag(np.linspace(1, 100, 10))
    with pytest.raises(LejaConvergenceError) as info:
        leja_exp(lambda x: m @ x, np.ones(10), 1.0, SpectralBounds.real(100), tol=1e-12,
                 max_points=5)
    assert info.value.report.iterations == 4


def test_underestimated_spectrum_diverges():
    m = -1e4 * np.eye(3)
    with pytest.raises(LejaDivergenceError):
        leja_exp(lambda x: m @ x, np.ones(3), 1.0, SpectralBounds.real(1.0), tol=1e-10)


def test_leja_phi_zero_operator():
    v = np.array([1.0, 2.0])
    out, _ = leja_phi(lambda x: 0 * x, v, 0.3, [0.25, 0.5, 1.0], 1, SpectralBounds.real(1.0))
    for w in out:
        np.testing.assert_allclose(w, v, atol=1e-12)


def test_leja_phi_scalar_fractions():
    tol = 1e-12
    out, _ = leja_phi(lambda x: -x, np.array([1.0]), 1.0, [0.5, 1.0], 1,
                      SpectralBounds.real(1.0), tol=tol)
    assert abs(out[0][0] - (math.exp(-0.5) - 1) / -0.5) <= 10 * tol
    assert abs(out[1][0] - (math.exp(-1.0) - 1) / -1.0) <= 10 * tol


@pytest.mark.parametrize("l", [0, 1, 2, 3, 4])
def test_leja_phi_against_dense_phi(l, rng):
    m = laplacian_matrix(32)
    evals, evecs = np.linalg.eigh(m)
    v = rng.standard_normal(32)
    dt = 2e-3
    fr = [0.3, 0.75, 1.0]
    out, _ = leja_phi(lambda x: m @ x, v, dt, fr, l, SpectralBounds.real(-evals.min()),
                      tol=1e-11)
    for f, w in zip(fr, out):
        want = evecs @ (phi(l, f * dt * evals) * (evecs.T @ v))
        assert np.linalg.norm(w - want) <= 1e-9


def test_leja_phi_argument_validation():
    b = SpectralBounds.real(1.0)
    apply = lambda x: -x  # noqa: E731
    v = np.ones(2)
    for fr in ([], [0.0], [1.5], [1.0, 0.5]):
        with pytest.raises(ValueError):
            leja_phi(apply, v, 1.0, fr, 1, b)
    with pytest.raises(ValueError):
        leja_phi(apply, v, -1.0, [1.0], 1, b)
    with pytest.raises(ValueError):
        leja_phi(apply, v, 1.0, [1.0], MAX_PHI_ORDER + 1, b)


def test_vertical_sharing_on_laplacian(rng):
    m = laplacian_matrix(64)
    b = SpectralBounds.real(spectral_radius(m))
    v = rng.standard_normal(64)
    _, both = leja_phi(lambda x: m @ x, v, 1e-3, [0.5, 1.0], 1, b)
    _, half = leja_phi(lambda x: m @ x, v, 1e-3, [0.5], 1, b)
    _, full = leja_phi(lambda x: m @ x, v, 1e-3, [1.0], 1, b)
    assert both.mv_products <= half.mv_products + full.mv_products


def test_leja_phi_nl_zero_operator():
    u, s = np.array([1.0, 2.0]), np.array([0.5, -1.0])
    w, _ = leja_phi_nl(lambda x: 0 * x, u, s, 0.4, SpectralBounds.real(1.0))
    np.testing.assert_allclose(w, u + 0.4 * s, atol=1e-12)


def test_leja_phi_nl_scalar_closed_form():
    tol = 1e-12
    w, rep = leja_phi_nl(lambda x: -2 * x, np.array([1.0]), np.array([3.0]), 0.5,
                         SpectralBounds.real(2.0), tol=tol)
    want = math.exp(-1) + (1 - math.exp(-1)) * 1.5
    assert abs(w[0] - want) <= 10 * tol
    assert rep.mv_products == rep.iterations + 1


def test_leja_phi_nl_without_source_matches_exp(rng):
    m = laplacian_matrix(32)
    b = SpectralBounds.real(spectral_radius(m))
    u = rng.standard_normal(32)
    w1, _ = leja_phi_nl(lambda x: m @ x, u, np.zeros(32), 1e-3, b, tol=1e-11)
    w2, _ = leja_exp(lambda x: m @ x, u, 1e-3, b, tol=1e-11)
    assert np.linalg.norm(w1 - w2) <= 1e-9


def test_leja_phi_nl_shape_mismatch():
    with pytest.raises(ValueError):
        leja_phi_nl(lambda x: x, np.ones(3), np.ones(2), 0.1, SpectralBounds.real(1.0))
