import numpy as np
import pytest

from lejaexp.errors import RejectionBudgetExceeded, StepFailure
from lejaexp.integrators import MethodId, StepOutput, step
from lejaexp.leja import SpectralBounds
from lejaexp.linops import RhsOperator, SpectrumCache
from lejaexp.problems import CASES
from lejaexp.stepper import (ControllerConfig, integrate_adaptive, integrate_constant,
                             richardson_error, richardson_step)


def test_controller_factor_formula():
    c = ControllerConfig(1e-6)
    assert c.factor(1e-6, 3) == pytest.approx(0.9)
    assert c.factor(1e-6 / 16, 3) == pytest.approx(0.9 * 2.0)
    assert c.factor(1e-6 * 8, 2) == pytest.approx(0.45)


def test_controller_clamps():
    c = ControllerConfig(1e-6)
    assert c.factor(1e-30, 2) == 5.0
    assert c.factor(0.0, 2) == 5.0
    assert c.factor(1.0, 2) == 0.2
    assert c.factor(np.inf, 2) == 0.2


@pytest.mark.parametrize("kwargs", [dict(tol=0.0), dict(tol=1e-6, safety=1.5),
                                    dict(tol=1e-6, fac_min=1.0), dict(tol=1e-6, fac_max=0.9),
                                    dict(tol=1e-6, dt_init=-1.0),
                                    dict(tol=1e-6, max_rejections_per_step=0)])
def test_controller_validation(kwargs):
    with pytest.raises(ValueError):
        ControllerConfig(**kwargs)


def test_adaptive_requires_estimate():
    spec = CASES["a"]
    with pytest.raises(ValueError, match="Richardson"):
        integrate_adaptive("exprb42", spec.operator(), spec.initial_condition(),
                           ControllerConfig(1e-6), spec.t_final)


@pytest.fixture(scope="module")
def case_a_run():
    spec = CASES["a"]
    return integrate_adaptive("exprb43", spec.operator(), spec.initial_condition(),
                              ControllerConfig(1e-7), spec.t_final)


def test_adaptive_lands_on_t_end(case_a_run):
    rec = case_a_run
    assert rec.t_final == CASES["a"].t_final
    acc = [e for e in rec.step_trace if e.accepted]
    assert len(acc) == rec.accepted_steps
    assert sum(e.dt for e in acc) == pytest.approx(CASES["a"].t_final, rel=1e-12)


def test_adaptive_accepted_estimates_within_tol(case_a_run):
    rec = case_a_run
    assert all(e.error_estimate <= 1e-7 for e in rec.step_trace if e.accepted)
    assert all(e.error_estimate > 1e-7 for e in rec.step_trace if not e.accepted)
    assert len(rec.step_trace) == rec.accepted_steps + rec.rejected_steps


def test_adaptive_mv_bookkeeping(case_a_run):
    rec = case_a_run
    assert rec.total_mv == sum(e.mv_products for e in rec.step_trace)
    assert rec.total_rhs_evals > rec.total_mv
    assert rec.spectrum_refreshes >= 1


def test_adaptive_default_initial_step(case_a_run):
    assert case_a_run.step_trace[0].dt == pytest.approx(CASES["a"].t_final / 1000)


def test_adaptive_steps_follow_controller(case_a_run):
    c = ControllerConfig(1e-7)
    trace = case_a_run.step_trace
    for prev, nxt in zip(trace[:-1], trace[1:-1]):
        assert nxt.dt == pytest.approx(prev.dt * c.factor(prev.error_estimate, 3), rel=1e-12)


def test_adaptive_does_not_mutate_initial_state():
    spec = CASES["c"]
    u0 = spec.initial_condition()
    keep = u0.copy()
    integrate_adaptive("exprb32", spec.operator(), u0, ControllerConfig(1e-5), 1e-2)
    np.testing.assert_array_equal(u0, keep)


def test_constant_step_count_and_landing():
    spec = CASES["c"]
    rec = integrate_constant("exprb43", spec.operator(), spec.initial_condition(), 0.03, 0.1)
    assert rec.accepted_steps == 4 and rec.rejected_steps == 0
    assert [e.dt for e in rec.step_trace][:3] == [0.03] * 3
    assert rec.step_trace[-1].dt == pytest.approx(0.01)
    assert rec.t_final == 0.1
    assert rec.total_mv == sum(e.mv_products for e in rec.step_trace)


def test_constant_validation():
    with pytest.raises(ValueError):
        integrate_constant("exprb43", lambda u: -u, np.ones(2), 2.0, 1.0)
    with pytest.raises(ValueError):
        integrate_constant("exprb43", lambda u: -u, np.ones(2), 0.0, 1.0)


def test_constant_matches_single_steps():
    spec = CASES["c"]
    f, u0 = spec.operator(), spec.initial_condition()
    b = SpectralBounds.real(2e4)
    rec = integrate_constant("epirk4s3a", f, u0, 0.005, 0.01, bounds_policy=b)
    u = step("epirk4s3a", f, u0, 0.005, b).u_high
    u = step("epirk4s3a", f, u, 0.005, b).u_high
    np.testing.assert_array_equal(rec.final_state, u)


# ----------------------------------------------------------- mocked steps


def fake_step(errors):
    """A step function that returns the identity map with scripted estimates."""
    script = iter(errors)
    calls = []

    def fn(method, f, u, dt, bounds, leja, tol):
        calls.append(dt)
        e = next(script)
        if isinstance(e, Exception):
            raise e
        return StepOutput(u + 0.0, u + 1.0, e, 3)

    fn.calls = calls
    return fn


def test_rejection_shrinks_step():
    fn = fake_step([1e-3, 1e-9] + [0.0] * 1000)
    ctl = ControllerConfig(1e-6, dt_init=0.1)
    rec = integrate_adaptive("exprb43", lambda u: u, np.zeros(2), ctl, 1.0, step_fn=fn,
                             bounds_policy=SpectralBounds.real(1.0))
    assert fn.calls[0] == 0.1
    assert fn.calls[1] == pytest.approx(0.1 * ctl.factor(1e-3, 3))
    assert rec.rejected_steps == 1
    assert rec.step_trace[0].accepted is False
    assert rec.t_final == 1.0


def test_step_failure_halves_and_keeps_state():
    fails = [StepFailure("diverged", mv_products=7)] * 3
    fn = fake_step(fails + [0.0] * 1000)
    u0 = np.zeros(3)
    ctl = ControllerConfig(1e-6, dt_init=0.4)
    rec = integrate_adaptive("exprb43", lambda u: u, u0, ctl, 1.0, step_fn=fn,
                             bounds_policy=SpectralBounds.real(1.0))
    assert fn.calls[:4] == [0.4, 0.2, 0.1, 0.05]
    assert rec.rejected_steps == 3
    assert rec.total_mv == 3 * 7 + 3 * rec.accepted_steps
    # rejected attempts never advance the state: each accepted step adds exactly 1
    np.testing.assert_array_equal(rec.final_state, np.full(3, rec.accepted_steps))
    np.testing.assert_array_equal(u0, 0.0)


def test_rejection_budget():
    fn = fake_step([1.0] * 100)
    ctl = ControllerConfig(1e-6, dt_init=0.1, max_rejections_per_step=5)
    with pytest.raises(RejectionBudgetExceeded) as info:
        integrate_adaptive("exprb43", lambda u: u, np.zeros(2), ctl, 1.0, step_fn=fn,
                           bounds_policy=SpectralBounds.real(1.0))
    assert len(info.value.trace) == 6
    assert not any(e.accepted for e in info.value.trace)


def test_constant_step_failure_propagates_with_time():
    fn = fake_step([0.0, StepFailure("boom")])
    with pytest.raises(StepFailure) as info:
        integrate_constant("exprb43", lambda u: u, np.zeros(2), 0.25, 1.0, step_fn=fn,
                           bounds_policy=SpectralBounds.real(1.0))
    assert info.value.t == 0.25


def test_spectrum_cache_is_refreshed_on_accepted_steps():
    fn = fake_step([0.0] * 100)
    cache = SpectrumCache(refresh_every=4)
    op = RhsOperator(lambda u: -u, 2)
    rec = integrate_adaptive("exprb43", op, np.ones(2), ControllerConfig(1e-6, dt_init=0.1),
                             1.0, bounds_policy=cache, step_fn=fn)
    assert rec.spectrum_refreshes == -(-rec.accepted_steps // 4)


# ------------------------------------------------------------- Richardson


def quadratic(u):
    return u * u


@pytest.mark.parametrize("method", ["rosenbrock-euler", "exprb42", "epirk4s3b"])
def test_richardson_estimate_tracks_local_error(method):
    # du/dt = u^2, u(0) = 1 has u(t) = 1 / (1 - t)
    p = MethodId.parse(method).order_high
    b = SpectralBounds.real(1.0)
    ests = []
    for dt in (0.1, 0.05, 0.025):
        u, est = richardson_error(method, quadratic, np.array([1.0]), dt, b, tol=1e-14)
        true = abs(u[0] - 1.0 / (1.0 - dt))
        assert true / 5 <= est <= 5 * true
        ests.append(est)
    for coarse, fine in zip(ests[:-1], ests[1:]):
        assert 0.7 * 2 ** (p + 1) <= coarse / fine <= 1.4 * 2 ** (p + 1)


def test_richardson_step_accounting():
    b = SpectralBounds.real(1.0)
    op = RhsOperator(quadratic, 1)
    out = richardson_step("exprb42", op, np.array([1.0]), 0.1, b)
    single = step("exprb42", RhsOperator(quadratic, 1), np.array([1.0]), 0.1, b)
    np.testing.assert_array_equal(out.u_low, single.u_high)
    assert out.rhs_evals == op.eval_count
    assert out.mv_products >= 3


def test_adaptive_richardson_run():
    spec = CASES["c"]
    rec = integrate_adaptive("epirk4s3b", spec.operator(), spec.initial_condition(),
                             ControllerConfig(1e-6), 1e-2, richardson=True)
    assert rec.t_final == 1e-2
    assert all(e.error_estimate <= 1e-6 for e in rec.step_trace if e.accepted)
