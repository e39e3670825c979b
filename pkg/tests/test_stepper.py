import warnings

import numpy as np
import pytest

from stefan_enthalpy.assembly import flux_q_element, mass_matrix
from stefan_enthalpy.core import ConstantBC, SampledBC, Scenario, SinusoidBC, State
from stefan_enthalpy.enthalpy import big_b
from stefan_enthalpy.stepper import (StabilityError, StepFailure, StepperOptions,
                                     advance, explicit_dt_limit, run, step_explicit,
                                     step_fast_linear, step_implicit)
from stefan_enthalpy.studies import random_column, random_enthalpy, random_signature

from conftest import make_column, soil_column


def linear_heat_step(column, u_prev, surface, dt, k, c):
    """Backward-Euler step of the plain linear heat equation, dense assembly."""
    h = column.h
    n = h.size
    stiff = np.zeros((n + 1, n + 1))
    for e in range(n):
        r = k[e] / h[e]
        stiff[e:e + 2, e:e + 2] += r * np.array([[1, -1], [-1, 1]])
    lumped = np.zeros(n + 1)
    lumped[:-1] += h / 2
    lumped[1:] += h / 2
    cap = lumped[1:] * c[1:] / dt
    a = np.diag(cap) + stiff[1:, 1:]
    b = cap * u_prev[1:] - stiff[1:, 0] * surface
    return np.linalg.solve(a, b)


def test_steady_column_is_unchanged():
    col = soil_column(6)
    prev = State.from_enthalpy(col, np.full(6, -3 * 2.0e6), -3.0, 0.0)
    for theta in (0.5, 1.0):
        nxt, stats = step_implicit(col, prev, 86400.0, theta, -3.0)
        np.testing.assert_array_equal(nxt.eta, prev.eta)
        assert stats.linear_solves == 0
    nxt, _ = step_explicit(col, prev, 10.0, -3.0)
    np.testing.assert_array_equal(nxt.eta, prev.eta)


def test_unfrozen_column_matches_linear_heat_step(rng):
    for _ in range(10):
        col = random_column(rng, 16)
        u = rng.uniform(0.5, 4.0, col.n_elements + 1)
        eta = col.latent_heat[1:] + col.c_unfrozen[1:] * u[1:]
        prev = State.from_enthalpy(col, eta, u[0], 0.0)
        s = float(rng.uniform(0.5, 4.0))
        nxt, _ = step_implicit(col, prev, 3600.0, 1.0, s)
        expected = linear_heat_step(col, prev.gamma, s, 3600.0, col.k_unfrozen, col.c_unfrozen)
        np.testing.assert_allclose(nxt.gamma[1:], expected, rtol=1e-10, atol=1e-10)


def test_single_node_explicit_formula():
    col = make_column([0.4], k_f=2.0, k_u=3.0)
    prev = State.from_enthalpy(col, [-3.0], -1.0, 0.0)
    nxt, stats = step_explicit(col, prev, 0.01, 5.0)
    q1 = (2.0 * -2.0 - 2.0 * -1.0) / 0.4
    assert nxt.eta[0] == pytest.approx(-3.0 - 0.01 * q1 / 0.2, rel=1e-15)
    assert stats.linear_solves == 0


def test_explicit_energy_identity(rng):
    col = random_column(rng, 12)
    z = random_signature(rng, col.n_elements)
    prev = State.from_enthalpy(col, random_enthalpy(rng, col, z), 1.5, 0.0)
    dt = 0.5 * explicit_dt_limit(col)
    nxt, _ = step_explicit(col, prev, dt, -2.0)
    change = np.sum(mass_matrix(col) * (nxt.eta - prev.eta))
    expected = -dt * flux_q_element(prev.gamma, 0, col)
    assert abs(change - expected) <= 1e-12 * (np.abs(mass_matrix(col) * nxt.eta).sum())


def test_explicit_guard():
    col = soil_column(10)
    prev = State.from_enthalpy(col, np.full(10, -2e6), -1.0, 0.0)
    limit = explicit_dt_limit(col)
    with pytest.raises(StabilityError):
        step_explicit(col, prev, 1.01 * limit, -1.0)
    with pytest.warns(RuntimeWarning):
        step_explicit(col, prev, 1.01 * limit, -1.0, guard="warn")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        step_explicit(col, prev, 1.01 * limit, -1.0, guard="off")
        step_explicit(col, prev, limit, -1.0)


def test_explicit_limit_is_stable_for_linear_problem():
    col = soil_column(20, ratio=1.2)
    u = np.where(np.arange(20) % 2, -1.0, -3.0)
    state = State.from_enthalpy(col, col.c_frozen[1:] * u, -2.0, 0.0)
    dt = explicit_dt_limit(col, 0.99)
    for _ in range(2000):
        state, _ = step_explicit(col, state, dt, -2.0)
    # the checkerboard is the stiffest mode; it decays instead of blowing up
    assert np.abs(state.gamma + 2.0).max() < 0.05


def test_fast_path_accepts_frozen_column():
    col = soil_column(8)
    prev = State.from_enthalpy(col, np.full(8, -2 * 2.0e6), -2.0, 0.0)
    out = step_fast_linear(col, prev, 86400.0, 1.0, -6.0)
    assert out is not None
    state, stats = out
    assert stats.fast_path_taken and stats.linear_solves == 1
    ref, _ = step_implicit(col, prev, 86400.0, 1.0, -6.0)
    np.testing.assert_allclose(state.eta, ref.eta, rtol=0, atol=1e-9 * np.abs(ref.eta).max())


def test_fast_path_declines_warm_boundary():
    col = soil_column(8)
    prev = State.from_enthalpy(col, np.full(8, -2 * 2.0e6), -2.0, 0.0)
    assert step_fast_linear(col, prev, 86400.0, 1.0, 3.0) is None
    state, stats = advance(col, prev, 86400.0, 1.0, 3.0, StepperOptions(fast_path=True))
    assert not stats.fast_path_taken
    assert state.gamma[1] > prev.gamma[1]


def test_fast_path_rejects_sign_change():
    # Crank-Nicolson overshoots on a huge step: the linear update leaves the frozen range
    col = make_column([1.0, 1.0, 1.0], c_f=1.0, c_u=1.0, latent=1.0)
    prev = State.from_enthalpy(col, [-10.0, -10.0, -10.0], -1e-3, 0.0)
    assert step_fast_linear(col, prev, 1e4, 0.5, -1e-3) is None
    state, stats = advance(col, prev, 1e4, 0.5, -1e-3, StepperOptions(fast_path=True))
    assert not stats.fast_path_taken


def test_gamma_is_beta_of_eta_after_every_step():
    sc = Scenario(soil_column(12), SinusoidBC(0.0, 6.0, 20 * 86400.0), -0.5, 0.5,
                  86400.0, 40 * 86400.0)
    res = run(sc, StepperOptions(fast_path=True))
    for st in res.states[1:]:
        np.testing.assert_array_equal(st.gamma[1:], big_b(st.eta, sc.column))


def test_zero_duration_run():
    sc = Scenario(soil_column(4), ConstantBC(-1.0), 1.0, 1.0, 10.0, 0.0)
    res = run(sc)
    assert len(res.states) == 1 and res.stats == []
    assert res.mean_linear_solves == 0.0 and res.solve_histogram() == {}


def test_cooling_never_warms():
    sc = Scenario(soil_column(16), SampledBC([0.0, 30 * 86400.0], [1.0, -8.0]), 1.0, 1.0,
                  86400.0, 30 * 86400.0)
    temps = run(sc).temperatures()
    assert temps.max() <= 1.0 + 1e-12
    assert np.all(np.diff(temps[:, 1:], axis=0) <= 1e-12)


def test_schemes_agree_at_small_dt():
    col = soil_column(10, depth=1.0)
    base = dict(column=col, surface_bc=ConstantBC(4.0), initial_temperature=-1.0,
                duration=6 * 3600.0)
    limit = explicit_dt_limit(col)

    def gap(dt):
        implicit = run(Scenario(theta=1.0, dt=dt, **base)).states[-1].gamma
        explicit = run(Scenario(theta=0.0, dt=dt, **base)).states[-1].gamma
        return np.abs(implicit - explicit).max()

    coarse, fine = gap(limit / 2), gap(limit / 8)
    assert coarse < 0.05
    # first order: a quarter of the step gives roughly a quarter of the gap
    assert fine < 0.4 * coarse


def test_run_statistics_and_time_grid():
    sc = Scenario(soil_column(8), SinusoidBC(0.0, 5.0, 10 * 86400.0), 0.5, 1.0,
                  86400.0, 10 * 86400.0)
    res = run(sc)
    np.testing.assert_array_equal(res.times, np.arange(11) * 86400.0)
    hist = res.solve_histogram()
    assert sum(hist.values()) == 10
    assert res.mean_linear_solves == pytest.approx(
        sum(k * v for k, v in hist.items()) / 10)
    assert res.max_energy_defect <= 1e-10


def test_run_wraps_failures():
    sc = Scenario(soil_column(40), ConstantBC(-1.0), 1.0, 0.0, 86400.0, 86400.0)
    with pytest.raises(StepFailure) as err:
        run(sc)
    assert err.value.step == 1 and isinstance(err.value.cause, StabilityError)


def test_predictor_reaches_same_root(rng):
    col = soil_column(12)
    prev = State.from_enthalpy(col, np.full(12, 0.3e8), 0.0, 0.0)
    a, _ = step_implicit(col, prev, 86400.0, 1.0, -7.0)
    b, _ = step_implicit(col, prev, 86400.0, 1.0, -7.0, predictor=True)
    np.testing.assert_allclose(a.eta, b.eta, rtol=0, atol=1e-2)
    with pytest.raises(ValueError):
        step_implicit(col, prev, 86400.0, 0.0, -7.0)


def test_energy_audit_fixture_counts_steps(energy_audit):
    sc = Scenario(soil_column(4), ConstantBC(-1.0), 1.0, 1.0, 100.0, 500.0)
    run(sc)
    assert energy_audit["steps"] == 5
