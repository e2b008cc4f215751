import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from esfreq.errors import InvalidScenarioError, NumericDomainError, SimulationAbort
from esfreq.grid import (DEFAULT_UFLS, GovernorFleet, GridModel, SystemState, UflsStage,
                         governor_derivatives, mechanical_power, rk4_step, run_simulation,
                         swing_derivative)
from esfreq.scenario import Scenario, build_model, preset


def small_grid(headroom=None, damping=0.0, ufls=()):
    gov = GovernorFleet(responsive_mva=1_000.0, droop_pu=0.05, t_governor_s=0.3,
                        t_reheat_s=6.0, hp_fraction=0.3,
                        headroom_mw=1_000.0 if headroom is None else headroom)
    return GridModel(capacity_mva=1_000.0, inertia_s=5.0, load_mw=1_000.0, governor=gov,
                     damping_pu_per_hz=damping, ufls=ufls)


def scenario(loss=50.0, **kw):
    kw.setdefault("duration_s", 20.0)
    return Scenario(name="t", pv_fraction=0.0, wind_fraction=0.0, loss_mw=loss, **kw)


def test_swing_derivative_closed_form():
    m = small_grid()
    s = SystemState.initial(m)
    # 60 * (-50) / (2 * 5 * 1000)
    assert swing_derivative(m, s, 0.0, loss_mw=50.0) == pytest.approx(-0.3, rel=1e-12)
    assert swing_derivative(m, s, 50.0, loss_mw=50.0) == 0.0


def test_swing_derivative_rejects_nan():
    m = small_grid()
    with pytest.raises(NumericDomainError):
        swing_derivative(m, SystemState.initial(m), math.nan)


def test_governor_targets_droop_setpoint():
    m = small_grid()
    s = SystemState(t=0.0, freq_hz=59.4)
    dv, dr = governor_derivatives(m, s)
    # target valve = 0.6 / (0.05 * 60) = 0.2 pu
    assert dv == pytest.approx(0.2 / 0.3)
    assert dr == 0.0


def test_mechanical_power_clipped_to_headroom():
    m = small_grid(headroom=100.0)
    assert mechanical_power(m, 1.0, 1.0) == 100.0
    assert mechanical_power(m, -1.0, -1.0) == 0.0
    assert mechanical_power(m, 0.05, 0.05) == pytest.approx(50.0)


def test_pure_inertia_ramp_is_exact():
    m = small_grid(headroom=0.0)
    tr = run_simulation(m, scenario(loss_time_s=1.0, duration_s=5.0))
    expected = np.where(tr.t >= 1.0, 60.0 - 0.3 * (tr.t - 1.0), 60.0)
    np.testing.assert_allclose(tr.freq_hz, expected, atol=1e-9)


def test_damped_decay_matches_exponential():
    m = small_grid(headroom=0.0, damping=0.02)
    tr = run_simulation(m, scenario(loss_time_s=0.0, duration_s=10.0))
    d_load = 0.02 * 1_000.0
    tau = 2 * 5.0 * 1_000.0 / (60.0 * d_load)
    expected = 60.0 - 50.0 / d_load * (1.0 - np.exp(-tr.t / tau))
    np.testing.assert_allclose(tr.freq_hz, expected, atol=1e-9)


def test_governor_response_matches_scipy_oracle():
    m = small_grid()
    gov = m.governor
    tr = run_simulation(m, scenario(loss_time_s=0.0, duration_s=20.0))

    def rhs(_t, y):
        f, v, r = y
        pm = gov.responsive_mva * (gov.hp_fraction * v + (1 - gov.hp_fraction) * r)
        return [60.0 * (pm - 50.0) / (2 * 5.0 * 1_000.0),
                (-(f - 60.0) / (gov.droop_pu * 60.0) - v) / gov.t_governor_s,
                (v - r) / gov.t_reheat_s]

    ref = solve_ivp(rhs, (0.0, 20.0), [60.0, 0.0, 0.0], t_eval=tr.t, rtol=1e-11, atol=1e-12,
                    method="DOP853")
    np.testing.assert_allclose(tr.freq_hz, ref.y[0], atol=1e-7)
    # settles on the droop line: 50 MW needs 0.05 pu valve, i.e. 0.15 Hz
    assert tr.freq_hz[-1] == pytest.approx(59.85, abs=0.02)


def test_rk4_fourth_order_convergence():
    m = small_grid()
    s0 = SystemState(t=0.0, freq_hz=59.9, gov_valve_pu=0.01)

    def run(dt):
        s = s0
        for _ in range(int(round(2.0 / dt))):
            s = rk4_step(m, s, dt, lambda _t: -50.0)
        return s.freq_hz

    ref = run(0.0025)
    e1, e2 = abs(run(0.04) - ref), abs(run(0.02) - ref)
    assert 12.0 < e1 / e2 < 20.0


def test_rk4_rejects_bad_step_and_aborts_on_nonfinite():
    m = small_grid()
    s = SystemState.initial(m)
    with pytest.raises(ValueError):
        rk4_step(m, s, 0.0, lambda _t: 0.0)
    with pytest.raises(SimulationAbort):
        rk4_step(m, s, 0.01, lambda _t: 1e308)


def test_zero_contingency_stays_flat():
    sc, devs = preset("EI", "step", "hpes", loss_mw=0.0)
    tr = run_simulation(build_model(sc), sc, devs)
    assert np.max(np.abs(tr.freq_hz - 60.0)) == 0.0
    assert np.all(tr.es_power_mw == 0.0)


def test_loss_applied_at_loss_time():
    m = small_grid()
    tr = run_simulation(m, scenario(loss_time_s=2.0, duration_s=4.0))
    before = tr.t <= 2.0 + 1e-12
    assert np.all(tr.freq_hz[before] == 60.0)
    assert tr.freq_hz[np.searchsorted(tr.t, 2.01)] < 60.0


def test_ufls_sheds_only_when_enabled():
    stages = (UflsStage(59.8, 0.05, 0.1), UflsStage(59.6, 0.05, 0.1))
    m = small_grid(headroom=0.0, ufls=stages)
    off = run_simulation(m, scenario(loss=120.0, duration_s=5.0))
    assert np.all(off.load_fraction == 1.0)
    on = run_simulation(m, scenario(loss=120.0, duration_s=5.0, ufls_enabled=True))
    assert on.load_fraction[-1] == pytest.approx(0.95 * 0.95)
    assert [e[2] for e in on.events] == ["ufls@59.8", "ufls@59.6"]
    # stages shed 50 then 47.5 MW, leaving 22.5 MW: pure-inertia slope 60 * 22.5 / 10000
    slope = (on.freq_hz[-1] - on.freq_hz[-11]) / 0.1
    assert slope == pytest.approx(-0.135, rel=1e-6)
    np.testing.assert_allclose(on.shed_mw[-1], 1_000.0 * (1 - 0.9025))


def test_model_validation():
    gov = GovernorFleet(responsive_mva=100.0)
    with pytest.raises(InvalidScenarioError):
        GridModel(capacity_mva=0.0, inertia_s=5.0, load_mw=1.0, governor=gov)
    with pytest.raises(InvalidScenarioError):
        GridModel(capacity_mva=1.0, inertia_s=5.0, load_mw=1.0, governor=gov,
                  ufls=(UflsStage(59.0, 0.1), UflsStage(59.5, 0.1)))
    assert len(DEFAULT_UFLS) == 3


def test_devices_are_not_mutated():
    sc, devs = preset("EI", "step", "hpes")
    before = devs[0].soc_mws
    run_simulation(build_model(sc), sc, devs)
    assert devs[0].soc_mws == before
    assert devs[0].controller.assumed_inertia_s is None


@settings(max_examples=25, deadline=None)
@given(loss=st.floats(0.0, 200.0), h=st.floats(1.0, 10.0))
def test_frequency_never_rises_above_nominal_after_loss(loss, h):
    gov = GovernorFleet(responsive_mva=1_000.0)
    m = GridModel(capacity_mva=1_000.0, inertia_s=h, load_mw=1_000.0, governor=gov)
    tr = run_simulation(m, scenario(loss=loss, duration_s=3.0, loss_time_s=0.5))
    assert np.all(tr.freq_hz <= 60.0 + 1e-12)
    assert np.all(np.isfinite(tr.freq_hz))
