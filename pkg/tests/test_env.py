import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemsim.env import (
    Action,
    EnvState,
    HomeConfig,
    clip_action,
    comfort_penalty,
    depreciation_cost,
    energy_cost,
    ess_step,
    grid_power,
    reset,
    step,
    thermal_step,
)
from conftest import flat_trace


def _state(home, **overrides):
    base = dict(t=0, solar_kw=0.0, demand_kw=0.0, ess_kwh=home.ess_init_kwh,
                outdoor_f=70.0, indoor_f=70.0, price_buy=0.1)
    base.update(overrides)
    return EnvState(**base)


# --- reset -------------------------------------------------------------------

def test_reset_initial_storage(home, hot_trace):
    state = reset(home, hot_trace, 0)
    assert state.ess_kwh == 1.2
    assert state.indoor_f == home.indoor_init_f
    assert state.hour == 0
    assert state.solar_kw == hot_trace.solar_kw[0]


def test_reset_day_boundaries(home, hot_trace):
    assert reset(home, hot_trace, 24).hour == 0
    with pytest.raises(ValueError):
        reset(home, hot_trace, hot_trace.horizon_len - 23)
    with pytest.raises(ValueError):
        reset(home, hot_trace, 12)
    with pytest.raises(ValueError):
        reset(home, hot_trace, hot_trace.horizon_len)


# --- clip_action -------------------------------------------------------------

def test_clip_full_storage_blocks_charging(home):
    state = _state(home, ess_kwh=6.0)
    act = clip_action(Action(3.0, 0.0), state, home)
    assert act.ess_kw == 0.0


def test_clip_discharge_floor(home):
    # Oracle: hand evaluation of the bound max(-3, (0.6 - 1.2) * 0.95).
    state = _state(home, ess_kwh=1.2)
    act = clip_action(Action(-3.0, 0.0), state, home)
    assert act.ess_kw == pytest.approx((0.6 - 1.2) * 0.95, abs=1e-9)
    assert act.ess_kw == pytest.approx(-0.57, abs=1e-9)


def test_clip_hvac_rating(home):
    act = clip_action(Action(0.0, 5.0), _state(home, indoor_f=70.0), home)
    assert act.hvac_kw == 2.0


def test_clip_hvac_off_below_band(home):
    act = clip_action(Action(0.0, 1.5), _state(home, indoor_f=60.0), home)
    assert act.hvac_kw == 0.0


def test_clip_rejects_non_finite(home):
    state = _state(home)
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(ValueError):
            clip_action(Action(bad, 0.0), state, home)
        with pytest.raises(ValueError):
            clip_action(Action(0.0, bad), state, home)


def test_clip_keeps_feasible_actions(home):
    state = _state(home, ess_kwh=3.0, indoor_f=70.0)
    act = clip_action(Action(1.0, 1.0), state, home)
    assert act == Action(1.0, 1.0)


# --- storage dynamics ---------------------------------------------------------

def test_ess_step_charge(home):
    # Oracle: hand evaluation 1.2 + 0.95 * 1.0.
    assert ess_step(1.2, 1.0, home) == pytest.approx(2.15, abs=1e-9)


def test_ess_step_identity(home):
    assert ess_step(2.15, 0.0, home) == 2.15


def test_ess_step_discharge(home):
    # Oracle: hand evaluation 2.15 - 0.57 / 0.95.
    assert ess_step(2.15, -0.57, home) == pytest.approx(2.15 - 0.57 / 0.95, abs=1e-12)
    assert ess_step(2.15, -0.57, home) == pytest.approx(1.55, abs=1e-9)


# --- thermal dynamics ----------------------------------------------------------

def test_thermal_step_hand_value(home):
    # Oracle: hand evaluation 0.7*75.2 + 0.3*(95 - (2.5/0.14)*2).
    expected = 0.7 * 75.2 + 0.3 * (95.0 - (2.5 / 0.14) * 2.0)
    got = thermal_step(75.2, 95.0, 2.0, home)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(70.42571428571429, abs=1e-9)


def test_thermal_step_fixed_point(home):
    assert thermal_step(80.0, 80.0, 0.0, home) == 80.0


def test_thermal_step_disturbance_additive(home):
    base = thermal_step(72.0, 90.0, 1.0, home)
    assert thermal_step(72.0, 90.0, 1.0, home, disturbance_f=1.8) == pytest.approx(base + 1.8, abs=1e-12)


@given(e1=st.floats(0, 2), delta=st.floats(1e-6, 2), t_out=st.floats(40, 110))
@settings(max_examples=60, deadline=None)
def test_thermal_monotonic_in_hvac_and_outdoor(e1, delta, t_out):
    home = HomeConfig()
    e2 = min(2.0, e1 + delta)
    if e2 > e1:
        assert thermal_step(72.0, t_out, e1, home) > thermal_step(72.0, t_out, e2, home)
    assert thermal_step(72.0, t_out + 1.0, 1.0, home) > thermal_step(72.0, t_out, 1.0, home)


# --- power balance and costs ---------------------------------------------------

def test_grid_power_identity(home):
    # Oracle: the balance identity g = b + e + c + d - p evaluated by hand.
    state = _state(home, demand_kw=1.0, solar_kw=0.5)
    assert grid_power(state, Action(0.0, 2.0)) == pytest.approx(2.5, abs=1e-12)


def test_grid_power_export(home):
    state = _state(home, demand_kw=0.0, solar_kw=1.0)
    assert grid_power(state, Action(-2.0, 0.0)) == pytest.approx(-3.0, abs=1e-12)


def test_grid_power_zero(home):
    assert grid_power(_state(home), Action(0.0, 0.0)) == 0.0


def test_energy_cost_buy_branch(home):
    # Oracle: the single-expression form evaluated by hand for g >= 0.
    u = 0.9 * 0.10
    expected = 0.5 * (0.10 - u) * 2.0 + 0.5 * (0.10 + u) * 2.0
    assert energy_cost(2.0, 0.10, home) == expected
    assert energy_cost(2.0, 0.10, home) == pytest.approx(0.20, abs=1e-9)


def test_energy_cost_sell_branch(home):
    u = 0.9 * 0.10
    expected = 0.5 * (0.10 - u) * 2.0 + 0.5 * (0.10 + u) * (-2.0)
    assert energy_cost(-2.0, 0.10, home) == expected
    assert energy_cost(-2.0, 0.10, home) == pytest.approx(-0.18, abs=1e-9)


def test_energy_cost_zero(home):
    assert energy_cost(0.0, 0.10, home) == 0.0


@given(g=st.floats(-10, 10), dg=st.floats(0.001, 5), v=st.floats(0.01, 1.0))
@settings(max_examples=80, deadline=None)
def test_energy_cost_sign_coherence(g, dg, v):
    home = HomeConfig()
    assert energy_cost(g + dg, v, home) >= energy_cost(g, v, home)
    # Selling earns no more than buying costs.
    assert energy_cost(-g, v, home) >= -energy_cost(g, v, home) - 1e-12


def test_depreciation_cost(home):
    assert depreciation_cost(0.0, home) == 0.0
    # Oracle: hand evaluation 0.01 * |f|.
    assert depreciation_cost(2.0, home) == pytest.approx(0.02, abs=1e-9)
    assert depreciation_cost(-2.0, home) == depreciation_cost(2.0, home)


def test_comfort_penalty(home):
    assert comfort_penalty(70.0, home) == 0.0
    assert comfort_penalty(66.2, home) == 0.0
    # Oracle: hand evaluation 77 - 75.2.
    assert comfort_penalty(77.0, home) == pytest.approx(1.8, abs=1e-9)
    assert comfort_penalty(60.0, home) == pytest.approx(6.2, abs=1e-9)


# --- step ----------------------------------------------------------------------

def test_step_zero_everything_zero_reward(home):
    traces = flat_trace(demand=0.0, solar=0.0, outdoor=70.0, price=0.1)
    state = reset(home, traces, 0)
    state = dataclasses.replace(state, indoor_f=70.0)
    out = step(state, Action(0.0, 0.0), traces, home)
    assert out.reward == 0.0
    assert out.energy_cost == 0.0 and out.wear_cost == 0.0 and out.discomfort == 0.0


def test_step_composed_hand_example():
    # Oracle: composition of the per-operation hand examples.  With beta=1,
    # demand 0.5, solar 0.5, charge 2 kW: g = 2, c1 = 0.2, c2 = 0.02, and the
    # indoor temperature stays at the 70 F fixed point, so reward = -0.22.
    home = HomeConfig(cost_weight=1.0)
    traces = flat_trace(demand=0.5, solar=0.5, outdoor=70.0, price=0.10)
    state = dataclasses.replace(reset(home, traces, 0), indoor_f=70.0)
    out = step(state, Action(2.0, 0.0), traces, home)
    assert out.grid_kw == pytest.approx(2.0, abs=1e-12)
    assert out.energy_cost == pytest.approx(0.20, abs=1e-9)
    assert out.wear_cost == pytest.approx(0.02, abs=1e-9)
    assert out.discomfort == 0.0
    assert out.reward == pytest.approx(-0.22, abs=1e-9)


def test_step_reward_decomposition_exact(home, hot_trace):
    rng = np.random.default_rng(7)
    state = reset(home, hot_trace, 0)
    for _ in range(200):
        raw = Action(rng.uniform(-4, 4), rng.uniform(-1, 3))
        out = step(state, raw, hot_trace, home)
        assert out.reward == -(home.cost_weight * (out.energy_cost + out.wear_cost)) - out.discomfort
        state = out.next_state


def test_step_invariants_random_actions(home, hot_trace):
    rng = np.random.default_rng(11)
    state = reset(home, hot_trace, 0)
    for _ in range(500):
        raw = Action(rng.uniform(-6, 6), rng.uniform(-2, 4))
        out = step(state, raw, hot_trace, home)
        charge = max(out.action.ess_kw, 0.0)
        discharge = min(out.action.ess_kw, 0.0)
        balance = out.grid_kw + state.solar_kw - discharge - (state.demand_kw + out.action.hvac_kw + charge)
        assert abs(balance) < 1e-9
        assert home.ess_min_kwh <= out.next_state.ess_kwh <= home.ess_max_kwh
        assert charge * discharge == 0.0
        state = out.next_state


def test_step_wraps_exogenous_at_horizon(home, hot_trace):
    last = hot_trace.horizon_len - 1
    state = EnvState(t=last, solar_kw=float(hot_trace.solar_kw[last]),
                     demand_kw=float(hot_trace.demand_kw[last]), ess_kwh=1.2,
                     outdoor_f=float(hot_trace.outdoor_f[last]), indoor_f=70.0,
                     price_buy=float(hot_trace.price_buy[last]))
    out = step(state, Action(0.0, 0.0), hot_trace, home)
    assert out.next_state.t == 0
    assert out.next_state.solar_kw == hot_trace.solar_kw[0]


def test_step_nominal_is_deterministic(home, hot_trace):
    state = reset(home, hot_trace, 0)
    a = step(state, Action(1.0, 1.0), hot_trace, home)
    b = step(state, Action(1.0, 1.0), hot_trace, home)
    assert a == b


def test_step_disturbance_requires_rng(hot_trace):
    home = HomeConfig().with_disturbance(1.8)
    state = reset(home, hot_trace, 0)
    with pytest.raises(ValueError):
        step(state, Action(0.0, 0.0), hot_trace, home)
    rng = np.random.default_rng(0)
    out = step(state, Action(0.0, 0.0), hot_trace, home, rng)
    nominal = step(state, Action(0.0, 0.0), hot_trace, HomeConfig())
    shift = out.next_state.indoor_f - nominal.next_state.indoor_f
    assert -1.8 <= shift <= 1.8


def test_home_config_validation():
    with pytest.raises(ValueError):
        HomeConfig(charge_eff=0.0)
    with pytest.raises(ValueError):
        HomeConfig(ess_min_kwh=6.0, ess_max_kwh=0.6)
    with pytest.raises(ValueError):
        HomeConfig(ess_init_kwh=10.0)
    with pytest.raises(ValueError):
        HomeConfig(comfort_min_f=80.0, comfort_max_f=70.0)
    with pytest.raises(ValueError):
        HomeConfig(thermal_inertia=1.0)
    with pytest.raises(ValueError):
        HomeConfig(disturb_lo_f=0.5, disturb_hi_f=1.0)
    with pytest.raises(ValueError):
        HomeConfig(sell_ratio=1.5)
