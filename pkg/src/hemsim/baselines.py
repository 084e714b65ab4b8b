"""Comparison policies: thermostatic ON/OFF control, the no-storage learner,
and a perfect-information planning oracle.

The oracle does backward induction on a discretized (stored energy, indoor
temperature) grid under the nominal (disturbance-free) dynamics, minimizing
energy plus wear cost with comfort violations charged at a large weight so the
band acts as a hard constraint.  Values between grid nodes are bilinearly
interpolated.  The forward pass re-minimizes over the action grid at the true
continuous state, so the extracted schedule is feasible and its reported
totals recompute exactly from the environment's own cost functions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .agent import EpisodeLog, TrainConfig, TrainReport, evaluate, rollout, train
from .env import Action, EnvState, HomeConfig, RawAction
from .env import reset as env_reset
from .env import step as env_step
from .traces import TraceSet


class ThermostatPolicy:
    """Hysteresis ON/OFF control of the HVAC only: full power above the band,
    off below it, previous mode inside it.  Never touches the battery."""

    def __init__(self, home: HomeConfig, initial_on: bool = False):
        self.home = home
        self.on = initial_on

    def __call__(self, state: EnvState) -> RawAction:
        if state.indoor_f > self.home.comfort_max_f:
            self.on = True
        elif state.indoor_f < self.home.comfort_min_f:
            self.on = False
        return Action(0.0, self.home.hvac_max_kw if self.on else 0.0)


def onoff_policy(home: HomeConfig) -> ThermostatPolicy:
    return ThermostatPolicy(home)


def run_onoff(traces: TraceSet, home: HomeConfig, start_slot: int, n_slots: int,
              rng: Optional[np.random.Generator] = None) -> EpisodeLog:
    """Roll the thermostat policy over a window."""
    return rollout(ThermostatPolicy(home), traces, home, start_slot, n_slots, rng)


def run_baseline2(traces: TraceSet, home: HomeConfig, train_config: TrainConfig,
                  train_slots: Optional[int] = None,
                  eval_start: int = 0, eval_slots: Optional[int] = None,
                  rng: Optional[np.random.Generator] = None) -> EpisodeLog:
    """Train and evaluate the learner with the battery disabled
    (zero charge and discharge rates force the storage action to zero)."""
    no_ess = replace(home, charge_max_kw=0.0, discharge_max_kw=0.0)
    report = train_baseline2(traces, no_ess, train_config, train_slots)
    if eval_slots is None:
        eval_slots = traces.horizon_len - eval_start
    return evaluate(report.actor, traces, no_ess, eval_start, eval_slots, report.norm_stats, rng)


def train_baseline2(traces: TraceSet, no_ess_home: HomeConfig, train_config: TrainConfig,
                    train_slots: Optional[int] = None) -> TrainReport:
    if no_ess_home.charge_max_kw != 0.0 or no_ess_home.discharge_max_kw != 0.0:
        no_ess_home = replace(no_ess_home, charge_max_kw=0.0, discharge_max_kw=0.0)
    return train(traces, no_ess_home, train_config, train_slots)


@dataclass(frozen=True)
class OracleGrid:
    """Discretization of the oracle's state and action spaces."""

    ess_step_kwh: float = 0.1
    temp_step_f: float = 0.5
    ess_levels: int = 13          # storage-power levels over [-d_max, c_max]
    hvac_levels: int = 9          # HVAC-power levels over [0, e_max]
    temp_pad_below_f: float = 10.0
    temp_pad_above_f: float = 2.0
    comfort_weight: float = 1e6   # $ per degF; makes the band a hard constraint

    def __post_init__(self):
        if self.ess_step_kwh <= 0 or self.temp_step_f <= 0:
            raise ValueError("grid steps must be positive")
        if self.ess_levels < 2 or self.hvac_levels < 2:
            raise ValueError("need at least two action levels per dimension")

    def refine(self) -> "OracleGrid":
        """Halve both state steps and double the action resolution."""
        return replace(self, ess_step_kwh=self.ess_step_kwh / 2, temp_step_f=self.temp_step_f / 2,
                       ess_levels=2 * self.ess_levels - 1, hvac_levels=2 * self.hvac_levels - 1)


@dataclass(frozen=True)
class OracleResult:
    log: EpisodeLog
    value_start: float            # DP optimum at the initial state (includes comfort weight)
    infeasible_slots: np.ndarray  # slots where no HVAC level could keep the band
    grid: OracleGrid

    @property
    def total_cost(self) -> float:
        return self.log.total_cost

    @property
    def total_discomfort(self) -> float:
        return self.log.total_discomfort


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = max(2, int(np.ceil((hi - lo) / step)) + 1)
    return lo + step * np.arange(n)


def _action_values(v_next, b_grid, t_grid, f_levels, e_levels, ess, indoor,
                   solar, demand, outdoor, price, home: HomeConfig, weight: float):
    """Stage cost + interpolated next value for every action at one continuous
    state.  Mirrors the kernel sweep, vectorized over the action grid."""
    f_lo = min(max(-home.discharge_max_kw, (home.ess_min_kwh - ess) * home.discharge_eff), 0.0)
    f_hi = max(min(home.charge_max_kw, (home.ess_max_kwh - ess) / home.charge_eff), 0.0)
    f = np.clip(f_levels, f_lo, f_hi)[:, None]
    e = np.clip(e_levels, 0.0, home.hvac_max_kw)[None, :]
    if indoor < home.comfort_min_f:
        e = np.zeros_like(e)

    charge = np.maximum(f, 0.0)
    discharge = np.minimum(f, 0.0)
    b_next = ess + home.charge_eff * charge + discharge / home.discharge_eff
    t_next = home.thermal_inertia * indoor + (1.0 - home.thermal_inertia) * (
        outdoor - home.hvac_gain_f_per_kw * e)

    g = demand + e + charge + discharge - solar
    sell = home.sell_ratio * price
    c_energy = 0.5 * (price - sell) * np.abs(g) + 0.5 * (price + sell) * g
    c_wear = home.ess_wear_cost * np.abs(f)
    c_comfort = np.maximum(0.0, t_next - home.comfort_max_f) + np.maximum(0.0, home.comfort_min_f - t_next)

    vi = _interp2(v_next, b_grid, t_grid, np.broadcast_to(b_next, g.shape), np.broadcast_to(t_next, g.shape))
    cost = c_energy + c_wear + weight * c_comfort + vi
    applied_f = np.broadcast_to(f, g.shape)
    applied_e = np.broadcast_to(e + np.zeros_like(f), g.shape)
    return cost, applied_f, applied_e, np.broadcast_to(c_comfort, g.shape)


def _interp2(v, b_grid, t_grid, b, t):
    nb, nt = len(b_grid), len(t_grid)
    db = (b_grid[-1] - b_grid[0]) / (nb - 1)
    dt = (t_grid[-1] - t_grid[0]) / (nt - 1)
    xb = np.clip((b - b_grid[0]) / db, 0.0, nb - 1.0)
    ib = np.minimum(xb.astype(np.int64), nb - 2)
    wb = xb - ib
    xt = np.clip((t - t_grid[0]) / dt, 0.0, nt - 1.0)
    it = np.minimum(xt.astype(np.int64), nt - 2)
    wt = xt - it
    return ((v[ib, it] * (1.0 - wb) + v[ib + 1, it] * wb) * (1.0 - wt)
            + (v[ib, it + 1] * (1.0 - wb) + v[ib + 1, it + 1] * wb) * wt)


def dp_oracle(traces: TraceSet, home: HomeConfig, grid: OracleGrid = OracleGrid(),
              start_slot: int = 0, horizon: Optional[int] = None) -> OracleResult:
    """Backward-induction optimum over a window under nominal dynamics.

    Memory grows with horizon x grid size (one value table per slot is kept
    for the forward pass); a month at the default grid is ~30 MB.
    """
    if horizon is None:
        horizon = traces.horizon_len - start_slot
    if horizon <= 0 or start_slot + horizon > traces.horizon_len:
        raise ValueError(f"horizon [{start_slot}, {start_slot + horizon}) outside trace")

    b_grid = _axis(home.ess_min_kwh, home.ess_max_kwh, grid.ess_step_kwh)
    t_hi = max(home.comfort_max_f, float(np.max(traces.outdoor_f[start_slot:start_slot + horizon])))
    t_lo = min(home.comfort_min_f - grid.temp_pad_below_f, home.indoor_init_f)
    t_grid = _axis(t_lo, t_hi + grid.temp_pad_above_f, grid.temp_step_f)
    f_levels = np.linspace(-home.discharge_max_kw, home.charge_max_kw, grid.ess_levels)
    e_levels = np.linspace(0.0, home.hvac_max_kw, grid.hvac_levels)

    nb, nt = len(b_grid), len(t_grid)
    values = [None] * (horizon + 1)
    values[horizon] = np.zeros((nb, nt))
    best_f = np.empty((nb, nt), dtype=np.int32)
    best_e = np.empty((nb, nt), dtype=np.int32)
    for k in range(horizon - 1, -1, -1):
        t = start_slot + k
        v_out = np.empty((nb, nt))
        _kernels.dp_backward_sweep(
            values[k + 1], b_grid, t_grid, f_levels, e_levels,
            float(traces.solar_kw[t]), float(traces.demand_kw[t]),
            float(traces.outdoor_f[t]), float(traces.price_buy[t]),
            home.charge_eff, home.discharge_eff, home.ess_min_kwh, home.ess_max_kwh,
            home.charge_max_kw, home.discharge_max_kw, home.hvac_max_kw,
            home.comfort_min_f, home.comfort_max_f, home.thermal_inertia,
            home.hvac_gain_f_per_kw, home.ess_wear_cost, home.sell_ratio,
            grid.comfort_weight, v_out, best_f, best_e)
        values[k] = v_out

    value_start = float(_interp2(values[0], b_grid, t_grid,
                                 np.array(home.ess_init_kwh), np.array(home.indoor_init_f)))

    # Forward pass: re-minimize over the action grid at the continuous state,
    # then advance the true dynamics through the environment.
    return _forward_schedule(traces, home, grid, start_slot, horizon, values,
                             b_grid, t_grid, f_levels, e_levels, value_start)


def _forward_schedule(traces, home, grid, start_slot, horizon, values,
                      b_grid, t_grid, f_levels, e_levels, value_start) -> OracleResult:
    nominal = home if home.disturb_hi_f == home.disturb_lo_f == 0.0 else replace(
        home, disturb_lo_f=0.0, disturb_hi_f=0.0)
    state = env_reset(nominal, traces, start_slot)
    cols = {name: np.empty(horizon) for name in (
        "price", "solar_kw", "demand_kw", "ess_kw", "hvac_kw", "grid_kw",
        "ess_kwh", "indoor_f", "energy_cost", "wear_cost", "discomfort", "reward")}
    slots = np.arange(start_slot, start_slot + horizon)
    infeasible = []
    for k in range(horizon):
        t = start_slot + k
        cost, applied_f, applied_e, comfort = _action_values(
            values[k + 1], b_grid, t_grid, f_levels, e_levels,
            state.ess_kwh, state.indoor_f,
            float(traces.solar_kw[t]), float(traces.demand_kw[t]),
            float(traces.outdoor_f[t]), float(traces.price_buy[t]),
            nominal, grid.comfort_weight)
        flat = int(np.argmin(cost))
        fi, ei = divmod(flat, cost.shape[1])
        if comfort.min() > 0.0:
            infeasible.append(t)
        out = env_step(state, Action(float(applied_f[fi, ei]), float(applied_e[fi, ei])),
                       traces, nominal)
        cols["price"][k] = state.price_buy
        cols["solar_kw"][k] = state.solar_kw
        cols["demand_kw"][k] = state.demand_kw
        cols["ess_kw"][k] = out.action.ess_kw
        cols["hvac_kw"][k] = out.action.hvac_kw
        cols["grid_kw"][k] = out.grid_kw
        cols["ess_kwh"][k] = out.next_state.ess_kwh
        cols["indoor_f"][k] = out.next_state.indoor_f
        cols["energy_cost"][k] = out.energy_cost
        cols["wear_cost"][k] = out.wear_cost
        cols["discomfort"][k] = out.discomfort
        cols["reward"][k] = out.reward
        state = out.next_state
    log = EpisodeLog(slot=slots, hour=slots % 24, **cols)
    return OracleResult(log=log, value_start=value_start,
                        infeasible_slots=np.array(infeasible, dtype=np.int64), grid=grid)


def grid_gap(traces: TraceSet, home: HomeConfig, grid: OracleGrid = OracleGrid(),
             start_slot: int = 0, horizon: Optional[int] = None):
    """Oracle at the given grid and one refinement; returns both results and
    the measured cost gap used as the discretization slack."""
    coarse = dp_oracle(traces, home, grid, start_slot, horizon)
    fine = dp_oracle(traces, home, grid.refine(), start_slot, horizon)
    return coarse, fine, abs(coarse.total_cost - fine.total_cost)
