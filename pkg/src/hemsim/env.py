"""Smart-home MDP: storage and thermal dynamics, feasibility clipping, costs, reward.

State is the 7-tuple (solar, demand, stored energy, outdoor temp, indoor temp,
buy price, hour).  The action is a signed storage power (positive charges,
negative discharges; a single variable makes simultaneous charge/discharge
structurally impossible) plus a nonnegative HVAC input power.  Cooling mode
only: HVAC power pulls indoor temperature down.

Every operation is a pure function of its arguments; :func:`step` composes
them and returns the itemized costs alongside the reward so the reward
decomposition can be re-checked from the outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .traces import HOURS_PER_DAY, TraceSet


@dataclass(frozen=True)
class HomeConfig:
    """Physical and economic parameters of the home; defaults are the values
    the simulation studies use."""

    charge_eff: float = 0.95            # AC->battery conversion, in (0, 1]
    discharge_eff: float = 0.95         # battery->AC conversion, in (0, 1]
    ess_min_kwh: float = 0.6
    ess_max_kwh: float = 6.0
    ess_init_kwh: float = 1.2
    charge_max_kw: float = 3.0
    discharge_max_kw: float = 3.0
    hvac_max_kw: float = 2.0
    comfort_min_f: float = 66.2
    comfort_max_f: float = 75.2
    thermal_inertia: float = 0.7        # fraction of indoor temp carried over per slot
    hvac_cop: float = 2.5
    conductivity_kw_per_f: float = 0.14
    ess_wear_cost: float = 0.01         # $ per kW moved through the battery
    cost_weight: float = 0.6            # weight of dollar costs vs comfort in the reward
    sell_ratio: float = 0.9             # sell price = ratio * buy price
    disturb_lo_f: float = 0.0           # thermal disturbance bounds; (0, 0) = nominal
    disturb_hi_f: float = 0.0
    indoor_init_f: float = 70.7
    indoor_norm_margin_f: float = 15.0  # widens the indoor channel's normalization range

    def __post_init__(self):
        if not (0 < self.charge_eff <= 1 and 0 < self.discharge_eff <= 1):
            raise ValueError("efficiencies must be in (0, 1]")
        if not self.ess_min_kwh < self.ess_max_kwh:
            raise ValueError("ess_min_kwh must be below ess_max_kwh")
        if not self.ess_min_kwh <= self.ess_init_kwh <= self.ess_max_kwh:
            raise ValueError("ess_init_kwh outside storage bounds")
        if min(self.charge_max_kw, self.discharge_max_kw, self.hvac_max_kw) < 0:
            raise ValueError("power limits must be >= 0")
        if not self.comfort_min_f < self.comfort_max_f:
            raise ValueError("comfort band is empty")
        if not 0 < self.thermal_inertia < 1:
            raise ValueError("thermal_inertia must be in (0, 1)")
        if self.ess_wear_cost < 0 or self.cost_weight < 0:
            raise ValueError("costs and weights must be >= 0")
        if not 0 <= self.sell_ratio <= 1:
            raise ValueError("sell_ratio must be in [0, 1]")
        if not self.disturb_lo_f <= 0 <= self.disturb_hi_f:
            raise ValueError("disturbance bounds must straddle zero")
        if self.conductivity_kw_per_f <= 0 or self.hvac_cop <= 0:
            raise ValueError("thermal parameters must be positive")

    @property
    def hvac_gain_f_per_kw(self) -> float:
        """Equivalent outdoor-temperature drop per kW of HVAC input."""
        return self.hvac_cop / self.conductivity_kw_per_f

    @property
    def ess_kw_scale(self) -> float:
        """Scale used to normalize the storage action channel."""
        return max(self.charge_max_kw, self.discharge_max_kw)

    def with_disturbance(self, half_width_f: float) -> "HomeConfig":
        import dataclasses

        return dataclasses.replace(self, disturb_lo_f=-half_width_f, disturb_hi_f=half_width_f)


class Action(NamedTuple):
    """ESS power (+ charge / - discharge) and HVAC input power, both kW."""

    ess_kw: float
    hvac_kw: float


# A feasible action is an Action that came out of clip_action.
RawAction = Action
FeasibleAction = Action


@dataclass(frozen=True)
class EnvState:
    t: int              # global slot index into the trace
    solar_kw: float
    demand_kw: float
    ess_kwh: float
    outdoor_f: float
    indoor_f: float
    price_buy: float

    @property
    def hour(self) -> int:
        return self.t % HOURS_PER_DAY

    def as_vector(self) -> np.ndarray:
        """Channels in the canonical order used by normalization and the nets."""
        return np.array([
            self.solar_kw, self.demand_kw, self.ess_kwh,
            self.outdoor_f, self.indoor_f, self.price_buy, float(self.hour),
        ])


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    action: FeasibleAction   # the clipped action that was actually applied
    reward: float
    energy_cost: float       # $ for the slot's grid exchange
    wear_cost: float         # $ of battery wear
    discomfort: float        # degrees F outside the band, at the new state
    grid_kw: float           # signed grid exchange (+ buy / - sell)


def reset(config: HomeConfig, traces: TraceSet, start_slot: int) -> EnvState:
    """Initial state of a day-aligned episode starting at ``start_slot``."""
    if start_slot % HOURS_PER_DAY != 0:
        raise ValueError(f"start_slot {start_slot} is not day-aligned")
    if not 0 <= start_slot <= traces.horizon_len - HOURS_PER_DAY:
        raise ValueError(f"start_slot {start_slot} leaves no full day in horizon {traces.horizon_len}")
    return EnvState(
        t=start_slot,
        solar_kw=float(traces.solar_kw[start_slot]),
        demand_kw=float(traces.demand_kw[start_slot]),
        ess_kwh=config.ess_init_kwh,
        outdoor_f=float(traces.outdoor_f[start_slot]),
        indoor_f=config.indoor_init_f,
        price_buy=float(traces.price_buy[start_slot]),
    )


def clip_action(raw: RawAction, state: EnvState, config: HomeConfig) -> FeasibleAction:
    """Project a raw action onto the feasible set for the current state.

    HVAC power is clamped to [0, max] and forced to zero when the room is
    already below the comfort band.  Storage power is clamped so the next
    stored energy stays within bounds at the given conversion efficiencies.
    """
    f, e = float(raw[0]), float(raw[1])
    if not (math.isfinite(f) and math.isfinite(e)):
        raise ValueError(f"non-finite action ({f}, {e})")
    e = min(max(e, 0.0), config.hvac_max_kw)
    if state.indoor_f < config.comfort_min_f:
        e = 0.0
    f_lo = max(-config.discharge_max_kw, (config.ess_min_kwh - state.ess_kwh) * config.discharge_eff)
    f_hi = min(config.charge_max_kw, (config.ess_max_kwh - state.ess_kwh) / config.charge_eff)
    f_lo = min(f_lo, 0.0)
    f_hi = max(f_hi, 0.0)
    return Action(min(max(f, f_lo), f_hi), e)


def ess_step(ess_kwh: float, ess_kw: float, config: HomeConfig) -> float:
    """Stored energy after one slot of (already clipped) storage power."""
    charge = max(ess_kw, 0.0)
    discharge = min(ess_kw, 0.0)
    return ess_kwh + config.charge_eff * charge + discharge / config.discharge_eff


def thermal_step(indoor_f: float, outdoor_f: float, hvac_kw: float,
                 config: HomeConfig, disturbance_f: float = 0.0) -> float:
    """First-order indoor temperature update with an additive disturbance."""
    eps = config.thermal_inertia
    return eps * indoor_f + (1.0 - eps) * (outdoor_f - config.hvac_gain_f_per_kw * hvac_kw) + disturbance_f


def grid_power(state: EnvState, act: FeasibleAction) -> float:
    """Signed grid exchange closing the power balance:
    grid + solar - discharge = demand + hvac + charge."""
    charge = max(act.ess_kw, 0.0)
    discharge = min(act.ess_kw, 0.0)
    return state.demand_kw + act.hvac_kw + charge + discharge - state.solar_kw


def energy_cost(grid_kw: float, price_buy: float, config: HomeConfig) -> float:
    """Cost of one slot's grid exchange; buys at the full price, sells at
    sell_ratio times it.  Single-expression form so one signed variable
    covers both directions."""
    sell = config.sell_ratio * price_buy
    return 0.5 * (price_buy - sell) * abs(grid_kw) + 0.5 * (price_buy + sell) * grid_kw


def depreciation_cost(ess_kw: float, config: HomeConfig) -> float:
    """Battery wear proportional to total power moved."""
    return config.ess_wear_cost * abs(ess_kw)


def comfort_penalty(indoor_f: float, config: HomeConfig) -> float:
    """Degrees above or below the comfort band; zero inside it."""
    return max(0.0, indoor_f - config.comfort_max_f) + max(0.0, config.comfort_min_f - indoor_f)


def step(state: EnvState, raw: RawAction, traces: TraceSet, config: HomeConfig,
         rng: Optional[np.random.Generator] = None) -> StepOutcome:
    """Apply one action: clip, evolve storage and temperature, settle the
    power balance, and price the slot.

    The comfort term is evaluated at the *new* indoor temperature, so
    ``reward = -cost_weight * (energy + wear) - discomfort`` holds exactly
    for every emitted outcome.  Exogenous channels for the next state are
    read at ``t + 1``, wrapping at the end of the trace (traces are whole
    days, so the wrap is seamless in hour-of-day terms).
    """
    act = clip_action(raw, state, config)

    ess_next = ess_step(state.ess_kwh, act.ess_kw, config)
    # Guard against conversion-arithmetic dust; never moves more than ~1e-12.
    ess_next = min(max(ess_next, config.ess_min_kwh), config.ess_max_kwh)

    if config.disturb_hi_f > config.disturb_lo_f:
        if rng is None:
            raise ValueError("disturbance bounds are set but no rng was provided")
        disturbance = float(rng.uniform(config.disturb_lo_f, config.disturb_hi_f))
    else:
        disturbance = 0.0
    indoor_next = thermal_step(state.indoor_f, state.outdoor_f, act.hvac_kw, config, disturbance)

    g = grid_power(state, act)
    c_energy = energy_cost(g, state.price_buy, config)
    c_wear = depreciation_cost(act.ess_kw, config)
    c_comfort = comfort_penalty(indoor_next, config)
    reward = -config.cost_weight * (c_energy + c_wear) - c_comfort

    t_next = (state.t + 1) % traces.horizon_len
    next_state = EnvState(
        t=t_next,
        solar_kw=float(traces.solar_kw[t_next]),
        demand_kw=float(traces.demand_kw[t_next]),
        ess_kwh=ess_next,
        outdoor_f=float(traces.outdoor_f[t_next]),
        indoor_f=indoor_next,
        price_buy=float(traces.price_buy[t_next]),
    )
    return StepOutcome(
        next_state=next_state,
        action=act,
        reward=reward,
        energy_cost=c_energy,
        wear_cost=c_wear,
        discomfort=c_comfort,
        grid_kw=g,
    )
