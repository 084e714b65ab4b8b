"""Exogenous time series driving the home: solar, demand, outdoor temperature, price.

A :class:`TraceSet` holds four hourly series of equal, whole-day length.  It can
be loaded from CSV (``hour,solar_kw,demand_kw,outdoor_f,price_buy``), written
back bit-exactly, or synthesized from a :class:`SyntheticTraceSpec`.

The module also owns input normalization for the learning agent: per-channel
min/max stats over a training window (:func:`compute_norm_stats`) and the
map of a raw environment state onto ``[0, 1]^7`` (:func:`preprocess`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .env import HomeConfig

HOURS_PER_DAY = 24
PRICE_FLOOR = 1e-3

TRACE_COLUMNS = ("hour", "solar_kw", "demand_kw", "outdoor_f", "price_buy")

# Canonical ordering of the 7 state channels, used by NormStats and the nets:
# solar, demand, stored energy, outdoor temp, indoor temp, buy price, hour-of-day.
CH_SOLAR, CH_DEMAND, CH_ESS, CH_OUTDOOR, CH_INDOOR, CH_PRICE, CH_HOUR = range(7)
N_STATE_CHANNELS = 7
CHANNEL_NAMES = ("solar_kw", "demand_kw", "ess_kwh", "outdoor_f", "indoor_f", "price_buy", "hour")


class TraceError(ValueError):
    pass


class TraceSchemaError(TraceError):
    pass


class TraceValidationError(TraceError):
    pass


class TraceLengthError(TraceError):
    pass


def _readonly(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise TraceValidationError(f"{name} must be a 1-D series")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TraceSet:
    """Time-aligned hourly series; immutable after construction."""

    solar_kw: np.ndarray
    demand_kw: np.ndarray
    outdoor_f: np.ndarray
    price_buy: np.ndarray
    slot_duration_h: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "solar_kw", _readonly(self.solar_kw, "solar_kw"))
        object.__setattr__(self, "demand_kw", _readonly(self.demand_kw, "demand_kw"))
        object.__setattr__(self, "outdoor_f", _readonly(self.outdoor_f, "outdoor_f"))
        object.__setattr__(self, "price_buy", _readonly(self.price_buy, "price_buy"))
        n = len(self.solar_kw)
        for name in ("demand_kw", "outdoor_f", "price_buy"):
            if len(getattr(self, name)) != n:
                raise TraceLengthError(f"{name} has {len(getattr(self, name))} rows, expected {n}")
        if n < HOURS_PER_DAY or n % HOURS_PER_DAY != 0:
            raise TraceLengthError(f"series length {n} is not a positive multiple of {HOURS_PER_DAY}")
        if np.any(self.solar_kw < 0):
            raise TraceValidationError(f"negative solar_kw at row {int(np.argmax(self.solar_kw < 0))}")
        if np.any(self.demand_kw < 0):
            raise TraceValidationError(f"negative demand_kw at row {int(np.argmax(self.demand_kw < 0))}")
        if np.any(self.price_buy <= 0):
            raise TraceValidationError(f"nonpositive price_buy at row {int(np.argmax(self.price_buy <= 0))}")
        if self.slot_duration_h != 1.0:
            raise TraceValidationError("only 1-hour slots are supported")

    @property
    def horizon_len(self) -> int:
        return len(self.solar_kw)

    @property
    def n_days(self) -> int:
        return self.horizon_len // HOURS_PER_DAY

    def window(self, start: int, n_slots: int) -> "TraceSet":
        """Whole-day sub-trace starting at slot ``start``."""
        if start % HOURS_PER_DAY or n_slots % HOURS_PER_DAY:
            raise TraceLengthError("window must be day-aligned")
        if start < 0 or start + n_slots > self.horizon_len:
            raise TraceLengthError(f"window [{start}, {start + n_slots}) outside horizon {self.horizon_len}")
        sl = slice(start, start + n_slots)
        return TraceSet(self.solar_kw[sl], self.demand_kw[sl], self.outdoor_f[sl], self.price_buy[sl])


def load_trace(path: str | Path) -> TraceSet:
    """Read and validate a trace CSV."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceSchemaError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != TRACE_COLUMNS:
            raise TraceSchemaError(f"{path}: expected columns {','.join(TRACE_COLUMNS)}, got {','.join(header)}")
        rows = list(reader)

    solar, demand, outdoor, price = [], [], [], []
    for i, row in enumerate(rows):
        if len(row) != len(TRACE_COLUMNS):
            raise TraceSchemaError(f"{path}: row {i} has {len(row)} fields, expected {len(TRACE_COLUMNS)}")
        try:
            hour = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise TraceValidationError(f"{path}: row {i}: {exc}") from exc
        if hour != i:
            raise TraceValidationError(f"{path}: row {i}: hour column must be contiguous, got {hour}")
        if vals[0] < 0:
            raise TraceValidationError(f"{path}: row {i}: negative solar_kw")
        if vals[1] < 0:
            raise TraceValidationError(f"{path}: row {i}: negative demand_kw")
        if vals[3] <= 0:
            raise TraceValidationError(f"{path}: row {i}: price_buy must be > 0")
        solar.append(vals[0])
        demand.append(vals[1])
        outdoor.append(vals[2])
        price.append(vals[3])

    if not rows or len(rows) % HOURS_PER_DAY != 0:
        raise TraceLengthError(f"{path}: {len(rows)} rows is not a positive multiple of {HOURS_PER_DAY}")
    return TraceSet(solar, demand, outdoor, price)


def write_trace(traces: TraceSet, path: str | Path) -> None:
    """Write the CSV form read by :func:`load_trace`; floats round-trip exactly."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for t in range(traces.horizon_len):
            writer.writerow([
                t,
                repr(float(traces.solar_kw[t])),
                repr(float(traces.demand_kw[t])),
                repr(float(traces.outdoor_f[t])),
                repr(float(traces.price_buy[t])),
            ])


@dataclass(frozen=True)
class SyntheticTraceSpec:
    """Parameters of the synthetic day-profile generator.

    Shapes: solar is a half-sine over 06:00-18:00, demand a base level with a
    triangular evening peak centered at 19:00, outdoor temperature a sinusoid
    peaking at 15:00, and the buy price a two-level time-of-use step.  Each
    channel gets independent uniform noise of the configured half-width.
    """

    days: int = 31
    solar_peak_kw: float = 4.0
    demand_base_kw: float = 0.8
    demand_peak_kw: float = 2.2
    outdoor_mean_f: float = 85.0
    outdoor_amplitude_f: float = 10.0
    price_offpeak: float = 0.08
    price_onpeak: float = 0.25
    onpeak_start_hour: int = 14
    onpeak_end_hour: int = 20
    solar_noise_kw: float = 0.0
    demand_noise_kw: float = 0.0
    outdoor_noise_f: float = 0.0
    price_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.days <= 0:
            raise ValueError(f"days must be positive, got {self.days}")
        for name in ("solar_peak_kw", "demand_base_kw", "demand_peak_kw", "outdoor_amplitude_f",
                     "solar_noise_kw", "demand_noise_kw", "outdoor_noise_f", "price_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not (0 <= self.onpeak_start_hour <= self.onpeak_end_hour <= HOURS_PER_DAY):
            raise ValueError("on-peak window must satisfy 0 <= start <= end <= 24")
        if self.price_offpeak <= 0 or self.price_onpeak <= 0:
            raise ValueError("prices must be positive")


def gen_synthetic(spec: SyntheticTraceSpec) -> TraceSet:
    """Deterministic synthetic trace; identical spec gives identical output."""
    n = spec.days * HOURS_PER_DAY
    hours = np.arange(n) % HOURS_PER_DAY

    daylight = (hours > 6) & (hours < 18)
    solar = np.where(daylight, spec.solar_peak_kw * np.sin(np.pi * (hours - 6) / 12.0), 0.0)

    bump = np.maximum(0.0, 1.0 - np.abs(hours - 19) / 3.0)
    demand = spec.demand_base_kw + (spec.demand_peak_kw - spec.demand_base_kw) * bump

    outdoor = spec.outdoor_mean_f + spec.outdoor_amplitude_f * np.cos(2 * np.pi * (hours - 15) / 24.0)

    onpeak = (hours >= spec.onpeak_start_hour) & (hours < spec.onpeak_end_hour)
    price = np.where(onpeak, spec.price_onpeak, spec.price_offpeak)

    rng = np.random.default_rng(spec.seed)
    # Channel draw order is fixed so identical parameters give identical traces.
    solar = solar + rng.uniform(-spec.solar_noise_kw, spec.solar_noise_kw, size=n)
    demand = demand + rng.uniform(-spec.demand_noise_kw, spec.demand_noise_kw, size=n)
    outdoor = outdoor + rng.uniform(-spec.outdoor_noise_f, spec.outdoor_noise_f, size=n)
    price = price + rng.uniform(-spec.price_noise, spec.price_noise, size=n)

    solar = np.maximum(solar, 0.0)
    demand = np.maximum(demand, 0.0)
    price = np.maximum(price, PRICE_FLOOR)
    return TraceSet(solar, demand, outdoor, price)


@dataclass(frozen=True)
class NormStats:
    """Per-channel (lo, hi) bounds used to normalize states into [0, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _readonly(self.lo, "lo"))
        object.__setattr__(self, "hi", _readonly(self.hi, "hi"))
        if self.lo.shape != (N_STATE_CHANNELS,) or self.hi.shape != (N_STATE_CHANNELS,):
            raise ValueError(f"stats must have {N_STATE_CHANNELS} channels")
        if np.any(self.hi < self.lo):
            raise ValueError("hi < lo in normalization stats")

    @property
    def constant(self) -> np.ndarray:
        """Channels whose training range collapsed to a single value."""
        return self.hi == self.lo


def compute_norm_stats(traces: TraceSet, config: "HomeConfig") -> NormStats:
    """Min/max per channel over training traces; fixed bounds for storage,
    indoor temperature (comfort band +/- a margin), and hour of day."""
    lo = np.empty(N_STATE_CHANNELS)
    hi = np.empty(N_STATE_CHANNELS)
    lo[CH_SOLAR], hi[CH_SOLAR] = traces.solar_kw.min(), traces.solar_kw.max()
    lo[CH_DEMAND], hi[CH_DEMAND] = traces.demand_kw.min(), traces.demand_kw.max()
    lo[CH_ESS], hi[CH_ESS] = config.ess_min_kwh, config.ess_max_kwh
    lo[CH_OUTDOOR], hi[CH_OUTDOOR] = traces.outdoor_f.min(), traces.outdoor_f.max()
    lo[CH_INDOOR] = config.comfort_min_f - config.indoor_norm_margin_f
    hi[CH_INDOOR] = config.comfort_max_f + config.indoor_norm_margin_f
    lo[CH_PRICE], hi[CH_PRICE] = traces.price_buy.min(), traces.price_buy.max()
    lo[CH_HOUR], hi[CH_HOUR] = 0.0, 23.0
    return NormStats(lo, hi)


def preprocess(state, stats: NormStats) -> np.ndarray:
    """Map a state onto [0, 1]^7: (x - lo) / (hi - lo), clamped; constant
    channels map to 0.5.  Accepts an EnvState or a bare 7-vector."""
    vec = state.as_vector() if hasattr(state, "as_vector") else np.asarray(state, dtype=np.float64)
    span = stats.hi - stats.lo
    safe = np.where(span > 0, span, 1.0)
    out = np.clip((vec - stats.lo) / safe, 0.0, 1.0)
    return np.where(stats.constant, 0.5, out)


def save_norm_stats(stats: NormStats, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "lo", "hi"])
        for i, name in enumerate(CHANNEL_NAMES):
            writer.writerow([name, repr(float(stats.lo[i])), repr(float(stats.hi[i]))])


def load_norm_stats(path: str | Path) -> NormStats:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["channel", "lo", "hi"]:
            raise TraceSchemaError(f"{path}: not a normalization stats file")
        rows = {row[0]: (float(row[1]), float(row[2])) for row in reader}
    missing = [name for name in CHANNEL_NAMES if name not in rows]
    if missing:
        raise TraceSchemaError(f"{path}: missing channels {missing}")
    lo = np.array([rows[name][0] for name in CHANNEL_NAMES])
    hi = np.array([rows[name][1] for name in CHANNEL_NAMES])
    return NormStats(lo, hi)
