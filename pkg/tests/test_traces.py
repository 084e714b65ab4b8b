import numpy as np
import pytest

from hemsim.env import EnvState
from hemsim.traces import (
    CH_DEMAND,
    CH_ESS,
    CH_SOLAR,
    NormStats,
    SyntheticTraceSpec,
    TraceLengthError,
    TraceSchemaError,
    TraceSet,
    TraceValidationError,
    compute_norm_stats,
    gen_synthetic,
    load_norm_stats,
    load_trace,
    preprocess,
    save_norm_stats,
    write_trace,
)

from conftest import flat_trace


def test_load_full_test_month(tmp_path):
    path = tmp_path / "month.csv"
    write_trace(gen_synthetic(SyntheticTraceSpec(days=31, seed=2)), path)
    traces = load_trace(path)
    assert traces.horizon_len == 744


def test_load_degenerate_constant_day(tmp_path):
    path = tmp_path / "flat.csv"
    write_trace(flat_trace(demand=1.0, solar=0.0, price=0.1), path)
    traces = load_trace(path)
    assert traces.horizon_len == 24
    assert np.all(traces.solar_kw == 0.0)
    assert np.all(traces.demand_kw == 1.0)


def test_load_nonpositive_price_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    lines = ["hour,solar_kw,demand_kw,outdoor_f,price_buy"]
    for t in range(24):
        price = 0.0 if t == 5 else 0.1
        lines.append(f"{t},0.0,1.0,70.0,{price}")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceValidationError, match="row 5"):
        load_trace(path)


def test_load_negative_demand_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    lines = ["hour,solar_kw,demand_kw,outdoor_f,price_buy"]
    for t in range(24):
        demand = -0.5 if t == 7 else 1.0
        lines.append(f"{t},0.0,{demand},70.0,0.1")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceValidationError, match="row 7"):
        load_trace(path)


def test_load_schema_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("hour,solar_kw,demand_kw,price_buy\n0,0,1,0.1\n")
    with pytest.raises(TraceSchemaError):
        load_trace(path)
    path.write_text("hour,solar_kw,demand_kw,outdoor_f,price_buy,extra\n")
    with pytest.raises(TraceSchemaError):
        load_trace(path)


def test_load_noncontiguous_hours(tmp_path):
    path = tmp_path / "bad.csv"
    lines = ["hour,solar_kw,demand_kw,outdoor_f,price_buy"]
    lines += [f"{t if t != 3 else 9},0.0,1.0,70.0,0.1" for t in range(24)]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceValidationError, match="contiguous"):
        load_trace(path)


def test_load_partial_day_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    lines = ["hour,solar_kw,demand_kw,outdoor_f,price_buy"]
    lines += [f"{t},0.0,1.0,70.0,0.1" for t in range(30)]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceLengthError):
        load_trace(path)


def test_roundtrip_bit_exact(tmp_path):
    spec = SyntheticTraceSpec(days=2, solar_noise_kw=0.3, demand_noise_kw=0.2,
                              outdoor_noise_f=2.0, price_noise=0.01, seed=17)
    traces = gen_synthetic(spec)
    path = tmp_path / "rt.csv"
    write_trace(traces, path)
    back = load_trace(path)
    for name in ("solar_kw", "demand_kw", "outdoor_f", "price_buy"):
        assert np.array_equal(getattr(traces, name), getattr(back, name))


def test_synthetic_zero_solar_month():
    traces = gen_synthetic(SyntheticTraceSpec(days=31, solar_peak_kw=0.0, seed=1))
    assert traces.horizon_len == 744
    assert np.all(traces.solar_kw == 0.0)


def test_synthetic_deterministic():
    spec = SyntheticTraceSpec(days=3, solar_noise_kw=0.5, demand_noise_kw=0.3,
                              outdoor_noise_f=2.0, price_noise=0.02, seed=123)
    a, b = gen_synthetic(spec), gen_synthetic(spec)
    for name in ("solar_kw", "demand_kw", "outdoor_f", "price_buy"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_synthetic_price_step_rule():
    # Oracle: the construction rule itself, applied directly.
    spec = SyntheticTraceSpec(days=2, price_offpeak=0.08, price_onpeak=0.25,
                              onpeak_start_hour=14, onpeak_end_hour=20, seed=0)
    expected = np.array([0.25 if 14 <= t % 24 < 20 else 0.08 for t in range(48)])
    traces = gen_synthetic(spec)
    assert np.array_equal(traces.price_buy, expected)


def test_synthetic_bad_days():
    with pytest.raises(ValueError):
        SyntheticTraceSpec(days=0)
    with pytest.raises(ValueError):
        SyntheticTraceSpec(days=-3)


def test_synthetic_clamps_validity():
    spec = SyntheticTraceSpec(days=2, solar_peak_kw=0.1, demand_base_kw=0.05,
                              demand_peak_kw=0.05, solar_noise_kw=1.0,
                              demand_noise_kw=1.0, price_noise=0.2, seed=3)
    traces = gen_synthetic(spec)  # validity enforced by TraceSet as well
    assert traces.solar_kw.min() >= 0.0
    assert traces.demand_kw.min() >= 0.0
    assert traces.price_buy.min() > 0.0


def test_window_alignment(hot_trace):
    day2 = hot_trace.window(24, 24)
    assert day2.horizon_len == 24
    assert np.array_equal(day2.solar_kw, hot_trace.solar_kw[24:])
    with pytest.raises(TraceLengthError):
        hot_trace.window(1, 24)
    with pytest.raises(TraceLengthError):
        hot_trace.window(24, 48)


def test_traceset_rejects_bad_series():
    with pytest.raises(TraceValidationError):
        TraceSet(np.full(24, -0.1), np.ones(24), np.full(24, 70.0), np.full(24, 0.1))
    with pytest.raises(TraceLengthError):
        TraceSet(np.zeros(24), np.ones(23), np.full(24, 70.0), np.full(24, 0.1))


def test_norm_stats_channels(home):
    traces = flat_trace(demand=1.0, solar=0.0, price=0.1)
    stats = compute_norm_stats(traces, home)
    assert stats.constant[CH_DEMAND]
    assert stats.constant[CH_SOLAR]
    # Storage channel bounds come from the config, not the data.
    assert (stats.lo[CH_ESS], stats.hi[CH_ESS]) == (0.6, 6.0)


def test_norm_stats_solar_range(home):
    solar = np.tile(np.concatenate([np.zeros(12), np.linspace(0, 4, 12)]), 2)
    traces = TraceSet(solar, np.ones(48), np.full(48, 70.0), np.full(48, 0.1))
    stats = compute_norm_stats(traces, home)
    assert (stats.lo[CH_SOLAR], stats.hi[CH_SOLAR]) == (0.0, 4.0)


def _state(home, **overrides):
    base = dict(t=0, solar_kw=0.0, demand_kw=1.0, ess_kwh=home.ess_init_kwh,
                outdoor_f=70.0, indoor_f=70.0, price_buy=0.1)
    base.update(overrides)
    return EnvState(**base)


def test_preprocess_boundaries(home, hot_trace):
    stats = compute_norm_stats(hot_trace, home)
    assert np.array_equal(preprocess(stats.lo, stats), np.zeros(7))
    assert np.array_equal(preprocess(stats.hi, stats), np.ones(7))


def test_preprocess_storage_channel(home):
    # Oracle: hand arithmetic (1.2 - 0.6) / (6.0 - 0.6).
    stats = compute_norm_stats(flat_trace(demand=1.0), home)
    state = _state(home, ess_kwh=1.2)
    got = preprocess(state, stats)[CH_ESS]
    assert got == pytest.approx((1.2 - 0.6) / 5.4, abs=1e-9)


def test_preprocess_constant_channel_maps_to_half(home):
    stats = compute_norm_stats(flat_trace(demand=1.0), home)
    vec = preprocess(_state(home), stats)
    assert vec[CH_DEMAND] == 0.5
    assert vec[CH_SOLAR] == 0.5


def test_preprocess_clamps_out_of_range(home, hot_trace):
    stats = compute_norm_stats(hot_trace, home)
    rng = np.random.default_rng(0)
    for _ in range(200):
        raw = rng.uniform(-100, 200, size=7)
        vec = preprocess(raw, stats)
        assert vec.shape == (7,)
        assert np.all(vec >= 0.0) and np.all(vec <= 1.0)


def test_norm_stats_roundtrip(tmp_path, home, hot_trace):
    stats = compute_norm_stats(hot_trace, home)
    path = tmp_path / "stats.csv"
    save_norm_stats(stats, path)
    back = load_norm_stats(path)
    assert np.array_equal(stats.lo, back.lo)
    assert np.array_equal(stats.hi, back.hi)


def test_norm_stats_validation():
    with pytest.raises(ValueError):
        NormStats(np.ones(7), np.zeros(7))
    with pytest.raises(ValueError):
        NormStats(np.zeros(3), np.ones(3))
