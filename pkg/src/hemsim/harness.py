"""Experiment harness: run policy x seed x beta x disturbance grids and emit CSVs.

One experiment owns a single trace split into a training window and a test
window.  Learning policies train once per (beta, seed) and are then evaluated
on the test window under every disturbance level; the thermostat baseline and
the planning oracle are cached and replicated across cells they do not depend
on.  Disturbance evaluations share random realizations across policies
(common random numbers), so robustness comparisons are paired.

Report CSVs under ``<out>/report/`` are byte-deterministic for a fixed spec;
wall-clock timings go to a separate ``timing.csv`` next to the report.
"""

from __future__ import annotations

import csv
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .agent import EpisodeLog, TrainConfig, evaluate, rollout, train
from .baselines import OracleGrid, ThermostatPolicy, dp_oracle
from .env import Action, HomeConfig
from .traces import HOURS_PER_DAY, SyntheticTraceSpec, TraceSet, gen_synthetic, load_trace

POLICY_NAMES = ("proposed", "baseline1", "baseline2", "oracle")

CI95_Z = 1.96  # normal approximation


@dataclass(frozen=True)
class ExperimentSpec:
    """Full description of one experiment grid."""

    synthetic: Optional[SyntheticTraceSpec] = field(default_factory=SyntheticTraceSpec)
    trace_csv: Optional[str] = None
    train_days: int = 31
    test_days: int = 31
    home: HomeConfig = HomeConfig()
    train: TrainConfig = TrainConfig.desk_scale()
    policies: tuple[str, ...] = ("proposed", "baseline1")
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    betas: tuple[float, ...] = (0.6,)
    disturbances: tuple[float, ...] = (0.0,)
    oracle_grid: OracleGrid = OracleGrid()

    def __post_init__(self):
        if (self.synthetic is None) == (self.trace_csv is None):
            raise ValueError("exactly one of synthetic or trace_csv must be set")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if any(b <= 0 for b in self.betas):
            raise ValueError("beta values must be positive")
        if any(d < 0 for d in self.disturbances):
            raise ValueError("disturbance half-widths must be >= 0")
        unknown = set(self.policies) - set(POLICY_NAMES)
        if unknown:
            raise ValueError(f"unknown policies {sorted(unknown)}; choose from {POLICY_NAMES}")
        if self.train_days <= 0 or self.test_days <= 0:
            raise ValueError("train_days and test_days must be positive")

    @property
    def train_slots(self) -> int:
        return self.train_days * HOURS_PER_DAY

    @property
    def test_slots(self) -> int:
        return self.test_days * HOURS_PER_DAY

    def load_traces(self) -> TraceSet:
        traces = gen_synthetic(self.synthetic) if self.synthetic is not None else load_trace(self.trace_csv)
        needed = self.train_slots + self.test_slots
        if traces.horizon_len < needed:
            raise ValueError(f"trace has {traces.horizon_len} slots, need {needed}")
        return traces


@dataclass(frozen=True)
class RunSummary:
    policy: str
    beta: float
    disturbance: float
    seed: int
    total_energy_cost: float
    total_discomfort: float
    wall_time_s: float
    status: str = "ok"


@dataclass(frozen=True)
class StatRow:
    policy: str
    beta: float
    disturbance: float
    n_runs: int
    mean_cost: float
    std_cost: float        # NaN when fewer than 2 runs
    ci95_cost: float
    mean_discomfort: float
    std_discomfort: float
    ci95_discomfort: float


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    summaries: list
    stats: list
    curves: list    # rows: (policy, beta, seed, episode, reward, moving_avg)
    hourly: list    # rows: (policy, beta, disturbance, seed, slot, hour, price, hvac_kw, ess_kwh, ess_kw, grid_kw, indoor_f)

    @property
    def failed(self) -> list:
        return [s for s in self.summaries if s.status != "ok"]


def _eval_rng(seed: int, disturbance: float) -> np.random.Generator:
    # Identical across policies so disturbance draws are common random numbers.
    return np.random.default_rng([seed, int(round(disturbance * 1000)), 0x5EED])


def _eval_home(home: HomeConfig, beta: float, disturbance: float) -> HomeConfig:
    home = replace(home, cost_weight=beta)
    return home.with_disturbance(disturbance) if disturbance > 0 else home


def _log_rows(policy: str, beta: float, disturbance: float, seed: int, log: EpisodeLog) -> list:
    rows = []
    for i in range(len(log.slot)):
        rows.append((policy, beta, disturbance, seed, int(log.slot[i]), int(log.hour[i]),
                     float(log.price[i]), float(log.hvac_kw[i]), float(log.ess_kwh[i]),
                     float(log.ess_kw[i]), float(log.grid_kw[i]), float(log.indoor_f[i])))
    return rows


def _train_cell(spec: ExperimentSpec, traces: TraceSet, policy: str, beta: float, seed: int) -> dict:
    """Train one learner and evaluate it under every disturbance level."""
    t0 = time.perf_counter()
    home = replace(spec.home, cost_weight=beta)
    if policy == "baseline2":
        home = replace(home, charge_max_kw=0.0, discharge_max_kw=0.0)
    cfg = replace(spec.train, seed=seed)
    out: dict = {"policy": policy, "beta": beta, "seed": seed, "summaries": [], "curves": [], "hourly": []}
    try:
        report = train(traces, home, cfg, train_slots=spec.train_slots)
        train_time = time.perf_counter() - t0
        for ep in range(len(report.episode_rewards)):
            out["curves"].append((policy, beta, seed, ep,
                                  float(report.episode_rewards[ep]), float(report.moving_avg[ep])))
        for dist in spec.disturbances:
            t1 = time.perf_counter()
            eval_home = _eval_home(home, beta, dist)
            log = evaluate(report.actor, traces, eval_home, spec.train_slots, spec.test_slots,
                           report.norm_stats, _eval_rng(seed, dist))
            out["summaries"].append(RunSummary(policy, beta, dist, seed, log.total_cost,
                                               log.total_discomfort,
                                               train_time + (time.perf_counter() - t1)))
            out["hourly"].append((dist, _log_rows(policy, beta, dist, seed, log)))
    except Exception:
        err = "error: " + traceback.format_exc(limit=2).strip().splitlines()[-1]
        for dist in spec.disturbances:
            out["summaries"].append(RunSummary(policy, beta, dist, seed, math.nan, math.nan,
                                               time.perf_counter() - t0, err))
    return out


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentResult:
    """Execute the full grid; independent training cells may run in parallel."""
    traces = spec.load_traces()
    summaries: list = []
    curves: list = []
    hourly: list = []

    # Learning cells: one training per (policy, beta, seed).
    train_cells = [(p, b, s) for p in spec.policies if p in ("proposed", "baseline2")
                   for b in spec.betas for s in spec.seeds]
    results = []
    if jobs > 1 and len(train_cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_train_cell, spec, traces, p, b, s) for p, b, s in train_cells]
            results = [f.result() for f in futures]
    else:
        results = [_train_cell(spec, traces, p, b, s) for p, b, s in train_cells]
    first_learn_cell = {}
    for res in results:
        summaries.extend(res["summaries"])
        curves.extend(res["curves"])
        key = res["policy"]
        if (res["beta"], res["seed"]) == (spec.betas[0], spec.seeds[0]):
            for dist, rows in res["hourly"]:
                if dist == spec.disturbances[0]:
                    first_learn_cell[key] = rows
    for key in sorted(first_learn_cell):
        hourly.extend(first_learn_cell[key])

    # Thermostat baseline: depends on (disturbance, seed) only; dist=0 rollouts
    # are identical across seeds, and no cell depends on beta.
    if "baseline1" in spec.policies:
        cache: dict = {}
        for dist in spec.disturbances:
            for seed in spec.seeds:
                key = (dist, seed if dist > 0 else -1)
                if key not in cache:
                    t0 = time.perf_counter()
                    home = _eval_home(spec.home, spec.betas[0], dist)
                    log = rollout(ThermostatPolicy(home), traces, home,
                                  spec.train_slots, spec.test_slots, _eval_rng(seed, dist))
                    cache[key] = (log, time.perf_counter() - t0)
                log, wall = cache[key]
                for beta in spec.betas:
                    summaries.append(RunSummary("baseline1", beta, dist, seed,
                                                log.total_cost, log.total_discomfort, wall))
        log0, _ = cache[(spec.disturbances[0], spec.seeds[0] if spec.disturbances[0] > 0 else -1)]
        hourly.extend(_log_rows("baseline1", spec.betas[0], spec.disturbances[0], spec.seeds[0], log0))

    # Oracle: planned once on nominal dynamics; under a disturbance level the
    # planned schedule is executed open-loop with the common random numbers.
    if "oracle" in spec.policies:
        t0 = time.perf_counter()
        result = dp_oracle(traces, spec.home, spec.oracle_grid, spec.train_slots, spec.test_slots)
        plan_time = time.perf_counter() - t0
        plan = [Action(float(f), float(e)) for f, e in zip(result.log.ess_kw, result.log.hvac_kw)]
        for dist in spec.disturbances:
            for seed in spec.seeds:
                if dist == 0.0:
                    log, wall = result.log, plan_time
                else:
                    t1 = time.perf_counter()
                    home = _eval_home(spec.home, spec.betas[0], dist)
                    it = iter(plan)
                    log = rollout(lambda s: next(it), traces, home,
                                  spec.train_slots, spec.test_slots, _eval_rng(seed, dist))
                    wall = plan_time + (time.perf_counter() - t1)
                for beta in spec.betas:
                    summaries.append(RunSummary("oracle", beta, dist, seed,
                                                log.total_cost, log.total_discomfort, wall))
        hourly.extend(_log_rows("oracle", spec.betas[0], spec.disturbances[0], spec.seeds[0], result.log))

    order = {p: i for i, p in enumerate(POLICY_NAMES)}
    summaries.sort(key=lambda s: (order[s.policy], s.beta, s.disturbance, s.seed))
    curves.sort(key=lambda c: (order[c[0]], c[1], c[2], c[3]))
    return ExperimentResult(spec, summaries, summarize(summaries), curves, hourly)


def summarize(summaries: list) -> list:
    """Mean, sample std, and normal-approximation 95% CI per cell group."""
    groups: dict = {}
    for s in summaries:
        if s.status == "ok":
            groups.setdefault((s.policy, s.beta, s.disturbance), []).append(s)
    rows = []
    for (policy, beta, dist), members in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        costs = np.array([m.total_energy_cost for m in members])
        devs = np.array([m.total_discomfort for m in members])
        n = len(members)
        if n >= 2:
            std_c, std_d = float(costs.std(ddof=1)), float(devs.std(ddof=1))
            ci_c, ci_d = CI95_Z * std_c / math.sqrt(n), CI95_Z * std_d / math.sqrt(n)
        else:
            std_c = std_d = ci_c = ci_d = math.nan
        rows.append(StatRow(policy, beta, dist, n, float(costs.mean()), std_c, ci_c,
                            float(devs.mean()), std_d, ci_d))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _write_csv(path: Path, header: list, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def emit_report(result: ExperimentResult, out_dir: str | Path) -> dict:
    """Write the deterministic report CSVs plus a separate timing file.

    Returns a name -> path mapping of everything written."""
    out = Path(out_dir)
    report = out / "report"
    report.mkdir(parents=True, exist_ok=True)
    paths = {}

    paths["summary"] = report / "summary.csv"
    _write_csv(paths["summary"],
               ["policy", "beta", "disturbance", "n_runs", "mean_cost", "std_cost", "ci95_cost",
                "mean_discomfort", "std_discomfort", "ci95_discomfort"],
               [(r.policy, r.beta, r.disturbance, r.n_runs, r.mean_cost, r.std_cost, r.ci95_cost,
                 r.mean_discomfort, r.std_discomfort, r.ci95_discomfort) for r in result.stats])

    paths["runs"] = report / "runs.csv"
    _write_csv(paths["runs"],
               ["policy", "beta", "disturbance", "seed", "total_energy_cost", "total_discomfort", "status"],
               [(s.policy, s.beta, s.disturbance, s.seed, s.total_energy_cost, s.total_discomfort, s.status)
                for s in result.summaries])

    paths["learning_curves"] = report / "learning_curves.csv"
    _write_csv(paths["learning_curves"],
               ["policy", "beta", "seed", "episode", "reward", "moving_avg"], result.curves)

    paths["hourly_series"] = report / "hourly_series.csv"
    _write_csv(paths["hourly_series"],
               ["policy", "beta", "disturbance", "seed", "slot", "hour", "price",
                "hvac_kw", "ess_kwh", "ess_kw", "grid_kw", "indoor_f"], result.hourly)

    paths["timing"] = out / "timing.csv"
    _write_csv(paths["timing"],
               ["policy", "beta", "disturbance", "seed", "wall_time_s"],
               [(s.policy, s.beta, s.disturbance, s.seed, s.wall_time_s) for s in result.summaries])
    return paths


def read_runs(path: str | Path) -> list:
    """Parse a runs.csv back into RunSummary objects (wall time not stored there)."""
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunSummary(row["policy"], float(row["beta"]), float(row["disturbance"]),
                                  int(row["seed"]),
                                  float(row["total_energy_cost"]) if row["total_energy_cost"] else math.nan,
                                  float(row["total_discomfort"]) if row["total_discomfort"] else math.nan,
                                  0.0, row["status"]))
    return out
