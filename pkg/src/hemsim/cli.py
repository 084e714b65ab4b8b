"""Command-line surface.

Subcommands::

    hemsim gen-traces   write a synthetic trace CSV
    hemsim train        train the scheduler, save actor weights + curves
    hemsim evaluate     greedy rollout of saved weights over a trace window
    hemsim baseline     run the thermostat or no-storage baseline
    hemsim oracle       perfect-information planning over a window
    hemsim experiment   full policy x seed x beta x disturbance grid
    hemsim report       recompute the stats table from a runs.csv

Every subcommand accepts ``--config FILE`` with ``section.key = value`` lines
(sections: trace, home, train, experiment); explicit flags win over the file.
Exit code is 0 on success and 1 when any experiment cell failed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agent import TrainConfig, evaluate, rollout, train
from .baselines import OracleGrid, ThermostatPolicy, dp_oracle
from .config import ConfigError, apply_overrides, load_config, section
from .env import HomeConfig
from .harness import ExperimentSpec, _write_csv, emit_report, read_runs, run_experiment, summarize
from .nn import load_mlp, save_mlp
from .traces import (
    SyntheticTraceSpec,
    gen_synthetic,
    load_norm_stats,
    load_trace,
    save_norm_stats,
    write_trace,
)


EXPERIMENT_KEYS = ("policies", "seeds", "betas", "disturbances", "train_days", "test_days")


class _ListAction(argparse.Action):
    """Accept repeated values, space-separated or comma-separated."""

    def __init__(self, *args, item_type=str, **kwargs):
        self.item_type = item_type
        super().__init__(*args, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        flat = []
        for token in values:
            flat.extend(self.item_type(v) for v in str(token).split(",") if v != "")
        setattr(namespace, self.dest, flat)


def _load_sections(path):
    mapping = load_config(path) if path else {}
    known = {"trace", "home", "train", "experiment"}
    for key in mapping:
        head = key.split(".", 1)[0]
        if head not in known:
            raise ConfigError(f"unknown section {head!r} in key {key!r}")
    # Validate every section eagerly so typos never pass silently, even in
    # commands that do not consume them.
    apply_overrides(SyntheticTraceSpec(), section(mapping, "trace"))
    apply_overrides(HomeConfig(), section(mapping, "home"))
    apply_overrides(TrainConfig.desk_scale(), section(mapping, "train"))
    for key in section(mapping, "experiment"):
        if key not in EXPERIMENT_KEYS:
            raise ConfigError(f"unknown key experiment.{key!r} "
                              f"(known: {', '.join(EXPERIMENT_KEYS)})")
    return mapping


def _build(args, *, trace_spec=False, home=False, train_cfg=False):
    mapping = _load_sections(getattr(args, "config", None))
    out = []
    if trace_spec:
        spec = apply_overrides(SyntheticTraceSpec(), section(mapping, "trace"))
        if getattr(args, "days", None) is not None:
            spec = replace(spec, days=args.days)
        if getattr(args, "seed", None) is not None:
            spec = replace(spec, seed=args.seed)
        out.append(spec)
    if home:
        cfg = apply_overrides(HomeConfig(), section(mapping, "home"))
        if getattr(args, "beta", None) is not None:
            cfg = replace(cfg, cost_weight=args.beta[0])
        if getattr(args, "disturbance", None) is not None:
            cfg = cfg.with_disturbance(args.disturbance[0])
        out.append(cfg)
    if train_cfg:
        cfg = apply_overrides(TrainConfig.desk_scale(), section(mapping, "train"))
        if getattr(args, "episodes", None) is not None:
            cfg = replace(cfg, episodes=args.episodes)
        if getattr(args, "seed", None) is not None:
            cfg = replace(cfg, seed=args.seed)
        out.append(cfg)
    return out[0] if len(out) == 1 else tuple(out)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _disturbance_rng(args, home):
    # Seeded even when --seed is omitted, so disturbed runs stay reproducible.
    if home.disturb_hi_f <= 0:
        return None
    return np.random.default_rng(args.seed if args.seed is not None else 0)


def _write_log_csv(log, path: Path) -> None:
    rows = zip(log.slot, log.hour, log.price, log.solar_kw, log.demand_kw, log.ess_kw,
               log.hvac_kw, log.grid_kw, log.ess_kwh, log.indoor_f,
               log.energy_cost, log.wear_cost, log.discomfort, log.reward)
    _write_csv(path, ["slot", "hour", "price", "solar_kw", "demand_kw", "ess_kw", "hvac_kw",
                      "grid_kw", "ess_kwh", "indoor_f", "energy_cost", "wear_cost",
                      "discomfort", "reward"],
               [(int(a), int(b), *map(float, rest)) for a, b, *rest in rows])
    totals = path.with_name(path.stem + "_totals.csv")
    _write_csv(totals, ["total_cost", "total_discomfort", "total_reward"],
               [(log.total_cost, log.total_discomfort, log.total_reward)])


def cmd_gen_traces(args) -> int:
    spec = _build(args, trace_spec=True)
    traces = gen_synthetic(spec)
    write_trace(traces, args.out)
    print(f"wrote {traces.horizon_len} slots ({traces.n_days} days) to {args.out}")
    return 0


def cmd_train(args) -> int:
    home, cfg = _build(args, home=True, train_cfg=True)
    traces = load_trace(args.trace)
    report = train(traces, home, cfg, train_slots=args.train_slots)
    out = _out_dir(args)
    save_mlp(report.actor, out / "actor.mlp")
    save_mlp(report.critic, out / "critic.mlp", include_moments=True)
    save_norm_stats(report.norm_stats, out / "norm_stats.csv")
    _write_csv(out / "learning_curve.csv", ["episode", "reward", "moving_avg"],
               [(i, float(r), float(m)) for i, (r, m) in
                enumerate(zip(report.episode_rewards, report.moving_avg))])
    print(f"trained {cfg.episodes} episodes; last-50 mean reward "
          f"{report.moving_avg[-1]:.3f}; weights in {out}")
    return 0


def cmd_evaluate(args) -> int:
    home = _build(args, home=True)
    traces = load_trace(args.trace)
    actor = load_mlp(args.weights)
    stats = load_norm_stats(args.stats)
    n_slots = args.n_slots if args.n_slots is not None else traces.horizon_len - args.start_slot
    rng = _disturbance_rng(args, home)
    log = evaluate(actor, traces, home, args.start_slot, n_slots, stats, rng)
    out = _out_dir(args)
    _write_log_csv(log, out / "evaluation.csv")
    print(f"evaluated {n_slots} slots: cost {log.total_cost:.3f}, "
          f"discomfort {log.total_discomfort:.3f}")
    return 0


def cmd_baseline(args) -> int:
    home = _build(args, home=True)
    traces = load_trace(args.trace)
    n_slots = args.n_slots if args.n_slots is not None else traces.horizon_len - args.start_slot
    out = _out_dir(args)
    if args.which == "onoff":
        log = rollout(ThermostatPolicy(home), traces, home, args.start_slot, n_slots,
                      _disturbance_rng(args, home))
    else:
        no_ess = replace(home, charge_max_kw=0.0, discharge_max_kw=0.0)
        mapping = _load_sections(getattr(args, "config", None))
        cfg = apply_overrides(TrainConfig.desk_scale(), section(mapping, "train"))
        if args.episodes is not None:
            cfg = replace(cfg, episodes=args.episodes)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        report = train(traces, no_ess, cfg, train_slots=args.train_slots)
        save_mlp(report.actor, out / "actor.mlp")
        log = evaluate(report.actor, traces, no_ess, args.start_slot, n_slots,
                       report.norm_stats, _disturbance_rng(args, no_ess))
    _write_log_csv(log, out / f"baseline_{args.which}.csv")
    print(f"{args.which}: cost {log.total_cost:.3f}, discomfort {log.total_discomfort:.3f}")
    return 0


def cmd_oracle(args) -> int:
    home = _build(args, home=True)
    traces = load_trace(args.trace)
    grid = OracleGrid(ess_step_kwh=args.ess_step, temp_step_f=args.temp_step,
                      ess_levels=args.ess_levels, hvac_levels=args.hvac_levels)
    horizon = args.horizon if args.horizon is not None else traces.horizon_len - args.start_slot
    result = dp_oracle(traces, home, grid, args.start_slot, horizon)
    out = _out_dir(args)
    _write_log_csv(result.log, out / "oracle_schedule.csv")
    print(f"oracle: cost {result.total_cost:.3f}, discomfort {result.total_discomfort:.3f}, "
          f"value-at-start {result.value_start:.3f}, "
          f"{len(result.infeasible_slots)} comfort-infeasible slots")
    return 0


def cmd_experiment(args) -> int:
    mapping = _load_sections(args.config)
    trace_spec = apply_overrides(SyntheticTraceSpec(), section(mapping, "trace"))
    home = apply_overrides(HomeConfig(), section(mapping, "home"))
    train_cfg = apply_overrides(TrainConfig.desk_scale(), section(mapping, "train"))
    if args.episodes is not None:
        train_cfg = replace(train_cfg, episodes=args.episodes)
    spec = ExperimentSpec(synthetic=None if args.trace else trace_spec,
                          trace_csv=args.trace,
                          home=home, train=train_cfg)
    spec = apply_overrides(spec, section(mapping, "experiment"))
    if args.seed is not None:
        spec = replace(spec, seeds=(args.seed,))
    if args.seeds is not None:
        spec = replace(spec, seeds=tuple(args.seeds))
    if args.beta is not None:
        spec = replace(spec, betas=tuple(args.beta))
    if args.disturbance is not None:
        spec = replace(spec, disturbances=tuple(args.disturbance))
    if args.policies is not None:
        spec = replace(spec, policies=tuple(args.policies))

    result = run_experiment(spec, jobs=args.jobs)
    paths = emit_report(result, _out_dir(args))
    print(f"report written to {paths['summary'].parent}")
    for row in result.stats:
        ci = f" +/- {row.ci95_cost:.3f}" if row.n_runs >= 2 else ""
        print(f"  {row.policy:10s} beta={row.beta:<4g} dist={row.disturbance:<4g} "
              f"cost {row.mean_cost:.3f}{ci}  discomfort {row.mean_discomfort:.3f}")
    if result.failed:
        for s in result.failed:
            print(f"FAILED cell {s.policy} beta={s.beta} dist={s.disturbance} seed={s.seed}: "
                  f"{s.status}", file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    summaries = read_runs(args.runs)
    stats = summarize(summaries)
    out = _out_dir(args)
    path = out / "summary.csv"
    _write_csv(path,
               ["policy", "beta", "disturbance", "n_runs", "mean_cost", "std_cost", "ci95_cost",
                "mean_discomfort", "std_discomfort", "ci95_discomfort"],
               [(r.policy, r.beta, r.disturbance, r.n_runs, r.mean_cost, r.std_cost, r.ci95_cost,
                 r.mean_discomfort, r.std_discomfort, r.ci95_discomfort) for r in stats])
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hemsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=out_default, help="output file or directory")

    p = sub.add_parser("gen-traces", help="write a synthetic trace CSV")
    common(p, "traces.csv")
    p.add_argument("--days", type=int, default=None)

    p = sub.add_parser("train", help="train the scheduler")
    common(p, "train_out")
    p.add_argument("--trace", required=True, help="trace CSV path")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--beta", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--train-slots", type=int, default=None, dest="train_slots")

    p = sub.add_parser("evaluate", help="greedy rollout of saved actor weights")
    common(p, "eval_out")
    p.add_argument("--trace", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--stats", required=True, help="norm_stats.csv saved by train")
    p.add_argument("--beta", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--disturbance", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--start-slot", type=int, default=0, dest="start_slot")
    p.add_argument("--n-slots", type=int, default=None, dest="n_slots")

    p = sub.add_parser("baseline", help="run a comparison policy")
    common(p, "baseline_out")
    p.add_argument("--which", choices=("onoff", "no-ess"), default="onoff")
    p.add_argument("--trace", required=True)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--beta", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--disturbance", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--start-slot", type=int, default=0, dest="start_slot")
    p.add_argument("--n-slots", type=int, default=None, dest="n_slots")
    p.add_argument("--train-slots", type=int, default=None, dest="train_slots")

    p = sub.add_parser("oracle", help="perfect-information planning")
    common(p, "oracle_out")
    p.add_argument("--trace", required=True)
    p.add_argument("--beta", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--start-slot", type=int, default=0, dest="start_slot")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--ess-step", type=float, default=0.1, dest="ess_step")
    p.add_argument("--temp-step", type=float, default=0.5, dest="temp_step")
    p.add_argument("--ess-levels", type=int, default=13, dest="ess_levels")
    p.add_argument("--hvac-levels", type=int, default=9, dest="hvac_levels")

    p = sub.add_parser("experiment", help="full comparison grid")
    common(p, "experiment_out")
    p.add_argument("--trace", default=None, help="trace CSV (default: synthetic from config)")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seeds", nargs="*", action=_ListAction, item_type=int, default=None)
    p.add_argument("--beta", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--disturbance", nargs="*", action=_ListAction, item_type=float, default=None)
    p.add_argument("--policies", nargs="*", action=_ListAction, default=None)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("report", help="stats table from a runs.csv")
    common(p, "report_out")
    p.add_argument("--runs", required=True, help="runs.csv from a previous experiment")
    return parser


COMMANDS = {
    "gen-traces": cmd_gen_traces,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "baseline": cmd_baseline,
    "oracle": cmd_oracle,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"hemsim {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
