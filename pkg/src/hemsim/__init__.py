"""Smart-home energy management: simulator, learning scheduler, baselines, oracle."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .agent import EpisodeLog, ReplayBuffer, TrainConfig, TrainReport, evaluate, rollout, train
from .baselines import OracleGrid, OracleResult, ThermostatPolicy, dp_oracle, run_baseline2, run_onoff
from .env import Action, EnvState, HomeConfig, StepOutcome, reset, step
from .nn import Mlp, MlpSpec, NumericError, init_mlp, load_mlp, save_mlp
from .traces import (
    NormStats,
    SyntheticTraceSpec,
    TraceSet,
    compute_norm_stats,
    gen_synthetic,
    load_trace,
    preprocess,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "EnvState",
    "EpisodeLog",
    "HomeConfig",
    "KERNEL_BACKEND",
    "Mlp",
    "MlpSpec",
    "NormStats",
    "NumericError",
    "OracleGrid",
    "OracleResult",
    "ReplayBuffer",
    "StepOutcome",
    "SyntheticTraceSpec",
    "ThermostatPolicy",
    "TraceSet",
    "TrainConfig",
    "TrainReport",
    "compute_norm_stats",
    "dp_oracle",
    "evaluate",
    "gen_synthetic",
    "init_mlp",
    "load_mlp",
    "load_trace",
    "preprocess",
    "reset",
    "rollout",
    "run_baseline2",
    "run_onoff",
    "save_mlp",
    "step",
    "train",
    "write_trace",
]
