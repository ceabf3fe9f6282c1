"""Named training runs shared by the experiment scripts and the acceptance suite."""

from __future__ import annotations

import os
from pathlib import Path

from .config import TrainConfig, make_config
from .train import cached_training

RUNS_ENV_VAR = "SQDDPG_RUNS_DIR"
COOPNAV_SEEDS = (0, 1, 2)


def runs_root() -> Path:
    return Path(os.environ.get(RUNS_ENV_VAR, Path(__file__).resolve().parents[2] / "runs"))


def coopnav(seed: int, sample_size: int = 1, algorithm: str = "sqddpg") -> TrainConfig:
    return make_config(env="coopnav", algorithm=algorithm, sample_size=sample_size, seed=seed)


def prey(algorithm: str = "sqddpg", seed: int = 0) -> TrainConfig:
    return make_config(env="prey", algorithm=algorithm, seed=seed)


def traffic(difficulty: str = "easy", algorithm: str = "sqddpg", seed: int = 0) -> TrainConfig:
    # one minibatch update per round leaves the critic too far behind the sparse collision signal
    return make_config(env="traffic", difficulty=difficulty, algorithm=algorithm, seed=seed, updates_per_round=25)


def acceptance_configs() -> dict[str, TrainConfig]:
    runs = {f"coopnav-s{s}": coopnav(s) for s in COOPNAV_SEEDS}
    runs["prey-sqddpg"] = prey("sqddpg")
    runs["prey-iddpg"] = prey("iddpg")
    runs["traffic-easy"] = traffic("easy")
    return runs


def ensure(cfg: TrainConfig, log_every: int = 250) -> Path:
    """Directory of a finished run for ``cfg``, training it first when absent."""
    return cached_training(cfg, runs_root(), log_every=log_every)
