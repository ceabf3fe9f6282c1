"""Benchmark environments behind one ``reset(rng)`` / ``step(actions)`` interface."""

from __future__ import annotations

from typing import NamedTuple

from .base import EnvStep
from .particle import CooperativeNavigation, PreyPredator
from .traffic import TRAFFIC_CONFIGS, TrafficJunction

ENV_NAMES = ("coopnav", "prey", "traffic")


class EnvSpec(NamedTuple):
    n_agents: int
    obs_dim: int
    n_actions: int
    episode_limit: int


def make_env(name: str, difficulty: str | None = None):
    if name == "coopnav":
        return CooperativeNavigation()
    if name == "prey":
        return PreyPredator()
    if name == "traffic":
        return TrafficJunction(difficulty or "easy")
    raise ValueError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")


def env_spec(name: str, difficulty: str | None = None) -> EnvSpec:
    if name == "traffic":
        difficulty = difficulty or "easy"
        if difficulty not in TRAFFIC_CONFIGS:
            raise ValueError(f"unknown difficulty {difficulty!r}")
        cfg = TRAFFIC_CONFIGS[difficulty]
        return EnvSpec(cfg.n_max, TrafficJunction.obs_dim, TrafficJunction.n_actions, cfg.episode_limit)
    cls = {"coopnav": CooperativeNavigation, "prey": PreyPredator}.get(name)
    if cls is None:
        raise ValueError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")
    return EnvSpec(cls.n_agents, cls.obs_dim, cls.n_actions, cls.episode_limit)


def write_trajectory(records, path) -> None:
    """Write ``(episode, step, agent, action, reward, done)`` records, one per line."""
    with open(path, "w") as fh:
        fh.write("episode step agent action reward done\n")
        for ep, t, agent, action, reward, done in records:
            fh.write(f"{ep} {t} {agent} {action} {float(reward)!r} {int(bool(done))}\n")


def read_trajectory(path) -> list[tuple]:
    out = []
    with open(path) as fh:
        header = fh.readline().split()
        if header != ["episode", "step", "agent", "action", "reward", "done"]:
            raise ValueError(f"{path}: unexpected trajectory header {header}")
        for line in fh:
            ep, t, agent, action, reward, done = line.split()
            out.append((int(ep), int(t), int(agent), int(action), float(reward), done == "1"))
    return out


__all__ = [
    "EnvStep", "EnvSpec", "CooperativeNavigation", "PreyPredator", "TrafficJunction",
    "make_env", "env_spec", "write_trajectory", "read_trajectory", "ENV_NAMES",
]
