from __future__ import annotations

import numpy as np

from .a2c import COMA, IA2C, Rollout, coma_advantages, discounted_returns
from .buffer import Batch, ReplayBuffer, Transition
from .common import Learner, Net
from .ddpg import IDDPG, MADDPG
from .sqddpg import SQDDPG, amc_input, approx_shapley_q, sqddpg_actor_loss, sqddpg_critic_loss, sqddpg_targets

LEARNERS = {cls.name: cls for cls in (SQDDPG, IDDPG, MADDPG, IA2C, COMA)}


def make_learner(cfg, n_agents: int, obs_dim: int, n_actions: int, rng: np.random.Generator) -> Learner:
    try:
        cls = LEARNERS[cfg.algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {cfg.algorithm!r}; expected one of {sorted(LEARNERS)}") from None
    return cls(cfg, n_agents, obs_dim, n_actions, rng)


def replay_push(buffer: ReplayBuffer, t: Transition) -> None:
    buffer.push(t)


def replay_sample(buffer: ReplayBuffer, g: int, rng: np.random.Generator) -> Batch:
    return buffer.sample(g, rng)


__all__ = [
    "SQDDPG", "IDDPG", "MADDPG", "IA2C", "COMA", "LEARNERS", "make_learner", "Learner", "Net",
    "ReplayBuffer", "Transition", "Batch", "Rollout", "replay_push", "replay_sample",
    "amc_input", "approx_shapley_q", "sqddpg_actor_loss", "sqddpg_critic_loss", "sqddpg_targets",
    "coma_advantages", "discounted_returns",
]
