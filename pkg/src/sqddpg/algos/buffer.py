from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    actions: np.ndarray  # (n_agents, n_actions) one-hot rows
    reward: float
    next_state: np.ndarray
    done: bool = False


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


class ReplayBuffer:
    """Fixed-capacity ring of transitions; sampling is uniform with replacement."""

    def __init__(self, capacity: int, state_dim: int, n_agents: int, n_actions: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, n_agents, n_actions))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        if not np.isfinite(t.reward):
            raise ValueError("transition reward must be finite")
        k = self._head
        self.states[k] = t.state
        self.actions[k] = t.actions
        self.rewards[k] = t.reward
        self.next_states[k] = t.next_state
        self.dones[k] = float(t.done)
        self._head = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, g: int, rng: np.random.Generator) -> Batch:
        if self.size < g:
            raise ValueError(f"buffer holds {self.size} transitions, cannot sample {g}")
        idx = rng.integers(0, self.size, size=g)
        return Batch(
            self.states[idx].copy(),
            self.actions[idx].copy(),
            self.rewards[idx].copy(),
            self.next_states[idx].copy(),
            self.dones[idx].copy(),
        )

    def oldest(self) -> Transition:
        k = (self._head - self.size) % self.capacity
        return Transition(self.states[k], self.actions[k], self.rewards[k], self.next_states[k], bool(self.dones[k]))
