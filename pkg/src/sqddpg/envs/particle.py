"""Continuous 2-D particle worlds: Cooperative Navigation and Prey-and-Predator."""

from __future__ import annotations

import numpy as np

from .base import EnvStep

DT = 0.1
DAMPING = 0.25
FORCE = 1.0
AGENT_RADIUS = 0.1
PREY_RADIUS = 0.05
MAX_SPEED = 1.0
WORLD = 1.0

MOVE_UP, MOVE_DOWN, MOVE_RIGHT, MOVE_LEFT, STAY = range(5)
ACTION_NAMES = ("move_up", "move_down", "move_right", "move_left", "stay")
_DIRECTIONS = np.array([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])


def _integrate(pos: np.ndarray, vel: np.ndarray, actions: np.ndarray, max_speed: float = MAX_SPEED):
    vel = vel * (1.0 - DAMPING) + FORCE * _DIRECTIONS[actions] * DT
    speed = np.linalg.norm(vel, axis=-1, keepdims=True)
    vel = np.where(speed > max_speed, vel / np.maximum(speed, 1e-12) * max_speed, vel)
    return pos + vel * DT, vel


def _check_actions(actions, n: int, n_actions: int = 5) -> np.ndarray:
    a = np.asarray(actions)
    if a.shape != (n,):
        raise ValueError(f"expected {n} actions, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.integer) or a.min() < 0 or a.max() >= n_actions:
        raise ValueError(f"actions must be integers in [0, {n_actions})")
    return a.astype(np.int64)


def pairwise_collisions(pos: np.ndarray, radius: float) -> int:
    n = len(pos)
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(pos[i] - pos[j]) < 2 * radius:
                count += 1
    return count


def coverage_distance(agents: np.ndarray, landmarks: np.ndarray) -> float:
    """Sum over landmarks of the distance to the nearest agent."""
    d = np.linalg.norm(landmarks[:, None, :] - agents[None, :, :], axis=-1)
    return float(d.min(axis=1).sum())


class CooperativeNavigation:
    """Three agents should spread over three landmarks without colliding.

    Observation of agent i: own position and velocity, displacement to each
    landmark, displacement to each other agent (in index order).
    """

    name = "coopnav"
    n_agents = 3
    n_landmarks = 3
    n_actions = 5
    obs_dim = 4 + 2 * 3 + 2 * 2
    episode_limit = 200

    def __init__(self):
        self.pos = np.zeros((self.n_agents, 2))
        self.vel = np.zeros((self.n_agents, 2))
        self.landmarks = np.zeros((self.n_landmarks, 2))

    def reset(self, rng: np.random.Generator) -> EnvStep:
        self.pos = rng.uniform(-WORLD, WORLD, (self.n_agents, 2))
        self.vel = np.zeros((self.n_agents, 2))
        self.landmarks = rng.uniform(-WORLD, WORLD, (self.n_landmarks, 2))
        return self._emit(0.0, False, 0)

    def set_state(self, pos, landmarks, vel=None) -> EnvStep:
        self.pos = np.array(pos, dtype=float)
        self.landmarks = np.array(landmarks, dtype=float)
        self.vel = np.zeros_like(self.pos) if vel is None else np.array(vel, dtype=float)
        return self._emit(self.reward(), False, pairwise_collisions(self.pos, AGENT_RADIUS))

    def reward(self) -> float:
        return -coverage_distance(self.pos, self.landmarks) - pairwise_collisions(self.pos, AGENT_RADIUS)

    def step(self, actions) -> EnvStep:
        a = _check_actions(actions, self.n_agents)
        self.pos, self.vel = _integrate(self.pos, self.vel, a)
        collisions = pairwise_collisions(self.pos, AGENT_RADIUS)
        r = -coverage_distance(self.pos, self.landmarks) - collisions
        return self._emit(r, False, collisions)

    def observations(self) -> np.ndarray:
        obs = np.empty((self.n_agents, self.obs_dim))
        for i in range(self.n_agents):
            others = [self.pos[k] - self.pos[i] for k in range(self.n_agents) if k != i]
            obs[i] = np.concatenate(
                [self.pos[i], self.vel[i], (self.landmarks - self.pos[i]).ravel(), np.ravel(others)]
            )
        return obs

    def _emit(self, reward: float, done: bool, collisions: int) -> EnvStep:
        obs = self.observations()
        return EnvStep(obs, obs.ravel(), float(reward), done, {"collisions": collisions})

    def entity_positions(self) -> np.ndarray:
        return np.concatenate([self.pos, self.landmarks])


class PreyPredator:
    """Three controllable predators chase one uniformly random prey inside a box.

    Observation of predator i: own position and velocity, displacement to the
    prey, displacement to each other predator, prey velocity.
    """

    name = "prey"
    n_agents = 3
    n_actions = 5
    obs_dim = 4 + 2 + 2 * 2 + 2
    episode_limit = 200
    capture_bonus = 10.0

    def __init__(self):
        self.pos = np.zeros((self.n_agents, 2))
        self.vel = np.zeros((self.n_agents, 2))
        self.prey_pos = np.zeros(2)
        self.prey_vel = np.zeros(2)
        self._rng = np.random.default_rng(0)

    def reset(self, rng: np.random.Generator) -> EnvStep:
        self._rng = rng
        self.pos = rng.uniform(-WORLD, WORLD, (self.n_agents, 2))
        self.vel = np.zeros((self.n_agents, 2))
        self.prey_pos = rng.uniform(-WORLD, WORLD, 2)
        self.prey_vel = np.zeros(2)
        return self._emit(-self.min_distance(), False, False)

    def set_state(self, pos, prey_pos, vel=None, prey_vel=None) -> EnvStep:
        self.pos = np.array(pos, dtype=float)
        self.prey_pos = np.array(prey_pos, dtype=float)
        self.vel = np.zeros_like(self.pos) if vel is None else np.array(vel, dtype=float)
        self.prey_vel = np.zeros(2) if prey_vel is None else np.array(prey_vel, dtype=float)
        caught = self.captured()
        return self._emit(-self.min_distance() + (self.capture_bonus if caught else 0.0), caught, caught)

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.pos - self.prey_pos, axis=-1)

    def min_distance(self) -> float:
        return float(self.distances().min())

    def captured(self) -> bool:
        return bool(np.any(self.distances() < AGENT_RADIUS + PREY_RADIUS))

    def step(self, actions) -> EnvStep:
        a = _check_actions(actions, self.n_agents)
        prey_action = self._rng.integers(0, self.n_actions)
        self.pos, self.vel = self._confine(*_integrate(self.pos, self.vel, a))
        prey_pos, prey_vel = _integrate(self.prey_pos[None], self.prey_vel[None], np.array([prey_action]))
        pp, pv = self._confine(prey_pos, prey_vel)
        self.prey_pos, self.prey_vel = pp[0], pv[0]
        caught = self.captured()
        r = -self.min_distance() + (self.capture_bonus if caught else 0.0)
        return self._emit(r, caught, caught)

    @staticmethod
    def _confine(pos, vel):
        out = np.abs(pos) > WORLD
        return np.clip(pos, -WORLD, WORLD), np.where(out, 0.0, vel)

    def observations(self) -> np.ndarray:
        obs = np.empty((self.n_agents, self.obs_dim))
        for i in range(self.n_agents):
            others = [self.pos[k] - self.pos[i] for k in range(self.n_agents) if k != i]
            obs[i] = np.concatenate(
                [self.pos[i], self.vel[i], self.prey_pos - self.pos[i], np.ravel(others), self.prey_vel]
            )
        return obs

    def _emit(self, reward: float, done: bool, caught: bool) -> EnvStep:
        obs = self.observations()
        return EnvStep(obs, obs.ravel(), float(reward), done, {"captured": caught})

    def entity_positions(self) -> np.ndarray:
        return np.concatenate([self.pos, self.prey_pos[None]])
