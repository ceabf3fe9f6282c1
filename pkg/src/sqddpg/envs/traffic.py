"""Traffic Junction gridworld with a fixed number of car slots.

Right-hand traffic: on a two-way horizontal road the upper row runs west and
the lower row runs east; on a two-way vertical road the left column runs
south and the right column runs north.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import EnvStep

GAS, BRAKE = 0, 1
COLLISION_PENALTY = 10.0
TIME_PENALTY = 0.01

NORTH, SOUTH, EAST, WEST = (-1, 0), (1, 0), (0, 1), (0, -1)
_DIR_INDEX = {NORTH: 0, SOUTH: 1, EAST: 2, WEST: 3}


@dataclass(frozen=True)
class TrafficConfig:
    difficulty: str
    dim: int
    n_max: int
    p_arrive: float
    # (row or col index, direction); rows carry E/W lanes, cols carry N/S lanes
    row_lanes: tuple
    col_lanes: tuple
    max_turns: int
    routes_per_entry: int
    episode_limit: int
    eval_steps: int


TRAFFIC_CONFIGS = {
    "easy": TrafficConfig("easy", 7, 5, 0.3, ((3, EAST),), ((3, SOUTH),), 0, 1, 50, 20),
    "medium": TrafficConfig(
        "medium", 14, 10, 0.2, ((6, WEST), (7, EAST)), ((6, SOUTH), (7, NORTH)), 1, 3, 50, 40
    ),
    "hard": TrafficConfig(
        "hard",
        18,
        20,
        0.05,
        ((5, WEST), (6, EAST), (11, WEST), (12, EAST)),
        ((5, SOUTH), (6, NORTH), (11, SOUTH), (12, NORTH)),
        2,
        7,
        100,
        60,
    ),
}


def _lane_map(cfg: TrafficConfig) -> dict:
    lanes: dict = {}
    for r, d in cfg.row_lanes:
        for c in range(cfg.dim):
            lanes.setdefault((r, c), set()).add(d)
    for c, d in cfg.col_lanes:
        for r in range(cfg.dim):
            lanes.setdefault((r, c), set()).add(d)
    return lanes


def entry_points(cfg: TrafficConfig) -> list:
    """Grid-edge cells where a lane enters, with the lane direction."""
    last = cfg.dim - 1
    entries = []
    for r, d in cfg.row_lanes:
        entries.append(((r, 0 if d == EAST else last), d))
    for c, d in cfg.col_lanes:
        entries.append(((0 if d == SOUTH else last, c), d))
    return sorted(entries)


def enumerate_routes(cfg: TrafficConfig, entry, direction) -> list:
    """Routes from ``entry`` that leave the grid, with at most ``cfg.max_turns`` turns
    and never heading opposite to the entry direction. Shortest, least-turning first."""
    lanes = _lane_map(cfg)
    reverse = (-direction[0], -direction[1])
    found = []

    def walk(cell, d, turns, path):
        options = [(d, turns)]
        if turns < cfg.max_turns:
            for nd in sorted(lanes[cell]):
                if nd != d and nd != (-d[0], -d[1]) and nd != reverse:
                    options.append((nd, turns + 1))
        for nd, nt in options:
            nxt = (cell[0] + nd[0], cell[1] + nd[1])
            if not (0 <= nxt[0] < cfg.dim and 0 <= nxt[1] < cfg.dim):
                if nd == d:
                    found.append((nt, len(path), tuple(path)))
                continue
            if nxt in path or nd not in lanes.get(nxt, ()):
                continue
            walk(nxt, nd, nt, path + [nxt])

    walk(entry, direction, 0, [entry])
    found.sort()
    return [list(p) for _, _, p in found[: cfg.routes_per_entry]]


@dataclass
class Car:
    route: list
    route_id: int
    pos: int = 0
    alive: int = 1

    @property
    def cell(self):
        return self.route[self.pos]

    def direction(self):
        if self.pos + 1 < len(self.route):
            a, b = self.route[self.pos], self.route[self.pos + 1]
        else:
            a, b = self.route[self.pos - 1], self.route[self.pos]
        return (b[0] - a[0], b[1] - a[1])


class TrafficJunction:
    """Cars drive fixed routes through one or more junctions; action 0 = gas, 1 = brake.

    Observation of a slot (all zeros when the slot holds no car): active flag,
    3x3 occupancy by other cars around the car, normalised row and column,
    normalised progress along the route, one-hot heading (N, S, E, W).
    """

    name = "traffic"
    n_actions = 2
    obs_dim = 1 + 9 + 3 + 4

    def __init__(self, difficulty: str = "easy"):
        if difficulty not in TRAFFIC_CONFIGS:
            raise ValueError(f"unknown difficulty {difficulty!r}; expected one of {sorted(TRAFFIC_CONFIGS)}")
        self.cfg = TRAFFIC_CONFIGS[difficulty]
        self.difficulty = difficulty
        self.n_agents = self.cfg.n_max
        self.episode_limit = self.cfg.episode_limit
        self.entries = entry_points(self.cfg)
        self.routes = [enumerate_routes(self.cfg, cell, d) for cell, d in self.entries]
        self.slots: list = [None] * self.n_agents
        self.collided = False
        self.completed = 0
        self._rng = np.random.default_rng(0)

    def reset(self, rng: np.random.Generator) -> EnvStep:
        self._rng = rng
        self.slots = [None] * self.n_agents
        self.collided = False
        self.completed = 0
        self._spawn()
        return self._emit(-TIME_PENALTY * self._alive_total(), 0)

    @property
    def active_count(self) -> int:
        return sum(car is not None for car in self.slots)

    def active_mask(self) -> np.ndarray:
        return np.array([car is not None for car in self.slots])

    def add_car(self, entry: int, route: int = 0, slot: int | None = None) -> int:
        """Place a car at an entry point directly (fixtures and tests)."""
        if slot is None:
            slot = self.slots.index(None)
        self.slots[slot] = Car(self.routes[entry][route], route)
        return slot

    def _spawn(self) -> None:
        occupied = {car.cell for car in self.slots if car is not None}
        for e, (cell, _) in enumerate(self.entries):
            if self._rng.random() >= self.cfg.p_arrive:
                continue
            if self.active_count >= self.cfg.n_max or cell in occupied:
                continue
            route = int(self._rng.integers(len(self.routes[e])))
            self.add_car(e, route)
            occupied.add(cell)

    def _alive_total(self) -> int:
        return sum(car.alive for car in self.slots if car is not None)

    def step(self, actions) -> EnvStep:
        a = np.asarray(actions)
        if a.shape != (self.n_agents,):
            raise ValueError(f"expected {self.n_agents} actions, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.integer) or a.min() < 0 or a.max() > 1:
            raise ValueError("traffic actions must be 0 (gas) or 1 (brake)")
        for k, car in enumerate(self.slots):
            if car is None:
                continue
            if a[k] == GAS:
                car.pos += 1
                if car.pos == len(car.route):
                    self.slots[k] = None
                    self.completed += 1
                    continue
            car.alive += 1
        self._spawn()
        cells: dict = {}
        for car in self.slots:
            if car is not None:
                cells[car.cell] = cells.get(car.cell, 0) + 1
        collisions = sum(1 for c in cells.values() if c > 1)
        if collisions:
            self.collided = True
        reward = -TIME_PENALTY * self._alive_total() - COLLISION_PENALTY * collisions
        return self._emit(reward, collisions)

    def observations(self) -> np.ndarray:
        obs = np.zeros((self.n_agents, self.obs_dim))
        occupancy = np.zeros((self.cfg.dim + 2, self.cfg.dim + 2))
        for car in self.slots:
            if car is not None:
                occupancy[car.cell[0] + 1, car.cell[1] + 1] += 1
        scale = self.cfg.dim - 1
        for k, car in enumerate(self.slots):
            if car is None:
                continue
            r, c = car.cell
            window = occupancy[r : r + 3, c : c + 3].copy()
            window[1, 1] -= 1
            heading = np.zeros(4)
            heading[_DIR_INDEX[car.direction()]] = 1.0
            obs[k] = np.concatenate(
                [[1.0], np.minimum(window, 1.0).ravel(), [r / scale, c / scale, car.pos / (len(car.route) - 1)], heading]
            )
        return obs

    def _emit(self, reward: float, collisions: int) -> EnvStep:
        obs = self.observations()
        info = {"collisions": collisions, "success": not self.collided, "active": self.active_count,
                "completed": self.completed}
        return EnvStep(obs, obs.ravel(), float(reward), False, info)

    def entity_positions(self) -> np.ndarray:
        return np.array([car.cell if car is not None else (-1, -1) for car in self.slots], dtype=float)
