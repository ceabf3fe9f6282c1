"""Evaluation protocols: success rate, capture turns, credit/distance correlation and credit traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from .algos import Learner
from .config import TrainConfig
from .envs import make_env
from .envs.traffic import TRAFFIC_CONFIGS
from .train import episode_seed, load_checkpoint

Policy = Callable[[np.ndarray, np.random.Generator], np.ndarray]

# stream ids for episode_seed; evaluation never shares a stream with training
EVAL_STREAM, PCC_STREAM, TRACE_STREAM = 101, 102, 103


def minmax_normalize(xs) -> np.ndarray:
    """(x - min) / (max - min); a zero-range input maps to all zeros."""
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        raise ValueError("cannot normalise an empty sequence")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def moving_average(xs, window: int = 100) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    x = np.asarray(xs, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    k = np.arange(1, len(x) + 1)
    lo = np.maximum(k - window, 0)
    return (c[k] - c[lo]) / (k - lo)


@dataclass(frozen=True)
class Correlation:
    r: float
    p: float
    n: int


def pearson(x, y) -> Correlation:
    """Two-pass Pearson coefficient with a two-tailed p-value from t on n - 2 dof."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"need two equal-length vectors, got {x.shape} and {y.shape}")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 points for a significance test")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined: one input has zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return Correlation(r, 0.0, n)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return Correlation(r, float(2.0 * stats.t.sf(abs(t), n - 2)), n)


# -- policies -----------------------------------------------------------------


def greedy_policy(learner: Learner) -> Policy:
    return lambda state, rng: learner.select_actions(state, explore=False)


def exploring_policy(learner: Learner) -> Policy:
    return lambda state, rng: learner.select_actions(state, explore=True, rng=rng)


def random_policy(n_agents: int, n_actions: int) -> Policy:
    return lambda state, rng: rng.integers(n_actions, size=n_agents)


def constant_policy(n_agents: int, action: int) -> Policy:
    return lambda state, rng: np.full(n_agents, action, dtype=np.int64)


def _resolve(checkpoint) -> tuple[TrainConfig, Learner]:
    if isinstance(checkpoint, tuple):
        return checkpoint
    return load_checkpoint(checkpoint)


@dataclass
class Episode:
    rewards: list
    collisions: int
    steps: int
    captured_at: int | None
    completed: int = 0


def run_episode(env, policy: Policy, rng: np.random.Generator, steps: int, on_step=None) -> Episode:
    """Roll ``policy`` for at most ``steps`` steps. No learning happens here."""
    cur = env.reset(rng)
    rewards, collisions, captured_at = [], 0, None
    t = 0
    for t in range(1, steps + 1):
        actions = policy(cur.global_state, rng)
        if on_step is not None:
            on_step(env, cur, actions)
        cur = env.step(actions)
        rewards.append(cur.reward)
        collisions += int(cur.info.get("collisions", 0))
        if cur.done:
            if cur.info.get("captured"):
                captured_at = t
            break
    return Episode(rewards, collisions, t, captured_at, int(cur.info.get("completed", 0)))


# -- success rate -----------------------------------------------------------------


@dataclass(frozen=True)
class TrafficStats:
    success_rate: float
    mean_completed: float  # cars that reached the end of their route, per episode
    mean_reward: float


def traffic_stats_of(policy: Policy, difficulty: str, episodes: int = 1000, steps: int | None = None,
                     seed: int = 0) -> TrafficStats:
    if difficulty not in TRAFFIC_CONFIGS:
        raise ValueError(f"unknown difficulty {difficulty!r}")
    expected = TRAFFIC_CONFIGS[difficulty].eval_steps
    steps = expected if steps is None else steps
    if steps != expected:
        raise ValueError(f"{difficulty} is evaluated with {expected} steps per episode, got {steps}")
    env = make_env("traffic", difficulty)
    runs = [run_episode(env, policy, episode_seed(seed, EVAL_STREAM, ep), steps) for ep in range(episodes)]
    return TrafficStats(
        float(np.mean([e.collisions == 0 for e in runs])),
        float(np.mean([e.completed for e in runs])),
        float(np.mean([np.mean(e.rewards) for e in runs])),
    )


def success_rate_of(policy: Policy, difficulty: str, episodes: int = 1000, steps: int | None = None,
                    seed: int = 0) -> float:
    return traffic_stats_of(policy, difficulty, episodes, steps, seed).success_rate


def evaluate_traffic(checkpoint, difficulty: str | None = None, episodes: int = 1000,
                     steps: int | None = None, seed: int = 0) -> TrafficStats:
    cfg, learner = _resolve(checkpoint)
    if cfg.env != "traffic":
        raise ValueError(f"checkpoint was trained on {cfg.env!r}, not traffic")
    difficulty = difficulty or cfg.difficulty
    if difficulty != cfg.difficulty:
        raise ValueError(f"checkpoint was trained on {cfg.difficulty!r}, asked to evaluate {difficulty!r}")
    return traffic_stats_of(greedy_policy(learner), difficulty, episodes, steps, seed)


def evaluate_success_rate(checkpoint, difficulty: str | None = None, episodes: int = 1000,
                          steps: int | None = None, seed: int = 0) -> float:
    """Fraction of greedy evaluation episodes without any collision."""
    return evaluate_traffic(checkpoint, difficulty, episodes, steps, seed).success_rate


# -- capture turns -------------------------------------------------------------------


def capture_turns_of(policy: Policy, episodes: int = 100, steps: int = 200, seed: int = 0) -> np.ndarray:
    """Turns until capture per episode; uncaptured episodes count as ``steps``."""
    env = make_env("prey")
    out = []
    for ep in range(episodes):
        e = run_episode(env, policy, episode_seed(seed, EVAL_STREAM, ep), steps)
        out.append(e.captured_at if e.captured_at is not None else steps)
    return np.asarray(out)


def evaluate_capture_turns(checkpoint, episodes: int = 100, seed: int = 0) -> np.ndarray:
    cfg, learner = _resolve(checkpoint)
    if cfg.env != "prey":
        raise ValueError(f"checkpoint was trained on {cfg.env!r}, not prey")
    return capture_turns_of(greedy_policy(learner), episodes, cfg.episode_length, seed)


def mean_step_reward_of(policy: Policy, env_name: str, difficulty: str = "easy", episodes: int = 100,
                        steps: int = 200, seed: int = 0) -> float:
    env = make_env(env_name, difficulty)
    means = [np.mean(run_episode(env, policy, episode_seed(seed, EVAL_STREAM, ep), steps).rewards)
             for ep in range(episodes)]
    return float(np.mean(means))


# -- credit versus distance -------------------------------------------------------------


@dataclass
class CreditSamples:
    credits: np.ndarray  # (K, n)
    distances: np.ndarray  # (K, n)


def collect_credit_samples(cfg: TrainConfig, learner: Learner, samples: int = 1000, seed: int = 0,
                           shapley_samples: int = 32) -> CreditSamples:
    """Credits and predator-prey distances on ``samples`` transitions drawn at random from
    episodes of the trained (exploring) policy."""
    if cfg.env != "prey":
        raise ValueError(f"credit/distance analysis needs a prey checkpoint, got {cfg.env!r}")
    env = make_env("prey")
    states, actions, dists = [], [], []

    def record(env, cur, acts):
        states.append(cur.global_state)
        actions.append(acts)
        dists.append(env.distances())

    policy = exploring_policy(learner)
    ep = 0
    while len(states) < 4 * samples:
        run_episode(env, policy, episode_seed(seed, PCC_STREAM, ep), cfg.episode_length, on_step=record)
        ep += 1
    rng = np.random.default_rng(np.random.SeedSequence([seed, PCC_STREAM]))
    idx = rng.choice(len(states), size=samples, replace=False)
    s = np.asarray(states)[idx]
    a = learner.onehot(np.asarray(actions)[idx])
    credits = learner.credits(s, a, rng=rng, samples=shapley_samples)
    return CreditSamples(np.asarray(credits), np.asarray(dists)[idx])


def pcc_credit_distance(checkpoint, samples: int = 1000, seed: int = 0, shapley_samples: int = 32) -> Correlation:
    """Pearson correlation between each predator's credit and 1 / (its distance to the prey),
    pooled over predators."""
    cfg, learner = _resolve(checkpoint)
    cs = collect_credit_samples(cfg, learner, samples, seed, shapley_samples)
    return pearson(cs.credits.ravel(), 1.0 / np.maximum(cs.distances.ravel(), 1e-6))


# -- trajectories and credit traces -------------------------------------------------------------


@dataclass
class Trajectory:
    env: str
    difficulty: str
    states: np.ndarray  # (T, S)
    actions: np.ndarray  # (T, n)
    positions: np.ndarray  # (T, E, 2)
    rewards: np.ndarray  # (T,)

    def save(self, path) -> None:
        np.savez(path, env=self.env, difficulty=self.difficulty, states=self.states,
                 actions=self.actions, positions=self.positions, rewards=self.rewards)

    @classmethod
    def load(cls, path) -> "Trajectory":
        with np.load(path) as z:
            return cls(str(z["env"]), str(z["difficulty"]), z["states"], z["actions"], z["positions"],
                       z["rewards"])


def record_trajectory(checkpoint, steps: int | None = None, seed: int = 0) -> Trajectory:
    """One greedy episode of a checkpoint; the fixed source for credit traces."""
    cfg, learner = _resolve(checkpoint)
    env = make_env(cfg.env, cfg.difficulty)
    states, actions, positions = [], [], []

    def record(env, cur, acts):
        states.append(cur.global_state)
        actions.append(acts)
        positions.append(env.entity_positions())

    ep = run_episode(env, greedy_policy(learner), episode_seed(seed, TRACE_STREAM, 0),
                     steps or cfg.episode_length, on_step=record)
    return Trajectory(cfg.env, cfg.difficulty, np.asarray(states), np.asarray(actions),
                      np.asarray(positions, dtype=float), np.asarray(ep.rewards))


@dataclass
class CreditTrace:
    algorithm: str
    raw: np.ndarray  # (T, n)
    normalized: np.ndarray  # (T, n)
    positions: np.ndarray  # (T, E, 2)


def credit_trace(checkpoint, traj: Trajectory, seed: int = 0, shapley_samples: int = 32) -> CreditTrace:
    cfg, learner = _resolve(checkpoint)
    if traj.env != cfg.env or (cfg.env == "traffic" and traj.difficulty != cfg.difficulty):
        raise ValueError(f"trajectory from {traj.env}/{traj.difficulty} does not match checkpoint {cfg.env}")
    if traj.states.shape[1] != learner.state_dim or traj.actions.shape[1] != learner.n:
        raise ValueError("trajectory dimensions do not match the checkpoint")
    rng = episode_seed(seed, TRACE_STREAM, 1)
    raw = np.asarray(learner.credits(traj.states, learner.onehot(traj.actions), rng=rng, samples=shapley_samples))
    norm = minmax_normalize(raw.ravel()).reshape(raw.shape)
    return CreditTrace(cfg.algorithm, raw, norm, traj.positions)


def nearest_agreement(trace: CreditTrace, traj: Trajectory) -> float:
    """Fraction of steps where the highest-credit predator is the one nearest the prey."""
    n = trace.raw.shape[1]
    d = np.linalg.norm(traj.positions[:, :n] - traj.positions[:, n:n + 1], axis=-1)
    return float(np.mean(np.argmax(trace.raw, axis=1) == np.argmin(d, axis=1)))


def write_credit_trace(trace: CreditTrace, path) -> None:
    t, n = trace.raw.shape
    e = trace.positions.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "agent", "credit", "normalized"] + [f"e{k}_{ax}" for k in range(e) for ax in "xy"])
        for s in range(t):
            pos = [repr(float(v)) for v in trace.positions[s].ravel()]
            for i in range(n):
                w.writerow([s, i, repr(float(trace.raw[s, i])), repr(float(trace.normalized[s, i]))] + pos)


_COLOURS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def write_trace_svg(trace: CreditTrace, path, width: int = 800, height: int = 360) -> None:
    """Entity paths on the left, normalised credit curves on the right."""
    t, n = trace.raw.shape
    pos = trace.positions
    half = width // 2
    lo, hi = pos.min(axis=(0, 1)), pos.max(axis=(0, 1))
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    def to_px(p):
        q = (p - lo) / span
        return 20 + q[0] * (half - 40), height - 20 - q[1] * (height - 40)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             '<rect width="100%" height="100%" fill="white"/>']
    for k in range(pos.shape[1]):
        colour = _COLOURS[k % len(_COLOURS)] if k < n else "#000000"
        pts = " ".join("%.1f,%.1f" % to_px(p) for p in pos[:, k])
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        x, y = to_px(pos[-1, k])
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="4" fill="{colour}"/>')
    x0, w = half + 20, half - 40
    parts.append(f'<rect x="{x0}" y="20" width="{w}" height="{height - 40}" fill="none" stroke="#888"/>')
    for i in range(n):
        xs = x0 + np.arange(t) / max(t - 1, 1) * w
        ys = height - 20 - trace.normalized[:, i] * (height - 40)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(xs, ys))
        parts.append(f'<polyline fill="none" stroke="{_COLOURS[i % len(_COLOURS)]}" stroke-width="1.5" points="{pts}"/>')
    parts.append(f'<text x="{x0}" y="14" font-size="12">{trace.algorithm} normalised credit</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def export_credit_trace(checkpoint, trajectory, out_dir, seed: int = 0, shapley_samples: int = 32) -> CreditTrace:
    """Replay a fixed trajectory, write credit_trace.csv and trace.svg into ``out_dir``."""
    traj = trajectory if isinstance(trajectory, Trajectory) else Trajectory.load(trajectory)
    trace = credit_trace(checkpoint, traj, seed, shapley_samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_credit_trace(trace, out / "credit_trace.csv")
    write_trace_svg(trace, out / "trace.svg")
    return trace
