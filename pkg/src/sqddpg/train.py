"""Training loop, metrics records and checkpoint bundles."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .algos import Learner, ReplayBuffer, Rollout, Transition, make_learner
from .config import TrainConfig, make_config
from .envs import env_spec, make_env

log = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "SQDDPG_OUTPUT_DIR"
METRIC_COLUMNS = ("episode", "mean_step_reward", "episode_return", "steps", "turns_to_capture", "success", "collisions")


@dataclass
class MetricsRecord:
    episode: int
    mean_step_reward: float
    episode_return: float
    steps: int
    turns_to_capture: int | None = None
    success: bool | None = None
    collisions: int = 0
    wall_clock: float = 0.0

    def row(self) -> list[str]:
        out = []
        for name in METRIC_COLUMNS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append(str(int(v)))
            elif isinstance(v, float):
                out.append(repr(float(v)))
            else:
                out.append(str(v))
        return out


@dataclass
class TrainResult:
    config: TrainConfig
    records: list
    out_dir: Path
    checkpoint: Path
    metrics_path: Path


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for network init, environment and agent noise/minibatches."""
    init, env, act = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(env), np.random.default_rng(act)


def episode_seed(master: int, stream: int, episode: int) -> np.random.Generator:
    """Per-episode generator for evaluation: reproducible and independent of episode order."""
    return np.random.default_rng(np.random.SeedSequence([master, stream, episode]))


def default_out_dir(cfg: TrainConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ENV_VAR, "runs"))
    env = f"traffic-{cfg.difficulty}" if cfg.env == "traffic" else cfg.env
    return root / f"{cfg.algorithm}_{env}_m{cfg.sample_size}_s{cfg.seed}"


def build(cfg: TrainConfig, rng: np.random.Generator):
    env = make_env(cfg.env, cfg.difficulty)
    spec = env_spec(cfg.env, cfg.difficulty)
    learner = make_learner(cfg, spec.n_agents, spec.obs_dim, spec.n_actions, rng)
    return env, spec, learner


def manifest_for(cfg: TrainConfig, episodes_done: int) -> dict:
    return {
        "algorithm": cfg.algorithm,
        "environment": cfg.env,
        "difficulty": cfg.difficulty,
        "config_hash": cfg.digest(),
        "episodes": episodes_done,
        "config": asdict(cfg),
    }


def save_checkpoint(learner: Learner, cfg: TrainConfig, directory, episodes_done: int) -> Path:
    learner.save(directory, manifest_for(cfg, episodes_done))
    return Path(directory)


def load_checkpoint(directory) -> tuple[TrainConfig, Learner]:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    cfg = make_config(**manifest["config"])
    if cfg.digest() != manifest["config_hash"]:
        raise ValueError(f"{d}: config hash mismatch; bundle was written with a different configuration")
    _, _, learner = build(cfg, np.random.default_rng(0))
    learner.load(d)
    return cfg, learner


def write_metrics(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for rec in records:
            w.writerow(rec.row())


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_training(cfg: TrainConfig, out_dir=None, log_every: int = 100) -> TrainResult:
    """Train ``cfg.algorithm`` on ``cfg.env`` and write metrics.csv, timing.csv and a checkpoint."""
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else default_out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())

    rng_init, rng_env, rng_act = seed_streams(cfg.seed)
    env, spec, learner = build(cfg, rng_init)
    if spec.n_agents * spec.obs_dim != learner.state_dim:
        raise ValueError("environment and learner dimensions disagree")
    buffer = ReplayBuffer(cfg.replay_capacity, learner.state_dim, spec.n_agents, spec.n_actions)
    rollout = Rollout()
    records: list[MetricsRecord] = []
    steps_total = 0
    start = time.perf_counter()

    for episode in range(cfg.episodes):
        step = env.reset(rng_env)
        state = step.global_state
        ret, collisions, captured_at = 0.0, 0, None
        success = True
        t = 0
        for t in range(1, cfg.episode_length + 1):
            actions = learner.select_actions(state, explore=True, rng=rng_act)
            nxt = env.step(actions)
            ret += nxt.reward
            collisions += int(nxt.info.get("collisions", 0))
            success = bool(nxt.info.get("success", success))
            steps_total += 1
            if learner.off_policy:
                buffer.push(Transition(state, learner.onehot(actions), nxt.reward, nxt.global_state, nxt.done))
                if steps_total % cfg.behaviour_update_freq == 0 and len(buffer) >= cfg.batch_size:
                    for _ in range(cfg.updates_per_round):
                        _guarded_update(learner, buffer.sample(cfg.batch_size, rng_act), rng_act, episode)
            else:
                rollout.add(state, actions, nxt.reward, nxt.global_state, nxt.done)
                if len(rollout) >= cfg.behaviour_update_freq or nxt.done or t == cfg.episode_length:
                    _guarded_update(learner, rollout, rng_act, episode)
                    rollout.clear()
            if steps_total % cfg.target_update_freq == 0:
                learner.update_targets(cfg.target_tau)
            state = nxt.global_state
            if nxt.done:
                if nxt.info.get("captured"):
                    captured_at = t
                break
        rec = MetricsRecord(
            episode=episode,
            mean_step_reward=ret / t,
            episode_return=ret,
            steps=t,
            turns_to_capture=(captured_at or cfg.episode_length) if cfg.env == "prey" else None,
            success=success if cfg.env == "traffic" else None,
            collisions=collisions,
            wall_clock=time.perf_counter() - start,
        )
        records.append(rec)
        if log_every and (episode + 1) % log_every == 0:
            recent = records[-log_every:]
            log.info("episode %d mean step reward %.4f", episode + 1, np.mean([r.mean_step_reward for r in recent]))
        if cfg.checkpoint_every and (episode + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(learner, cfg, out / f"checkpoint_ep{episode + 1}", episode + 1)

    metrics_path = out / "metrics.csv"
    write_metrics(records, metrics_path)
    with open(out / "timing.csv", "w") as fh:
        fh.write("episode,wall_clock\n")
        for rec in records:
            fh.write(f"{rec.episode},{rec.wall_clock:.3f}\n")
    ckpt = save_checkpoint(learner, cfg, out / "checkpoint", cfg.episodes)
    return TrainResult(cfg, records, out, ckpt, metrics_path)


def _guarded_update(learner, data, rng, episode):
    try:
        info = learner.update(data, rng)
    except FloatingPointError as exc:
        raise RuntimeError(f"training diverged in episode {episode}: {exc}") from exc
    for k, v in info.items():
        if not np.isfinite(v):
            raise RuntimeError(f"training diverged in episode {episode}: {k}={v}")
    return info


def metric_fields() -> list[str]:
    return [f.name for f in fields(MetricsRecord)]


def run_dir(cfg: TrainConfig, root=None) -> Path:
    """Directory keyed by the config digest, so a changed config never reuses stale results."""
    base = default_out_dir(cfg) if root is None else Path(root) / default_out_dir(cfg).name
    return base.with_name(f"{base.name}_{cfg.digest()[:8]}")


def cached_training(cfg: TrainConfig, root=None, log_every: int = 100) -> Path:
    """Train unless a finished run for exactly this config already exists; returns its directory."""
    out = run_dir(cfg, root)
    done = out / "checkpoint" / "manifest.json"
    if done.exists() and (out / "metrics.csv").exists():
        if json.loads(done.read_text())["config_hash"] == cfg.digest():
            return out
    run_training(cfg, out, log_every=log_every)
    return out
