"""Training configuration and the per-environment hyperparameter tables."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

ALGORITHMS = ("sqddpg", "iddpg", "maddpg", "ia2c", "coma")
ENVIRONMENTS = ("coopnav", "prey", "traffic")
DIFFICULTIES = ("easy", "medium", "hard")

_COOPNAV = dict(
    hidden_units=32, episodes=5000, episode_length=200, gamma=0.9, behaviour_update_freq=100,
    target_update_freq=200, target_tau=0.1, entropy_coef=1e-2, batch_size=32,
    actor_lr=1e-4, critic_lr=1e-3,
)
_PREY = dict(
    hidden_units=128, episodes=5000, episode_length=200, gamma=0.99, behaviour_update_freq=100,
    target_update_freq=200, target_tau=0.1, entropy_coef=1e-3, batch_size=128,
    actor_lr=1e-4, critic_lr=5e-4,
)
_TRAFFIC = dict(
    hidden_units=128, gamma=0.99, behaviour_update_freq=25, target_update_freq=50, target_tau=0.1,
    entropy_coef=1e-4, actor_lr=1e-4, critic_lr=1e-3,
)
_TRAFFIC_BY_DIFFICULTY = {
    "easy": dict(episodes=2000, episode_length=50, batch_size=64),
    "medium": dict(episodes=5000, episode_length=50, batch_size=32),
    "hard": dict(episodes=2000, episode_length=100, batch_size=32),
}
# (actor_lr, critic_lr) overrides for the on-policy baselines
_LR_OVERRIDES = {
    "coopnav": {"coma": (1e-2, 1e-4), "ia2c": (1e-6, 1e-5)},
    "prey": {"coma": (1e-3, 1e-4), "ia2c": (1e-3, 1e-4)},
}


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "sqddpg"
    env: str = "coopnav"
    difficulty: str = "easy"
    sample_size: int = 1
    hidden_units: int = 32
    episodes: int = 5000
    episode_length: int = 200
    gamma: float = 0.9
    behaviour_update_freq: int = 100
    target_update_freq: int = 200
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    target_tau: float = 0.1
    entropy_coef: float = 1e-2
    batch_size: int = 32
    seed: int = 0
    replay_capacity: int = 10_000
    updates_per_round: int = 1
    temperature: float = 1.0
    checkpoint_every: int = 0

    def validate(self) -> "TrainConfig":
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.env!r}; expected one of {ENVIRONMENTS}")
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"unknown difficulty {self.difficulty!r}; expected one of {DIFFICULTIES}")
        positive = ("sample_size", "hidden_units", "episodes", "episode_length", "behaviour_update_freq",
                    "target_update_freq", "actor_lr", "critic_lr", "target_tau", "batch_size",
                    "replay_capacity", "updates_per_round", "temperature")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.target_tau > 1:
            raise ValueError("target_tau must not exceed 1")
        if self.entropy_coef < 0 or self.checkpoint_every < 0:
            raise ValueError("entropy_coef and checkpoint_every must be non-negative")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay_capacity must hold at least one batch")
        return self

    def digest(self) -> str:
        text = ";".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))


def table_defaults(env: str, algorithm: str = "sqddpg", difficulty: str = "easy") -> dict:
    if env == "coopnav":
        d = dict(_COOPNAV)
    elif env == "prey":
        d = dict(_PREY)
    elif env == "traffic":
        if difficulty not in _TRAFFIC_BY_DIFFICULTY:
            raise ValueError(f"unknown difficulty {difficulty!r}")
        d = {**_TRAFFIC, **_TRAFFIC_BY_DIFFICULTY[difficulty]}
    else:
        raise ValueError(f"unknown environment {env!r}; expected one of {ENVIRONMENTS}")
    lrs = _LR_OVERRIDES.get(env, {}).get(algorithm)
    if lrs:
        d["actor_lr"], d["critic_lr"] = lrs
    return d


_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _coerce(key: str, raw):
    if key not in _TYPES:
        raise KeyError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    if not isinstance(raw, str):
        return raw
    if kind == "int":
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def make_config(**overrides) -> TrainConfig:
    """Table defaults for the chosen environment, then ``overrides`` (None values ignored)."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    for k in overrides:
        if k not in _TYPES:
            raise KeyError(f"unknown config key {k!r}")
    env = overrides.get("env", "coopnav")
    algorithm = overrides.get("algorithm", "sqddpg")
    difficulty = overrides.get("difficulty", "easy")
    if env not in ENVIRONMENTS:
        raise ValueError(f"unknown environment {env!r}; expected one of {ENVIRONMENTS}")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    base = table_defaults(env, algorithm, difficulty if difficulty in DIFFICULTIES else "easy")
    values = {**base, **{k: _coerce(k, v) for k, v in overrides.items()}}
    return TrainConfig(**values).validate()


def load_config(path: str | Path | None = None, **flags) -> TrainConfig:
    """Merge a config file (if any) with flags; flags win over the file."""
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update({k: v for k, v in flags.items() if v is not None})
    return make_config(**values)


def with_overrides(cfg: TrainConfig, **kw) -> TrainConfig:
    return replace(cfg, **kw).validate()
