"""Pieces shared by every learner: networks with targets, action selection, bundles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import TrainConfig
from ..nn import (
    AdamState,
    MLPParams,
    adam_step,
    entropy,
    gumbel_noise,
    load_params,
    mlp_init,
    onehot_argmax,
    save_params,
    soft_update,
    softmax,
)


@dataclass
class Net:
    """A live network, its slowly tracking target copy and the live net's optimiser."""

    params: MLPParams
    target: MLPParams
    opt: AdamState

    @classmethod
    def create(cls, in_dim: int, hidden: int, out_dim: int, lr: float, rng: np.random.Generator) -> "Net":
        p = mlp_init(in_dim, hidden, out_dim, rng)
        return cls(p, p.copy(), AdamState.for_params(p, lr))

    def step(self, grads) -> None:
        adam_step(self.params, grads, self.opt)

    def track(self, tau: float) -> None:
        soft_update(self.target, self.params, tau)


def grad_norm(grads) -> float:
    return float(np.sqrt(sum(np.sum(b * b) for b in grads.blocks())))


def entropy_logit_grad(probs: np.ndarray) -> np.ndarray:
    """d H(softmax(z)) / dz."""
    logp = np.log(np.clip(probs, 1e-300, None))
    return -probs * (logp + entropy(probs)[..., None])


class Learner:
    """Per-agent actors acting on their own observation; subclasses supply critics.

    ``state`` everywhere is the global state: the concatenation of the
    agents' observations, so agent ``i`` reads slice ``i`` of it.
    """

    name = "base"
    off_policy = True

    def __init__(self, cfg: TrainConfig, n_agents: int, obs_dim: int, n_actions: int, rng: np.random.Generator):
        self.cfg = cfg
        self.n = n_agents
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.state_dim = n_agents * obs_dim
        self.actors = [
            Net.create(obs_dim, cfg.hidden_units, n_actions, cfg.actor_lr, rng) for _ in range(n_agents)
        ]
        self.critics: list[Net] = []

    # -- acting ---------------------------------------------------------------

    def split_obs(self, states: np.ndarray) -> np.ndarray:
        """(B, S) -> (n, B, obs_dim); a single state gives (n, obs_dim)."""
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            return states.reshape(self.n, self.obs_dim)
        return states.reshape(len(states), self.n, self.obs_dim).transpose(1, 0, 2)

    def logits(self, state: np.ndarray, i: int, target: bool = False) -> np.ndarray:
        p = self.actors[i].target if target else self.actors[i].params
        obs = self.split_obs(state)[i]
        return np.maximum(obs @ p.W1.T + p.b1, 0.0) @ p.W2.T + p.b2

    def select_actions(self, state: np.ndarray, explore: bool, rng: np.random.Generator | None = None) -> np.ndarray:
        """Integer action per agent. Exploration draws a Gumbel-perturbed argmax, which is
        the hard (straight-through) value of a Gumbel-Softmax sample."""
        state = np.asarray(state, dtype=float)
        if state.shape != (self.state_dim,):
            raise ValueError(f"state has shape {state.shape}, expected ({self.state_dim},)")
        logits = np.stack([self.logits(state, i) for i in range(self.n)])
        if explore:
            logits = logits + gumbel_noise(logits.shape, rng)
        return np.argmax(logits, axis=-1)

    def onehot(self, actions: np.ndarray) -> np.ndarray:
        return np.eye(self.n_actions)[np.asarray(actions)]

    def greedy_joint(self, states: np.ndarray, target: bool = False) -> np.ndarray:
        """(B, n, A) one-hot greedy actions of (target) actors."""
        return np.stack([onehot_argmax(self.logits(states, i, target)) for i in range(self.n)], axis=1)

    def policy_probs(self, states: np.ndarray) -> np.ndarray:
        return np.stack([softmax(self.logits(states, i)) for i in range(self.n)], axis=1)

    # -- learning hooks ---------------------------------------------------------

    def update(self, batch, rng: np.random.Generator) -> dict:
        raise NotImplementedError

    def update_targets(self, tau: float) -> None:
        for net in self.actors + self.critics:
            net.track(tau)

    def credits(self, states: np.ndarray, actions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """(B, n) per-agent credit the critic assigns to the taken joint action."""
        raise NotImplementedError

    # -- persistence ----------------------------------------------------------

    def save(self, directory, manifest: dict) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        files = {"actors": [], "critics": []}
        for kind, nets in (("actors", self.actors), ("critics", self.critics)):
            for k, net in enumerate(nets):
                stem = f"{kind[:-1]}_{k}"
                save_params(net.params, d / f"{stem}.bin")
                save_params(net.target, d / f"{stem}_target.bin")
                files[kind].append(stem)
        (d / "manifest.json").write_text(json.dumps({**manifest, "files": files}, indent=2, sort_keys=True))

    def load(self, directory) -> None:
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        for kind, nets in (("actors", self.actors), ("critics", self.critics)):
            stems = manifest["files"][kind]
            if len(stems) != len(nets):
                raise ValueError(f"bundle has {len(stems)} {kind}, learner expects {len(nets)}")
            for stem, net in zip(stems, nets):
                dims = (net.params.in_dim, net.params.hidden_dim, net.params.out_dim)
                net.params = load_params(d / f"{stem}.bin", expect=dims)
                net.target = load_params(d / f"{stem}_target.bin", expect=dims)
