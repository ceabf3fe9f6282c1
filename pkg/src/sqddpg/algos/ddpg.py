"""Shared-reward DDPG baselines: independent critics (IDDPG) and centralised critics (MADDPG)."""

from __future__ import annotations

import numpy as np

from ..nn import entropy, gumbel_noise, gumbel_softmax_backward, gumbel_softmax_sample, mlp_backward, mlp_forward, softmax
from .common import Learner, Net, entropy_logit_grad, grad_norm


class DDPGLearner(Learner):
    """Every agent regresses its own critic on the global reward."""

    centralized = False

    def __init__(self, cfg, n_agents, obs_dim, n_actions, rng):
        super().__init__(cfg, n_agents, obs_dim, n_actions, rng)
        self.critics = [
            Net.create(self.critic_in_dim, cfg.hidden_units, 1, cfg.critic_lr, rng) for _ in range(n_agents)
        ]

    @property
    def critic_in_dim(self) -> int:
        if self.centralized:
            return self.state_dim + self.n * self.n_actions
        return self.obs_dim + self.n_actions

    def critic_input(self, i: int, states: np.ndarray, joint: np.ndarray) -> np.ndarray:
        if self.centralized:
            return np.concatenate([states, joint.reshape(len(joint), -1)], axis=1)
        return np.concatenate([self.split_obs(states)[i], joint[:, i]], axis=1)

    def action_columns(self, i: int) -> slice:
        start = self.state_dim + i * self.n_actions if self.centralized else self.obs_dim
        return slice(start, start + self.n_actions)

    def q_values(self, i: int, states, joint, target: bool = False) -> np.ndarray:
        net = self.critics[i]
        y, _ = mlp_forward(net.target if target else net.params, self.critic_input(i, states, joint))
        return y[:, 0]

    def actor_loss(self, i: int, states, joint, noise):
        """Negated mean Q_i at agent ``i``'s relaxed action, minus the entropy bonus; with actor grads."""
        cfg = self.cfg
        b = len(states)
        actor = self.actors[i].params
        logits, acache = mlp_forward(actor, self.split_obs(states)[i])
        action = gumbel_softmax_sample(logits, cfg.temperature, None, noise=noise)
        joint = joint.copy()
        joint[:, i] = action
        critic = self.critics[i].params
        q, ccache = mlp_forward(critic, self.critic_input(i, states, joint))
        probs = softmax(logits)
        loss = -q[:, 0].mean() - cfg.entropy_coef * entropy(probs).mean()
        _, dx = mlp_backward(critic, ccache, np.full((b, 1), -1.0 / b))
        d_logits = gumbel_softmax_backward(action, dx[:, self.action_columns(i)], cfg.temperature)
        d_logits -= cfg.entropy_coef / b * entropy_logit_grad(probs)
        grads, _ = mlp_backward(actor, acache, d_logits)
        return loss, grads

    def critic_loss(self, i: int, batch, next_joint):
        y = batch.rewards + self.cfg.gamma * (1.0 - batch.dones) * self.q_values(
            i, batch.next_states, next_joint, target=True
        )
        critic = self.critics[i].params
        q, cache = mlp_forward(critic, self.critic_input(i, batch.states, batch.actions))
        residual = y - q[:, 0]
        loss = 0.5 * float(np.mean(residual**2))
        grads, _ = mlp_backward(critic, cache, (-residual / len(residual))[:, None])
        return loss, grads

    def update(self, batch, rng):
        if len(batch) == 0:
            raise ValueError("empty minibatch")
        noise = gumbel_noise((len(batch), self.n, self.n_actions), rng)
        joint = np.stack(
            [gumbel_softmax_sample(self.logits(batch.states, i), self.cfg.temperature, None, noise=noise[:, i])
             for i in range(self.n)],
            axis=1,
        )
        next_joint = self.greedy_joint(batch.next_states, target=True)
        actor_norms, critic_losses = [], []
        for i in range(self.n):
            _, g = self.actor_loss(i, batch.states, joint, noise[:, i])
            actor_norms.append(grad_norm(g))
            self.actors[i].step(g)
        for i in range(self.n):
            loss, g = self.critic_loss(i, batch, next_joint)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite critic loss for agent {i}")
            critic_losses.append(loss)
            self.critics[i].step(g)
        return {"critic_loss": float(np.mean(critic_losses)), "actor_grad_norm": float(np.mean(actor_norms))}

    def credits(self, states, actions, rng=None, samples=None):
        states = np.atleast_2d(states)
        return np.stack([self.q_values(i, states, actions) for i in range(self.n)], axis=1)


class IDDPG(DDPGLearner):
    name = "iddpg"
    centralized = False


class MADDPG(DDPGLearner):
    name = "maddpg"
    centralized = True
