"""On-policy baselines with softmax policies: independent A2C and COMA."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import entropy, gumbel_noise, mlp_backward, mlp_forward, softmax
from .common import Learner, Net, entropy_logit_grad, grad_norm


@dataclass
class Rollout:
    """Consecutive steps of one episode collected under the current policies."""

    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    next_states: list = field(default_factory=list)
    dones: list = field(default_factory=list)

    def add(self, state, actions, reward, next_state, done) -> None:
        self.states.append(np.asarray(state, dtype=float))
        self.actions.append(np.asarray(actions, dtype=np.int64))
        self.rewards.append(float(reward))
        self.next_states.append(np.asarray(next_state, dtype=float))
        self.dones.append(bool(done))

    def __len__(self) -> int:
        return len(self.rewards)

    def clear(self) -> None:
        for lst in (self.states, self.actions, self.rewards, self.next_states, self.dones):
            lst.clear()


def discounted_returns(rewards, bootstrap: float, terminal: bool, gamma: float) -> np.ndarray:
    """n-step returns of one segment; ``bootstrap`` is the value after its last step."""
    out = np.empty(len(rewards))
    g = 0.0 if terminal else bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


def policy_gradient_logits(probs, actions, advantages, entropy_coef):
    """d/dz of mean(-log pi(u) * A) - entropy_coef * mean H(pi)."""
    t = len(actions)
    onehot = np.eye(probs.shape[1])[actions]
    return (-(onehot - probs) * advantages[:, None] - entropy_coef * entropy_logit_grad(probs)) / t


def coma_advantages(qvals: np.ndarray, probs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Q(s, u) minus the counterfactual baseline sum_a pi_i(a) Q(s, (u_-i, a)).

    ``qvals`` and ``probs`` are (..., n, A); ``actions`` is (..., n).
    """
    taken = np.take_along_axis(qvals, actions[..., None], axis=-1)[..., 0]
    return taken - (probs * qvals).sum(axis=-1)


class IA2C(Learner):
    name = "ia2c"
    off_policy = False

    def __init__(self, cfg, n_agents, obs_dim, n_actions, rng):
        super().__init__(cfg, n_agents, obs_dim, n_actions, rng)
        self.critics = [Net.create(obs_dim, cfg.hidden_units, 1, cfg.critic_lr, rng) for _ in range(n_agents)]

    def values(self, i, states, target=False):
        net = self.critics[i]
        return mlp_forward(net.target if target else net.params, self.split_obs(np.atleast_2d(states))[i])[0][:, 0]

    def update(self, rollout: Rollout, rng):
        if len(rollout) == 0:
            raise ValueError("empty rollout")
        states = np.stack(rollout.states)
        actions = np.stack(rollout.actions)
        last = rollout.next_states[-1]
        terminal = rollout.dones[-1]
        t = len(rollout)
        actor_norms, critic_losses = [], []
        for i in range(self.n):
            returns = discounted_returns(rollout.rewards, float(self.values(i, last, target=True)[0]), terminal,
                                         self.cfg.gamma)
            critic = self.critics[i].params
            v, ccache = mlp_forward(critic, self.split_obs(states)[i])
            residual = returns - v[:, 0]
            critic_losses.append(0.5 * float(np.mean(residual**2)))
            cgrads, _ = mlp_backward(critic, ccache, (-residual / t)[:, None])

            actor = self.actors[i].params
            logits, acache = mlp_forward(actor, self.split_obs(states)[i])
            probs = softmax(logits)
            d_logits = policy_gradient_logits(probs, actions[:, i], residual, self.cfg.entropy_coef)
            agrads, _ = mlp_backward(actor, acache, d_logits)
            actor_norms.append(grad_norm(agrads))
            self.critics[i].step(cgrads)
            self.actors[i].step(agrads)
        return {"critic_loss": float(np.mean(critic_losses)), "actor_grad_norm": float(np.mean(actor_norms))}

    def credits(self, states, actions, rng=None, samples=None):
        states = np.atleast_2d(states)
        return np.stack([self.values(i, states) for i in range(self.n)], axis=1)


class COMA(Learner):
    """One centralised critic conditioned on the agent index; outputs Q for each of
    that agent's actions with the other agents' actions fixed."""

    name = "coma"
    off_policy = False

    def __init__(self, cfg, n_agents, obs_dim, n_actions, rng):
        super().__init__(cfg, n_agents, obs_dim, n_actions, rng)
        in_dim = self.state_dim + n_agents * n_actions + n_agents
        self.critics = [Net.create(in_dim, cfg.hidden_units, n_actions, cfg.critic_lr, rng)]

    def critic_inputs(self, states: np.ndarray, joint: np.ndarray) -> np.ndarray:
        """(B, S), (B, n, A) -> (B * n, D) with each agent's own action slot zeroed, agent-major."""
        b = len(states)
        rows = []
        for i in range(self.n):
            others = joint.copy()
            others[:, i] = 0.0
            agent_id = np.zeros((b, self.n))
            agent_id[:, i] = 1.0
            rows.append(np.concatenate([states, others.reshape(b, -1), agent_id], axis=1))
        return np.concatenate(rows, axis=0)

    def qvalues(self, states, joint, target=False):
        """(B, n, A) counterfactual Q-values and the forward cache."""
        net = self.critics[0]
        b = len(states)
        y, cache = mlp_forward(net.target if target else net.params, self.critic_inputs(states, joint))
        return y.reshape(self.n, b, self.n_actions).transpose(1, 0, 2), cache

    def update(self, rollout: Rollout, rng):
        if len(rollout) == 0:
            raise ValueError("empty rollout")
        states = np.stack(rollout.states)
        actions = np.stack(rollout.actions)
        t = len(rollout)
        joint = self.onehot(actions)

        last = np.atleast_2d(rollout.next_states[-1])
        probs_last = self.policy_probs(last)
        sampled = np.argmax(np.log(np.clip(probs_last, 1e-300, None)) + gumbel_noise(probs_last.shape, rng), axis=-1)
        q_last, _ = self.qvalues(last, self.onehot(sampled), target=True)
        bootstrap = float((probs_last * q_last).sum(axis=-1).mean())
        returns = discounted_returns(rollout.rewards, bootstrap, rollout.dones[-1], self.cfg.gamma)

        qvals, cache = self.qvalues(states, joint)
        probs = self.policy_probs(states)
        taken = np.take_along_axis(qvals, actions[..., None], axis=-1)[..., 0]
        residual = returns[:, None] - taken  # (T, n)
        critic_loss = 0.5 * float(np.mean(residual**2))
        up = np.zeros((self.n, t, self.n_actions))
        for i in range(self.n):
            up[i, np.arange(t), actions[:, i]] = -residual[:, i] / (t * self.n)
        cgrads, _ = mlp_backward(self.critics[0].params, cache, up.reshape(self.n * t, self.n_actions))

        adv = coma_advantages(qvals, probs, actions)
        norms = []
        for i in range(self.n):
            actor = self.actors[i].params
            logits, acache = mlp_forward(actor, self.split_obs(states)[i])
            d_logits = policy_gradient_logits(softmax(logits), actions[:, i], adv[:, i], self.cfg.entropy_coef)
            agrads, _ = mlp_backward(actor, acache, d_logits)
            norms.append(grad_norm(agrads))
            self.actors[i].step(agrads)
        self.critics[0].step(cgrads)
        return {"critic_loss": critic_loss, "actor_grad_norm": float(np.mean(norms))}

    def credits(self, states, actions, rng=None, samples=None):
        states = np.atleast_2d(states)
        q, _ = self.qvalues(states, actions)
        taken = np.argmax(actions, axis=-1)
        return np.take_along_axis(q, taken[..., None], axis=-1)[..., 0]
