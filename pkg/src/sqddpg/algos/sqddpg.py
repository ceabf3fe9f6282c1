"""Shapley Q-value DDPG: per-agent marginal-contribution critics averaged over sampled join orders."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..coopgame import sample_order_slots, sample_ordered_coalitions
from ..nn import (
    MLPParams,
    entropy,
    gumbel_noise,
    gumbel_softmax_backward,
    gumbel_softmax_sample,
    mlp_backward,
    mlp_forward,
    softmax,
)
from .common import Learner, Net, entropy_logit_grad, grad_norm


def _check_order(order: Sequence[int], joiner: int, n: int) -> None:
    members = list(order)
    if len(set(members)) != len(members):
        raise ValueError(f"ordered coalition {members} has duplicates")
    if joiner in members:
        raise ValueError(f"joiner {joiner} is inside the coalition {members}")
    if any(not 0 <= j < n for j in members + [joiner]):
        raise ValueError(f"agent index out of range for n={n}")


def _slot_table(orders, joiner: int, n: int) -> np.ndarray:
    """(M, n) table: slot k of order m holds that agent's index, -1 when masked.
    An integer array already in that form is checked and passed through."""
    if isinstance(orders, np.ndarray):
        if orders.ndim != 2 or orders.shape[1] != n:
            raise ValueError(f"slot table of shape {orders.shape} does not fit {n} agents")
        filled = orders >= 0
        size = filled.sum(axis=1)
        rows = np.arange(len(orders))
        if np.any(size < 1) or np.any(filled != (np.arange(n) < size[:, None])) or np.any(orders >= n):
            raise ValueError("malformed slot table")
        if np.any(orders[rows, size - 1] != joiner) or np.any((orders == joiner).sum(axis=1) != 1):
            raise ValueError(f"joiner {joiner} must fill exactly the last occupied slot")
        if np.any((orders[:, :, None] == np.arange(n)).sum(axis=1) > 1):
            raise ValueError("slot table has duplicate agents")
        return orders
    table = np.full((len(orders), n), -1, dtype=np.int64)
    for m, order in enumerate(orders):
        _check_order(order, joiner, n)
        seq = list(order) + [joiner]
        table[m, : len(seq)] = seq
    return table


def _masked_blocks(slots: np.ndarray, joint: np.ndarray) -> np.ndarray:
    """joint (B, n, A) -> (M, B, n*A) ordered, zero-masked action blocks."""
    picked = joint[:, np.maximum(slots, 0)]  # (B, M, n, A)
    picked = np.where((slots >= 0)[None, :, :, None], picked, 0.0)
    b, m, n, a = picked.shape
    return picked.transpose(1, 0, 2, 3).reshape(m, b, n * a)


def amc_input(state: np.ndarray, order: Sequence[int], joiner: int, joint_actions: np.ndarray) -> np.ndarray:
    """State followed by the actions of ``order`` then ``joiner`` in slot order, rest zeroed."""
    state = np.asarray(state, dtype=float)
    joint = np.asarray(joint_actions, dtype=float)
    single = state.ndim == 1
    if single:
        state, joint = state[None], joint[None]
    if joint.ndim != 3 or len(joint) != len(state):
        raise ValueError(f"joint actions of shape {joint.shape} do not match states {state.shape}")
    slots = _slot_table([order], joiner, joint.shape[1])
    x = np.concatenate([state, _masked_blocks(slots, joint)[0]], axis=1)
    return x[0] if single else x


def amc_inputs(states: np.ndarray, orders, joiner: int, joint: np.ndarray) -> np.ndarray:
    """Stack ``amc_input`` over M orders: (M * B, S + n * A), order-major."""
    slots = _slot_table(orders, joiner, joint.shape[1])
    blocks = _masked_blocks(slots, joint)
    m, b, _ = blocks.shape
    rep = np.broadcast_to(states, (m,) + states.shape)
    return np.concatenate([rep, blocks], axis=2).reshape(m * b, -1)


def _forward(amc, x: np.ndarray):
    if isinstance(amc, MLPParams):
        y, cache = mlp_forward(amc, x)
        return y[:, 0], cache
    if hasattr(amc, "forward"):
        return amc.forward(x)
    return np.asarray(amc(x), dtype=float), None


def _input_grad(amc, cache, upstream: np.ndarray) -> np.ndarray:
    if isinstance(amc, MLPParams):
        return mlp_backward(amc, cache, upstream[:, None])[1]
    return amc.backward(cache, upstream)


def _param_grad(amc: MLPParams, cache, upstream: np.ndarray):
    return mlp_backward(amc, cache, upstream[:, None])[0]


@dataclass
class ShapleyEval:
    q: np.ndarray
    orders: object  # list of tuples or an (M, n) slot table
    cache: object
    batch: int


def approx_shapley_q(
    i: int,
    states: np.ndarray,
    joint_actions: np.ndarray,
    m: int,
    amc,
    rng: np.random.Generator | None = None,
    orders=None,
) -> ShapleyEval:
    """Mean AMC output over ``m`` join orders sampled for agent ``i``.

    ``amc`` is an MLPParams, an object with ``forward``/``backward``, or a
    plain callable mapping a (K, D) input to K values.
    """
    if m < 1:
        raise ValueError("sample count must be at least 1")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    joint = np.asarray(joint_actions, dtype=float)
    if joint.ndim == 2:
        joint = joint[None]
    n = joint.shape[1]
    if orders is None:
        orders = sample_order_slots(rng, i, n, m)
    x = amc_inputs(states, orders, i, joint)
    y, cache = _forward(amc, x)
    q = y.reshape(len(orders), len(states)).mean(axis=0)
    return ShapleyEval(q, orders, cache, len(states))


def _joiner_columns(orders, state_dim: int, n_actions: int) -> list[slice]:
    return [slice(state_dim + len(o) * n_actions, state_dim + (len(o) + 1) * n_actions) for o in orders]


def sqddpg_actor_loss(
    actor: MLPParams,
    amc,
    i: int,
    states: np.ndarray,
    joint: np.ndarray,
    orders,
    noise: np.ndarray,
    entropy_coef: float = 0.0,
    temperature: float = 1.0,
):
    """Negated batch-mean Shapley Q of agent ``i`` at its relaxed policy action.

    Agent ``i``'s action is the Gumbel-Softmax relaxation of its logits under
    the given ``noise`` (zeros give a plain softmax); other agents' actions in
    ``joint`` are constants. Gradient reaches the actor only through the
    joiner slot of each AMC input. Returns ``(loss, actor_grads)``.
    """
    b, n, a = joint.shape
    obs_dim = states.shape[1] // n
    obs = states.reshape(b, n, obs_dim)[:, i]
    logits, acache = mlp_forward(actor, obs)
    action = gumbel_softmax_sample(logits, temperature, None, noise=noise)
    joint = joint.copy()
    joint[:, i] = action
    ev = approx_shapley_q(i, states, joint, len(orders), amc, orders=orders)
    probs = softmax(logits)
    loss = -ev.q.mean() - entropy_coef * entropy(probs).mean()

    rows = len(orders) * b
    dx = _input_grad(amc, ev.cache, np.full(rows, -1.0 / rows))
    d_action = np.zeros((b, a))
    for m, cols in enumerate(_joiner_columns(orders, states.shape[1], a)):
        d_action += dx[m * b : (m + 1) * b, cols]
    d_logits = gumbel_softmax_backward(action, d_action, temperature)
    d_logits -= entropy_coef / b * entropy_logit_grad(probs)
    grads, _ = mlp_backward(actor, acache, d_logits)
    return loss, grads


def sqddpg_targets(rewards, dones, target_q_sum, gamma: float) -> np.ndarray:
    """y = r + gamma * sum_i Q_i(s', a'); the bootstrap is dropped on terminal steps."""
    return rewards + gamma * (1.0 - dones) * target_q_sum


def sqddpg_critic_loss(amcs, states, actions, targets, orders_per_agent):
    """0.5 * mean (y - sum_i Q_i(s, u))^2 and its gradient for every agent's AMC."""
    evals = [
        approx_shapley_q(i, states, actions, len(orders), amc, orders=orders)
        for i, (amc, orders) in enumerate(zip(amcs, orders_per_agent))
    ]
    residual = targets - sum(ev.q for ev in evals)
    loss = 0.5 * float(np.mean(residual**2))
    b = len(states)
    grads = []
    for amc, ev in zip(amcs, evals):
        m = len(ev.orders)
        up = np.tile(-residual / (b * m), m)
        grads.append(_param_grad(amc, ev.cache, up))
    return loss, grads


class SQDDPG(Learner):
    name = "sqddpg"

    def __init__(self, cfg, n_agents, obs_dim, n_actions, rng):
        super().__init__(cfg, n_agents, obs_dim, n_actions, rng)
        in_dim = self.state_dim + n_agents * n_actions
        self.critics = [Net.create(in_dim, cfg.hidden_units, 1, cfg.critic_lr, rng) for _ in range(n_agents)]

    def relaxed_joint(self, states, noise) -> np.ndarray:
        return np.stack(
            [gumbel_softmax_sample(self.logits(states, i), self.cfg.temperature, None, noise=noise[:, i])
             for i in range(self.n)],
            axis=1,
        )

    def actor_update(self, i, batch, joint, orders, noise) -> float:
        """One Adam step on actor ``i``; returns the gradient norm."""
        if len(batch) == 0:
            raise ValueError("empty minibatch")
        _, grads = sqddpg_actor_loss(
            self.actors[i].params, self.critics[i].params, i, batch.states, joint, orders,
            noise, self.cfg.entropy_coef, self.cfg.temperature,
        )
        self.actors[i].step(grads)
        return grad_norm(grads)

    def critic_update(self, batch, orders) -> float:
        """One Adam step on every AMC critic against the shared TD target; returns the pre-step loss."""
        if len(batch) == 0:
            raise ValueError("empty minibatch")
        next_joint = self.greedy_joint(batch.next_states, target=True)
        target_sum = sum(
            approx_shapley_q(i, batch.next_states, next_joint, len(orders[i]), self.critics[i].target,
                             orders=orders[i]).q
            for i in range(self.n)
        )
        y = sqddpg_targets(batch.rewards, batch.dones, target_sum, self.cfg.gamma)
        loss, grads = sqddpg_critic_loss([c.params for c in self.critics], batch.states, batch.actions, y, orders)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite SQDDPG critic loss")
        for net, g in zip(self.critics, grads):
            net.step(g)
        return loss

    def sample_orders(self, rng) -> list:
        return [sample_ordered_coalitions(rng, i, self.n, self.cfg.sample_size) for i in range(self.n)]

    def update(self, batch, rng):
        noise = gumbel_noise((len(batch), self.n, self.n_actions), rng)
        joint = self.relaxed_joint(batch.states, noise)
        orders = self.sample_orders(rng)
        norms = [self.actor_update(i, batch, joint, orders[i], noise[:, i]) for i in range(self.n)]
        loss = self.critic_update(batch, orders)
        return {"critic_loss": loss, "actor_grad_norm": float(np.mean(norms))}

    def credits(self, states, actions, rng, samples: int | None = None):
        m = samples or self.cfg.sample_size
        states = np.atleast_2d(states)
        return np.stack(
            [approx_shapley_q(i, states, actions, m, self.critics[i].params, rng).q for i in range(self.n)],
            axis=1,
        )
