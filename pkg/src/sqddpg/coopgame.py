"""Exact cooperative-game machinery used as ground truth for the learned critics.

Coalitions are bitmasks: bit ``j`` set means agent ``j`` is a member. A game
with ``n`` agents stores one value per mask in a length ``2**n`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

MAX_EXACT_AGENTS = 12
MAX_STRUCTURE_AGENTS = 6
TOL = 1e-9


class CapacityError(ValueError):
    """Raised when an exact enumeration would exceed its agent-count limit."""


def _check_capacity(n: int, limit: int, what: str) -> None:
    if n > limit:
        raise CapacityError(f"{what} supports at most {limit} agents, got n={n}")


@dataclass(frozen=True)
class CharacteristicGame:
    n: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.n < 1:
            raise ValueError("a game needs at least one agent")
        if values.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} coalition values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("coalition values must be finite")
        if values[0] != 0.0:
            raise ValueError("v(empty coalition) must be 0")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, n: int, fn: Callable[[frozenset], float]) -> "CharacteristicGame":
        """Tabulate ``fn`` (called with a frozenset of agent indices) over every coalition."""
        values = np.array([fn(mask_to_set(m)) for m in range(1 << n)], dtype=float)
        values[0] = 0.0
        return cls(n, values)

    @property
    def grand(self) -> int:
        return (1 << self.n) - 1

    def v(self, coalition) -> float:
        return float(self.values[_as_mask(coalition, self.n)])


def mask_to_set(mask: int) -> frozenset:
    return frozenset(j for j in range(mask.bit_length()) if mask >> j & 1)


def set_to_mask(members) -> int:
    mask = 0
    for j in members:
        mask |= 1 << int(j)
    return mask


def _as_mask(coalition, n: int) -> int:
    mask = int(coalition) if isinstance(coalition, (int, np.integer)) else set_to_mask(coalition)
    if mask < 0 or mask >> n:
        raise ValueError(f"coalition {coalition!r} is not a subset of {n} agents")
    return mask


def _popcounts(n: int) -> np.ndarray:
    masks = np.arange(1 << n)
    counts = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        counts += (masks >> j) & 1
    return counts


# ---------------------------------------------------------------------------
# Shapley values


def marginal_contribution(game: CharacteristicGame, coalition, i: int) -> float:
    if not 0 <= i < game.n:
        raise IndexError(f"agent {i} out of range for n={game.n}")
    mask = _as_mask(coalition, game.n)
    if mask >> i & 1:
        raise ValueError(f"agent {i} is already in the coalition")
    return float(game.values[mask | (1 << i)] - game.values[mask])


def coalition_weight(n: int, c: int) -> float:
    """Probability that a given coalition of size ``c`` precedes an agent in a random join order."""
    if n < 1 or not 0 <= c < n:
        raise ValueError(f"need 0 <= c < n, got c={c}, n={n}")
    return math.factorial(c) * math.factorial(n - c - 1) / math.factorial(n)


def exact_shapley(game: CharacteristicGame) -> np.ndarray:
    n = game.n
    _check_capacity(n, MAX_EXACT_AGENTS, "exact_shapley")
    masks = np.arange(1 << n)
    sizes = _popcounts(n)
    weights = np.array([coalition_weight(n, c) if c < n else 0.0 for c in range(n + 1)])
    phi = np.empty(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        deltas = game.values[without | bit] - game.values[without]
        phi[i] = np.dot(weights[sizes[without]], deltas)
    return phi


def sample_ordered_coalitions(rng: np.random.Generator, i: int, n: int, m: int) -> list[tuple[int, ...]]:
    """Draw ``m`` join orders uniformly and return the members that precede ``i`` in each."""
    if not 0 <= i < n:
        raise IndexError(f"agent {i} out of range for n={n}")
    perms = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
    pos = np.argmax(perms == i, axis=1)
    return [tuple(int(a) for a in row[:p]) for row, p in zip(perms, pos)]


def sample_order_slots(rng: np.random.Generator, i: int, n: int, m: int) -> np.ndarray:
    """Same draws as ``sample_ordered_coalitions`` as an (m, n) table: the preceding members,
    then ``i``, then -1 padding."""
    if not 0 <= i < n:
        raise IndexError(f"agent {i} out of range for n={n}")
    perms = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
    pos = np.argmax(perms == i, axis=1)
    return np.where(np.arange(n)[None, :] <= pos[:, None], perms, -1)


def sample_ordered_coalition(rng: np.random.Generator, i: int, n: int) -> tuple[int, ...]:
    return sample_ordered_coalitions(rng, i, n, 1)[0]


def _prefix_masks(rng: np.random.Generator, i: int, n: int, m: int) -> np.ndarray:
    perms = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
    # distinct bits, so a running sum is a running OR
    cum = np.cumsum(np.left_shift(1, perms), axis=1)
    pos = np.argmax(perms == i, axis=1)
    rows = np.arange(m)
    return np.where(pos > 0, cum[rows, np.maximum(pos - 1, 0)], 0)


def monte_carlo_contributions(game: CharacteristicGame, i: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Marginal contributions of ``i`` to ``m`` sampled preceding coalitions."""
    if m < 1:
        raise ValueError("sample count must be at least 1")
    if not 0 <= i < game.n:
        raise IndexError(f"agent {i} out of range for n={game.n}")
    masks = _prefix_masks(rng, i, game.n, m)
    return game.values[masks | (1 << i)] - game.values[masks]


def monte_carlo_shapley(game: CharacteristicGame, i: int, m: int, rng: np.random.Generator) -> float:
    return float(monte_carlo_contributions(game, i, m, rng).mean())


# ---------------------------------------------------------------------------
# Convexity, core, coalition structures


def _submasks(mask: int) -> Iterator[int]:
    """Nonempty submasks of ``mask`` in increasing order."""
    subs = []
    s = mask
    while s:
        subs.append(s)
        s = (s - 1) & mask
    return reversed(subs)


def is_convex(game: CharacteristicGame) -> tuple[bool, tuple[int, int] | None]:
    """Superadditivity over disjoint coalition pairs.

    Returns ``(True, None)`` or ``(False, (C, D))`` with the lowest violating
    masks (``C`` first, then ``D``).
    """
    n = game.n
    _check_capacity(n, MAX_EXACT_AGENTS, "is_convex")
    v = game.values
    full = game.grand
    for c in range(1, full + 1):
        rest = full & ~c
        if not rest:
            continue
        subs = np.fromiter(_submasks(rest), dtype=np.int64)
        bad = v[c | subs] < v[c] + v[subs] - TOL
        if bad.any():
            return False, (c, int(subs[np.argmax(bad)]))
    return True, None


def is_supermodular(game: CharacteristicGame) -> bool:
    """v(S∪T) + v(S∩T) >= v(S) + v(T); the hypothesis under which Shapley lies in the core."""
    n = game.n
    _check_capacity(n, MAX_EXACT_AGENTS, "is_supermodular")
    v = game.values
    masks = np.arange(1 << n)
    for s in range(1 << n):
        if np.any(v[s | masks] + v[s & masks] < v[s] + v[masks] - TOL):
            return False
    return True


def in_core(game: CharacteristicGame, x: Sequence[float]) -> tuple[bool, int | None]:
    """Core membership of payoff ``x``; the witness is the lowest violated coalition mask.

    An inefficient ``x`` is reported with the grand coalition as witness.
    """
    n = game.n
    _check_capacity(n, MAX_EXACT_AGENTS, "in_core")
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"payoff must have length {n}")
    masks = np.arange(1 << n)
    bits = (masks[:, None] >> np.arange(n)) & 1
    totals = bits @ x
    if abs(totals[-1] - game.values[-1]) > TOL:
        return False, game.grand
    bad = totals < game.values - TOL
    if bad.any():
        return False, int(np.argmax(bad))
    return True, None


def enumerate_coalition_structures(n: int) -> list[tuple[int, ...]]:
    """All set partitions of ``range(n)`` as tuples of block masks."""
    if n < 1:
        raise ValueError("need at least one agent")
    _check_capacity(n, MAX_STRUCTURE_AGENTS, "enumerate_coalition_structures")
    out: list[tuple[int, ...]] = []

    def place(j: int, blocks: list[int]) -> None:
        if j == n:
            out.append(tuple(blocks))
            return
        for k in range(len(blocks)):
            blocks[k] |= 1 << j
            place(j + 1, blocks)
            blocks[k] &= ~(1 << j)
        blocks.append(1 << j)
        place(j + 1, blocks)
        blocks.pop()

    place(0, [])
    return out


def social_value(game: CharacteristicGame, structure: Sequence[int]) -> float:
    return float(sum(game.values[b] for b in structure))


def grand_coalition_optimality_check(game: CharacteristicGame) -> bool:
    convex, witness = is_convex(game)
    if not convex:
        raise ValueError(f"game is not convex (witness {witness}); optimality check requires convexity")
    grand = game.values[-1]
    return all(grand >= social_value(game, cs) - TOL for cs in enumerate_coalition_structures(game.n))


# ---------------------------------------------------------------------------
# Generators and I/O


def random_game(n: int, rng: np.random.Generator) -> CharacteristicGame:
    values = rng.uniform(0.0, 1.0, size=1 << n)
    values[0] = 0.0
    return CharacteristicGame(n, values)


def random_convex_game(n: int, rng: np.random.Generator) -> CharacteristicGame:
    """v(C) = sum of nonnegative dividends over subsets of C; supermodular by construction."""
    dividends = rng.uniform(0.0, 1.0, size=1 << n)
    dividends[0] = 0.0
    values = dividends.copy()
    masks = np.arange(1 << n)
    for j in range(n):
        has = (masks >> j) & 1 == 1
        values[has] += values[masks[has] ^ (1 << j)]
    return CharacteristicGame(n, values)


def glove_game() -> CharacteristicGame:
    """Agents 0 and 1 own left gloves, agent 2 a right glove; a pair is worth 1."""
    return CharacteristicGame.from_function(3, lambda c: min(len(c & {0, 1}), len(c & {2})))


def write_game(game: CharacteristicGame, path) -> None:
    lines = [str(game.n)] + [f"{m} {float(game.values[m])!r}" for m in range(1 << game.n)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_game(path) -> CharacteristicGame:
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 1:
        raise ValueError("first line must hold the agent count")
    n = int(lines[0][0])
    values = np.full(1 << n, np.nan)
    for parts in lines[1:]:
        if len(parts) != 2:
            raise ValueError(f"malformed line: {' '.join(parts)!r}")
        mask = int(parts[0])
        if not 0 <= mask < 1 << n:
            raise ValueError(f"mask {mask} out of range for n={n}")
        values[mask] = float(parts[1])
    if np.isnan(values).any():
        missing = int(np.argmax(np.isnan(values)))
        raise ValueError(f"no value for coalition mask {missing}")
    return CharacteristicGame(n, values)
