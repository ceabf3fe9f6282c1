"""Brute-force property checks on enumerable games: Shapley axioms, core membership,
grand-coalition optimality and Monte-Carlo consistency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coopgame as cg


@dataclass
class CheckResult:
    name: str
    passed: int
    total: int

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def line(self) -> str:
        return f"{self.name}: {self.passed}/{self.total}"


def efficiency_holds(game: cg.CharacteristicGame, phi=None, tol: float = cg.TOL) -> bool:
    phi = cg.exact_shapley(game) if phi is None else phi
    total = game.values[game.grand]
    return abs(phi.sum() - total) <= tol * max(1.0, abs(total))


def symmetric_pairs(game: cg.CharacteristicGame, tol: float = cg.TOL) -> list[tuple[int, int]]:
    """Agent pairs (i, j) with v(C + i) == v(C + j) for every C excluding both."""
    n, v = game.n, game.values
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            bi, bj = 1 << i, 1 << j
            masks = [c for c in range(1 << n) if not c & (bi | bj)]
            if all(abs(v[c | bi] - v[c | bj]) <= tol for c in masks):
                out.append((i, j))
    return out


def dummy_agents(game: cg.CharacteristicGame, tol: float = cg.TOL) -> list[int]:
    """Agents whose marginal contribution is zero to every coalition."""
    n, v = game.n, game.values
    return [i for i in range(n) if all(abs(v[c | 1 << i] - v[c]) <= tol for c in range(1 << n) if not c >> i & 1)]


def symmetric_dummy_game(n: int, rng: np.random.Generator) -> cg.CharacteristicGame:
    """Random game in which agents 0 and 1 are interchangeable and agent n - 1 is a dummy.

    A random game w on n - 1 agents is lifted: the dummy is dropped and the
    value depends on {0, 1} only through how many of the two are present.
    """
    if n < 3:
        raise ValueError("need at least 3 agents for a symmetric pair plus a dummy")
    base = cg.random_game(n - 1, rng)
    w = base.values
    values = np.empty(1 << n)
    for c in range(1 << n):
        core = c & ((1 << (n - 1)) - 1)
        k = (core & 1) + (core >> 1 & 1)
        rest = core & ~3
        # k members of {0, 1}: use {} / {0} / {0, 1}
        values[c] = w[rest | (0, 1, 3)[k]]
    values[0] = 0.0
    return cg.CharacteristicGame(n, values)


def axioms_hold(game: cg.CharacteristicGame, tol: float = cg.TOL) -> tuple[bool, bool, bool]:
    """(efficiency, symmetry, dummy) for the exact Shapley value of ``game``."""
    phi = cg.exact_shapley(game)
    scale = max(1.0, float(np.abs(game.values).max()))
    eff = efficiency_holds(game, phi, tol)
    sym = all(abs(phi[i] - phi[j]) <= tol * scale for i, j in symmetric_pairs(game))
    dum = all(abs(phi[i]) <= tol * scale for i in dummy_agents(game))
    return eff, sym, dum


def check_axioms(games: int, seed: int, max_n: int = 8) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    counts = np.zeros(3, dtype=int)
    for _ in range(games):
        n = int(rng.integers(3, max_n + 1))
        counts += axioms_hold(symmetric_dummy_game(n, rng))
    return [CheckResult(name, int(c), games) for name, c in zip(("efficiency", "symmetry", "dummy"), counts)]


def check_core(games: int, seed: int, max_n: int = 8) -> CheckResult:
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(games):
        game = cg.random_convex_game(int(rng.integers(2, max_n + 1)), rng)
        ok += cg.in_core(game, cg.exact_shapley(game))[0]
    return CheckResult("core-membership", ok, games)


def check_grand_coalition(games: int, seed: int, max_n: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(games):
        game = cg.random_convex_game(int(rng.integers(2, max_n + 1)), rng)
        ok += cg.grand_coalition_optimality_check(game)
    return CheckResult("grand-coalition-optimal", ok, games)


def mc_within(game: cg.CharacteristicGame, m: int, rng: np.random.Generator, k: float = 3.0) -> bool:
    """Every agent's Monte-Carlo estimate lies within ``k`` standard errors of the exact value."""
    phi = cg.exact_shapley(game)
    for i in range(game.n):
        d = cg.monte_carlo_contributions(game, i, m, rng)
        se = d.std(ddof=1) / np.sqrt(m) if m > 1 else 0.0
        if abs(d.mean() - phi[i]) > k * se + 1e-12:
            return False
    return True


def check_monte_carlo(games: int, seed: int, m: int = 10_000, max_n: int = 6) -> CheckResult:
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(games):
        ok += mc_within(cg.random_game(int(rng.integers(2, max_n + 1)), rng), m, rng, k=4.0)
    return CheckResult("monte-carlo-4se", ok, games)


def run_suite(games: int = 200, seed: int = 0) -> list[CheckResult]:
    return [
        *check_axioms(games, seed),
        check_core(games, seed + 1),
        check_grand_coalition(max(1, games // 2), seed + 2),
        check_monte_carlo(max(1, games // 10), seed + 3),
    ]
