from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqddpg.envs import env_spec, make_env, read_trajectory, write_trajectory
from sqddpg.envs.particle import AGENT_RADIUS, PREY_RADIUS, STAY
from sqddpg.envs.traffic import BRAKE, GAS, TRAFFIC_CONFIGS, TrafficJunction, entry_points, enumerate_routes

action_seqs = st.lists(st.lists(st.integers(0, 4), min_size=3, max_size=3), min_size=1, max_size=30)


def quiet_traffic(difficulty="easy"):
    env = TrafficJunction(difficulty)
    env.cfg = replace(env.cfg, p_arrive=0.0)
    env.reset(np.random.default_rng(0))
    return env


class TestCoopNav:
    def test_agents_on_targets(self):
        env = make_env("coopnav")
        lm = np.array([[-0.5, 0.0], [0.0, 0.5], [0.5, 0.0]])
        step = env.set_state(lm, lm)
        assert step.reward == 0.0 and step.info["collisions"] == 0

    def test_all_coincident(self):
        env = make_env("coopnav")
        step = env.set_state(np.zeros((3, 2)), np.zeros((3, 2)))
        assert step.reward == -3.0

    def test_reward_recomputed(self):
        env = make_env("coopnav")
        rng = np.random.default_rng(4)
        env.reset(rng)
        for _ in range(10):
            step = env.step(rng.integers(0, 5, size=3))
            pos, lm = env.pos, env.landmarks
            cover = sum(min(np.hypot(*(l - p)) for p in pos) for l in lm)
            hits = sum(np.hypot(*(pos[i] - pos[j])) < 2 * AGENT_RADIUS for i in range(3) for j in range(i + 1, 3))
            assert step.reward == pytest.approx(-cover - hits, abs=1e-12)

    def test_observation_layout(self):
        env = make_env("coopnav")
        step = env.set_state([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]], [[1, 1], [0, 0], [-1, -1]], vel=np.full((3, 2), 0.5))
        o = step.observations[1]
        np.testing.assert_allclose(o[:4], [0.3, 0.4, 0.5, 0.5])
        np.testing.assert_allclose(o[4:10], [0.7, 0.6, -0.3, -0.4, -1.3, -1.4])
        np.testing.assert_allclose(o[10:], [-0.2, -0.2, 0.2, 0.2])
        np.testing.assert_array_equal(step.global_state, step.observations.ravel())

    @settings(deadline=None)
    @given(action_seqs, st.integers(0, 1000))
    def test_reward_nonpositive(self, actions, seed):
        env = make_env("coopnav")
        env.reset(np.random.default_rng(seed))
        for a in actions:
            assert env.step(np.array(a)).reward <= 0

    def test_bad_actions(self):
        env = make_env("coopnav")
        env.reset(np.random.default_rng(0))
        with pytest.raises(ValueError):
            env.step(np.array([0, 1]))
        with pytest.raises(ValueError):
            env.step(np.array([0, 1, 5]))

    def test_speed_decays(self):
        env = make_env("coopnav")
        env.set_state(np.zeros((3, 2)) + [[0, 0], [0.5, 0], [0, 0.5]], np.zeros((3, 2)), vel=np.full((3, 2), 0.7))
        for _ in range(60):
            env.step(np.full(3, STAY))
        assert np.linalg.norm(env.vel, axis=1).max() < 1e-6

    def test_speed_bounded(self):
        env = make_env("coopnav")
        env.reset(np.random.default_rng(0))
        for _ in range(100):
            env.step(np.zeros(3, dtype=int))
            assert np.linalg.norm(env.vel, axis=1).max() <= 1.0 + 1e-12


class TestPrey:
    def test_capture(self):
        env = make_env("prey")
        step = env.set_state([[0, 0], [0.5, 0.5], [-0.5, 0.5]], [0.0, 0.0])
        assert step.reward == 10.0 and step.done and step.info["captured"]

    def test_capture_threshold(self):
        env = make_env("prey")
        gap = AGENT_RADIUS + PREY_RADIUS
        assert not env.set_state([[gap + 1e-6, 0], [0.9, 0.9], [-0.9, 0.9]], [0.0, 0.0]).done
        assert env.set_state([[gap - 1e-6, 0], [0.9, 0.9], [-0.9, 0.9]], [0.0, 0.0]).done

    def test_distance_two(self):
        env = make_env("prey")
        step = env.set_state([[1.0, 0.0], [1.0, 1.0], [1.0, -1.0]], [-1.0, 0.0])
        assert step.reward == pytest.approx(-2.0) and not step.done

    def test_equidistant(self):
        env = make_env("prey")
        a = env.set_state([[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5]], [0.0, 0.0]).reward
        b = env.set_state([[-0.5, 0.0], [0.0, 0.5], [0.5, 0.0]], [0.0, 0.0]).reward
        assert a == b == pytest.approx(-0.5)

    def test_observation_includes_prey_velocity(self):
        env = make_env("prey")
        step = env.set_state([[0.2, 0], [0.5, 0.5], [-0.5, 0.5]], [0.6, 0.0], prey_vel=[0.1, -0.2])
        o = step.observations[0]
        np.testing.assert_allclose(o[4:6], [0.4, 0.0])
        np.testing.assert_allclose(o[-2:], [0.1, -0.2])

    @settings(deadline=None)
    @given(action_seqs, st.integers(0, 1000))
    def test_reward_bounded(self, actions, seed):
        env = make_env("prey")
        env.reset(np.random.default_rng(seed))
        for a in actions:
            step = env.step(np.array(a))
            assert step.reward <= 10
            assert np.all(np.abs(env.pos) <= 1.0)
            if step.done:
                break


class TestTraffic:
    @pytest.mark.parametrize("difficulty,entries,routes", [("easy", 2, 1), ("medium", 4, 3), ("hard", 8, 7)])
    def test_layouts(self, difficulty, entries, routes):
        cfg = TRAFFIC_CONFIGS[difficulty]
        pts = entry_points(cfg)
        assert len(pts) == entries
        assert all(len(enumerate_routes(cfg, cell, d)) == routes for cell, d in pts)

    def test_easy_config(self):
        cfg = TRAFFIC_CONFIGS["easy"]
        assert (cfg.n_max, cfg.p_arrive, cfg.dim) == (5, 0.3, 7)

    def test_routes_are_connected(self):
        cfg = TRAFFIC_CONFIGS["hard"]
        for cell, d in entry_points(cfg):
            for route in enumerate_routes(cfg, cell, d):
                steps = {(b[0] - a[0], b[1] - a[1]) for a, b in zip(route, route[1:])}
                assert all(abs(dr) + abs(dc) == 1 for dr, dc in steps)
                assert len(set(route)) == len(route)

    def test_time_penalty(self):
        env = quiet_traffic()
        slot = env.add_car(0)
        actions = np.full(env.n_agents, BRAKE)
        for _ in range(9):
            step = env.step(actions)
        assert env.slots[slot].alive == 10
        assert step.reward == pytest.approx(-0.1)

    def test_collision(self):
        env = quiet_traffic()
        # the two easy routes cross at (3, 3); each entry is 3 cells away
        a, b = env.add_car(0), env.add_car(1)
        gas = np.full(env.n_agents, GAS)
        for _ in range(3):
            step = env.step(gas)
        assert env.slots[a].cell == env.slots[b].cell == (3, 3)
        assert step.info["collisions"] == 1
        assert step.reward == pytest.approx(-10 - 0.01 * 8)
        assert not step.info["success"]

    def test_always_brake_succeeds(self):
        env = TrafficJunction("easy")
        step = env.reset(np.random.default_rng(0))
        for _ in range(20):
            step = env.step(np.full(env.n_agents, BRAKE))
        assert step.info["success"] and step.info["active"] <= 2

    def test_car_leaves_at_route_end(self):
        env = quiet_traffic()
        slot = env.add_car(0)
        n = len(env.slots[slot].route)
        for _ in range(n):
            step = env.step(np.full(env.n_agents, GAS))
        assert env.slots[slot] is None and step.info["completed"] == 1

    def test_inactive_slots_zero(self):
        env = quiet_traffic()
        env.add_car(1, slot=2)
        obs = env.observations()
        assert not obs[[0, 1, 3, 4]].any() and obs[2, 0] == 1.0

    @settings(deadline=None, max_examples=30)
    @given(st.sampled_from(["easy", "medium", "hard"]), st.integers(0, 1000))
    def test_invariants(self, difficulty, seed):
        env = TrafficJunction(difficulty)
        rng = np.random.default_rng(seed)
        env.reset(rng)
        collided = False
        for _ in range(40):
            step = env.step(rng.integers(0, 2, size=env.n_agents))
            collided |= step.info["collisions"] > 0
            assert step.reward <= 0
            assert step.info["active"] <= env.cfg.n_max
            assert step.info["success"] == (not collided)
            for car in env.slots:
                if car is not None:
                    assert 0 <= car.pos < len(car.route)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            TrafficJunction("extreme")
        env = quiet_traffic()
        with pytest.raises(ValueError):
            env.step(np.zeros(3, dtype=int))
        with pytest.raises(ValueError):
            env.step(np.full(5, 2))


@pytest.mark.parametrize("name,difficulty,expected", [
    ("coopnav", None, (3, 14, 5, 200)),
    ("prey", None, (3, 12, 5, 200)),
    ("traffic", "easy", (5, 17, 2, 50)),
    ("traffic", "medium", (10, 17, 2, 50)),
    ("traffic", "hard", (20, 17, 2, 100)),
])
def test_env_spec(name, difficulty, expected):
    assert tuple(env_spec(name, difficulty)) == expected
    env = make_env(name, difficulty)
    step = env.reset(np.random.default_rng(0))
    assert step.observations.shape == (expected[0], expected[1])


def test_unknown_env():
    with pytest.raises(ValueError):
        env_spec("soccer")
    with pytest.raises(ValueError):
        make_env("soccer")


@pytest.mark.parametrize("name,difficulty", [("coopnav", None), ("prey", None), ("traffic", "medium")])
def test_determinism(name, difficulty):
    def run():
        env = make_env(name, difficulty)
        rng = np.random.default_rng(11)
        states = [env.reset(rng).global_state]
        act = np.random.default_rng(3)
        spec = env_spec(name, difficulty)
        for _ in range(50):
            step = env.step(act.integers(0, spec.n_actions, size=spec.n_agents))
            states.append(step.global_state)
            if step.done:
                break
        return np.array(states)

    assert np.array_equal(run(), run())


def test_trajectory_roundtrip(tmp_path):
    records = [(0, 0, 1, 3, -0.25, False), (0, 1, 2, 4, 10.0, True)]
    write_trajectory(records, tmp_path / "t.txt")
    assert read_trajectory(tmp_path / "t.txt") == records
    assert (tmp_path / "t.txt").read_text().splitlines()[0] == "episode step agent action reward done"
