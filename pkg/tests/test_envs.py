"""Tests for the toy control tasks: dynamics, optima, truncation semantics."""

import numpy as np
import pytest

from evoportfolio.envs import DelayedChain, NoisyPendulum, PointNav2D, make_env
from evoportfolio.errors import ConfigError, StateError


def run_policy(env, rng, policy, max_iters=10_000):
    """Roll one episode; returns (return, rewards, steps)."""
    s = env.reset(rng)
    total, rewards, steps = 0.0, [], 0
    for _ in range(max_iters):
        s, r, done, truncated = env.step(policy(s))
        total += r
        rewards.append(r)
        steps += 1
        if done:
            return total, rewards, steps
    raise AssertionError("episode never ended")


def chain_value_iteration(env, n_actions=21):
    """Dynamic program on a discretized corridor, written independently.

    Action grid multiples of 0.1 make dt*a an exact multiple of the cell
    width 0.0025, so transitions land exactly on grid nodes.
    """
    cell = 0.0025
    n_cells = int(round(env.LENGTH / cell)) + 1
    actions = np.linspace(-1.0, 1.0, n_actions)
    shifts = np.round(env.DT * actions / cell).astype(int)
    V = np.zeros((env.spec.max_steps + 1, n_cells))
    for t in range(env.spec.max_steps - 1, -1, -1):
        for i in range(n_cells):
            best = -np.inf
            for a, sh in zip(actions, shifts):
                j = min(max(i + sh, 0), n_cells - 1)
                r = -env.MOVE_COST * abs(a)
                if j == n_cells - 1:
                    val = r + env.BONUS
                else:
                    val = r + V[t + 1][j]
                best = max(best, val)
            V[t][i] = best
    return V[0][0]


# ---------------------------------------------------------------- PointNav2D


def test_pointnav_reset_seeded_deterministic():
    env = PointNav2D()
    s1 = env.reset(np.random.default_rng(5))
    s2 = PointNav2D().reset(np.random.default_rng(5))
    assert np.array_equal(s1, s2)
    assert s1.shape == (env.spec.state_dim,)


def test_pointnav_reset_distribution():
    env = PointNav2D()
    rng = np.random.default_rng(0)
    starts = np.array([env.reset(rng) for _ in range(10_000)])
    radii = np.hypot(starts[:, 0], starts[:, 1])
    assert np.all(radii >= env.R_MIN - 1e-12)
    assert np.all(radii <= env.R_MAX + 1e-12)
    # radius U[0.7,1.3]: mean 1.0, std 0.6/sqrt(12)
    se_r = (0.6 / np.sqrt(12)) / np.sqrt(10_000)
    assert abs(radii.mean() - 1.0) < 4 * se_r
    # uniform angle: mean position 0, per-axis std sqrt(E[r^2]/2)
    se_xy = np.sqrt((1.0 + 0.6**2 / 12) / 2) / np.sqrt(10_000)
    assert np.abs(starts.mean(axis=0)).max() < 4 * se_xy


def test_pointnav_zero_action_reward_is_banded_distance():
    env = PointNav2D()
    s = env.reset(np.random.default_rng(3))
    s2, r, done, truncated = env.step([0.0, 0.0])
    assert np.array_equal(s, s2)
    assert r == -(np.hypot(s[0], s[1]) - env.BAND)
    assert not done


def test_pointnav_reward_is_zero_inside_goal_band():
    env = PointNav2D()
    env.reset(np.random.default_rng(3))
    env.pos = np.array([0.03, -0.02])
    _, r, _, _ = env.step([0.1, 0.1])
    assert r == 0.0


def test_pointnav_position_clipped_to_box():
    env = PointNav2D()
    env.reset(np.random.default_rng(3))
    env.pos = np.array([env.BOX - 0.01, 0.0])
    s, _, _, _ = env.step([1.0, 0.0])
    assert s[0] == env.BOX


def test_pointnav_truncates_at_step_limit():
    env = PointNav2D(max_steps=4)
    env.reset(np.random.default_rng(0))
    for i in range(4):
        _, _, done, truncated = env.step([0.1, 0.1])
    assert done and truncated
    with pytest.raises(StateError):
        env.step([0.0, 0.0])


def test_pointnav_deterministic_trajectory():
    actions = np.random.default_rng(8).uniform(-1, 1, (20, 2))
    outs = []
    for _ in range(2):
        env = PointNav2D()
        env.reset(np.random.default_rng(11))
        outs.append([env.step(a) for a in actions])
    for (s1, r1, d1, t1), (s2, r2, d2, t2) in zip(*outs):
        assert np.array_equal(s1, s2) and r1 == r2 and d1 == d2 and t1 == t2


def test_pointnav_actions_clipped():
    env = PointNav2D()
    env.reset(np.random.default_rng(1))
    p0 = env.pos.copy()
    s, _, _, _ = env.step([100.0, -100.0])
    assert np.allclose(s - p0, [env.DT, -env.DT])


def test_pointnav_closed_form_matches_simulated_greedy():
    # independently coded per-axis full-speed descent equals the formula
    env = PointNav2D()
    rng = np.random.default_rng(17)
    for _ in range(20):
        start = env.reset(rng)

        def greedy(s):
            return np.clip(-s / env.DT, -1.0, 1.0)

        total = 0.0
        s = start
        done = False
        while not done:
            s, r, done, _ = env.step(greedy(s))
            total += r
        assert abs(total - env.optimal_return(start)) < 1e-9


def test_pointnav_no_random_policy_beats_optimum():
    env = PointNav2D()
    rng = np.random.default_rng(23)
    for _ in range(10):
        start = env.reset(rng)
        best = env.optimal_return(start)
        total = 0.0
        done = False
        while not done:
            _, r, done, _ = env.step(rng.uniform(-1, 1, 2))
            total += r
        assert total <= best + 1e-9


# ---------------------------------------------------------------- DelayedChain


def test_chain_starts_at_origin():
    env = DelayedChain()
    s = env.reset(np.random.default_rng(0))
    assert np.array_equal(s, [0.0])


def test_chain_full_speed_hand_trace():
    # 40 full-speed steps: 39 pay the movement cost, the 40th adds +10
    env = DelayedChain()
    total, rewards, steps = run_policy(env, np.random.default_rng(0), lambda s: [1.0])
    assert steps == 40
    assert np.allclose(rewards[:-1], -env.MOVE_COST)
    assert abs(rewards[-1] - (env.BONUS - env.MOVE_COST)) < 1e-12
    assert abs(total - 6.0) < 1e-9


def test_chain_terminal_is_not_truncation():
    env = DelayedChain()
    env.reset(np.random.default_rng(0))
    done = truncated = None
    for _ in range(40):
        _, _, done, truncated = env.step([1.0])
    assert done and not truncated


def test_chain_stall_truncates_with_zero_return():
    env = DelayedChain()
    total, rewards, steps = run_policy(env, np.random.default_rng(0), lambda s: [0.0])
    assert steps == env.spec.max_steps
    assert total == 0.0
    assert rewards[-1] == 0.0


def test_chain_left_wall_clips():
    env = DelayedChain()
    env.reset(np.random.default_rng(0))
    s, r, _, _ = env.step([-1.0])
    assert s[0] == 0.0 and r == -env.MOVE_COST


def test_chain_optimum_matches_value_iteration():
    env = DelayedChain()
    vi = chain_value_iteration(env)
    assert abs(vi - env.optimal_return(0.0)) < 1e-9
    assert abs(vi - 6.0) < 1e-9


def test_chain_optimum_unreachable_is_standstill():
    env = DelayedChain(max_steps=10)  # needs 40 steps, cannot reach
    assert env.optimal_return(0.0) == 0.0


# ---------------------------------------------------------------- NoisyPendulum


def test_pendulum_observation_shape_and_noise():
    env = NoisyPendulum()
    rng = np.random.default_rng(2)
    obs = env.reset(rng)
    assert obs.shape == (3,)
    # noiseless part of two observations of the same state differs by noise only
    diffs = []
    for _ in range(2000):
        env.theta, env.theta_dot = 0.3, 0.1
        clean = np.array([np.cos(0.3), np.sin(0.3), 0.1])
        diffs.append(env._observe() - clean)
    std = np.array(diffs).std()
    assert abs(std - env.OBS_SIGMA) < 0.01


def test_pendulum_reward_bounded_and_negative():
    env = NoisyPendulum()
    rng = np.random.default_rng(4)
    env.reset(rng)
    bound = np.pi**2 + 0.1 * env.MAX_SPEED**2 + 0.001 * env.MAX_TORQUE**2
    done = False
    while not done:
        _, r, done, _ = env.step(rng.uniform(-2, 2, 1))
        assert -bound <= r <= 0.0


def test_pendulum_speed_clipped():
    env = NoisyPendulum()
    env.reset(np.random.default_rng(0))
    env.theta, env.theta_dot = np.pi / 2, 7.9
    for _ in range(10):
        env.step([2.0])
    assert abs(env.theta_dot) <= env.MAX_SPEED


def test_pendulum_truncates():
    env = NoisyPendulum(max_steps=3)
    env.reset(np.random.default_rng(0))
    for _ in range(3):
        _, _, done, truncated = env.step([0.0])
    assert done and truncated


# ---------------------------------------------------------------- registry


def test_make_env_registry():
    assert isinstance(make_env("pointnav2d"), PointNav2D)
    assert isinstance(make_env("DelayedChain"), DelayedChain)
    assert make_env("noisypendulum", max_steps=7).spec.max_steps == 7
    with pytest.raises(ConfigError):
        make_env("hopper")


def test_action_scaling_unit_to_native():
    spec = NoisyPendulum().spec
    assert np.allclose(spec.scale_action([1.0]), [2.0])
    assert np.allclose(spec.scale_action([-1.0]), [-2.0])
    assert np.allclose(spec.scale_action([0.0]), [0.0])
    # unit-bounds envs scale to identity exactly
    spec2 = PointNav2D().spec
    a = np.array([0.37, -0.92])
    assert np.array_equal(spec2.scale_action(a), a)
