import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_optimal_values, mdp_tables, normalized_policy
from taskexplore.selector import (
    SelectorParams,
    bellman_residual,
    build_mdp,
    greedy_select,
    select_actions,
    state_reward,
    task_reward,
    value_iteration,
)

ACTS = ("UP", "DOWN", "LEFT", "RIGHT")


def test_task_reward_examples():
    assert np.all(task_reward(np.ones(4), np.ones(4)) == 1)
    assert np.all(task_reward(np.ones(4), np.zeros(4)) == 0)
    assert task_reward([0.5, 0.2], [0.4, 1.0]) == pytest.approx([0.2, 0.2])
    with pytest.raises(ValueError, match="mismatch"):
        task_reward(np.ones(3), np.ones(4))


def test_state_reward_examples():
    R = np.full(25, 0.1)
    assert state_reward(np.arange(9), R) == pytest.approx(0.9)
    mdp = build_mdp((0, 0), (5, 5), R, SelectorParams(ell=1, window=(3, 3)))
    assert mdp.rewards[mdp.current] == pytest.approx(0.4)  # clipped corner footprint
    assert state_reward(np.arange(9), np.zeros(25)) == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        SelectorParams(ell=0)
    with pytest.raises(ValueError):
        SelectorParams(gamma=1.0)


def test_chain_values():
    R = np.array([0.0, 0.0, 1.0])
    mdp = build_mdp((0, 1), (1, 3), R, SelectorParams(ell=1, window=(1, 1)))
    V, policy = value_iteration(mdp, 0.9)
    assert V == pytest.approx([8.1, 9.0, 10.0], abs=1e-8)
    assert policy[0] == "RIGHT"
    assert bellman_residual(mdp, V, 0.9) <= 1e-9


def test_zero_rewards_and_single_state():
    mdp = build_mdp((2, 2), (5, 5), np.zeros(25), SelectorParams())
    V, policy = value_iteration(mdp, 0.9)
    assert np.all(V == 0) and set(policy) == {"UP"}
    mdp = build_mdp((0, 0), (1, 1), np.array([0.3]), SelectorParams(window=(1, 1)))
    V, policy = value_iteration(mdp, 0.9)
    assert V[0] == pytest.approx(0.3 / 0.1, abs=1e-8)


def test_neighbourhood_moves_self_loop():
    mdp = build_mdp((0, 0), (4, 4), np.zeros(16), SelectorParams(ell=1))
    assert mdp.states == [(0, 0), (0, 1), (1, 0), (1, 1)]
    i = mdp.states.index((1, 1))
    assert mdp.states[mdp.next_state[i, ACTS.index("DOWN")]] == (1, 1)  # leaves the square
    assert mdp.states[mdp.next_state[0, ACTS.index("UP")]] == (0, 0)    # leaves the map


def test_one_sensor_moves_toward_reward():
    R = np.zeros(25)
    R[2 * 5 + 3] = 1.0
    params = SelectorParams(window=(1, 1))
    assert select_actions([(2, 2)], R, (5, 5), params) == ["RIGHT"]
    states, nxt, Rs = mdp_tables((2, 2), (5, 5), R, 1, 1)
    V = enumerate_optimal_values(nxt, Rs, 0.9)
    assert ACTS[normalized_policy(nxt, Rs, V, 0.9)[states.index((2, 2))]] == "RIGHT"


def test_overlap_removal_separates_sensors():
    R = np.ones(100)
    params = SelectorParams(window=(3, 3))
    with_zeroing = select_actions([(0, 0), (0, 0)], R, (10, 10), params)
    without = select_actions([(0, 0), (0, 0)], R, (10, 10), params, remove_overlap=False)
    assert without[0] == without[1] == "DOWN"
    assert with_zeroing == ["DOWN", "UP"]


def test_zero_reward_defaults():
    assert select_actions([(3, 3), (6, 6)], np.zeros(100), (10, 10), SelectorParams()) == ["UP", "UP"]


def test_greedy_examples():
    R = np.zeros(81)
    R[4 * 9 + 2] = 1.0  # inside the footprint after moving left only
    params = SelectorParams(window=(3, 3))
    assert greedy_select((4, 4), R, (9, 9), params) == "LEFT"
    assert greedy_select((4, 4), np.ones(81), (9, 9), params) == "UP"


@given(st.integers(0, 2**32 - 1))
def test_greedy_matches_short_horizon_value_iteration(seed):
    rng = np.random.default_rng(seed)
    R = rng.random(25)
    pos = (int(rng.integers(5)), int(rng.integers(5)))
    params = SelectorParams(ell=1, gamma=1e-6, window=(3, 3))
    mdp = build_mdp(pos, (5, 5), R, params)
    _, policy = value_iteration(mdp, params.gamma)
    assert greedy_select(pos, R, (5, 5), params) == policy[mdp.current]


def _random_instance(rng):
    h, w = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    R = rng.random(h * w) * (rng.random(h * w) < 0.6)
    pos = (int(rng.integers(h)), int(rng.integers(w)))
    win = int(rng.choice([1, 3, 5]))
    gamma = float(rng.uniform(0.5, 0.95))
    return (h, w), R, pos, win, gamma


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_value_iteration_matches_policy_enumeration(seed):
    rng = np.random.default_rng(seed)
    shape, R, pos, win, gamma = _random_instance(rng)
    params = SelectorParams(ell=1, gamma=gamma, window=(win, win))
    mdp = build_mdp(pos, shape, R, params)
    V, policy = value_iteration(mdp, gamma)
    states, nxt, Rs = mdp_tables(pos, shape, R, 1, win)
    assert mdp.states == states and len(states) <= 9
    assert np.allclose(mdp.rewards, Rs, rtol=0, atol=1e-12)
    Vstar = enumerate_optimal_values(nxt, Rs, gamma)
    # a Bellman residual r bounds the value error by r / (1 - gamma)
    assert V == pytest.approx(Vstar, abs=2e-9 / (1 - gamma))
    assert [ACTS[a] for a in normalized_policy(nxt, Rs, Vstar, gamma)] == policy
    assert bellman_residual(mdp, V, gamma) <= 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_reward_scaling_keeps_choices(seed, c):
    rng = np.random.default_rng(seed)
    R = rng.random(64)
    positions = [(int(rng.integers(8)), int(rng.integers(8))) for _ in range(3)]
    params = SelectorParams(ell=int(rng.integers(1, 3)), window=(3, 3))
    assert select_actions(positions, c * R, (8, 8), params) == select_actions(
        positions, R, (8, 8), params)
    assert greedy_select(positions[0], c * R, (8, 8), params) == greedy_select(
        positions[0], R, (8, 8), params)


@given(st.integers(0, 2**32 - 1))
def test_select_actions_deterministic_and_order_robust(seed):
    rng = np.random.default_rng(seed)
    R = rng.random(49)
    positions = [(int(rng.integers(7)), int(rng.integers(7))) for _ in range(3)]
    params = SelectorParams(window=(3, 3))
    a = select_actions(positions, R, (7, 7), params)
    assert a == select_actions(positions, R, (7, 7), params)
    b = select_actions(positions[::-1], R, (7, 7), params)
    assert len(b) == 3 and all(u in ACTS for u in b)
    # the first processed sensor never sees zeroing
    assert b[0] == select_actions([positions[-1]], R, (7, 7), params)[0]
