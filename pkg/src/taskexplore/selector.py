"""Sensor motion: task-driven reward, per-sensor neighbourhood MDPs and the greedy rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from taskexplore.grid import footprint_indices
from taskexplore.planner import ACTIONS, MOVES

VI_TOL = 1e-9
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class SelectorParams:
    ell: int = 1
    gamma: float = 0.9
    actions: tuple = ACTIONS
    window: tuple = (7, 7)  # (w, h)

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("neighbourhood radius must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("discount must lie in (0, 1)")


@dataclass
class SensorMDP:
    states: list            # (row, col) positions, row-major
    footprints: list        # flat indices sensed from each state
    rewards: np.ndarray
    next_state: np.ndarray  # (n_states, n_actions) successor index
    actions: tuple
    current: int            # index of the sensor's present state

    @property
    def n_states(self) -> int:
        return len(self.states)


def task_reward(weights, h) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    h = np.asarray(h, dtype=float)
    if weights.shape != h.shape:
        raise ValueError(f"length mismatch: {weights.shape} vs {h.shape}")
    return weights * h


def state_reward(cells, reward) -> float:
    return float(np.sum(np.asarray(reward)[cells]))


def build_mdp(position, shape, reward, params: SelectorParams) -> SensorMDP:
    height, width = shape
    r0, c0 = position
    ell = params.ell
    states = [(r, c)
              for r in range(max(r0 - ell, 0), min(r0 + ell + 1, height))
              for c in range(max(c0 - ell, 0), min(c0 + ell + 1, width))]
    index = {s: i for i, s in enumerate(states)}
    w, h = params.window
    fps = [footprint_indices(height, width, s, w, h) for s in states]
    rewards = np.array([state_reward(fp, reward) for fp in fps])
    nxt = np.empty((len(states), len(params.actions)), dtype=np.int64)
    for i, (r, c) in enumerate(states):
        for a, u in enumerate(params.actions):
            dr, dc = MOVES[u]
            nxt[i, a] = index.get((r + dr, c + dc), i)
    return SensorMDP(states, fps, rewards, nxt, tuple(params.actions), index[(r0, c0)])


def _argmax_first(q):
    """Row-wise argmax preferring the earliest action among (relative) ties."""
    best = q.max(axis=1, keepdims=True)
    ok = q >= best - TIE_RTOL * np.abs(best)
    return np.argmax(ok, axis=1)


def value_iteration(mdp: SensorMDP, gamma: float, tol: float = VI_TOL, max_iter: int = 100_000):
    """Solve V = R + gamma * max_u V[next(., u)]; reward is collected in the current state.

    Returns (values, policy) with the policy given as action names.
    """
    R = mdp.rewards
    V = np.zeros_like(R)
    for _ in range(max_iter):
        V_new = R + gamma * V[mdp.next_state].max(axis=1)
        diff = np.max(np.abs(V_new - V)) if V.size else 0.0
        V = V_new
        if diff * gamma <= tol:
            break
    greedy = _argmax_first(V[mdp.next_state])
    return V, [mdp.actions[a] for a in greedy]


def bellman_residual(mdp: SensorMDP, values, gamma) -> float:
    tv = mdp.rewards + gamma * values[mdp.next_state].max(axis=1)
    return float(np.max(np.abs(tv - values)))


def select_actions(positions, reward, shape, params: SelectorParams, *,
                   remove_overlap: bool = True) -> list:
    """One action per sensor, processed in the given order.

    States already claimed by an earlier sensor's neighbourhood earn nothing for later
    sensors, which pushes the team apart.
    """
    claimed = set()
    out = []
    for pos in positions:
        mdp = build_mdp(tuple(pos), shape, reward, params)
        if remove_overlap:
            for i, s in enumerate(mdp.states):
                if s in claimed:
                    mdp.rewards[i] = 0.0
            claimed.update(mdp.states)
        _, policy = value_iteration(mdp, params.gamma)
        out.append(policy[mdp.current])
    return out


def greedy_select(position, reward, shape, params: SelectorParams) -> str:
    """Action whose successor footprint holds the most reward (ties: action order)."""
    height, width = shape
    r, c = position
    w, h = params.window
    gains = []
    for u in params.actions:
        dr, dc = MOVES[u]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < height and 0 <= nc < width):
            nr, nc = r, c
        gains.append(state_reward(footprint_indices(height, width, (nr, nc), w, h), reward))
    gains = np.array(gains)[None, :]
    return params.actions[int(_argmax_first(gains)[0])]
