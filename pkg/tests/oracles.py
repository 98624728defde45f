"""Independent reference computations used by the tests.

Nothing here calls the code under test for the quantity being checked: costs, intervals,
projections and MDP values are recomputed from their definitions.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize

MOVES4 = ((-1, 0), (1, 0), (0, -1), (0, 1))  # UP, DOWN, LEFT, RIGHT


# ---------------------------------------------------------------- planner


def node_cost(value, a, eps, n_cells):
    return value + a if value <= eps else n_cells * (eps + a)


def brute_force_min_path_cost(values, shape, start, goal, a, eps):
    """Minimum node-cost sum over all simple 4-connected paths (depth-first enumeration)."""
    height, width = shape
    vals = np.asarray(values, dtype=float).reshape(height, width)
    n = height * width
    cost = {(r, c): node_cost(vals[r, c], a, eps, n) for r in range(height) for c in range(width)}
    best = [np.inf]
    seen = {tuple(start)}

    def dfs(cell, acc):
        if acc >= best[0]:
            return
        if cell == tuple(goal):
            best[0] = acc
            return
        r, c = cell
        for dr, dc in MOVES4:
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < height and 0 <= nxt[1] < width and nxt not in seen:
                seen.add(nxt)
                dfs(nxt, acc + cost[nxt])
                seen.remove(nxt)

    dfs(tuple(start), cost[tuple(start)])
    return best[0]


def brute_force_all_path_costs(values, shape, start, goal, a, eps):
    """Every simple path's cost (no pruning), for tie inspection on tiny grids."""
    height, width = shape
    vals = np.asarray(values, dtype=float).reshape(height, width)
    n = height * width
    out = []

    def dfs(path):
        cell = path[-1]
        if cell == tuple(goal):
            out.append(sum(node_cost(vals[p], a, eps, n) for p in path))
            return
        for dr, dc in MOVES4:
            nxt = (cell[0] + dr, cell[1] + dc)
            if 0 <= nxt[0] < height and 0 <= nxt[1] < width and nxt not in path:
                dfs(path + [nxt])

    dfs([tuple(start)])
    return out


def path_weight(cell, nodes, v):
    """Direct evaluation of the path weight, later node winning distance ties."""
    d2 = [(cell[0] - r) ** 2 + (cell[1] - c) ** 2 for r, c in nodes]
    best = min(d2)
    k = max(i for i, d in enumerate(d2) if d == best)
    return (k + 1) / len(nodes) * np.exp(-best / (2.0 * v))


# ---------------------------------------------------------------- selector


def neighbourhood(position, shape, ell):
    height, width = shape
    r0, c0 = position
    return [(r, c) for r in range(max(r0 - ell, 0), min(r0 + ell + 1, height))
            for c in range(max(c0 - ell, 0), min(c0 + ell + 1, width))]


def window_sum(reward2d, center, w):
    r, c = center
    half = w // 2
    return float(reward2d[max(r - half, 0):r + half + 1, max(c - half, 0):c + half + 1].sum())


def mdp_tables(position, shape, reward, ell, w):
    """States, successor table and state rewards built from the definitions."""
    states = neighbourhood(position, shape, ell)
    index = {s: i for i, s in enumerate(states)}
    R = np.array([window_sum(np.asarray(reward).reshape(shape), s, w) for s in states])
    nxt = np.array([[index.get((s[0] + dr, s[1] + dc), i) for dr, dc in MOVES4]
                    for i, s in enumerate(states)])
    return states, nxt, R


def enumerate_optimal_values(nxt, R, gamma):
    """Elementwise maximum of V^pi over every stationary deterministic policy."""
    n, m = nxt.shape
    best = np.full(n, -np.inf)
    eye = np.eye(n)
    pols = np.array(list(itertools.product(range(m), repeat=n)))
    for chunk in np.array_split(pols, max(1, len(pols) // 20000)):
        P = np.zeros((len(chunk), n, n))
        succ = nxt[np.arange(n)[None, :], chunk]
        P[np.arange(len(chunk))[:, None], np.arange(n)[None, :], succ] = 1.0
        V = np.linalg.solve(eye[None] - gamma * P, np.broadcast_to(R, (len(chunk), n))[..., None])
        best = np.maximum(best, V[..., 0].max(axis=0))
    return best


def normalized_policy(nxt, R, V, gamma, rtol=1e-7):
    """First action (in UP, DOWN, LEFT, RIGHT order) attaining the max of Q."""
    Q = R[:, None] + gamma * V[nxt]
    top = Q.max(axis=1, keepdims=True)
    return np.argmax(Q >= top - rtol * np.maximum(np.abs(top), 1.0), axis=1)


# ---------------------------------------------------------------- estimation


def group_stats(x):
    o = float(np.mean(x))
    return o, float(np.mean((np.asarray(x) - o) ** 2))


def interval_width(intervals):
    """Width of the intersection of [o - nu, o + nu] over the registry, cut to [0, 1]."""
    if not intervals:
        return 1.0
    lo = max(max(o - nu for o, nu in intervals), 0.0)
    hi = min(min(o + nu for o, nu in intervals), 1.0)
    return max(hi - lo, 0.0)


def reference_projection(c, n, equalities, balls, box=True, rho0=10.0, outer=60):
    """Projection of c by an augmented Lagrangian with box-projected quasi-Newton inner solves.

    equalities: list of (cells, target mean); balls: list of (cells, bound on mean of x^2).
    """
    c = np.asarray(c, dtype=float)
    lam_e = np.zeros(len(equalities))
    lam_b = np.zeros(len(balls))
    rho = rho0
    x = np.clip(c.copy(), 0.0, 1.0)

    def eq_res(x):
        return np.array([x[g].mean() - o for g, o in equalities])

    def ball_res(x):
        return np.array([np.mean(x[g] ** 2) - b for g, b in balls])

    for _ in range(outer):
        def f(x):
            val = np.sum((x - c) ** 2)
            grad = 2.0 * (x - c)
            for i, (g, o) in enumerate(equalities):
                r = x[g].mean() - o
                val += lam_e[i] * r + 0.5 * rho * r * r
                grad[g] += (lam_e[i] + rho * r) / len(g)
            for i, (g, b) in enumerate(balls):
                r = np.mean(x[g] ** 2) - b
                t = max(0.0, lam_b[i] + rho * r)
                val += (t * t - lam_b[i] ** 2) / (2.0 * rho)
                grad[g] += t * 2.0 * x[g] / len(g)
            return val, grad

        res = minimize(f, x, jac=True, method="L-BFGS-B",
                       bounds=[(0.0, 1.0)] * n if box else None,
                       options={"ftol": 1e-16, "gtol": 1e-13, "maxiter": 5000})
        x = res.x
        re, rb = eq_res(x), ball_res(x)
        lam_e += rho * re
        lam_b = np.maximum(0.0, lam_b + rho * rb)
        viol = max(np.max(np.abs(re), initial=0.0), np.max(rb, initial=0.0))
        if viol < 1e-11:
            break
        rho = min(rho * 2.0, 1e8)
    return x
