"""Actor path planning on the decoded estimate and path-centred cell weights."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

UP, DOWN, LEFT, RIGHT = "UP", "DOWN", "LEFT", "RIGHT"
ACTIONS = (UP, DOWN, LEFT, RIGHT)
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


@dataclass(frozen=True)
class PlannerParams:
    a: float = 0.025
    eps: float = 0.501
    actions: tuple = ACTIONS

    def __post_init__(self):
        if self.a < 0 or not 0.0 <= self.eps <= 1.0:
            raise ValueError("need a >= 0 and eps in [0, 1]")
        if not self.actions or any(u not in MOVES for u in self.actions):
            raise ValueError(f"actions must be a nonempty subset of {ACTIONS}")


@dataclass(frozen=True)
class Path:
    nodes: tuple
    cost: float

    def __len__(self):
        return len(self.nodes)


def cell_cost(value, params: PlannerParams, n_cells: int):
    """Traversal cost of a cell; cells above the obstacle threshold get the soft penalty."""
    value = np.asarray(value, dtype=float)
    out = np.where(value <= params.eps, value + params.a, n_cells * (params.eps + params.a))
    return float(out) if out.ndim == 0 else out


def shortest_path(estimate, shape, start, goal, params: PlannerParams = PlannerParams()) -> Path:
    """Node-cost Dijkstra; the path cost sums every visited cell including start and goal.

    `estimate` is a flat array over a grid of `shape` = (height, width).
    """
    height, width = shape
    est = np.asarray(estimate, dtype=float).reshape(-1)
    costs = cell_cost(est, params, est.size)
    s = start[0] * width + start[1]
    g = goal[0] * width + goal[1]
    if not (0 <= start[0] < height and 0 <= start[1] < width):
        raise IndexError(f"start {tuple(start)} outside map")
    if not (0 <= goal[0] < height and 0 <= goal[1] < width):
        raise IndexError(f"goal {tuple(goal)} outside map")
    moves = [MOVES[u] for u in params.actions]

    dist = np.full(est.size, np.inf)
    prev = np.full(est.size, -1, dtype=np.int64)
    dist[s] = costs[s]
    heap = [(dist[s], s)]
    done = np.zeros(est.size, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == g:
            break
        r, c = divmod(u, width)
        for dr, dc in moves:
            rr, cc = r + dr, c + dc
            if 0 <= rr < height and 0 <= cc < width:
                v = rr * width + cc
                nd = d + costs[v]
                if nd < dist[v]:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
    nodes = [g]
    while nodes[-1] != s:
        nodes.append(int(prev[nodes[-1]]))
    nodes.reverse()
    return Path(tuple(divmod(j, width) for j in nodes), float(dist[g]))


def path_weights(path: Path, shape, v: float = 3.33) -> np.ndarray:
    """Weight of every cell: progress fraction of its nearest path node times a Gaussian
    falloff with squared distance to the path. Equidistant nodes resolve to the later one.
    """
    height, width = shape
    nodes = np.asarray(path.nodes, dtype=np.int64).reshape(-1, 2)
    rr, cc = np.divmod(np.arange(height * width), width)
    d2 = (rr[:, None] - nodes[None, :, 0]) ** 2 + (cc[:, None] - nodes[None, :, 1]) ** 2
    # last index attaining the minimum
    nearest = d2.shape[1] - 1 - np.argmin(d2[:, ::-1], axis=1)
    dmin2 = d2[np.arange(d2.shape[0]), nearest]
    return (nearest + 1) / len(nodes) * np.exp(-dmin2 / (2.0 * v))


def path_cost(flat_nodes, values, params: PlannerParams) -> float:
    """Accumulated cost of visiting `flat_nodes` in order, duplicates counted."""
    values = np.asarray(values, dtype=float).reshape(-1)
    total = 0.0
    for j in flat_nodes:
        total += cell_cost(values[j], params, values.size)
    return total
