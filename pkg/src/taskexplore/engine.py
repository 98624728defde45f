"""Closed-loop Actor/Sensor simulation, baselines, generated maps and batch metrics."""

from __future__ import annotations

import hashlib
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from taskexplore.codec import CommModel, bit_cost, load_codebook
from taskexplore.encoder import EncoderParams, SensorBelief, commit, select_abstraction
from taskexplore.estimation import ConstraintStore, decode
from taskexplore.grid import GridMap, footprint_indices, load_map
from taskexplore.planner import MOVES, PlannerParams, cell_cost, path_weights, shortest_path
from taskexplore.selector import SelectorParams, greedy_select, select_actions, task_reward

log = logging.getLogger(__name__)

TASK_DRIVEN = "task_driven_mdp"
GREEDY = "greedy"
PREDEFINED_AS = "predefined_path_AS"
FULLY_INFORMED = "fully_informed"
UNINFORMED = "uninformed"
MODES = (TASK_DRIVEN, GREEDY, PREDEFINED_AS, FULLY_INFORMED, UNINFORMED)


class ScenarioError(ValueError):
    pass


class MapGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    # map: a file, or a generator driven by the run seed
    map_file: str | None = None
    map_width: int = 32
    map_height: int = 32
    density: float = 0.25
    noise: float = 0.0
    # actor
    actor_start: tuple = (3, 14)
    actor_goal: tuple = (21, 12)
    actor_window: int = 5
    # sensors; None starts are drawn uniformly from the run seed
    n_sensors: int = 2
    sensor_starts: tuple | None = None
    sensor_window: int = 7
    horizon: int = 60
    codebook: str | None = None
    # parameters
    a: float = 0.025
    eps: float = 0.501
    v: float = 3.33
    gamma: float = 0.9
    beta: float = 0.9
    c_lambda: float = 0.05
    ell: int = 1
    n_m: int = 24
    n_a: int = 4
    prior: float = 0.5
    mode: str = TASK_DRIVEN
    selector_location: str = "actor"
    variance_included: bool = True
    square_side: int = 8
    square_direction: str = "cw"
    seed: int = 0
    max_steps: int | None = None

    def validate(self, grid: GridMap | None = None) -> None:
        if self.mode not in MODES:
            raise ScenarioError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.selector_location not in ("actor", "sensor"):
            raise ScenarioError("selector_location must be 'actor' or 'sensor'")
        if self.square_direction not in ("cw", "ccw"):
            raise ScenarioError("square_direction must be 'cw' or 'ccw'")
        if self.horizon < 0:
            raise ScenarioError("sensor horizon must be >= 0")
        if self.actor_window % 2 == 0 or self.sensor_window % 2 == 0:
            raise ScenarioError("windows must have odd sides")
        if self.n_sensors < 0:
            raise ScenarioError("sensor count must be >= 0")
        if not 0.0 <= self.density < 1.0:
            raise ScenarioError("obstacle density must lie in [0, 1)")
        if self.sensor_starts is not None and len(self.sensor_starts) != self.n_sensors:
            raise ScenarioError("sensor_starts length differs from n_sensors")
        if grid is None and self.map_file is None:
            if self.map_width <= 0 or self.map_height <= 0:
                raise ScenarioError("generated map needs positive width and height")
            grid = GridMap(self.map_width, self.map_height,
                           np.zeros(self.map_width * self.map_height))
        if grid is not None:
            for name, cell in (("actor start", self.actor_start), ("goal", self.actor_goal)):
                if not grid.contains(cell):
                    raise ScenarioError(f"{name} {tuple(cell)} outside the map")
            for cell in self.sensor_starts or ():
                if not grid.contains(cell):
                    raise ScenarioError(f"sensor start {tuple(cell)} outside the map")

    @property
    def planner(self) -> PlannerParams:
        return PlannerParams(a=self.a, eps=self.eps)

    @property
    def selector(self) -> SelectorParams:
        w = self.sensor_window
        return SelectorParams(ell=self.ell, gamma=self.gamma, window=(w, w))

    @property
    def encoder(self) -> EncoderParams:
        return EncoderParams(beta=self.beta, c_lambda=self.c_lambda, prior=self.prior,
                             variance_included=self.variance_included)

    @property
    def comm(self) -> CommModel:
        return CommModel(n_m=self.n_m, n_a=self.n_a)


# ---------------------------------------------------------------- maps


def reachable(values, shape, start, goal, eps) -> bool:
    """Whether goal is 4-connected to start through cells with value <= eps."""
    height, width = shape
    free = np.asarray(values).reshape(height, width) <= eps
    if not (free[tuple(start)] and free[tuple(goal)]):
        return False
    seen = np.zeros_like(free)
    seen[tuple(start)] = True
    todo = deque([tuple(start)])
    while todo:
        r, c = todo.popleft()
        if (r, c) == tuple(goal):
            return True
        for dr, dc in MOVES.values():
            rr, cc = r + dr, c + dc
            if 0 <= rr < height and 0 <= cc < width and free[rr, cc] and not seen[rr, cc]:
                seen[rr, cc] = True
                todo.append((rr, cc))
    return False


def generate_map(seed, width=32, height=32, density=0.25, noise=0.0, *, start=None, goal=None,
                 eps=0.501, thickness=(2, 3), length=(8, 16), max_tries=100) -> GridMap:
    """Wall-like rectangular obstacle blocks (value 1) on free ground (value 0).

    Each block is `thickness` cells across and `length` cells long, laid horizontally or
    vertically with equal odds, until the obstacle fraction reaches `density`.
    Free cells optionally carry terrain noise drawn from [0, noise), noise < eps.
    start and goal are forced free and must be connected through free cells.
    """
    if not 0.0 <= density < 1.0:
        raise ValueError("density must lie in [0, 1)")
    if not 0.0 <= noise < eps:
        raise ValueError("terrain noise must lie in [0, eps)")
    if width <= 0 or height <= 0:
        raise ValueError("map needs at least one cell")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        arr = np.zeros((height, width))
        while arr.mean() < density:
            t = int(rng.integers(thickness[0], thickness[1] + 1))
            ln = int(rng.integers(length[0], length[1] + 1))
            bh, bw = (t, ln) if rng.random() < 0.5 else (ln, t)
            r = rng.integers(0, max(height - bh, 0) + 1)
            c = rng.integers(0, max(width - bw, 0) + 1)
            arr[r:r + bh, c:c + bw] = 1.0
        for cell in (start, goal):
            if cell is not None:
                arr[tuple(cell)] = 0.0
        if start is not None and goal is not None and not reachable(
                arr, (height, width), start, goal, eps):
            continue
        if noise > 0:
            free = arr == 0.0
            arr[free] = rng.uniform(0.0, noise, size=int(free.sum()))
        return GridMap.from_array(arr)
    raise MapGenerationError(f"no connected start/goal layout after {max_tries} tries")


def square_route(start, side, direction="cw"):
    """Unit moves of one lap of a side x side square anchored at `start`.

    Clockwise as drawn with rows increasing downwards; ccw is its transpose.
    """
    legs = ("RIGHT", "DOWN", "LEFT", "UP") if direction == "cw" else ("DOWN", "RIGHT", "UP", "LEFT")
    return [u for u in legs for _ in range(side)]


def _fingerprint(arr) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------- simulation


@dataclass
class SensorState:
    position: tuple
    belief: SensorBelief
    route: list = field(default_factory=list)
    bits: int = 0
    messages: int = 0


@dataclass
class StepRecord:
    t: int
    actor: tuple
    sensors: list      # per sensor (row, col, theta, bits); theta 0: raw values or nothing sent
    path_len: int
    cost_so_far: float
    est_hash: str
    h_hash: str
    path: tuple = ()


@dataclass
class ScenarioTrace:
    scenario: Scenario
    seed: int
    steps: list
    actor_route: list
    cost: float
    bits: list          # total per sensor
    reached_goal: bool
    capped: bool
    fields: dict | None = None   # name -> (n_steps, height, width) arrays
    sensor_routes: list = field(default_factory=list)
    message_log: list = field(default_factory=list)  # (t, sensor, theta, k, bits)

    @property
    def total_bits(self) -> int:
        return int(sum(self.bits))

    @property
    def n_steps(self) -> int:
        return len(self.actor_route) - 1


class Simulation:
    """One closed-loop run; call `step()` until `done`."""

    def __init__(self, scenario: Scenario, seed: int | None = None, grid: GridMap | None = None,
                 codebook=None, record_fields: bool = False):
        self.scenario = sc = scenario
        self.seed = sc.seed if seed is None else int(seed)
        if grid is None:
            grid = scenario_map(sc, self.seed)
        sc.validate(grid)
        self.grid = grid
        self.shape = (grid.height, grid.width)
        self.truth = grid.values
        self.codebook = codebook if codebook is not None else load_codebook(sc.codebook)
        self.record_fields = record_fields

        n = grid.n_cells
        self.store = ConstraintStore(n)
        self.actor = tuple(sc.actor_start)
        self.goal = tuple(sc.actor_goal)
        self.t = 0
        self.cost = cell_cost(self.truth[self._flat(self.actor)], sc.planner, n)
        self.actor_route = [self.actor]
        self.steps: list[StepRecord] = []
        self.message_log = []
        self.fields = {"xhat": [], "h": [], "W": [], "R": []} if record_fields else None
        self.max_steps = sc.max_steps if sc.max_steps is not None else 10 * n
        self.capped = False

        starts = [] if sc.mode == UNINFORMED else sensor_starts(sc, self.seed, self.shape)
        self.sensors = []
        for p in starts:
            s = SensorState(tuple(p), SensorBelief.empty(n))
            if sc.mode in (PREDEFINED_AS, FULLY_INFORMED):
                s.route = square_route(p, sc.square_side, sc.square_direction)
            self.sensors.append(s)
        self.sensor_routes = [[s.position] for s in self.sensors]

    def _flat(self, cell) -> int:
        return cell[0] * self.shape[1] + cell[1]

    @property
    def done(self) -> bool:
        return self.actor == self.goal or self.capped

    @property
    def sensors_active(self) -> bool:
        return bool(self.sensors) and self.t < self.scenario.horizon

    def _sense_actor(self):
        w = self.scenario.actor_window
        for j in footprint_indices(*self.shape, self.actor, w, w):
            self.store.add_direct_observation(int(j), self.truth[j])

    def _sensor_actions(self, W, R):
        sc = self.scenario
        positions = [s.position for s in self.sensors]
        if sc.mode in (PREDEFINED_AS, FULLY_INFORMED):
            return [s.route[self.t % len(s.route)] for s in self.sensors]
        if sc.selector_location == "sensor":
            rewards = [task_reward(W, s.belief.store.uncertainty()) for s in self.sensors]
        else:
            rewards = None
        if sc.mode == GREEDY:
            return [greedy_select(p, R if rewards is None else rewards[i], self.shape, sc.selector)
                    for i, p in enumerate(positions)]
        if rewards is None:
            return select_actions(positions, R, self.shape, sc.selector)
        # without a central selector every sensor plans alone on its own reward
        return [select_actions([p], rewards[i], self.shape, sc.selector)[0]
                for i, p in enumerate(positions)]

    def _move(self, pos, action):
        dr, dc = MOVES[action]
        nr, nc = pos[0] + dr, pos[1] + dc
        if 0 <= nr < self.shape[0] and 0 <= nc < self.shape[1]:
            return (nr, nc)
        return pos

    def step(self) -> StepRecord | None:
        if self.done:
            return None
        sc = self.scenario
        # 1-2: own observation, then decode
        self._sense_actor()
        xhat = decode(self.store, sc.prior).x
        # 3-4: plan and derive the task-driven reward
        path = shortest_path(xhat, self.shape, self.actor, self.goal, sc.planner)
        W = path_weights(path, self.shape, sc.v)
        h = self.store.uncertainty()
        R = task_reward(W, h)
        if self.fields is not None:
            for name, arr in (("xhat", xhat), ("h", h), ("W", W), ("R", R)):
                self.fields[name].append(arr.reshape(self.shape).copy())
        # 5-7: sensors move, sense, encode, transmit
        sensor_cols = []
        if self.sensors_active:
            actions = self._sensor_actions(W, R)
            for i, (s, u) in enumerate(zip(self.sensors, actions)):
                s.position = self._move(s.position, u)
                self.sensor_routes[i].append(s.position)
                theta, bits = self._sense_and_transmit(i, s, W)
                sensor_cols.append((*s.position, theta, bits))
        else:
            sensor_cols = [(*s.position, 0, 0) for s in self.sensors]
        # 8: actor advances one cell along the plan made this step
        if len(path.nodes) > 1:
            self.actor = tuple(path.nodes[1])
            self.cost += cell_cost(self.truth[self._flat(self.actor)], sc.planner,
                                   self.grid.n_cells)
        self.actor_route.append(self.actor)
        rec = StepRecord(self.t, self.actor, sensor_cols, len(path.nodes), self.cost,
                         _fingerprint(xhat), _fingerprint(h), path.nodes)
        self.steps.append(rec)
        self.t += 1
        if not self.done and self.t >= self.max_steps:
            self.capped = True
            log.warning("run seed=%d hit the step cap %d", self.seed, self.max_steps)
        return rec

    def _sense_and_transmit(self, i, s: SensorState, W):
        sc = self.scenario
        w = sc.sensor_window
        cells = footprint_indices(*self.shape, s.position, w, w)
        s.belief.observe(cells, self.truth[cells])
        if sc.mode == FULLY_INFORMED:
            # raw value of every observed cell, no variance
            for j in cells:
                self.store.add_direct_observation(int(j), self.truth[j])
            bits = cells.size * sc.comm.group_bits(False) + sc.n_a
            theta, k = 0, int(cells.size)
        else:
            sel = select_abstraction(s.belief, self.codebook, s.position, W, self.shape,
                                     sc.encoder, t=self.t)
            commit(s.belief, sel)
            self.store.add_message(sel.abstraction, sel.message)
            bits = bit_cost(sel.message, sc.comm)
            theta, k = sel.theta, sel.message.k
        s.bits += bits
        s.messages += 1
        self.message_log.append((self.t, i, theta, k, bits))
        return theta, bits

    def trace(self) -> ScenarioTrace:
        fields = None
        if self.fields is not None and self.fields["xhat"]:
            fields = {k: np.stack(v) for k, v in self.fields.items()}
        return ScenarioTrace(self.scenario, self.seed, self.steps, self.actor_route, self.cost,
                             [s.bits for s in self.sensors], self.actor == self.goal,
                             self.capped, fields, self.sensor_routes, self.message_log)


def scenario_map(sc: Scenario, seed: int) -> GridMap:
    sc.validate()
    if sc.map_file:
        return load_map(sc.map_file)
    return generate_map(np.random.SeedSequence([seed, 0]), sc.map_width, sc.map_height,
                        sc.density, sc.noise, start=sc.actor_start, goal=sc.actor_goal,
                        eps=sc.eps)


def sensor_starts(sc: Scenario, seed: int, shape) -> list:
    if sc.sensor_starts is not None:
        return [tuple(p) for p in sc.sensor_starts]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    height, width = shape
    return [(int(rng.integers(height)), int(rng.integers(width))) for _ in range(sc.n_sensors)]


def run(scenario: Scenario, seed: int | None = None, *, grid: GridMap | None = None,
        record_fields: bool = False) -> ScenarioTrace:
    sim = Simulation(scenario, seed, grid=grid, record_fields=record_fields)
    while not sim.done:
        sim.step()
    return sim.trace()


# ---------------------------------------------------------------- batches


@dataclass
class RunResult:
    seed: int
    label: str
    mode: str
    cost: float
    bits: int
    steps: int
    reached_goal: bool
    r_cost: float = float("nan")
    r_bits: float = float("nan")


@dataclass
class MetricsReport:
    runs: list
    reference_bits_label: str | None

    def labels(self) -> list:
        seen = []
        for r in self.runs:
            if r.label not in seen:
                seen.append(r.label)
        return seen

    def of(self, label) -> list:
        return [r for r in self.runs if r.label == label]

    def r_cost(self, label) -> float:
        return float(np.mean([r.r_cost for r in self.of(label)]))

    def r_bits(self, label) -> float:
        return float(np.mean([r.r_bits for r in self.of(label)]))

    def summary(self) -> list:
        return [(lab, len(self.of(lab)), self.r_cost(lab), self.r_bits(lab))
                for lab in self.labels()]


def _run_one(args):
    scenario, seed, label = args
    tr = run(scenario, seed)
    return RunResult(seed, label, scenario.mode, tr.cost, tr.total_bits, tr.n_steps,
                     tr.reached_goal)


def run_batch(template: Scenario, seeds, variants=None, workers: int = 1) -> MetricsReport:
    """Run every variant on every seed, normalised against a paired uninformed run.

    `variants` maps a label to Scenario field overrides; default is the template alone.
    The bit reference is the fully-informed variant when present, otherwise the variant
    with the largest total bits over the batch.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    if variants is None:
        variants = {template.mode: {}}
    jobs = []
    for seed in seeds:
        jobs.append((replace(template, mode=UNINFORMED), seed, UNINFORMED))
        for label, over in variants.items():
            if label == UNINFORMED:
                continue
            jobs.append((replace(template, **over), seed, label))
    for sc, _, _ in jobs:
        sc.validate()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    c_max = {r.seed: r.cost for r in results if r.label == UNINFORMED}
    labels = list(dict.fromkeys(r.label for r in results))
    fi = [lab for lab in labels if any(r.mode == FULLY_INFORMED and r.label == lab
                                       for r in results)]
    if fi:
        ref = fi[0]
    else:
        totals = {lab: sum(r.bits for r in results if r.label == lab) for lab in labels}
        ref = max(labels, key=lambda lab: totals[lab]) if any(totals.values()) else None
    b_max = {r.seed: r.bits for r in results if r.label == ref} if ref else {}
    for r in results:
        r.r_cost = r.cost / c_max[r.seed]
        ref_bits = b_max.get(r.seed, 0)
        r.r_bits = r.bits / ref_bits if ref_bits > 0 else 0.0
    return MetricsReport(results, ref)
