"""Set-membership estimation: constraint accumulation, projection decoder, uncertainty bound.

Each transmitted group i with members g, mean o and variance V constrains the map to

    mean(x_g) = o,   mean(x_g ** 2) <= o**2 + V,   0 <= x <= 1

and, on the hyperplane, the quadratic row is the ball ||x_g - o|| <= sqrt(N V).
The decoder projects the prior point onto the intersection of all such sets with
Dykstra's alternating projections.  Each group's equality and ball are treated as one
set (a ball inside a hyperplane), whose projection is closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

TOL_FEAS = 1e-8
TOL_DISP = 1e-9
MAX_SWEEPS = 10_000
PIN_TOL = 1e-9
PIN_RAD2 = 1e-12  # per member: below this a group's spread is treated as zero


class InconsistentObservation(ValueError):
    pass


@dataclass(frozen=True)
class GroupConstraint:
    cells: np.ndarray
    mean: float
    variance: float | None  # None: variance not transmitted, equality only
    nu: float

    @property
    def size(self) -> int:
        return self.cells.size


class ConstraintStore:
    """Monotone collection of measurement constraints over an N-cell map."""

    def __init__(self, n: int):
        if n <= 0:
            raise ValueError("store needs at least one cell")
        self.n = n
        self.groups: list[GroupConstraint] = []
        self.direct: dict[int, float] = {}
        self._keys: set = set()
        self._upper = np.full(n, np.inf)  # min over I_j of (o + nu)
        self._lower = np.full(n, np.inf)  # min over I_j of (nu - o)
        self._count = np.zeros(n, dtype=np.int64)
        self._csr = None

    def copy(self) -> "ConstraintStore":
        other = ConstraintStore.__new__(ConstraintStore)
        other.n = self.n
        other.groups = list(self.groups)
        other.direct = dict(self.direct)
        other._keys = set(self._keys)
        other._upper = self._upper.copy()
        other._lower = self._lower.copy()
        other._count = self._count.copy()
        other._csr = self._csr
        return other

    def __len__(self):
        return len(self.groups) + len(self.direct)

    # -- adding constraints

    def _register(self, cells, o, nu):
        np.minimum.at(self._upper, cells, o + nu)
        np.minimum.at(self._lower, cells, nu - o)
        np.add.at(self._count, cells, 1)

    def add_message(self, abstraction, message) -> "ConstraintStore":
        if abstraction.theta != message.theta or tuple(abstraction.center) != tuple(
                message.sensor_position):
            raise ValueError("abstraction and message disagree on template or position")
        key = (message.theta, tuple(message.sensor_position), message.variance_included)
        if key in self._keys:
            return self  # static map: identical placement carries identical data
        self._keys.add(key)
        for cells, o, v in zip(abstraction.groups, message.means, message.variances):
            o = float(o)
            n_i = cells.size
            if message.variance_included:
                var = float(v)
                nu = math.sqrt(n_i * var)
            else:
                var = None
                nu = math.sqrt(n_i * o * (1.0 - o))
            cells = np.asarray(cells, dtype=np.int64)
            self.groups.append(GroupConstraint(cells, o, var, nu))
            self._register(cells, o, nu)
        self._csr = None
        return self

    def add_direct_observation(self, j: int, value: float) -> "ConstraintStore":
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"observed value {value!r} outside [0,1]")
        if not 0 <= j < self.n:
            raise IndexError(f"cell {j} outside store")
        old = self.direct.get(j)
        if old is not None:
            if old != value:
                raise InconsistentObservation(
                    f"cell {j} re-observed as {value!r}, previously {old!r} (static map)")
            return self
        self.direct[j] = value
        self._register(np.array([j]), value, 0.0)
        return self

    # -- queries

    def intervals(self, j: int) -> list:
        """Registry I_j as (o, nu) pairs, direct observation first."""
        out = []
        if j in self.direct:
            out.append((self.direct[j], 0.0))
        for g in self.groups:
            if np.any(g.cells == j):
                out.append((g.mean, g.nu))
        return out

    def uncertainty(self) -> np.ndarray:
        h = np.clip(self._upper + self._lower, 0.0, 1.0)
        h[self._count == 0] = 1.0
        return h

    def residual(self, x) -> float:
        """Max violation of box, mean equalities and mean-square bounds at x."""
        x = np.asarray(x, dtype=float)
        worst = float(max(np.max(x - 1.0), np.max(-x), 0.0))
        for j, v in self.direct.items():
            worst = max(worst, abs(x[j] - v))
        for g in self.groups:
            xg = x[g.cells]
            worst = max(worst, abs(xg.mean() - g.mean))
            if g.variance is not None:
                worst = max(worst, float(np.mean(xg ** 2)) - (g.mean ** 2 + g.variance))
        return worst

    def arrays(self):
        """Concatenated group data (ptr, members, means, N*V or -1 for equality-only)."""
        if self._csr is None:
            sizes = np.array([g.size for g in self.groups], dtype=np.int64)
            ptr = np.zeros(len(self.groups) + 1, dtype=np.int64)
            np.cumsum(sizes, out=ptr[1:])
            idx = (np.concatenate([g.cells for g in self.groups]) if self.groups
                   else np.empty(0, dtype=np.int64))
            means = np.array([g.mean for g in self.groups], dtype=float)
            r2 = np.array([-1.0 if g.variance is None else g.size * g.variance
                           for g in self.groups], dtype=float)
            self._csr = (ptr, idx, means, r2)
        return self._csr


def add_message(store: ConstraintStore, abstraction, message) -> ConstraintStore:
    return store.add_message(abstraction, message)


def add_direct_observation(store: ConstraintStore, j: int, value: float) -> ConstraintStore:
    return store.add_direct_observation(j, value)


def uncertainty(store: ConstraintStore) -> np.ndarray:
    """Per-cell bound on how far any feasible estimate can be from the truth."""
    return store.uncertainty()


# ---------------------------------------------------------------- decoder


@dataclass
class Estimate:
    x: np.ndarray
    residual: float
    sweeps: int
    converged: bool
    consistent: bool = True

    def objective(self, prior: float = 0.5) -> float:
        return float(np.sum((self.x - prior) ** 2))


@njit(cache=True)
def _dykstra(c, free, ptr, idx, mean_red, rad2, x, y, ybox, max_sweeps, tol_disp, tol_feas):
    n_groups = ptr.size - 1
    n = x.size
    prev = x.copy()
    buf = np.empty(idx.size)
    sweeps = 0
    viol = np.inf
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        for g in range(n_groups):
            a, b = ptr[g], ptr[g + 1]
            f = 0
            s = 0.0
            for k in range(a, b):
                j = idx[k]
                if free[j]:
                    z = x[j] + y[k]
                    buf[k] = z
                    s += z
                    f += 1
            if f == 0:
                continue
            m = mean_red[g]
            shift = m - s / f
            nrm2 = 0.0
            for k in range(a, b):
                if free[idx[k]]:
                    d = buf[k] + shift - m
                    nrm2 += d * d
            scale = 1.0
            if rad2[g] >= 0.0 and nrm2 > rad2[g]:
                scale = math.sqrt(rad2[g] / nrm2)
            for k in range(a, b):
                j = idx[k]
                if free[j]:
                    z = buf[k]
                    p = m + scale * (z + shift - m)
                    y[k] = z - p
                    x[j] = p
        disp = 0.0
        for j in range(n):
            if free[j]:
                z = x[j] + ybox[j]
                p = min(max(z, 0.0), 1.0)
                ybox[j] = z - p
                x[j] = p
                dj = abs(p - prev[j])
                if dj > disp:
                    disp = dj
                prev[j] = p
        if disp < tol_disp:
            viol = 0.0
            for g in range(n_groups):
                a, b = ptr[g], ptr[g + 1]
                f = 0
                s = 0.0
                for k in range(a, b):
                    j = idx[k]
                    if free[j]:
                        s += x[j]
                        f += 1
                if f == 0:
                    continue
                m = mean_red[g]
                e = abs(s / f - m)
                if e > viol:
                    viol = e
                if rad2[g] >= 0.0:
                    nrm2 = 0.0
                    for k in range(a, b):
                        j = idx[k]
                        if free[j]:
                            nrm2 += (x[j] - m) ** 2
                    e = math.sqrt(nrm2) - math.sqrt(rad2[g])
                    if e > viol:
                        viol = e
            if viol <= tol_feas:
                converged = True
                break
    return sweeps, viol, converged


def _reduce(store: ConstraintStore):
    """Eliminate pinned cells; return (pinned values, free mask, reduced means/radii, ok).

    A cell is pinned by a direct observation, by a group whose reduced set is a single
    point (zero spread, a lone free member, or a mean at a box face), repeated until no
    new pins appear.
    """
    n = store.n
    ptr, idx, means, r2 = store.arrays()
    sizes = np.diff(ptr)
    seg = np.repeat(np.arange(sizes.size), sizes)
    has_ball = r2 >= 0.0
    pinned = np.full(n, np.nan)
    for j, v in store.direct.items():
        pinned[j] = v
    consistent = True
    while True:
        free = np.isnan(pinned)
        is_free = free[idx]
        pv = np.where(is_free, 0.0, pinned[idx])
        n_free = np.bincount(seg, weights=is_free, minlength=sizes.size)
        pin_sum = np.bincount(seg, weights=pv, minlength=sizes.size)
        pin_dev = np.bincount(seg, weights=np.where(is_free, 0.0, (pv - means[seg]) ** 2),
                              minlength=sizes.size)
        target = sizes * means - pin_sum
        mean_red = np.where(n_free > 0, target / np.maximum(n_free, 1), means)
        rad2 = np.where(has_ball, r2 - pin_dev - n_free * (mean_red - means) ** 2, -1.0)
        point = (n_free > 0) & (
            (has_ball & (rad2 <= PIN_RAD2 * sizes))
            | (n_free == 1)
            | (mean_red <= 0.0) | (mean_red >= 1.0))
        if not point.any():
            break
        k = point[seg] & is_free
        cells, vals = idx[k], np.clip(mean_red[seg[k]], 0.0, 1.0)
        order = np.argsort(cells, kind="stable")
        cells, vals = cells[order], vals[order]
        first = np.r_[True, cells[1:] != cells[:-1]]
        spread = np.maximum.reduceat(vals, np.flatnonzero(first)) - np.minimum.reduceat(
            vals, np.flatnonzero(first)) if cells.size else np.zeros(0)
        if np.any(spread > PIN_TOL):
            consistent = False
        pinned[cells[first]] = vals[first]

    full = n_free == 0
    if np.any(np.abs(target[full]) > PIN_TOL * np.maximum(sizes[full], 1)):
        consistent = False
    if np.any(rad2[has_ball] < -1e-10 * sizes[has_ball]):
        consistent = False
    if np.any((mean_red < -PIN_TOL) | (mean_red > 1.0 + PIN_TOL)):
        consistent = False
    rad2 = np.where(has_ball, np.maximum(rad2, 0.0), -1.0)
    # A ball that already contains every box point of its hyperplane adds nothing, and
    # touching the box tangentially it only slows the projections down; drop it.
    rad2[has_ball & (rad2 >= _box_radius2(n_free, mean_red) - 1e-12 * sizes)] = -1.0
    return pinned, free, mean_red, rad2, consistent


def _box_radius2(n, m):
    """max ||x - m||^2 over x in [0,1]^n with mean m (a vertex: ones, one fraction, zeros)."""
    s = n * m
    ones = np.floor(s + 1e-12)
    frac = np.clip(s - ones, 0.0, 1.0)
    return np.maximum(ones + frac * frac - s * m, 0.0)


def decode(store: ConstraintStore, prior: float = 0.5, *, tol_feas: float = TOL_FEAS,
           tol_disp: float = TOL_DISP, max_sweeps: int = MAX_SWEEPS) -> Estimate:
    """Euclidean projection of prior * 1 onto the store's feasible set."""
    n = store.n
    ptr, idx, _, _ = store.arrays()
    pinned, free, mean_red, rad2, consistent = _reduce(store)
    c = np.full(n, float(prior))
    x = c.copy()
    x[~free] = pinned[~free]
    y = np.zeros(idx.size)
    ybox = np.zeros(n)
    sweeps, viol, converged = _dykstra(c, free, ptr, idx, mean_red, rad2, x, y, ybox,
                                       int(max_sweeps), float(tol_disp), float(tol_feas))
    x[~free] = pinned[~free]
    if not converged:
        log.warning("decode stopped after %d sweeps with violation %.3g", sweeps, viol)
    return Estimate(x=x, residual=store.residual(x), sweeps=int(sweeps),
                    converged=bool(converged), consistent=consistent)


def exact_uncertainty(store: ConstraintStore, cells=None) -> np.ndarray:
    """Exact spread max x_j - min x_j over the feasible set (slow, small stores only)."""
    from scipy.optimize import minimize

    n = store.n
    cons = []
    for j, v in store.direct.items():
        cons.append({"type": "eq", "fun": lambda x, j=j, v=v: x[j] - v})
    for g in store.groups:
        cells_g, o = g.cells, g.mean
        cons.append({"type": "eq", "fun": lambda x, c=cells_g, o=o: x[c].mean() - o})
        if g.variance is not None:
            bound = o * o + g.variance
            cons.append({"type": "ineq",
                         "fun": lambda x, c=cells_g, b=bound: b - np.mean(x[c] ** 2)})
    x0 = decode(store).x
    cells = range(n) if cells is None else cells
    out = []
    for j in cells:
        ends = []
        for sign in (1.0, -1.0):
            res = minimize(lambda x: sign * x[j], x0, jac=lambda x: sign * np.eye(n)[j],
                           bounds=[(0.0, 1.0)] * n, constraints=cons, method="SLSQP",
                           options={"ftol": 1e-12, "maxiter": 500})
            ends.append(res.x[j])
        out.append(max(ends[1] - ends[0], 0.0))
    return np.array(out)
