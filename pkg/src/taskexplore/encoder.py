"""Per-sensor abstraction choice by exhaustive search over the codebook."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from taskexplore.codec import compress, instantiate
from taskexplore.estimation import ConstraintStore, decode


@dataclass(frozen=True)
class EncoderParams:
    beta: float = 0.9
    c_lambda: float = 0.05
    lam: Callable | None = None  # lam(abstraction) -> cost; default c_lambda * k
    prior: float = 0.5
    variance_included: bool = True

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.c_lambda < 0:
            raise ValueError("c_lambda must be >= 0")

    def comm_cost(self, abstraction) -> float:
        cost = self.c_lambda * abstraction.k if self.lam is None else float(self.lam(abstraction))
        if cost < 0:
            raise ValueError("communication cost must be nonnegative")
        return cost


@dataclass
class SensorBelief:
    """What a sensor has seen, and the Actor's view of it built from its own messages."""

    sensed: np.ndarray  # flat, NaN where never observed
    store: ConstraintStore

    @classmethod
    def empty(cls, n: int) -> "SensorBelief":
        return cls(np.full(n, np.nan), ConstraintStore(n))

    def observe(self, cells, values) -> None:
        self.sensed[cells] = values

    @property
    def sensed_mask(self) -> np.ndarray:
        return ~np.isnan(self.sensed)


@dataclass
class Candidate:
    theta: int
    abstraction: object
    message: object
    D: float
    H: float
    lam: float
    J: float


@dataclass
class Selection:
    theta: int
    abstraction: object
    message: object
    candidates: list


def score(belief: SensorBelief, abstraction, message, weights,
          params: EncoderParams) -> Candidate:
    """Objective of sending `message` on top of the sensor's transmitted history."""
    store = belief.store.copy().add_message(abstraction, message)
    est = decode(store, params.prior)
    mask = belief.sensed_mask
    D = float(np.sum((weights[mask] * (belief.sensed[mask] - est.x[mask])) ** 2))
    H = float(np.sum((weights * store.uncertainty()) ** 2))
    lam = params.comm_cost(abstraction)
    J = params.beta * D + (1.0 - params.beta) * H + lam
    return Candidate(abstraction.theta, abstraction, message, D, H, lam, J)


def select_abstraction(belief: SensorBelief, codebook, center, weights, grid_shape,
                       params: EncoderParams = EncoderParams(), t: int = 0) -> Selection:
    """Pick the template minimising beta*D + (1-beta)*H + lambda; lowest id wins ties."""
    if not codebook:
        raise ValueError("empty codebook")
    weights = np.asarray(weights, dtype=float)
    cands = []
    for tpl in codebook:
        ab = instantiate(tpl, tuple(grid_shape), center)
        msg = compress(belief.sensed, ab, variance_included=params.variance_included, t=t)
        cands.append(score(belief, ab, msg, weights, params))
    best = min(cands, key=lambda c: (c.J, c.theta))
    return Selection(best.theta, best.abstraction, best.message, cands)


def commit(belief: SensorBelief, selection: Selection) -> None:
    """Record the transmitted message in the sensor's mirror of the Actor's knowledge."""
    belief.store.add_message(selection.abstraction, selection.message)
