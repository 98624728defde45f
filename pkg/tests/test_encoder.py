import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import random_map
from taskexplore.codec import CommModel, bit_cost, compress, default_codebook, instantiate
from taskexplore.encoder import EncoderParams, SensorBelief, commit, select_abstraction
from taskexplore.estimation import ConstraintStore, decode
from taskexplore.grid import footprint_indices
from taskexplore.planner import path_weights, shortest_path

CODEBOOK = default_codebook()
SHAPE = (12, 12)


def _belief(rng, truth, n_prior_msgs=2):
    """A sensor that has sensed a few windows and already sent some of them."""
    belief = SensorBelief.empty(truth.size)
    sent = []
    for t in range(n_prior_msgs + 1):
        pos = (int(rng.integers(SHAPE[0])), int(rng.integers(SHAPE[1])))
        cells = footprint_indices(*SHAPE, pos, 7, 7)
        belief.observe(cells, truth[cells])
        if t < n_prior_msgs:
            sel = select_abstraction(belief, CODEBOOK, pos, np.ones(truth.size), SHAPE)
            commit(belief, sel)
            sent.append((sel.abstraction, sel.message))
    return belief, pos, sent


def _weights(rng):
    est = rng.random(SHAPE[0] * SHAPE[1])
    start = (int(rng.integers(12)), int(rng.integers(12)))
    goal = (int(rng.integers(12)), int(rng.integers(12)))
    return path_weights(shortest_path(est, SHAPE, start, goal), SHAPE, 3.33)


def test_single_template_codebook():
    rng = np.random.default_rng(0)
    truth = random_map(rng, *SHAPE).reshape(-1)
    belief, pos, _ = _belief(rng, truth, 0)
    sel = select_abstraction(belief, [CODEBOOK[6]], pos, np.ones(truth.size), SHAPE)
    assert sel.theta == CODEBOOK[6].theta


def test_pure_distortion_picks_identity():
    rng = np.random.default_rng(1)
    truth = rng.random(SHAPE).reshape(-1)
    belief, pos, _ = _belief(rng, truth, 0)
    params = EncoderParams(beta=1.0, c_lambda=0.0)
    sel = select_abstraction(belief, CODEBOOK, pos, np.ones(truth.size), SHAPE, params)
    assert sel.theta == 5  # the finest template
    # exhaustive oracle: every other template leaves weighted distortion
    J = {c.theta: c.J for c in sel.candidates}
    assert J[5] == pytest.approx(0.0, abs=1e-12)
    assert all(J[t] > 1e-6 for t in J if t != 5)


def test_zero_weights_pick_fewest_groups():
    rng = np.random.default_rng(2)
    truth = random_map(rng, *SHAPE).reshape(-1)
    belief, pos, _ = _belief(rng, truth, 1)
    sel = select_abstraction(belief, CODEBOOK, pos, np.zeros(truth.size), SHAPE)
    assert sel.theta == 1 and sel.message.k == 1


def test_empty_codebook_and_params():
    belief = SensorBelief.empty(4)
    with pytest.raises(ValueError):
        select_abstraction(belief, [], (0, 0), np.ones(4), (2, 2))
    with pytest.raises(ValueError):
        EncoderParams(beta=1.5)
    with pytest.raises(ValueError):
        EncoderParams(c_lambda=-1)
    with pytest.raises(ValueError):
        EncoderParams(lam=lambda ab: -1.0).comm_cost(None)


def test_custom_lambda():
    rng = np.random.default_rng(3)
    truth = random_map(rng, *SHAPE).reshape(-1)
    belief, pos, _ = _belief(rng, truth, 0)
    # a communication cost that forbids everything except template 7
    params = EncoderParams(lam=lambda ab: 0.0 if ab.theta == 7 else 1e9)
    assert select_abstraction(belief, CODEBOOK, pos, np.ones(truth.size), SHAPE, params).theta == 7


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_scores_reproducible_from_scratch(seed, beta):
    rng = np.random.default_rng(seed)
    truth = random_map(rng, *SHAPE).reshape(-1)
    belief, pos, sent = _belief(rng, truth)
    W = _weights(rng)
    params = EncoderParams(beta=beta)
    sel = select_abstraction(belief, CODEBOOK, pos, W, SHAPE, params)
    mask = ~np.isnan(belief.sensed)
    for cand in sel.candidates:
        store = ConstraintStore(truth.size)
        for ab, msg in sent:
            store.add_message(ab, msg)
        ab = instantiate(CODEBOOK[cand.theta - 1], SHAPE, pos)
        store.add_message(ab, compress(belief.sensed, ab))
        x = decode(store).x
        D = np.sum((W[mask] * (truth[mask] - x[mask])) ** 2)
        H = np.sum((W * store.uncertainty()) ** 2)
        assert abs(cand.D - D) <= 1e-12
        assert abs(cand.H - H) <= 1e-12
        assert cand.J == pytest.approx(beta * D + (1 - beta) * H + 0.05 * ab.k, abs=1e-12)
    best = min(sel.candidates, key=lambda c: (c.J, c.theta))
    assert sel.theta == best.theta


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.floats(0, 0.5), st.floats(0, 0.5))
def test_higher_comm_price_never_raises_k(seed, c1, c2):
    lo, hi = sorted((c1, c2))
    rng = np.random.default_rng(seed)
    truth = random_map(rng, *SHAPE).reshape(-1)
    belief, pos, _ = _belief(rng, truth, 1)
    W = _weights(rng)
    k_lo = select_abstraction(belief, CODEBOOK, pos, W, SHAPE, EncoderParams(c_lambda=lo)).message.k
    k_hi = select_abstraction(belief, CODEBOOK, pos, W, SHAPE, EncoderParams(c_lambda=hi)).message.k
    assert k_hi <= k_lo


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_message_bits_match_template(seed, var):
    rng = np.random.default_rng(seed)
    truth = random_map(rng, *SHAPE).reshape(-1)
    belief, pos, _ = _belief(rng, truth, 0)
    sel = select_abstraction(belief, CODEBOOK, pos, _weights(rng), SHAPE,
                             EncoderParams(variance_included=var))
    comm = CommModel(24, 4)
    k = instantiate(CODEBOOK[sel.theta - 1], SHAPE, pos).k
    assert bit_cost(sel.message, comm) == k * (24 if var else 12) + 4


def test_commit_updates_sensor_store_only():
    rng = np.random.default_rng(5)
    truth = random_map(rng, *SHAPE).reshape(-1)
    belief, pos, _ = _belief(rng, truth, 0)
    sel = select_abstraction(belief, CODEBOOK, pos, np.ones(truth.size), SHAPE)
    assert len(belief.store) == 0  # selection is read-only
    commit(belief, sel)
    assert len(belief.store.groups) == sel.message.k
