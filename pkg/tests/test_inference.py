import itertools

import numpy as np
import pytest

from hmmgaps.gaps import build_gap_tables
from hmmgaps.gibbs import joint_loglik
from hmmgaps.inference import (
    knapsack_init,
    label_sequence,
    longest_path_w,
    viterbi_with_placement,
    _even_runs,
    _prefix_argmax,
)
from hmmgaps.model import GaussianEmissions, HmmModel

from conftest import chain_model


def brute_best_path(model, obs, placement, full_len, omit):
    best, best_lp = None, -np.inf
    for path in itertools.product(range(model.n_states), repeat=full_len):
        lp = joint_loglik(
            model.trans, model.emission, obs, placement, full_len,
            np.array(path), omit, model.initial,
        )
        if lp > best_lp:
            best, best_lp = path, lp
    return np.array(best), best_lp


def test_viterbi_with_placement_matches_brute_force():
    model = chain_model(2, sigma=0.6, stay=0.35)
    obs = np.array([0.23, 0.81])
    placement = np.array([1, 3])
    omit = np.array([0.45, 0.3])
    got = viterbi_with_placement(
        model.trans, model.emission, obs, placement, 4, omit, model.initial
    )
    want, want_lp = brute_best_path(model, obs, placement, 4, omit)
    got_lp = joint_loglik(
        model.trans, model.emission, obs, placement, 4, got, omit,
        model.initial,
    )
    assert np.isclose(got_lp, want_lp)
    assert np.array_equal(got, want)


def test_viterbi_reduces_to_plain_decoding_without_deletions():
    model = chain_model(3, sigma=0.5, stay=0.5)
    obs = np.array([0.1, 1.2, 1.9, 0.4])
    got = viterbi_with_placement(
        model.trans, model.emission, obs, np.arange(4), 4, 0.0, model.initial
    )
    want, _ = brute_best_path(model, obs, np.arange(4), 4, np.zeros(3))
    assert np.array_equal(got, want)


def test_viterbi_validation():
    model = chain_model(2)
    with pytest.raises(ValueError, match="lengths differ"):
        viterbi_with_placement(
            model.trans, model.emission, np.array([0.1]), np.array([0, 1]),
            3, 0.2,
        )
    with pytest.raises(ValueError, match="beyond"):
        viterbi_with_placement(
            model.trans, model.emission, np.array([0.1]), np.array([5]),
            3, 0.2,
        )
    with pytest.raises(ValueError, match="length 2"):
        viterbi_with_placement(
            model.trans, model.emission, np.array([0.1]), np.array([0]),
            3, np.array([0.2, 0.2, 0.2]),
        )


def test_prefix_argmax_oracle():
    best, idx = _prefix_argmax(np.array([1.0, 3.0, 2.0, 3.0]))
    assert best.tolist() == [1.0, 3.0, 3.0, 3.0]
    assert idx.tolist() == [0, 1, 1, 1]  # first index attaining the max


def brute_longest_path(states, obs, emission, bonus=None):
    reward = emission.loglik_matrix(obs)[:, states]
    if bonus is not None:
        reward = reward + bonus[None, :]
    best, best_val = None, -np.inf
    for comb in itertools.combinations(range(states.size), obs.size):
        val = sum(reward[k, t] for k, t in enumerate(comb))
        if val > best_val:
            best, best_val = comb, val
    return np.array(best), best_val


def test_longest_path_w_matches_enumeration(rng):
    em = GaussianEmissions(np.array([-0.5, 0.4, 1.3]), 0.7)
    for trial in range(5):
        states = rng.integers(0, 3, size=8)
        obs = rng.normal(0.4, 1.0, size=3)
        got = longest_path_w(states, obs, em)
        want, want_val = brute_longest_path(states, obs, em)
        got_val = sum(
            em.loglik_matrix(obs)[k, states[t]] for k, t in enumerate(got)
        )
        assert np.isclose(got_val, want_val)
        assert np.array_equal(got, want)


def test_longest_path_w_with_node_bonus(rng):
    em = GaussianEmissions(np.array([0.0, 1.0]), 0.5)
    states = rng.integers(0, 2, size=7)
    obs = rng.normal(0.5, 0.8, size=4)
    bonus = rng.normal(0.0, 2.0, size=7)
    got = longest_path_w(states, obs, em, node_bonus=bonus)
    want, _ = brute_longest_path(states, obs, em, bonus=bonus)
    assert np.array_equal(got, want)


def test_longest_path_w_edge_cases():
    em = GaussianEmissions(np.array([0.0]), 1.0)
    assert longest_path_w(np.array([0, 0]), np.empty(0), em).size == 0
    with pytest.raises(ValueError, match="cannot place"):
        longest_path_w(np.array([0]), np.array([0.1, 0.2]), em)


def test_most_likely_placement_worked_instance():
    # alternating three-state walk; each observation snaps to the position
    # whose state mean matches it best, in increasing order
    em = GaussianEmissions(np.array([0.0, 1.0, 2.0]), 0.5)
    states = np.array([0, 1, 2, 0, 1, 2])
    obs = np.array([1.0, 2.0, 1.0, 2.0])
    got = longest_path_w(states, obs, em)
    assert got.tolist() == [1, 2, 4, 5]
    want, _ = brute_longest_path(states, obs, em)
    assert np.array_equal(got, want)


def brute_knapsack(tables, proxy, full_len):
    n_obs = proxy.size
    budget = full_len - n_obs
    cap = tables.max_gap

    def slot_weights(slot):
        if slot == 0:
            w = tables.lead[:, proxy[0]]
        elif slot < n_obs:
            w = tables.step[:, proxy[slot - 1], proxy[slot]]
        else:
            w = tables.step[:, proxy[-1], :].mean(axis=1)
        total = w.sum()
        with np.errstate(divide="ignore"):
            return np.where(w > 0, np.log(w / max(total, 1e-300)), -np.inf)

    logw = [slot_weights(s) for s in range(n_obs + 1)]
    best, best_val = None, -np.inf
    for runs in itertools.product(range(cap + 1), repeat=n_obs + 1):
        if sum(runs) != budget:
            continue
        val = sum(logw[s][d] for s, d in enumerate(runs))
        if val > best_val:
            best, best_val = runs, val
    return np.array(best), best_val


def test_knapsack_init_matches_enumeration(rng):
    gen = np.random.default_rng(21)
    trans = gen.dirichlet(np.ones(2), size=2)
    tables = build_gap_tables(trans, np.array([0.55, 0.35]), max_gap=4)
    for full_len in (6, 8, 10):
        proxy = gen.integers(0, 2, size=3)
        got = knapsack_init(tables, proxy, full_len)
        want, want_val = brute_knapsack(tables, proxy, full_len)
        assert got.sum() + proxy.size == full_len
        got_val = brute_knapsack(tables, proxy, full_len)[1]
        assert np.array_equal(got, want) or np.isclose(got_val, want_val)


def test_knapsack_init_validation():
    tables = build_gap_tables(
        np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.4, 0.4]), max_gap=2
    )
    with pytest.raises(ValueError, match="at least one"):
        knapsack_init(tables, np.empty(0, dtype=int), 4)
    with pytest.raises(ValueError, match="exceed"):
        knapsack_init(tables, np.array([0, 1, 0]), 2)
    # deterministic flip chain with zero omission: like-state steps carry no
    # mass at any run length, so no profile exists
    dead = build_gap_tables(
        np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.0, 0.0]), max_gap=3
    )
    with pytest.raises(RuntimeError, match="no run profile"):
        knapsack_init(dead, np.array([0, 0]), 2)


def test_even_runs_arithmetic():
    assert _even_runs(7, 3, 3).tolist() == [3, 2, 2]
    assert _even_runs(0, 2, 5).tolist() == [0, 0]
    with pytest.raises(RuntimeError, match="cannot be covered"):
        _even_runs(9, 2, 3)


def test_label_sequence_monotone_and_consistent():
    model = chain_model(3, sigma=0.15, stay=0.25)
    gen = np.random.default_rng(6)
    states, obs = (
        np.array([0, 1, 2, 0, 1, 2, 0, 1, 2, 0]),
        None,
    )
    obs = gen.normal(model.emission.means[states], 0.15)
    keep = np.array([0, 2, 3, 5, 8])
    result = label_sequence(
        model, obs[keep], full_len=10, omit_probs=np.full(3, 0.5)
    )
    assert result.converged
    assert result.states.shape == (10,)
    assert np.all(np.diff(result.placement) > 0)
    assert result.placement[-1] < 10
    assert np.array_equal(result.labels, result.states[result.placement])
    # both half-steps maximize one joint score
    assert np.all(np.diff(result.objectives) > -1e-9)
    assert len(result.objectives) == 2 * result.rounds


def test_label_sequence_exact_on_no_deletions():
    model = chain_model(2, sigma=0.3, stay=0.3)
    obs = np.array([0.05, 0.9, 1.1, 0.2])
    result = label_sequence(model, obs, full_len=4, omit_probs=0.0)
    assert result.placement.tolist() == [0, 1, 2, 3]
    want, _ = brute_best_path(model, obs, np.arange(4), 4, np.zeros(2))
    assert np.array_equal(result.states, want)


def test_label_sequence_validation():
    model = chain_model(2)
    with pytest.raises(ValueError, match="empty"):
        label_sequence(model, np.empty(0), 4, 0.3)
    with pytest.raises(ValueError, match="smaller"):
        label_sequence(model, np.array([0.1, 0.2]), 1, 0.3)
    with pytest.raises(RuntimeError, match="cannot be covered"):
        label_sequence(model, np.array([0.1]), 20, 0.3, max_gap=2)
