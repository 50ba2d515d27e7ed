import itertools

import numpy as np
import pytest

from hmmgaps.gaps import (
    GapTables,
    build_gap_tables,
    fit_gaps,
    gap_distribution,
    placement_from_gaps,
    placement_matrix,
    sample_gap,
    sample_leading_gap,
    sample_walk_given_gaps,
    _observation_evidence,
    _sample_gaps_batch,
    _sample_walk_marginal,
)
from hmmgaps.gibbs import GibbsConfig, SentenceBatch
from hmmgaps.model import GaussianEmissions, aligned_l1
from hmmgaps.omission import OmittedSentence, StateOmission, generate_dataset

from conftest import chain_model


def brute_run_weight(trans, psi, a, b, d):
    """Weight of a length-d deleted run between kept states a and b."""
    n = trans.shape[0]
    if d == 0:
        return trans[a, b]
    total = 0.0
    for path in itertools.product(range(n), repeat=d):
        w = trans[a, path[0]] * psi[path[0]]
        for i in range(d - 1):
            w *= trans[path[i], path[i + 1]] * psi[path[i + 1]]
        w *= trans[path[-1], b]
        total += w
    return total


def brute_lead_weight(trans, psi, initial, b, d):
    n = trans.shape[0]
    if d == 0:
        return initial[b]
    total = 0.0
    for path in itertools.product(range(n), repeat=d):
        w = initial[path[0]] * psi[path[0]]
        for i in range(d - 1):
            w *= trans[path[i], path[i + 1]] * psi[path[i + 1]]
        w *= trans[path[-1], b]
        total += w
    return total


def test_run_tables_match_brute_force_enumeration():
    gen = np.random.default_rng(3)
    trans = gen.dirichlet(np.ones(3), size=3)
    psi = np.array([0.3, 0.55, 0.7])
    tables = build_gap_tables(trans, psi, max_gap=4)
    initial = np.full(3, 1.0 / 3.0)
    for d in range(5):
        for a in range(3):
            for b in range(3):
                assert abs(
                    tables.step[d, a, b] - brute_run_weight(trans, psi, a, b, d)
                ) < 1e-10
            assert abs(
                tables.lead[d, a] - brute_lead_weight(trans, psi, initial, a, d)
            ) < 1e-10
    assert np.allclose(tables.step_any, tables.step.sum(axis=0))
    assert np.allclose(tables.lead_any, tables.lead.sum(axis=0))


def test_run_tables_are_kernel_powers():
    gen = np.random.default_rng(9)
    trans = gen.dirichlet(np.ones(4), size=4)
    psi = gen.uniform(0.1, 0.9, size=4)
    tables = build_gap_tables(trans, psi, max_gap=6)
    m = trans * psi[None, :]
    for d in range(7):
        expect = np.linalg.matrix_power(m, d) @ trans
        assert np.allclose(tables.step[d], expect, atol=1e-12)


def test_gap_distribution_flip_chain_oracle():
    # deterministic flip chain at half deletion: runs between unlike kept
    # states must have even length with geometrically decaying mass
    tables = build_gap_tables(
        np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]), max_gap=4
    )
    law = gap_distribution(tables, 0, 1)
    assert np.allclose(law, [16 / 21, 0.0, 4 / 21, 0.0, 1 / 21])
    with pytest.raises(RuntimeError, match="no run length"):
        gap_distribution(
            build_gap_tables(
                np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]),
                max_gap=0,
            ),
            0, 0,
        )


def test_build_gap_tables_validation():
    trans = np.array([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ValueError, match="length"):
        build_gap_tables(trans, np.array([0.5]), max_gap=3)
    with pytest.raises(ValueError, match="non-negative"):
        build_gap_tables(trans, np.array([0.5, 0.5]), max_gap=-1)


def test_check_version_guards_stale_tables():
    tables = build_gap_tables(
        np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.3, 0.3]),
        max_gap=2, version=3,
    )
    tables.check_version(3)
    with pytest.raises(RuntimeError, match="version"):
        tables.check_version(2)


def test_placement_reconstruction():
    assert placement_from_gaps(np.array([2, 0, 3])).tolist() == [2, 3, 7]
    assert placement_from_gaps(np.array([0, 0])).tolist() == [0, 1]
    gaps = np.array([[1, 2, 0], [0, 0, 5]])
    k_mask = np.array([[True, True, True], [True, True, False]])
    out = placement_matrix(gaps, k_mask)
    assert out[0].tolist() == [1, 4, 5]
    assert out[1].tolist() == [0, 1, 0]  # padding pinned to zero


def test_sample_gap_frequencies(rng):
    tables = build_gap_tables(
        np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]), max_gap=4
    )
    draws = np.array([sample_gap(tables, 0, 1, rng) for _ in range(8000)])
    freq = np.bincount(draws, minlength=5) / draws.size
    assert abs(freq[0] - 16 / 21) < 0.02
    assert freq[1] == 0.0 and freq[3] == 0.0
    assert abs(freq[2] - 4 / 21) < 0.02
    with pytest.raises(RuntimeError, match="connects"):
        sample_gap(
            build_gap_tables(
                np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]),
                max_gap=0,
            ),
            0, 0, rng,
        )


def test_sample_leading_gap_frequencies(rng):
    trans = np.array([[0.6, 0.4], [0.3, 0.7]])
    psi = np.array([0.5, 0.5])
    tables = build_gap_tables(trans, psi, max_gap=3)
    draws = np.array([sample_leading_gap(tables, 1, rng) for _ in range(8000)])
    expect = tables.lead[:, 1] / tables.lead[:, 1].sum()
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.abs(freq - expect).max() < 0.02


def blocked_target(trans, psi, means, sigma, obs, max_gap):
    """Exact joint law of (condensed walk, runs) for a two-observation
    sentence, by direct summation."""
    tables = build_gap_tables(trans, psi, max_gap)
    em = GaussianEmissions(means, sigma)
    dens = np.exp(em.loglik_matrix(obs))
    keep = 1.0 - psi
    atoms = {}
    n = trans.shape[0]
    for w0, w1 in itertools.product(range(n), repeat=2):
        for g0, g1 in itertools.product(range(max_gap + 1), repeat=2):
            p = (
                tables.lead[g0, w0] * keep[w0] * dens[0, w0]
                * tables.step[g1, w0, w1] * keep[w1] * dens[1, w1]
            )
            atoms[(w0, w1, g0, g1)] = p
    z = sum(atoms.values())
    return {k: v / z for k, v in atoms.items()}


def test_blocked_walk_and_run_draw_matches_enumeration(rng):
    trans = np.array([[0.7, 0.3], [0.4, 0.6]])
    psi = np.array([0.4, 0.25])
    means = np.array([0.0, 1.0])
    obs = np.array([0.3, 0.9])
    max_gap = 2
    exact = blocked_target(trans, psi, means, 0.6, obs, max_gap)

    n_draws = 30_000
    tables = build_gap_tables(trans, psi, max_gap)
    batch = SentenceBatch([
        OmittedSentence(obs=obs) for _ in range(n_draws)
    ])
    em = GaussianEmissions(means, 0.6)
    obs_evid = _observation_evidence(batch, batch.obs_loglik(em), psi)
    walk = _sample_walk_marginal(tables, obs_evid, batch.k_lens, rng)
    gaps = _sample_gaps_batch(tables, walk, batch.k_lens, batch.k_mask, rng)
    freq = {}
    for w, g in zip(walk, gaps):
        key = (w[0], w[1], g[0], g[1])
        freq[key] = freq.get(key, 0) + 1 / n_draws
    tv = 0.5 * sum(
        abs(exact.get(k, 0.0) - freq.get(k, 0.0))
        for k in set(exact) | set(freq)
    )
    assert tv < 0.03


def test_sample_walk_given_gaps_matches_enumeration(rng):
    trans = np.array([[0.7, 0.3], [0.4, 0.6]])
    psi = np.array([0.4, 0.25])
    means = np.array([0.0, 1.0])
    obs = np.array([0.3, 0.9])
    tables = build_gap_tables(trans, psi, max_gap=2)
    em = GaussianEmissions(means, 0.6)
    gaps = np.array([1, 2])

    dens = np.exp(em.loglik_matrix(obs))
    keep = 1.0 - psi
    atoms = {}
    for w0, w1 in itertools.product(range(2), repeat=2):
        atoms[(w0, w1)] = (
            tables.lead[1, w0] * keep[w0] * dens[0, w0]
            * tables.step[2, w0, w1] * keep[w1] * dens[1, w1]
        )
    z = sum(atoms.values())

    counts = {}
    for _ in range(6000):
        w = tuple(sample_walk_given_gaps(tables, gaps, obs, em, psi, rng))
        counts[w] = counts.get(w, 0) + 1 / 6000
    tv = 0.5 * sum(
        abs(atoms[k] / z - counts.get(k, 0.0)) for k in atoms
    )
    assert tv < 0.03


def test_sample_walk_given_gaps_validation(rng):
    tables = build_gap_tables(
        np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.3, 0.3]), max_gap=2
    )
    em = GaussianEmissions(np.array([0.0, 1.0]), 0.5)
    psi = np.array([0.3, 0.3])
    with pytest.raises(ValueError, match="one run length"):
        sample_walk_given_gaps(tables, [0], np.array([0.1, 0.2]), em, psi, rng)
    with pytest.raises(ValueError, match="cap"):
        sample_walk_given_gaps(tables, [3, 0], np.array([0.1, 0.2]), em, psi, rng)
    out = sample_walk_given_gaps(
        tables, np.empty(0, dtype=int), np.empty(0), em, psi, rng
    )
    assert out.size == 0


def test_fit_gaps_determinism_and_bookkeeping():
    model = chain_model(3, sigma=0.1, stay=0.2)
    dataset = generate_dataset(
        model, StateOmission(np.full(3, 0.4)), n_sentences=40,
        full_len=20, rng=np.random.default_rng(5),
    )
    dataset.append(OmittedSentence(obs=np.empty(0)))
    config = GibbsConfig(n_iterations=25, burn_in=5, seed=3)
    out1 = fit_gaps(dataset, 3, np.full(3, 0.4), config=config)
    out2 = fit_gaps(dataset, 3, np.full(3, 0.4), config=config)
    assert out1.skipped == 1
    assert np.array_equal(out1.model.trans, out2.model.trans)
    assert np.allclose(out1.omit_probs, 0.4)
    assert len(out1.diagnostics) == 25


def test_fit_gaps_recovers_separated_chain():
    model = chain_model(3, sigma=0.1, stay=0.2)
    dataset = generate_dataset(
        model, StateOmission(np.full(3, 0.3)), n_sentences=80,
        full_len=30, rng=np.random.default_rng(11),
    )
    config = GibbsConfig(n_iterations=120, burn_in=60, seed=0)
    out = fit_gaps(dataset, 3, np.full(3, 0.3), config=config)
    assert aligned_l1(out.model, model) < 0.5
