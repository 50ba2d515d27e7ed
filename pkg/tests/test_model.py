import json

import numpy as np
import pytest

from hmmgaps.model import (
    CategoricalEmissions,
    GaussianEmissions,
    HmmModel,
    align_states,
    aligned_l1,
    l1_transition_distance,
    load_model,
    permute_states,
    sample_trajectories,
    save_model,
    stationary_distribution,
)

from conftest import chain_model


def test_row_stochastic_validation():
    with pytest.raises(ValueError, match="sums to"):
        HmmModel(
            trans=np.array([[0.5, 0.4], [0.5, 0.5]]),
            emission=GaussianEmissions(np.array([0.0, 1.0]), 0.1),
        )
    with pytest.raises(ValueError, match="negative"):
        HmmModel(
            trans=np.array([[1.2, -0.2], [0.5, 0.5]]),
            emission=GaussianEmissions(np.array([0.0, 1.0]), 0.1),
        )


def test_emission_state_count_must_match():
    with pytest.raises(ValueError, match="emission describes"):
        HmmModel(
            trans=np.eye(3),
            emission=GaussianEmissions(np.array([0.0, 1.0]), 0.1),
        )


def test_initial_defaults_to_uniform():
    model = chain_model(4)
    assert np.allclose(model.initial, 0.25)


def test_gaussian_loglik_matrix_matches_density():
    em = GaussianEmissions(np.array([0.0, 2.0]), 0.5)
    obs = np.array([0.3, 1.9])
    grid = em.loglik_matrix(obs)
    for k, x in enumerate(obs):
        for s, mu in enumerate([0.0, 2.0]):
            expect = -0.5 * ((x - mu) / 0.5) ** 2 - np.log(
                0.5 * np.sqrt(2 * np.pi)
            )
            assert np.isclose(grid[k, s], expect)


def test_categorical_loglik_and_vocab():
    em = CategoricalEmissions(
        np.array([[0.7, 0.3], [0.1, 0.9]]), vocab=["a", "b"]
    )
    grid = em.loglik_matrix(np.array([1, 0]))
    assert np.isclose(grid[0, 1], np.log(0.9))
    assert np.isclose(grid[1, 0], np.log(0.7))
    assert em.n_symbols == 2
    with pytest.raises(ValueError):
        CategoricalEmissions(np.array([[0.7, 0.3], [0.1, 0.9]]), vocab=["a"])


def test_save_load_round_trip(tmp_path):
    model = chain_model(3, sigma=0.25)
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.trans, model.trans)
    assert np.array_equal(back.initial, model.initial)
    assert isinstance(back.emission, GaussianEmissions)
    assert np.array_equal(back.emission.means, model.emission.means)
    # writing again is byte-identical
    path2 = tmp_path / "m2.json"
    save_model(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_save_load_categorical(tmp_path):
    model = HmmModel(
        trans=np.array([[0.4, 0.6], [0.9, 0.1]]),
        emission=CategoricalEmissions(
            np.array([[0.5, 0.25, 0.25], [0.2, 0.3, 0.5]]), vocab=["x", "y", "z"]
        ),
    )
    path = tmp_path / "c.json"
    save_model(model, path)
    back = load_model(path)
    assert isinstance(back.emission, CategoricalEmissions)
    assert np.array_equal(back.emission.probs, model.emission.probs)
    assert back.emission.vocab == ["x", "y", "z"]
    payload = json.loads(path.read_text())
    assert set(payload) == {"n_states", "T", "emission", "initial"}


def test_align_states_worked_example():
    truth = HmmModel(
        trans=np.eye(3), emission=GaussianEmissions(np.array([0.0, 1.0, 2.0]), 0.1)
    )
    learned = HmmModel(
        trans=np.eye(3),
        emission=GaussianEmissions(np.array([2.01, 0.01, 1.02]), 0.1),
    )
    perm = align_states(learned, truth)
    assert perm.tolist() == [2, 0, 1]


def test_aligned_l1_is_zero_under_relabeling(rng):
    model = chain_model(4, stay=0.5)
    perm = np.array([2, 3, 1, 0])
    shuffled = permute_states(model, np.argsort(perm))
    assert aligned_l1(shuffled, model) < 1e-12


def test_permute_states_round_trip():
    model = chain_model(4, stay=0.4)
    perm = np.array([3, 0, 2, 1])
    back = permute_states(permute_states(model, perm), np.argsort(perm))
    assert np.allclose(back.trans, model.trans)
    assert np.allclose(back.emission.means, model.emission.means)


def test_l1_transition_distance_weighted():
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = np.array([[0.5, 0.5], [0.0, 1.0]])
    assert np.isclose(l1_transition_distance(a, b), 0.5)
    assert np.isclose(
        l1_transition_distance(a, b, weights=np.array([1.0, 0.0])), 1.0
    )


def test_stationary_distribution_matches_eigenvector(rng):
    trans = rng.dirichlet(np.ones(5), size=5)
    pi = stationary_distribution(trans)
    assert np.linalg.norm(pi @ trans - pi, 1) < 1e-9
    # direct eigen solve agrees
    vals, vecs = np.linalg.eig(trans.T)
    lead = np.real(vecs[:, np.argmax(np.real(vals))])
    lead = np.abs(lead) / np.abs(lead).sum()
    assert np.abs(pi - lead).max() < 1e-8


def test_stationary_distribution_periodic_chain():
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    pi = stationary_distribution(flip)
    assert np.allclose(pi, [0.5, 0.5], atol=1e-10)


def test_sample_trajectories_shapes_and_determinism():
    model = chain_model(3)
    a_states, a_obs = sample_trajectories(
        model, 4, 7, np.random.default_rng(9)
    )
    b_states, b_obs = sample_trajectories(
        model, 4, 7, np.random.default_rng(9)
    )
    assert a_states.shape == (4, 7) and a_obs.shape == (4, 7)
    assert np.array_equal(a_states, b_states)
    assert np.array_equal(a_obs, b_obs)
    assert a_states.min() >= 0 and a_states.max() < 3


def test_trajectory_transition_frequencies(rng):
    model = chain_model(3, stay=0.6)
    states, _ = sample_trajectories(model, 200, 50, rng)
    stay_rate = np.mean(states[:, 1:] == states[:, :-1])
    assert abs(stay_rate - 0.6) < 0.03
