"""Reference fitters: gap-blind, truth-placement, and perturbed placements.

The gap-blind fit treats the kept observations as a complete trajectory,
which converges to the thinned-chain transition matrix rather than the
original one.  The truth-placement fit conditions on the real deletion
positions and serves as the upper benchmark.  The placement perturbations
feed deliberately wrong positions to the truth-placement fit to measure
how sensitive it is.
"""

from __future__ import annotations

import numpy as np

from .gibbs import (
    FitResult,
    GibbsConfig,
    PosteriorMean,
    Priors,
    SentenceBatch,
    batch_joint_loglik,
    count_transitions,
    diagnostics_row,
    emission_params,
    init_parameters,
    local_evidence,
    log_probs,
    omission_counts,
    resolve_omit_probs,
    sample_omit_probs,
    sample_transitions,
    states_at_placement,
    summarize_posterior,
    update_emission,
    _sample_paths,
)
from .model import CategoricalEmissions, HmmModel
from .omission import OmittedSentence


def fit_known_w(
    dataset: list[OmittedSentence],
    n_states: int,
    omit_probs,
    config: GibbsConfig | None = None,
    priors: Priors | None = None,
    truth: HmmModel | None = None,
    n_symbols: int | None = None,
) -> FitResult:
    """Gibbs fit conditioned on the true deletion positions.

    Every sentence must carry its placement and original length.  Omission
    probabilities are taken as given under the default ``fixed`` mode and
    resampled per state under the ``sample-*`` modes.
    """
    config = config or GibbsConfig()
    batch = SentenceBatch(dataset)
    if batch.placements is None or batch.full_lens is None:
        raise ValueError("truth-placement fit needs placement and full_len")
    rng = np.random.default_rng(config.seed)
    trans, emission, priors = init_parameters(
        batch, n_states, config, rng, priors, n_symbols
    )
    omit, sample_mask = resolve_omit_probs(omit_probs, n_states, config.omit_mode)
    log_init = log_probs(np.full(n_states, 1.0 / n_states))
    evid = local_evidence(
        batch, batch.obs_loglik(emission), omit, batch.placements, batch.full_lens
    )
    paths = _sample_paths(log_init, trans, evid, batch.full_lens, rng)
    post = PosteriorMean()
    diagnostics = []
    for it in range(config.n_iterations):
        kept_states = states_at_placement(paths, batch.placements)
        emission = update_emission(emission, kept_states, batch, priors, config, rng)
        trans = sample_transitions(
            count_transitions(paths, batch.full_lens, n_states),
            priors.trans_alpha, rng,
        )
        if sample_mask.any():
            kept, deleted = omission_counts(
                paths, batch.full_lens, kept_states, batch.k_mask, n_states
            )
            draw = sample_omit_probs(kept, deleted, priors.keep_beta, rng)
            omit = np.where(sample_mask, draw, omit)
        evid = local_evidence(
            batch, batch.obs_loglik(emission), omit,
            batch.placements, batch.full_lens,
        )
        paths = _sample_paths(log_init, trans, evid, batch.full_lens, rng)
        logliks = batch_joint_loglik(evid, paths, trans, batch.full_lens)
        diagnostics.append(diagnostics_row(it, logliks, emission, trans, truth))
        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            post.add(trans, emission_params(emission), omit)
    return summarize_posterior(post, emission, config, diagnostics, batch.skipped)


def fit_naive(
    dataset: list[OmittedSentence],
    n_states: int,
    config: GibbsConfig | None = None,
    priors: Priors | None = None,
    truth: HmmModel | None = None,
    n_symbols: int | None = None,
) -> FitResult:
    """Gap-blind Gibbs fit: observations are treated as a full trajectory.

    Only the kept values are used; any placement or length information on
    the sentences is ignored.  On thinned data this estimates the observed
    chain, which the closed-form transform maps to exactly.
    """
    config = config or GibbsConfig()
    if config.omit_mode != "fixed":
        raise ValueError("gap-blind fit has no omission structure to sample")
    gapless = [
        OmittedSentence(
            obs=s.obs, placement=np.arange(s.n_obs), full_len=int(s.n_obs)
        )
        for s in dataset
        if s.n_obs > 0
    ]
    gapless.extend(
        OmittedSentence(obs=s.obs, placement=None, full_len=None)
        for s in dataset
        if s.n_obs == 0
    )
    return fit_known_w(
        gapless, n_states, np.zeros(n_states), config, priors, truth, n_symbols
    )


def count_pair_fit(dataset: list[OmittedSentence], n_states: int) -> HmmModel:
    """Empirical pair-count estimate for directly observed state sequences.

    A gap-blind maximum-likelihood estimator for the non-hidden case:
    observations are state indices and consecutive kept pairs are counted.
    Rows never visited fall back to uniform.  Emissions are the identity.
    """
    counts = np.zeros((n_states, n_states))
    for s in dataset:
        seq = np.asarray(s.obs, dtype=np.intp)
        if seq.size and (seq.min() < 0 or seq.max() >= n_states):
            raise ValueError("observation outside the state range")
        np.add.at(counts, (seq[:-1], seq[1:]), 1.0)
    sums = counts.sum(axis=1, keepdims=True)
    trans = np.where(sums > 0, counts / np.maximum(sums, 1.0), 1.0 / n_states)
    return HmmModel(trans=trans, emission=CategoricalEmissions(np.eye(n_states)))


# ---------------------------------------------------------------------------
# Placement perturbations


def random_placement(
    sentence: OmittedSentence, rng: np.random.Generator
) -> OmittedSentence:
    """Replace the placement by a uniform strictly increasing one."""
    if sentence.placement is None or sentence.full_len is None:
        raise ValueError("perturbation needs placement and full_len")
    new = np.sort(rng.choice(sentence.full_len, size=sentence.n_obs, replace=False))
    return OmittedSentence(
        obs=sentence.obs, placement=new.astype(np.intp),
        full_len=sentence.full_len, states=sentence.states,
    )


def equivalent_placement(
    sentence: OmittedSentence, rng: np.random.Generator
) -> OmittedSentence:
    """Move each kept index onto another position with the same true state.

    Scans left to right and draws uniformly among the positions strictly
    between the already-moved left neighbor and the original right neighbor
    whose latent state matches; the original index is always a candidate, so
    the result stays feasible.
    """
    if sentence.states is None:
        raise ValueError("state-preserving perturbation needs the true states")
    if sentence.placement is None or sentence.full_len is None:
        raise ValueError("perturbation needs placement and full_len")
    placement = sentence.placement
    states = sentence.states
    new = np.empty_like(placement)
    prev = -1
    for k in range(placement.size):
        right = placement[k + 1] if k + 1 < placement.size else sentence.full_len
        window = np.arange(prev + 1, right)
        matches = window[states[window] == states[placement[k]]]
        new[k] = rng.choice(matches)
        prev = new[k]
    return OmittedSentence(
        obs=sentence.obs, placement=new, full_len=sentence.full_len,
        states=sentence.states,
    )


def consecutive_placement(
    sentence: OmittedSentence, rng: np.random.Generator
) -> OmittedSentence:
    """Keep runs of adjacent kept indices intact but shift them around.

    Run lengths are preserved; the slack positions are redistributed
    uniformly among the gaps before, between (at least one), and after the
    runs.
    """
    if sentence.placement is None or sentence.full_len is None:
        raise ValueError("perturbation needs placement and full_len")
    placement = sentence.placement
    if placement.size == 0:
        return sentence
    breaks = np.nonzero(np.diff(placement) > 1)[0]
    run_lens = np.diff(np.concatenate(([0], breaks + 1, [placement.size])))
    n_runs = run_lens.size
    slack = sentence.full_len - int(placement.size) - (n_runs - 1)
    parts = _uniform_composition(slack, n_runs + 1, rng)
    gaps = parts.copy()
    gaps[1:-1] += 1  # interior gaps keep runs separated
    new = np.empty_like(placement)
    cursor = 0
    out = 0
    for i, run_len in enumerate(run_lens):
        cursor += gaps[i]
        new[out : out + run_len] = np.arange(cursor, cursor + run_len)
        cursor += run_len
        out += run_len
    return OmittedSentence(
        obs=sentence.obs, placement=new, full_len=sentence.full_len,
        states=sentence.states,
    )


def _uniform_composition(total: int, parts: int, rng: np.random.Generator):
    """Uniform draw of non-negative integers summing to ``total``."""
    if total < 0:
        raise ValueError("placement runs do not fit the original length")
    if total == 0:
        return np.zeros(parts, dtype=np.intp)
    cuts = np.sort(rng.choice(total + parts - 1, size=parts - 1, replace=False))
    edges = np.concatenate(([-1], cuts, [total + parts - 1]))
    return (np.diff(edges) - 1).astype(np.intp)


PLACEMENT_PERTURBATIONS = {
    "random-w": random_placement,
    "equivalent-w": equivalent_placement,
    "consecutive-w": consecutive_placement,
}


def perturb_dataset(
    dataset: list[OmittedSentence], kind: str, rng: np.random.Generator
) -> list[OmittedSentence]:
    try:
        fn = PLACEMENT_PERTURBATIONS[kind]
    except KeyError:
        raise ValueError(
            f"unknown perturbation {kind!r}; expected one of "
            f"{sorted(PLACEMENT_PERTURBATIONS)}"
        )
    return [fn(s, rng) if s.n_obs else s for s in dataset]
