"""Placement sampler for the unknown-length case.

Instead of positions, the latent structure is the run of deleted states
before each observation.  With M[i, j] = T[i, j] * omit(j), the weight of a
run of length d between kept states a and b is (M^d T)[a, b]; those powers
are precomputed once per parameter update into a table, after which both
the gap draws and the condensed-walk draws are table lookups.  The original
length is reconstructed as the number of observations plus the sampled
runs, with no run modeled after the last observation.
"""

from __future__ import annotations

from dataclasses import dataclass

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
    resolve_max_gap,
    resolve_omit_probs,
    sample_omit_probs,
    sample_transitions,
    states_at_placement,
    summarize_posterior,
    update_emission,
    _sample_paths,
    _sample_rows,
)
from .model import LOG_ZERO, HmmModel
from .omission import OmittedSentence


@dataclass
class GapTables:
    """Precomputed run weights for one (transitions, omissions) snapshot.

    step[d] = (M^d T) weighs a run of d deleted states between two kept
    states; lead[d] does the same from the chain start, folding in the
    initial distribution.  step_any / lead_any sum those over d, giving the
    pair weights with the run length integrated out.  ``version`` tags the
    parameter snapshot the tables were built from so stale use is
    detectable.
    """

    step: np.ndarray        # (max_gap + 1, n, n)
    lead: np.ndarray        # (max_gap + 1, n)
    step_any: np.ndarray    # (n, n)
    lead_any: np.ndarray    # (n,)
    max_gap: int
    version: int = 0

    @property
    def n_states(self) -> int:
        return self.step.shape[1]

    def check_version(self, expected: int) -> None:
        if self.version != expected:
            raise RuntimeError(
                f"gap tables built for parameter version {self.version}, "
                f"expected {expected}"
            )


def build_gap_tables(
    trans: np.ndarray,
    omit_probs: np.ndarray,
    max_gap: int,
    initial: np.ndarray | None = None,
    version: int = 0,
) -> GapTables:
    """Tabulate (M^d T) and the leading-run rows for d = 0 .. max_gap."""
    trans = np.asarray(trans, dtype=np.float64)
    omit_probs = np.asarray(omit_probs, dtype=np.float64)
    n = trans.shape[0]
    if omit_probs.shape != (n,):
        raise ValueError("omit_probs length must match the state count")
    if max_gap < 0:
        raise ValueError("max_gap must be non-negative")
    if initial is None:
        initial = np.full(n, 1.0 / n)
    deleted_step = trans * omit_probs[None, :]
    step = np.empty((max_gap + 1, n, n))
    step[0] = trans
    for d in range(1, max_gap + 1):
        step[d] = deleted_step @ step[d - 1]
    lead = np.empty((max_gap + 1, n))
    lead[0] = initial
    start = initial * omit_probs
    for d in range(1, max_gap + 1):
        lead[d] = start @ step[d - 1]
    return GapTables(
        step=step,
        lead=lead,
        step_any=step.sum(axis=0),
        lead_any=lead.sum(axis=0),
        max_gap=max_gap,
        version=version,
    )


def sample_gap(
    tables: GapTables, a: int, b: int, rng: np.random.Generator
) -> int:
    """Draw the deleted-run length between kept states a and b."""
    weights = tables.step[:, a, b]
    total = weights.sum()
    if total <= 0.0:
        raise RuntimeError(
            f"no run length up to {tables.max_gap} connects states {a} -> {b}"
        )
    u = rng.random() * total
    return int(np.minimum(np.searchsorted(np.cumsum(weights), u), tables.max_gap))


def sample_leading_gap(
    tables: GapTables, b: int, rng: np.random.Generator
) -> int:
    """Draw the deleted-run length before the first kept state b."""
    weights = tables.lead[:, b]
    total = weights.sum()
    if total <= 0.0:
        raise RuntimeError(
            f"no leading run up to {tables.max_gap} reaches state {b}"
        )
    u = rng.random() * total
    return int(np.minimum(np.searchsorted(np.cumsum(weights), u), tables.max_gap))


def gap_distribution(tables: GapTables, a: int, b: int) -> np.ndarray:
    """Normalized run-length law between kept states a and b."""
    weights = tables.step[:, a, b]
    total = weights.sum()
    if total <= 0.0:
        raise RuntimeError(f"no run length connects states {a} -> {b}")
    return weights / total


def placement_from_gaps(gaps: np.ndarray) -> np.ndarray:
    """Kept indices implied by per-observation deleted runs."""
    gaps = np.asarray(gaps, dtype=np.intp)
    return np.cumsum(gaps) + np.arange(gaps.size)


def placement_matrix(gaps: np.ndarray, k_mask: np.ndarray) -> np.ndarray:
    """Batched placement_from_gaps; padded slots pinned to index 0."""
    k_max = gaps.shape[1]
    return np.where(
        k_mask, np.cumsum(gaps, axis=1) + np.arange(k_max)[None, :], 0
    )


def _sample_gaps_batch(tables, walk, k_lens, k_mask, rng):
    """Redraw every deleted run given the condensed walk, (B, K) padded."""
    size, k_max = walk.shape
    weights = np.empty((tables.max_gap + 1, size, k_max))
    weights[:, :, 0] = tables.lead[:, walk[:, 0]]
    if k_max > 1:
        weights[:, :, 1:] = tables.step[:, walk[:, :-1], walk[:, 1:]]
    totals = weights.sum(axis=0)
    dead = (totals <= 0.0) & k_mask
    if dead.any():
        j, k = np.argwhere(dead)[0]
        raise RuntimeError(
            f"run weights vanished at observation {k} (sentence {j})"
        )
    cum = np.cumsum(weights, axis=0)
    u = rng.random((size, k_max)) * totals
    gaps = (cum < u[None, :, :]).sum(axis=0)
    gaps = np.minimum(gaps, tables.max_gap).astype(np.intp)
    gaps[~k_mask] = 0
    return gaps


def _sample_walk_batch(tables, gaps, obs_evid, k_lens, rng):
    """Draw condensed kept-state walks given runs and observation evidence.

    obs_evid holds log((1 - omit(x)) p(o_k | x)) per slot with zero padding;
    step kernels are table rows selected by each slot's run length.
    """
    size, k_max, n = obs_evid.shape
    suffix = np.empty_like(obs_evid)
    suffix[:, k_max - 1] = obs_evid[:, k_max - 1]
    for k in range(k_max - 2, -1, -1):
        nxt = suffix[:, k + 1]
        shift = nxt.max(axis=1)
        kernels = tables.step[gaps[:, k + 1]]
        mass = np.einsum("bxy,by->bx", kernels, np.exp(nxt - shift[:, None]))
        suffix[:, k] = np.maximum(
            obs_evid[:, k] + shift[:, None] + log_probs(mass), LOG_ZERO
        )
    walk = np.zeros((size, k_max), dtype=np.intp)
    lead_rows = log_probs(tables.lead[gaps[:, 0]])
    walk[:, 0] = _sample_rows(lead_rows + suffix[:, 0], rng, step=0)
    for k in range(1, k_max):
        rows = tables.step[gaps[:, k], walk[:, k - 1], :]
        logits = log_probs(rows) + suffix[:, k]
        walk[:, k] = _sample_rows(logits, rng, step=k)
    walk[~(np.arange(k_max)[None, :] < k_lens[:, None])] = 0
    return walk


def _sample_walk_marginal(tables, obs_evid, k_lens, rng):
    """Draw condensed walks with the run lengths integrated out.

    Uses the summed kernels, so consecutive kept states are weighted by the
    total mass of all run lengths connecting them.  Together with the exact
    run draw given the walk this is one ancestral sample of the whole
    (walk, runs) block: conditioning the walk on stale runs instead can
    deadlock when the transition matrix has hard zeros, because wrong run
    residues veto the true states and vice versa.
    """
    size, k_max, n = obs_evid.shape
    log_any = log_probs(tables.step_any)
    suffix = np.empty_like(obs_evid)
    suffix[:, k_max - 1] = obs_evid[:, k_max - 1]
    for k in range(k_max - 2, -1, -1):
        nxt = suffix[:, k + 1]
        shift = nxt.max(axis=1)
        mass = np.exp(nxt - shift[:, None]) @ tables.step_any.T
        val = np.maximum(
            obs_evid[:, k] + shift[:, None] + log_probs(mass), LOG_ZERO
        )
        # rows of the summed kernel exceed 1, so padding must stay inert
        suffix[:, k] = np.where((k_lens > k + 1)[:, None], val, obs_evid[:, k])
    walk = np.zeros((size, k_max), dtype=np.intp)
    walk[:, 0] = _sample_rows(
        log_probs(tables.lead_any)[None, :] + suffix[:, 0], rng, step=0
    )
    for k in range(1, k_max):
        logits = log_any[walk[:, k - 1]] + suffix[:, k]
        walk[:, k] = _sample_rows(logits, rng, step=k)
    walk[~(np.arange(k_max)[None, :] < k_lens[:, None])] = 0
    return walk


def sample_walk_given_gaps(
    tables: GapTables,
    gaps,
    obs,
    emission,
    omit_probs: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """One condensed walk for a single sentence, runs held fixed.

    The step-k kernel from a to b is the run table row step[d_k][a, b]; each
    slot carries the keep-probability and emission factors.
    """
    obs = np.asarray(obs)
    gaps = np.asarray(gaps, dtype=np.intp)
    if gaps.shape != (obs.size,):
        raise ValueError("need one run length per observation")
    if obs.size == 0:
        return np.empty(0, dtype=np.intp)
    if gaps.max(initial=0) > tables.max_gap:
        raise ValueError(f"run length beyond the table cap {tables.max_gap}")
    evid = (
        emission.loglik_matrix(obs) + log_probs(1.0 - omit_probs)[None, :]
    )[None, :, :]
    return _sample_walk_batch(
        tables, gaps[None, :], evid, np.array([obs.size]), rng
    )[0]


def _observation_evidence(batch, obs_loglik, omit_probs):
    evid = obs_loglik + log_probs(1.0 - omit_probs)[None, None, :]
    evid[~batch.k_mask] = 0.0
    return evid


def fit_gaps(
    dataset: list[OmittedSentence],
    n_states: int,
    omit_probs,
    config: GibbsConfig | None = None,
    priors: Priors | None = None,
    truth: HmmModel | None = None,
    n_symbols: int | None = None,
    init_trans: np.ndarray | None = None,
) -> FitResult:
    """Gibbs fit with unknown placements and unknown original lengths.

    Requires per-state omission probabilities (or entries to sample, under
    the ``sample-*`` modes).  Placement and length information on the input
    sentences, if any, is ignored.  Run-weight tables are rebuilt after
    every transition or omission update and version-checked at each use.
    """
    config = config or GibbsConfig()
    batch = SentenceBatch(dataset)
    rng = np.random.default_rng(config.seed)
    trans, emission, priors = init_parameters(
        batch, n_states, config, rng, priors, n_symbols, init_trans
    )
    omit, sample_mask = resolve_omit_probs(omit_probs, n_states, config.omit_mode)
    max_gap = resolve_max_gap(omit, config.max_gap)
    log_init = log_probs(np.full(n_states, 1.0 / n_states))
    version = 0
    tables = build_gap_tables(trans, omit, max_gap, version=version)
    obs_loglik = batch.obs_loglik(emission)
    obs_evid = _observation_evidence(batch, obs_loglik, omit)
    tables.check_version(version)
    walk = _sample_walk_marginal(tables, obs_evid, batch.k_lens, rng)
    gaps = _sample_gaps_batch(tables, walk, batch.k_lens, batch.k_mask, rng)
    post = PosteriorMean()
    diagnostics = []
    for it in range(config.n_iterations):
        emission = update_emission(emission, walk, batch, priors, config, rng)
        obs_loglik = batch.obs_loglik(emission)
        placements = placement_matrix(gaps, batch.k_mask)
        full_lens = gaps.sum(axis=1) + batch.k_lens
        evid = local_evidence(batch, obs_loglik, omit, placements, full_lens)
        paths = _sample_paths(log_init, trans, evid, full_lens, rng)
        trans = sample_transitions(
            count_transitions(paths, full_lens, n_states), priors.trans_alpha, rng
        )
        version += 1
        tables = build_gap_tables(trans, omit, max_gap, version=version)
        obs_evid = _observation_evidence(batch, obs_loglik, omit)
        tables.check_version(version)
        walk = _sample_walk_marginal(tables, obs_evid, batch.k_lens, rng)
        gaps = _sample_gaps_batch(tables, walk, batch.k_lens, batch.k_mask, rng)
        if sample_mask.any():
            kept_states = states_at_placement(paths, placements)
            kept, deleted = omission_counts(
                paths, full_lens, kept_states, batch.k_mask, n_states
            )
            draw = sample_omit_probs(kept, deleted, priors.keep_beta, rng)
            omit = np.where(sample_mask, draw, omit)
            version += 1
            tables = build_gap_tables(trans, omit, max_gap, version=version)
            obs_evid = _observation_evidence(batch, obs_loglik, omit)
        logliks = batch_joint_loglik(evid, paths, trans, full_lens)
        diagnostics.append(diagnostics_row(it, logliks, emission, trans, truth))
        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            post.add(trans, emission_params(emission), omit)
    return summarize_posterior(post, emission, config, diagnostics, batch.skipped)
