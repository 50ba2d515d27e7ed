"""Placement sampler for the known-length case.

Each observation k is matched to an original position w_k.  Conditioned on
the latent path, a single w_k moves within the exclusive window between its
neighbors with weight emission density times keep probability; a sweep
refreshes every component in order.  Sweeps act as proposals: after each
one the new placement map is accepted or rejected on the product of its
per-component weights, so repeated inner sweeps trade mixing speed against
acceptance cost.
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
from .model import LOG_ZERO, EmissionModel, HmmModel
from .omission import OmittedSentence


def sample_w_component(
    emission: EmissionModel,
    states: np.ndarray,
    obs,
    placement: np.ndarray,
    k: int,
    omit_probs: np.ndarray,
    rng: np.random.Generator,
) -> int:
    """Draw a new position for observation k between its fixed neighbors.

    Candidates are the positions strictly between placement[k-1] and
    placement[k+1] (sentence edges act as -1 and the full length); each
    candidate t is weighted by p(obs[k] | states[t]) * (1 - omit(states[t])).
    """
    states = np.asarray(states, dtype=np.intp)
    placement = np.asarray(placement, dtype=np.intp)
    low = int(placement[k - 1]) if k > 0 else -1
    high = int(placement[k + 1]) if k + 1 < placement.size else states.size
    cand = np.arange(low + 1, high)
    if cand.size == 0:
        raise ValueError(f"no feasible slot for component {k}")
    dens = emission.loglik_matrix(np.asarray([obs[k]]))[0]
    logw = dens[states[cand]] + log_probs(1.0 - omit_probs)[states[cand]]
    shift = logw.max()
    if shift <= LOG_ZERO / 2:
        raise RuntimeError(f"all candidate slots for component {k} have zero mass")
    probs = np.exp(logw - shift)
    probs /= probs.sum()
    return int(rng.choice(cand, p=probs))


def _component_logw(paths, obs_loglik, omit_probs):
    """Log weight of putting observation k at position t, shape (B, K, N)."""
    pos_dens = np.take_along_axis(
        obs_loglik[:, :, :], paths[:, None, :], axis=2
    )
    return pos_dens + log_probs(1.0 - omit_probs)[paths][:, None, :]


def _sweep_once(placements, logw, k_lens, full_lens, rng):
    """One in-place component scan; returns the summed log-weight delta."""
    size, k_max = placements.shape
    n_max = logw.shape[2]
    grid = np.arange(n_max)[None, :]
    delta = np.zeros(size)
    for k in range(k_max):
        active = k < k_lens
        if not active.any():
            break
        low = placements[:, k - 1] if k > 0 else np.full(size, -1)
        high = np.where(
            k + 1 < k_lens, placements[:, np.minimum(k + 1, k_max - 1)], full_lens
        )
        window = (grid > low[:, None]) & (grid < high[:, None])
        w_k = logw[:, k, :]
        masked = np.where(window, w_k, -np.inf)
        shift = masked.max(axis=1)
        ok = active & (shift > LOG_ZERO / 2)
        if not ok.all():
            bad = np.nonzero(active & ~ok)[0]
            if bad.size:
                raise RuntimeError(
                    f"all candidate slots vanished for component {k} "
                    f"(sentence {bad[0]})"
                )
        # inactive rows can be all -inf; keep the exp finite there
        probs = np.exp(masked - np.where(ok, shift, 0.0)[:, None])
        probs[~active] = 0.0
        cum = np.cumsum(probs, axis=1)
        u = rng.random(size) * cum[:, -1]
        pick = np.minimum((cum < u[:, None]).sum(axis=1), n_max - 1)
        old = placements[:, k]
        old_w = w_k[np.arange(size), old]
        new_w = w_k[np.arange(size), pick]
        delta += np.where(active, new_w - old_w, 0.0)
        placements[:, k] = np.where(active, pick, old)
    return delta


def mh_sweep_w(
    placements: np.ndarray,
    paths: np.ndarray,
    obs_loglik: np.ndarray,
    omit_probs: np.ndarray,
    k_lens: np.ndarray,
    full_lens: np.ndarray,
    config: GibbsConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Refresh all placements with ``config.inner_steps`` accept/reject sweeps.

    In ``sweep`` mode each full scan is a proposal accepted on the product
    of component weights; in ``component`` mode every single move is
    accepted or rejected on its own weight ratio.  Returns the per-sentence
    acceptance counts (diagnostic only).
    """
    size = placements.shape[0]
    logw = _component_logw(paths, obs_loglik, omit_probs)
    accepted = np.zeros(size)
    for _ in range(config.inner_steps):
        if config.accept_mode == "component":
            _component_scan(placements, logw, k_lens, full_lens, rng)
            accepted += 1
            continue
        proposal = placements.copy()
        delta = _sweep_once(proposal, logw, k_lens, full_lens, rng)
        take = np.log(rng.random(size)) < delta
        placements[take] = proposal[take]
        accepted += take
    return accepted


def _component_scan(placements, logw, k_lens, full_lens, rng):
    """Scan components accepting each proposed move on its weight ratio."""
    size, k_max = placements.shape
    n_max = logw.shape[2]
    grid = np.arange(n_max)[None, :]
    for k in range(k_max):
        active = k < k_lens
        if not active.any():
            break
        low = placements[:, k - 1] if k > 0 else np.full(size, -1)
        high = np.where(
            k + 1 < k_lens, placements[:, np.minimum(k + 1, k_max - 1)], full_lens
        )
        window = (grid > low[:, None]) & (grid < high[:, None])
        w_k = logw[:, k, :]
        masked = np.where(window, w_k, -np.inf)
        shift = masked.max(axis=1)
        probs = np.exp(masked - np.where(active, shift, 0.0)[:, None])
        probs[~active] = 0.0
        cum = np.cumsum(probs, axis=1)
        u = rng.random(size) * cum[:, -1]
        pick = np.minimum((cum < u[:, None]).sum(axis=1), n_max - 1)
        old = placements[:, k]
        ratio = w_k[np.arange(size), pick] - w_k[np.arange(size), old]
        take = active & (np.log(rng.random(size)) < ratio)
        placements[:, k] = np.where(take, pick, old)


def _random_placements(batch: SentenceBatch, rng: np.random.Generator):
    placements = np.zeros((batch.size, batch.k_max), dtype=np.intp)
    for j in range(batch.size):
        n_j = int(batch.full_lens[j])
        k_j = int(batch.k_lens[j])
        placements[j, :k_j] = np.sort(rng.choice(n_j, size=k_j, replace=False))
    return placements


def fit_matching(
    dataset: list[OmittedSentence],
    n_states: int,
    omit_probs=None,
    config: GibbsConfig | None = None,
    priors: Priors | None = None,
    truth: HmmModel | None = None,
    n_symbols: int | None = None,
) -> FitResult:
    """Gibbs fit with unknown placements but known original lengths.

    Uses only the kept values and each sentence's original length; any
    provided placements are ignored.  With ``omit_probs=None`` under the
    default ``fixed`` mode, the sampler runs in length-only form with a
    constant omission rate implied by the kept fraction (the placement and
    path conditionals are invariant to that constant).
    """
    config = config or GibbsConfig()
    if any(s.full_len is None for s in dataset):
        raise ValueError("length-matching fit needs full_len on every sentence")
    batch = SentenceBatch(dataset)
    rng = np.random.default_rng(config.seed)
    trans, emission, priors = init_parameters(
        batch, n_states, config, rng, priors, n_symbols
    )
    if omit_probs is None and config.omit_mode == "fixed":
        omit_probs = 1.0 - batch.k_lens.sum() / batch.full_lens.sum()
    omit, sample_mask = resolve_omit_probs(omit_probs, n_states, config.omit_mode)
    log_init = log_probs(np.full(n_states, 1.0 / n_states))
    placements = _random_placements(batch, rng)
    obs_loglik = batch.obs_loglik(emission)
    evid = local_evidence(batch, obs_loglik, omit, placements, batch.full_lens)
    paths = _sample_paths(log_init, trans, evid, batch.full_lens, rng)
    post = PosteriorMean()
    diagnostics = []
    for it in range(config.n_iterations):
        kept_states = states_at_placement(paths, placements)
        emission = update_emission(emission, kept_states, batch, priors, config, rng)
        obs_loglik = batch.obs_loglik(emission)
        trans = sample_transitions(
            count_transitions(paths, batch.full_lens, n_states),
            priors.trans_alpha, rng,
        )
        mh_sweep_w(
            placements, paths, obs_loglik, omit,
            batch.k_lens, batch.full_lens, config, rng,
        )
        evid = local_evidence(batch, obs_loglik, omit, placements, batch.full_lens)
        paths = _sample_paths(log_init, trans, evid, batch.full_lens, rng)
        if sample_mask.any():
            kept_states = states_at_placement(paths, placements)
            kept, deleted = omission_counts(
                paths, batch.full_lens, kept_states, batch.k_mask, n_states
            )
            draw = sample_omit_probs(kept, deleted, priors.keep_beta, rng)
            omit = np.where(sample_mask, draw, omit)
            evid = local_evidence(
                batch, obs_loglik, omit, placements, batch.full_lens
            )
        logliks = batch_joint_loglik(evid, paths, trans, batch.full_lens)
        diagnostics.append(diagnostics_row(it, logliks, emission, trans, truth))
        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            post.add(trans, emission_params(emission), omit)
    return summarize_posterior(post, emission, config, diagnostics, batch.skipped)
