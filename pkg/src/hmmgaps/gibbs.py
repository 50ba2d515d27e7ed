"""Shared Gibbs machinery: conjugate updates, latent-path sampling, scoring.

The placement samplers and the fixed-placement baselines all alternate the
same conditional draws: transition rows from Dirichlet counts, Gaussian
means from a conjugate normal, per-state omission probabilities from Beta
counts, and latent state paths from a backward-recursion/forward-sampling
pass over the evidence.  Sentences are processed as padded batches so the
recursions run as dense matrix work across the whole corpus at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.mixture import GaussianMixture

from .model import (
    LOG_ZERO,
    CategoricalEmissions,
    EmissionModel,
    GaussianEmissions,
    HmmModel,
)
from .omission import OmittedSentence

logger = logging.getLogger(__name__)

OMIT_MODES = ("fixed", "sample-missing", "sample-all")
ACCEPT_MODES = ("sweep", "component")
MEAN_UPDATES = ("paper", "scaled")


def log_probs(values: np.ndarray) -> np.ndarray:
    """Elementwise log with exact zeros mapped to the finite sentinel."""
    values = np.asarray(values, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.log(values)
    return np.where(values > 0.0, out, LOG_ZERO)


@dataclass
class Priors:
    """Hyperparameters for every conjugate update."""

    # sub-uniform: flat rows pay too much posterior volume on short corpora
    trans_alpha: float = 0.1
    loc: np.ndarray | None = None          # Gaussian mean prior centers
    prec: np.ndarray | None = None         # Gaussian mean prior precisions
    keep_beta: tuple[float, float] = (1.0, 1.0)
    emission_beta: float = 1.0             # categorical row smoothing


@dataclass
class GibbsConfig:
    """Run-length and behavioral knobs shared by all samplers."""

    n_iterations: int = 300
    burn_in: int = 100
    thinning: int = 1
    seed: int = 0
    inner_steps: int = 30                  # placement proposal sweeps per pass
    max_gap: int | None = None             # cap on modeled gap runs; None = auto
    omit_mode: str = "fixed"               # fixed | sample-missing | sample-all
    accept_mode: str = "sweep"             # sweep | component
    mean_update: str = "paper"             # paper | scaled
    sigma: float = 0.1                     # fixed Gaussian emission spread

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn_in must lie in [0, n_iterations)")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if self.max_gap is not None and self.max_gap < 1:
            raise ValueError("max_gap must be >= 1 when given")
        if self.omit_mode not in OMIT_MODES:
            raise ValueError(f"omit_mode must be one of {OMIT_MODES}")
        if self.accept_mode not in ACCEPT_MODES:
            raise ValueError(f"accept_mode must be one of {ACCEPT_MODES}")
        if self.mean_update not in MEAN_UPDATES:
            raise ValueError(f"mean_update must be one of {MEAN_UPDATES}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass
class SamplerState:
    """One snapshot of the chain: parameters plus per-sentence latents."""

    trans: np.ndarray
    emission: EmissionModel
    omit_probs: np.ndarray
    paths: np.ndarray | None = None        # padded latent states per sentence
    path_lens: np.ndarray | None = None
    placements: np.ndarray | None = None   # padded kept indices per sentence
    gaps: np.ndarray | None = None         # padded gap runs per sentence


def resolve_max_gap(omit_probs: np.ndarray, cap: int | None = None) -> int:
    """Smallest gap length whose prior weight falls below 1e-8, within [5, 60]."""
    if cap is not None:
        return int(cap)
    worst = float(np.max(omit_probs)) if np.size(omit_probs) else 0.0
    if worst <= 0.0:
        return 5
    if worst >= 1.0:
        return 60
    length = int(np.ceil(np.log(1e-8) / np.log(worst)))
    return int(min(max(length, 5), 60))


# ---------------------------------------------------------------------------
# Padded sentence batches


class SentenceBatch:
    """Dense padded views of a ragged dataset.

    Sentences with zero kept observations carry no evidence for any update,
    so they are dropped here and surfaced through ``skipped``.
    """

    def __init__(self, sentences: list[OmittedSentence]):
        kept = [s for s in sentences if s.n_obs > 0]
        self.skipped = len(sentences) - len(kept)
        if not kept:
            raise ValueError("dataset has no non-empty sentences")
        self.size = len(kept)
        self.k_lens = np.array([s.n_obs for s in kept], dtype=np.intp)
        self.k_max = int(self.k_lens.max())
        self.k_mask = np.arange(self.k_max)[None, :] < self.k_lens[:, None]
        first = kept[0].obs
        dtype = np.float64 if np.issubdtype(first.dtype, np.floating) else np.intp
        self.obs = np.zeros((self.size, self.k_max), dtype=dtype)
        for j, s in enumerate(kept):
            self.obs[j, : s.n_obs] = s.obs
        self.placements = None
        self.full_lens = None
        if all(s.placement is not None for s in kept):
            self.placements = np.zeros((self.size, self.k_max), dtype=np.intp)
            for j, s in enumerate(kept):
                self.placements[j, : s.n_obs] = s.placement
        if all(s.full_len is not None for s in kept):
            self.full_lens = np.array([s.full_len for s in kept], dtype=np.intp)
        self.sentences = kept

    def n_mask(self, n_max: int) -> np.ndarray:
        if self.full_lens is None:
            raise ValueError("batch has no full-length information")
        return np.arange(n_max)[None, :] < self.full_lens[:, None]

    def obs_loglik(self, emission: EmissionModel) -> np.ndarray:
        """Log density of every kept value under every state, (B, K, n)."""
        flat = emission.loglik_matrix(self.obs.ravel())
        out = flat.reshape(self.size, self.k_max, -1)
        out[~self.k_mask] = 0.0
        return out


def local_evidence(
    batch: SentenceBatch,
    obs_loglik: np.ndarray,
    omit_probs: np.ndarray,
    placements: np.ndarray,
    full_lens: np.ndarray,
) -> np.ndarray:
    """Per-position log evidence factors over the full-length chain.

    Kept positions contribute log(1 - psi[x]) + log p(o | x); deleted
    positions contribute log psi[x]; padding beyond each sentence is zero so
    the recursions ignore it.
    """
    n_max = int(full_lens.max())
    log_keep = log_probs(1.0 - omit_probs)
    log_miss = log_probs(omit_probs)
    evid = np.broadcast_to(log_miss, (batch.size, n_max, log_miss.size)).copy()
    evid[~(np.arange(n_max)[None, :] < full_lens[:, None])] = 0.0
    j_idx, k_idx = np.nonzero(batch.k_mask)
    pos = placements[j_idx, k_idx]
    evid[j_idx, pos, :] = log_keep[None, :] + obs_loglik[j_idx, k_idx, :]
    return evid


# ---------------------------------------------------------------------------
# Latent path sampling


def _sample_rows(logits: np.ndarray, rng: np.random.Generator, step: int):
    """Draw one category per row of a log-weight matrix."""
    shift = logits.max(axis=1)
    dead = np.nonzero(shift <= LOG_ZERO / 2)[0]
    if dead.size:
        raise RuntimeError(
            f"forward mass vanished at step {step} (sentence {dead[0]})"
        )
    probs = np.exp(logits - shift[:, None])
    cum = np.cumsum(probs, axis=1)
    u = rng.random(logits.shape[0]) * cum[:, -1]
    return np.minimum(
        (cum < u[:, None]).sum(axis=1), logits.shape[1] - 1
    ).astype(np.intp)


def _suffix_weights(trans: np.ndarray, evid: np.ndarray) -> np.ndarray:
    """Backward pass: evid[t] + log P(evidence after t | state at t)."""
    n_max = evid.shape[1]
    out = np.empty_like(evid)
    out[:, n_max - 1] = evid[:, n_max - 1]
    for t in range(n_max - 2, -1, -1):
        nxt = out[:, t + 1]
        shift = nxt.max(axis=1)
        mass = np.exp(nxt - shift[:, None]) @ trans.T
        beta = shift[:, None] + log_probs(mass)
        out[:, t] = np.maximum(evid[:, t] + beta, LOG_ZERO)
    return out


def _sample_paths(
    log_init: np.ndarray,
    trans: np.ndarray,
    evid: np.ndarray,
    lengths: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact posterior draw of latent paths for a padded evidence batch."""
    size, n_max, _ = evid.shape
    suffix = _suffix_weights(trans, evid)
    log_trans = log_probs(trans)
    paths = np.zeros((size, n_max), dtype=np.intp)
    paths[:, 0] = _sample_rows(log_init + suffix[:, 0], rng, step=0)
    for t in range(1, n_max):
        logits = log_trans[paths[:, t - 1]] + suffix[:, t]
        paths[:, t] = _sample_rows(logits, rng, step=t)
    paths[~(np.arange(n_max)[None, :] < lengths[:, None])] = 0
    return paths


def sample_states_given_placement(
    trans: np.ndarray,
    emission: EmissionModel,
    obs,
    placement,
    full_len: int,
    omit_probs: np.ndarray,
    rng: np.random.Generator,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Draw a full-length latent path conditioned on kept positions.

    The chain runs the usual backward smoothing recursion with the modified
    evidence factor: kept positions weigh states by keep probability times
    emission density, deleted positions by omission probability alone.
    With no observations and constant omission this reduces to a prior draw.
    """
    sentence = OmittedSentence(
        obs=np.asarray(obs), placement=np.asarray(placement, dtype=np.intp),
        full_len=full_len,
    )
    trans = np.asarray(trans, dtype=np.float64)
    omit_probs = np.asarray(omit_probs, dtype=np.float64)
    n = trans.shape[0]
    if initial is None:
        initial = np.full(n, 1.0 / n)
    if sentence.n_obs == 0:
        evid = np.broadcast_to(
            log_probs(omit_probs), (1, full_len, n)
        ).copy()
        return _sample_paths(
            log_probs(initial), trans, evid, np.array([full_len]), rng
        )[0]
    batch = SentenceBatch([sentence])
    evid = local_evidence(
        batch, batch.obs_loglik(emission), omit_probs,
        batch.placements, batch.full_lens,
    )
    return _sample_paths(
        log_probs(initial), trans, evid, batch.full_lens, rng
    )[0]


# ---------------------------------------------------------------------------
# Conjugate parameter updates


def init_emission_priors(
    values: np.ndarray, n_states: int, rng: np.random.Generator,
    n_restarts: int = 10,
):
    """Gaussian-mixture pass over the pooled observations.

    Each mixture component becomes one state's prior: center at the midpoint
    of the component's assigned range, precision 1/range^2 (1 when the range
    collapses).  Components are ordered by center so state labels are stable.
    Returns (prior centers, prior precisions, starting means).  The chain
    starts at the centers; a draw from the wide range prior can scramble
    neighboring states badly enough that the labels never recover.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if np.unique(values).size < n_states:
        raise ValueError(
            f"need at least {n_states} distinct observation values, "
            f"got {np.unique(values).size}"
        )
    labels = None
    for _ in range(n_restarts):
        seed = int(rng.integers(2**31 - 1))
        gm = GaussianMixture(
            n_components=n_states, n_init=10, random_state=seed,
            reg_covar=1e-6,
        ).fit(values[:, None])
        cand = gm.predict(values[:, None])
        if np.unique(cand).size == n_states:
            labels = cand
            break
    if labels is None:
        raise RuntimeError(
            f"mixture initialization left empty components after "
            f"{n_restarts} restarts"
        )
    loc = np.empty(n_states)
    prec = np.empty(n_states)
    for comp in range(n_states):
        vals = values[labels == comp]
        spread = vals.max() - vals.min()
        loc[comp] = 0.5 * (vals.max() + vals.min())
        prec[comp] = 1.0 / spread**2 if spread > 0 else 1.0
    order = np.argsort(loc, kind="stable")
    loc, prec = loc[order], prec[order]
    return loc, prec, loc.copy()


def _dirichlet_rows(shapes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    draws = rng.standard_gamma(shapes)
    return draws / draws.sum(axis=-1, keepdims=True)


def sample_transitions(
    counts: np.ndarray, alpha: float, rng: np.random.Generator
) -> np.ndarray:
    """Dirichlet draw of every transition row given pair counts."""
    counts = np.asarray(counts, dtype=np.float64)
    return _dirichlet_rows(counts + alpha, rng)


def sample_means(
    sums: np.ndarray,
    counts: np.ndarray,
    priors: Priors,
    config: GibbsConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Conjugate draw of per-state emission means.

    The default update follows the count-weighted form
    Normal((sums + prec*loc)/(counts + prec), 1/(counts + prec)); the
    ``scaled`` variant additionally weighs the data side by 1/sigma^2.
    States with no assigned observations fall back to their prior.
    """
    sums = np.asarray(sums, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if config.mean_update == "scaled":
        inv_var = 1.0 / config.sigma**2
        post_prec = counts * inv_var + priors.prec
        center = (sums * inv_var + priors.prec * priors.loc) / post_prec
    else:
        post_prec = counts + priors.prec
        center = (sums + priors.prec * priors.loc) / post_prec
    return rng.normal(center, 1.0 / np.sqrt(post_prec))


def sample_emission_rows(
    sym_counts: np.ndarray, beta: float, rng: np.random.Generator
) -> np.ndarray:
    """Dirichlet draw of categorical emission rows given symbol counts."""
    return _dirichlet_rows(np.asarray(sym_counts, dtype=np.float64) + beta, rng)


def sample_omit_probs(
    kept_counts: np.ndarray,
    deleted_counts: np.ndarray,
    prior: tuple[float, float],
    rng: np.random.Generator,
) -> np.ndarray:
    """Beta draw of per-state omission probabilities.

    The conjugate draw is of the keep probability, Beta(kept + a,
    deleted + b); the returned value is its complement.
    """
    keep = rng.beta(
        np.asarray(kept_counts, dtype=np.float64) + prior[0],
        np.asarray(deleted_counts, dtype=np.float64) + prior[1],
    )
    return 1.0 - keep


# ---------------------------------------------------------------------------
# Counting helpers


def count_transitions(
    paths: np.ndarray, lengths: np.ndarray, n_states: int
) -> np.ndarray:
    """Pair counts over padded latent paths."""
    if paths.shape[1] < 2:
        return np.zeros((n_states, n_states))
    mask = np.arange(1, paths.shape[1])[None, :] < lengths[:, None]
    flat = paths[:, :-1] * n_states + paths[:, 1:]
    counts = np.bincount(flat[mask], minlength=n_states * n_states)
    return counts.reshape(n_states, n_states).astype(np.float64)


def states_at_placement(
    paths: np.ndarray, placements: np.ndarray
) -> np.ndarray:
    return np.take_along_axis(paths, placements, axis=1)


def gaussian_suffstats(
    kept_states: np.ndarray, obs: np.ndarray, k_mask: np.ndarray, n_states: int
):
    sel = k_mask.ravel()
    flat_states = kept_states.ravel()[sel]
    flat_obs = obs.ravel()[sel].astype(np.float64)
    sums = np.bincount(flat_states, weights=flat_obs, minlength=n_states)
    counts = np.bincount(flat_states, minlength=n_states)
    return sums, counts.astype(np.float64)


def categorical_counts(
    kept_states: np.ndarray, obs: np.ndarray, k_mask: np.ndarray,
    n_states: int, n_symbols: int,
) -> np.ndarray:
    sel = k_mask.ravel()
    flat = kept_states.ravel()[sel] * n_symbols + obs.ravel()[sel]
    counts = np.bincount(flat, minlength=n_states * n_symbols)
    return counts.reshape(n_states, n_symbols).astype(np.float64)


def omission_counts(
    paths: np.ndarray,
    lengths: np.ndarray,
    kept_states: np.ndarray,
    k_mask: np.ndarray,
    n_states: int,
):
    """Per-state kept/deleted totals implied by the current latents."""
    n_mask = np.arange(paths.shape[1])[None, :] < lengths[:, None]
    total = np.bincount(paths[n_mask], minlength=n_states)
    kept = np.bincount(kept_states[k_mask], minlength=n_states)
    return kept.astype(np.float64), (total - kept).astype(np.float64)


# ---------------------------------------------------------------------------
# Joint scoring and diagnostics


def joint_loglik(
    trans: np.ndarray,
    emission: EmissionModel,
    obs,
    placement,
    full_len: int,
    states,
    omit_probs: np.ndarray,
    initial: np.ndarray | None = None,
) -> float:
    """Log joint density of one sentence's states, placements, and values."""
    obs = np.asarray(obs)
    placement = np.asarray(placement, dtype=np.intp)
    states = np.asarray(states, dtype=np.intp)
    if states.size != full_len:
        raise ValueError("states must cover the full original length")
    trans = np.asarray(trans, dtype=np.float64)
    n = trans.shape[0]
    if initial is None:
        initial = np.full(n, 1.0 / n)
    total = float(log_probs(initial)[states[0]])
    if full_len > 1:
        total += float(log_probs(trans)[states[:-1], states[1:]].sum())
    log_keep = log_probs(1.0 - omit_probs)
    log_miss = log_probs(omit_probs)
    kept_mask = np.zeros(full_len, dtype=bool)
    kept_mask[placement] = True
    total += float(log_miss[states[~kept_mask]].sum())
    if placement.size:
        kept_states = states[placement]
        dens = emission.loglik_matrix(obs)[np.arange(obs.size), kept_states]
        total += float(log_keep[kept_states].sum() + dens.sum())
    return max(total, LOG_ZERO)


def batch_joint_loglik(
    evid: np.ndarray,
    paths: np.ndarray,
    trans: np.ndarray,
    lengths: np.ndarray,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Per-sentence joint log density from a prebuilt evidence tensor."""
    size, n_max, n = evid.shape
    if initial is None:
        initial = np.full(n, 1.0 / n)
    picked = np.take_along_axis(evid, paths[:, :, None], axis=2)[:, :, 0]
    n_mask = np.arange(n_max)[None, :] < lengths[:, None]
    total = (picked * n_mask).sum(axis=1)
    total += log_probs(initial)[paths[:, 0]]
    if n_max > 1:
        log_trans = log_probs(trans)
        steps = log_trans[paths[:, :-1], paths[:, 1:]]
        total += (steps * n_mask[:, 1:]).sum(axis=1)
    return np.maximum(total, LOG_ZERO)


@dataclass
class FitResult:
    """Posterior summary of one sampler run."""

    model: HmmModel
    omit_probs: np.ndarray
    diagnostics: list[dict] = field(default_factory=list)
    skipped: int = 0


class PosteriorMean:
    def __init__(self):
        self.total = None
        self.count = 0

    def add(self, *arrays):
        if self.total is None:
            self.total = [np.array(a, dtype=np.float64) for a in arrays]
        else:
            for acc, a in zip(self.total, arrays):
                acc += a
        self.count += 1

    def mean(self):
        if not self.count:
            raise RuntimeError("no posterior draws collected")
        return [acc / self.count for acc in self.total]


def emission_params(emission: EmissionModel) -> np.ndarray:
    """The array a posterior mean is taken over for each emission family."""
    if isinstance(emission, GaussianEmissions):
        return emission.means
    return emission.probs


def summarize_posterior(
    post: PosteriorMean,
    emission: EmissionModel,
    config: GibbsConfig,
    diagnostics: list[dict],
    skipped: int,
) -> FitResult:
    """Collapse accumulated draws of (trans, emission params, omit) to a result."""
    trans_mean, params_mean, omit_mean = post.mean()
    trans_mean = trans_mean / trans_mean.sum(axis=1, keepdims=True)
    if isinstance(emission, GaussianEmissions):
        emission_out = GaussianEmissions(params_mean, config.sigma)
    else:
        emission_out = CategoricalEmissions(
            params_mean / params_mean.sum(axis=1, keepdims=True), emission.vocab
        )
    model = HmmModel(trans=trans_mean, emission=emission_out)
    return FitResult(
        model=model, omit_probs=omit_mean, diagnostics=diagnostics,
        skipped=skipped,
    )


def resolve_omit_probs(omit_probs, n_states: int, mode: str):
    """Normalize user omission input into (values, sampled-entry mask).

    Accepts a scalar rate, a vector with NaN marking unknown entries, or
    None (fully unknown).  The mask says which entries the sampler may move:
    everything under ``sample-all``, the NaN entries under
    ``sample-missing``, nothing under ``fixed`` (NaN then being an error).
    """
    if omit_probs is None:
        values = np.full(n_states, np.nan)
    elif np.isscalar(omit_probs):
        values = np.full(n_states, float(omit_probs))
    else:
        values = np.asarray(omit_probs, dtype=np.float64).copy()
        if values.shape != (n_states,):
            raise ValueError(
                f"omit_probs must have length {n_states}, got {values.shape}"
            )
    unknown = np.isnan(values)
    if mode == "fixed":
        if unknown.any():
            raise ValueError("omit_mode='fixed' requires fully known omit_probs")
        sample_mask = np.zeros(n_states, dtype=bool)
    elif mode == "sample-missing":
        sample_mask = unknown
    else:
        sample_mask = np.ones(n_states, dtype=bool)
    values[unknown] = 0.5
    if np.nanmin(values) < 0.0 or np.nanmax(values) > 1.0:
        raise ValueError("omission probabilities must lie in [0, 1]")
    return values, sample_mask


def init_parameters(
    batch: SentenceBatch,
    n_states: int,
    config: GibbsConfig,
    rng: np.random.Generator,
    priors: Priors | None = None,
    n_symbols: int | None = None,
    init_trans: np.ndarray | None = None,
):
    """Draw the starting point shared by every fitter.

    Gaussian data runs the mixture pass for mean priors; categorical data
    draws flat Dirichlet emission rows.  The transition matrix starts at a
    flat Dirichlet draw unless a warm start is supplied.
    """
    # copy so the caller's Priors can be reused across fits of other sizes
    priors = replace(priors) if priors is not None else Priors()
    if np.issubdtype(batch.obs.dtype, np.floating):
        pooled = batch.obs[batch.k_mask]
        loc, prec, means = init_emission_priors(pooled, n_states, rng)
        if priors.loc is None:
            priors.loc = loc
        if priors.prec is None:
            priors.prec = prec
        emission = GaussianEmissions(means, config.sigma)
    else:
        if n_symbols is None:
            n_symbols = int(batch.obs[batch.k_mask].max()) + 1
        rows = _dirichlet_rows(
            np.full((n_states, n_symbols), priors.emission_beta), rng
        )
        emission = CategoricalEmissions(rows)
    if init_trans is not None:
        trans = np.array(init_trans, dtype=np.float64)
        if trans.shape != (n_states, n_states):
            raise ValueError(f"init_trans must be {n_states}x{n_states}")
    else:
        # start flat regardless of the fit prior
        trans = _dirichlet_rows(np.ones((n_states, n_states)), rng)
    return trans, emission, priors


def update_emission(
    emission: EmissionModel,
    kept_states: np.ndarray,
    batch: SentenceBatch,
    priors: Priors,
    config: GibbsConfig,
    rng: np.random.Generator,
) -> EmissionModel:
    """One conjugate redraw of the emission family."""
    n = emission.n_states
    if isinstance(emission, GaussianEmissions):
        sums, counts = gaussian_suffstats(kept_states, batch.obs, batch.k_mask, n)
        means = sample_means(sums, counts, priors, config, rng)
        return GaussianEmissions(means, config.sigma)
    counts = categorical_counts(
        kept_states, batch.obs, batch.k_mask, n, emission.n_symbols
    )
    rows = sample_emission_rows(counts, priors.emission_beta, rng)
    return CategoricalEmissions(rows, emission.vocab)


def diagnostics_row(
    iteration: int,
    logliks: np.ndarray,
    emission: EmissionModel,
    trans: np.ndarray,
    truth: HmmModel | None,
) -> dict:
    row = {"iteration": iteration, "joint_loglik": float(np.mean(logliks))}
    if truth is not None:
        from .model import aligned_l1

        snapshot = HmmModel(
            trans=trans / trans.sum(axis=1, keepdims=True), emission=emission
        )
        row["l1"] = aligned_l1(snapshot, truth)
    return row


def write_diagnostics(rows: list[dict], path) -> None:
    """Stream diagnostics as CSV: iteration, mean joint loglik, optional L1."""
    with open(path, "w") as fh:
        fh.write("iteration,joint_loglik,l1\n")
        for row in rows:
            l1 = row.get("l1")
            fh.write(
                f"{row['iteration']},{row['joint_loglik']!r},"
                f"{'' if l1 is None else repr(l1)}\n"
            )
