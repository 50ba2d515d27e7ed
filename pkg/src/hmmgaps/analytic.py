"""Closed-form relationships between a chain and its thinned observation chain.

When every emission is kept independently with probability p, consecutive
kept observations are separated by a geometric number of hidden steps, so
the observed chain is again Markov with transition matrix

    T_obs = p * T * (I - (1 - p) * T)^{-1}.

This module implements that transform, its truncation, its inverse, the
composition of mistaken inverse rates, recovery of the true keep rate from
such compositions, and the observed-chain limit under sticky Markov
deletion.  All of it is exact linear algebra on dense matrices.
"""

from __future__ import annotations

import warnings

import numpy as np

from .model import HmmModel


def _check_keep_prob(keep_prob: float) -> float:
    keep_prob = float(keep_prob)
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep probability must lie in (0, 1], got {keep_prob}")
    return keep_prob


def _right_solve(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """Return numerator @ inv(denominator) without forming the inverse."""
    try:
        return np.linalg.solve(denominator.T, numerator.T).T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular system in omit transform: {exc}")


def omit_transform(trans: np.ndarray, keep_prob: float) -> np.ndarray:
    """Transition matrix of the kept-observation chain under iid thinning.

    Computes ``keep_prob * T @ (I - (1 - keep_prob) T)^{-1}``, which sums the
    geometric mixture of jump powers T, T^2, ... with weights
    keep_prob * (1 - keep_prob)^(d-1).  keep_prob = 1 returns T itself.
    """
    keep_prob = _check_keep_prob(keep_prob)
    trans = np.asarray(trans, dtype=np.float64)
    n = trans.shape[0]
    return keep_prob * _right_solve(trans, np.eye(n) - (1.0 - keep_prob) * trans)


def omit_transform_truncated(
    trans: np.ndarray, keep_prob: float, n_terms: int
) -> np.ndarray:
    """Normalized partial sum of the jump-power mixture.

    Includes powers T^1 .. T^{n_terms} with geometric weights renormalized to
    total mass one, so the output is row-stochastic at any truncation depth.
    """
    keep_prob = _check_keep_prob(keep_prob)
    if n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    trans = np.asarray(trans, dtype=np.float64)
    miss = 1.0 - keep_prob
    total = np.zeros_like(trans)
    power = np.eye(trans.shape[0])
    for d in range(n_terms):
        power = power @ trans
        total += miss**d * power
    return keep_prob / (1.0 - miss**n_terms) * total if miss else total


def invert_omit_transform(
    trans_obs: np.ndarray, keep_prob: float, clamp: bool = False
) -> np.ndarray:
    """Recover the underlying chain from the kept-observation chain.

    Solves ``T = (keep_prob * I + (1 - keep_prob) * T_obs)^{-1} @ T_obs``.
    The result is not guaranteed entrywise non-negative when ``trans_obs``
    is noisy or mismatched; negative entries are reported through a warning
    and, with ``clamp=True``, clipped to zero with rows renormalized.
    """
    keep_prob = _check_keep_prob(keep_prob)
    trans_obs = np.asarray(trans_obs, dtype=np.float64)
    n = trans_obs.shape[0]
    system = keep_prob * np.eye(n) + (1.0 - keep_prob) * trans_obs
    try:
        recovered = np.linalg.solve(system, trans_obs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"inverse omit transform is singular at keep_prob={keep_prob}: {exc}"
        )
    worst = recovered.min()
    if worst < -1e-9:
        warnings.warn(
            f"inverse omit transform produced negative entries (min {worst:.3e})",
            stacklevel=2,
        )
    if clamp:
        recovered = np.clip(recovered, 0.0, None)
        recovered /= recovered.sum(axis=1, keepdims=True)
    return recovered


def composed_mismatch(trans: np.ndarray, true_keep: float, used_keep: float):
    """Chain obtained by thinning at ``true_keep`` then inverting at ``used_keep``.

    Equals ``[(used_keep / true_keep) T^{-1} + (1 - used_keep / true_keep) I]^{-1}``,
    so a family of wrong inversion rates traces a one-parameter curve through
    the true matrix (ratio = 1).
    """
    true_keep = _check_keep_prob(true_keep)
    used_keep = _check_keep_prob(used_keep)
    trans = np.asarray(trans, dtype=np.float64)
    n = trans.shape[0]
    ratio = used_keep / true_keep
    try:
        inv_trans = np.linalg.inv(trans)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"transition matrix not invertible: {exc}")
    return np.linalg.inv(ratio * inv_trans + (1.0 - ratio) * np.eye(n))


def estimate_keep_prob(trans: np.ndarray, mismatch_fn, step: float = 1e-4) -> float:
    """Recover the thinning rate from a family of mismatched inversions.

    ``mismatch_fn(used_keep)`` must return the composed matrix for an assumed
    inversion rate.  The derivative of its inverse with respect to the rate
    is ``(T^{-1} - I) / true_keep`` for every assumed rate, so a central
    difference plus a least-squares fit over all entries identifies the true
    rate.  Raises when the derivative vanishes (T = I is unidentifiable).
    """
    trans = np.asarray(trans, dtype=np.float64)
    at = 0.5
    hi = np.linalg.inv(mismatch_fn(at + step))
    lo = np.linalg.inv(mismatch_fn(at - step))
    deriv = (hi - lo) / (2.0 * step)
    if np.abs(deriv).max() < 1e-12:
        raise ValueError("keep probability unidentifiable: derivative vanishes")
    target = np.linalg.inv(trans) - np.eye(trans.shape[0])
    scale = float((target * target).sum())
    inv_keep = float((deriv * target).sum()) / scale
    if inv_keep <= 0:
        raise ValueError(
            f"least-squares slope {inv_keep} is not a valid inverse keep rate"
        )
    return 1.0 / inv_keep


def naive_limit_markov_omission(
    trans: np.ndarray, keep_prob: float, bias: float
) -> np.ndarray:
    """Observed-chain limit when deletion follows the sticky Markov process.

    Mixes jump powers with the pair-gap law of the seen/missing chain:
    row-normalized
    ``T (p+b) [I + ((p-b)/(p+b)) ((1-p-b)/(1-p+b)) ((I-(1-p+b)T)^{-1} - I)]``
    with p = keep_prob and b = bias.  bias = 0 reduces to the iid transform.
    """
    keep_prob = _check_keep_prob(keep_prob)
    trans = np.asarray(trans, dtype=np.float64)
    n = trans.shape[0]
    stay = keep_prob + bias
    leave = keep_prob - bias
    miss_stay = 1.0 - keep_prob + bias
    miss_leave = 1.0 - keep_prob - bias
    for name, p in (
        ("P(seen|seen)", stay),
        ("P(seen|missing)", leave),
        ("P(missing|seen)", miss_leave),
        ("P(missing|missing)", miss_stay),
    ):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} = {p} falls outside [0, 1]")
    if miss_stay >= 1.0:
        raise ValueError("missing-state self-loop must stay below 1")
    # stay * T + leave * miss_leave * sum_{d>=2} miss_stay^(d-2) T^d, the
    # division-free expansion of the bracketed geometric correction.
    tail = trans @ _right_solve(trans, np.eye(n) - miss_stay * trans)
    limit = stay * trans + leave * miss_leave * tail
    return limit / limit.sum(axis=1, keepdims=True)


def semi_analytic_reconstruct(
    dataset, keep_prob: float, hmm_fit, clamp: bool = True
) -> HmmModel:
    """Fit the kept observations as if gapless, then invert the thinning.

    ``hmm_fit(dataset)`` must return an HmmModel estimating the observed
    chain.  The inverse transform can produce negative entries; with the
    default ``clamp=True`` they are clipped and rows renormalized so the
    result is a valid model (pass ``clamp=False`` to fail loudly instead).
    """
    observed = hmm_fit(dataset)
    recovered = invert_omit_transform(observed.trans, keep_prob, clamp=clamp)
    return HmmModel(
        trans=recovered, emission=observed.emission, initial=observed.initial
    )
