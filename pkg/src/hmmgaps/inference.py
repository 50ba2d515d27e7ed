"""Point-estimate labeling of observations with deletions at unknown spots.

Given a trained model, labeling alternates two exact maximizations: the
best full-length state path for fixed placements (Viterbi with the
keep/delete evidence factors), and the best placements for a fixed path (a
longest path over the layered observation-by-position graph).  Placements
are initialized by an exact budgeted assignment of deleted-run lengths.
Every tie resolves to the smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaps import GapTables, build_gap_tables, placement_from_gaps
from .gibbs import joint_loglik, log_probs
from .model import LOG_ZERO, EmissionModel, HmmModel

_BONUS_CAP = 1e6


def viterbi_with_placement(
    trans: np.ndarray,
    emission: EmissionModel,
    obs,
    placement,
    full_len: int,
    omit_probs,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Most likely full-length state path given the kept positions.

    Kept positions weigh states by keep probability times emission density,
    deleted positions by omission probability.  With all positions kept and
    zero omission this is plain Viterbi decoding.
    """
    trans = np.asarray(trans, dtype=np.float64)
    n = trans.shape[0]
    obs = np.asarray(obs)
    placement = np.asarray(placement, dtype=np.intp)
    omit_probs = _as_omit_vector(omit_probs, n)
    if initial is None:
        initial = np.full(n, 1.0 / n)
    if placement.size != obs.size:
        raise ValueError("placement and obs lengths differ")
    if placement.size and placement[-1] >= full_len:
        raise ValueError("placement index beyond the full length")
    evid = np.tile(log_probs(omit_probs), (full_len, 1))
    if obs.size:
        evid[placement] = (
            log_probs(1.0 - omit_probs)[None, :] + emission.loglik_matrix(obs)
        )
    log_trans = log_probs(trans)
    delta = log_probs(initial) + evid[0]
    pointers = np.zeros((full_len, n), dtype=np.intp)
    for t in range(1, full_len):
        scores = delta[:, None] + log_trans
        pointers[t] = np.argmax(scores, axis=0)
        delta = scores[pointers[t], np.arange(n)] + evid[t]
    if delta.max() <= LOG_ZERO / 2:
        raise RuntimeError("no state path carries positive mass")
    states = np.empty(full_len, dtype=np.intp)
    states[-1] = int(np.argmax(delta))
    for t in range(full_len - 1, 0, -1):
        states[t - 1] = pointers[t, states[t]]
    return states


def _as_omit_vector(omit_probs, n: int) -> np.ndarray:
    if np.isscalar(omit_probs):
        return np.full(n, float(omit_probs))
    omit_probs = np.asarray(omit_probs, dtype=np.float64)
    if omit_probs.shape != (n,):
        raise ValueError(f"omit_probs must have length {n}")
    return omit_probs


def _prefix_argmax(values: np.ndarray):
    """Running maximum and the first index attaining it."""
    best = np.maximum.accumulate(values)
    improved = values > np.concatenate(([-np.inf], best[:-1]))
    idx = np.where(improved, np.arange(values.size), 0)
    return best, np.maximum.accumulate(idx)


def longest_path_w(
    states: np.ndarray,
    obs,
    emission: EmissionModel,
    node_bonus: np.ndarray | None = None,
) -> np.ndarray:
    """Strictly increasing placements maximizing summed emission log density.

    Dynamic program over the layered graph of (observation, position) nodes
    with node weight log p(obs[k] | states[t]) plus an optional per-position
    bonus.  Runs in O(K * N) via running prefix maxima; ties resolve to the
    smallest position.
    """
    states = np.asarray(states, dtype=np.intp)
    obs = np.asarray(obs)
    n_obs, n_pos = obs.size, states.size
    if n_obs == 0:
        return np.empty(0, dtype=np.intp)
    if n_obs > n_pos:
        raise ValueError(f"cannot place {n_obs} observations in {n_pos} slots")
    reward = emission.loglik_matrix(obs)[:, states]
    if node_bonus is not None:
        reward = reward + np.asarray(node_bonus, dtype=np.float64)[None, :]
    layer = reward[0].copy()
    parents = np.zeros((n_obs, n_pos), dtype=np.intp)
    for k in range(1, n_obs):
        best, arg = _prefix_argmax(layer)
        layer = np.full(n_pos, -np.inf)
        layer[k:] = reward[k, k:] + best[k - 1 : -1]
        parents[k, k:] = arg[k - 1 : -1]
        if not np.isfinite(layer.max()):
            raise RuntimeError(f"no feasible placement chain at observation {k}")
    placement = np.empty(n_obs, dtype=np.intp)
    placement[-1] = int(np.argmax(layer))
    for k in range(n_obs - 1, 0, -1):
        placement[k - 1] = parents[k, placement[k]]
    return placement


def knapsack_init(
    tables: GapTables, proxy_states: np.ndarray, full_len: int
) -> np.ndarray:
    """Most likely deleted-run profile under an exact length budget.

    Chooses runs before each observation plus one after the last (scored
    against a uniform landing state) maximizing the summed log run
    probabilities subject to runs + observations = full_len.  Exact dynamic
    program over (slot, remaining budget); ties prefer shorter early runs.
    Returns the K + 1 run lengths with the trailing run last.
    """
    proxy_states = np.asarray(proxy_states, dtype=np.intp)
    n_obs = proxy_states.size
    if n_obs == 0:
        raise ValueError("need at least one observation")
    budget = full_len - n_obs
    if budget < 0:
        raise ValueError(f"{n_obs} observations exceed the claimed length {full_len}")
    cap = tables.max_gap
    slot_logw = np.full((n_obs + 1, cap + 1), -np.inf)
    slot_logw[0] = _normalized_log(tables.lead[:, proxy_states[0]])
    for k in range(1, n_obs):
        slot_logw[k] = _normalized_log(
            tables.step[:, proxy_states[k - 1], proxy_states[k]]
        )
    slot_logw[n_obs] = _normalized_log(
        tables.step[:, proxy_states[-1], :].mean(axis=1)
    )
    value = np.full(budget + 1, -np.inf)
    value[0] = 0.0
    choice = np.zeros((n_obs + 1, budget + 1), dtype=np.intp)
    shifted = np.full((cap + 1, budget + 1), -np.inf)
    for slot in range(n_obs, -1, -1):
        shifted.fill(-np.inf)
        for d in range(min(cap, budget) + 1):
            shifted[d, d:] = value[: budget + 1 - d]
        total = slot_logw[slot][:, None] + shifted
        choice[slot] = np.argmax(total, axis=0)
        value = total[choice[slot], np.arange(budget + 1)]
    if not np.isfinite(value[budget]):
        raise RuntimeError(
            f"no run profile fits length {full_len} with per-run cap {cap}"
        )
    runs = np.empty(n_obs + 1, dtype=np.intp)
    remaining = budget
    for slot in range(n_obs + 1):
        runs[slot] = choice[slot, remaining]
        remaining -= runs[slot]
    return runs


def _normalized_log(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if total <= 0.0:
        return np.full(weights.size, -np.inf)
    with np.errstate(divide="ignore"):
        return np.where(weights > 0, np.log(weights / total), -np.inf)


def _even_runs(budget: int, n_slots: int, cap: int) -> np.ndarray:
    """Budget split as evenly as the per-run cap allows, extras up front."""
    runs = np.full(n_slots, budget // n_slots, dtype=np.intp)
    runs[: budget % n_slots] += 1
    if runs.max(initial=0) > cap:
        raise RuntimeError(
            f"budget {budget} cannot be covered with per-run cap {cap}"
        )
    return runs


@dataclass
class LabelResult:
    """Outcome of the alternating maximization for one sentence."""

    labels: np.ndarray          # decoded state per observation
    states: np.ndarray          # full-length decoded path
    placement: np.ndarray
    rounds: int
    converged: bool
    objectives: list[float] = field(default_factory=list)


def label_sequence(
    model: HmmModel,
    obs,
    full_len: int,
    omit_probs,
    max_rounds: int = 20,
    max_gap: int | None = None,
) -> LabelResult:
    """Label observations whose positions in the original chain are unknown.

    Initializes placements by the budgeted run assignment against the
    per-observation emission argmax, then alternates exact path decoding
    and exact placement optimization until the placements stop moving.
    Both half-steps maximize the same joint score, recorded per half-step.
    """
    obs = np.asarray(obs)
    if obs.size == 0:
        raise ValueError("cannot label an empty sentence")
    if full_len < obs.size:
        raise ValueError("full length smaller than the observation count")
    n = model.n_states
    omit_probs = _as_omit_vector(omit_probs, n)
    budget = full_len - obs.size
    if max_gap is None:
        max_gap = min(budget, 60) if budget else 0
    if max_gap * (obs.size + 1) < budget:
        raise RuntimeError(
            f"budget {budget} cannot be covered with per-run cap {max_gap}"
        )
    tables = build_gap_tables(model.trans, omit_probs, max_gap, model.initial)
    proxy = np.argmax(model.emission.loglik_matrix(obs), axis=1)
    try:
        runs = knapsack_init(tables, proxy, full_len)
    except RuntimeError:
        # noisy proxies can leave no positive-weight profile; spread the
        # budget evenly and let the alternation repair the placements
        runs = _even_runs(budget, obs.size + 1, max_gap)
    placement = placement_from_gaps(runs[:-1])
    bonus = np.clip(
        log_probs(1.0 - omit_probs) - log_probs(omit_probs),
        -_BONUS_CAP, _BONUS_CAP,
    )
    objectives: list[float] = []
    states = None
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        states = viterbi_with_placement(
            model.trans, model.emission, obs, placement, full_len,
            omit_probs, model.initial,
        )
        objectives.append(
            joint_loglik(
                model.trans, model.emission, obs, placement, full_len,
                states, omit_probs, model.initial,
            )
        )
        new_placement = longest_path_w(
            states, obs, model.emission, node_bonus=bonus[states]
        )
        objectives.append(
            joint_loglik(
                model.trans, model.emission, obs, new_placement, full_len,
                states, omit_probs, model.initial,
            )
        )
        if np.array_equal(new_placement, placement):
            converged = True
            break
        placement = new_placement
    return LabelResult(
        labels=states[placement],
        states=states,
        placement=placement,
        rounds=rounds,
        converged=converged,
        objectives=objectives,
    )
