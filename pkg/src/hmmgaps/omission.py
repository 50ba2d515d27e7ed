"""Deletion processes applied to emitted trajectories.

A full trajectory of length N is thinned to the kept subsequence; the kept
positions W and the original length N are ground truth that downstream
fitters may or may not be allowed to see.  Four deletion mechanisms are
supported: a constant keep probability, a per-state omission probability,
a per-sentence keep probability drawn from a clamped normal, and a two-state
Markov process over seen/missing whose bias controls burst structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstantOmission:
    """Every position kept independently with probability ``keep_prob``."""

    keep_prob: float

    def __post_init__(self):
        if not 0.0 <= self.keep_prob <= 1.0:
            raise ValueError(f"keep_prob must lie in [0, 1], got {self.keep_prob}")


@dataclass(frozen=True)
class StateOmission:
    """Position t deleted with probability ``omit_probs[state_t]``."""

    omit_probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.omit_probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("omit_probs must be a non-empty vector")
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise ValueError("omit_probs entries must lie in [0, 1]")
        object.__setattr__(self, "omit_probs", probs)


@dataclass(frozen=True)
class SentenceNormalOmission:
    """Keep probability redrawn per sentence from Normal(mean, sigma).

    Draws are clamped into [0.01, 1.0] so every sentence retains a small
    chance of keeping observations.
    """

    mean: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class MarkovOmission:
    """Seen/missing follows its own two-state chain with sticky bias.

    P(seen | seen) = keep_prob + bias, P(seen | missing) = keep_prob - bias,
    and the first position is seen with probability ``keep_prob``.  A bias of
    zero recovers independent thinning at rate ``keep_prob``.
    """

    keep_prob: float
    bias: float

    def __post_init__(self):
        stay = self.keep_prob + self.bias
        comeback = self.keep_prob - self.bias
        for name, p in (("P(seen|seen)", stay), ("P(seen|missing)", comeback)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} = {p} falls outside [0, 1]")
        if not 0.0 <= self.keep_prob <= 1.0:
            raise ValueError(f"keep_prob must lie in [0, 1], got {self.keep_prob}")


OmissionSpec = (
    ConstantOmission | StateOmission | SentenceNormalOmission | MarkovOmission
)


def keep_prob(spec: OmissionSpec, state: int) -> float:
    """Effective probability that an emission from ``state`` is kept.

    For the per-sentence and Markov variants this is the marginal rate, not
    a per-position probability.
    """
    if isinstance(spec, ConstantOmission):
        return spec.keep_prob
    if isinstance(spec, StateOmission):
        if not 0 <= state < spec.omit_probs.size:
            raise ValueError(f"state {state} out of range")
        return float(1.0 - spec.omit_probs[state])
    if isinstance(spec, SentenceNormalOmission):
        return float(min(max(spec.mean, 0.01), 1.0))
    if isinstance(spec, MarkovOmission):
        return spec.keep_prob
    raise TypeError(f"not an omission spec: {spec!r}")


def spec_to_dict(spec: OmissionSpec) -> dict:
    if isinstance(spec, ConstantOmission):
        return {"variant": "constant", "keep_prob": spec.keep_prob}
    if isinstance(spec, StateOmission):
        return {"variant": "state", "omit_probs": spec.omit_probs.tolist()}
    if isinstance(spec, SentenceNormalOmission):
        return {"variant": "sentence-normal", "mean": spec.mean, "sigma": spec.sigma}
    if isinstance(spec, MarkovOmission):
        return {"variant": "markov", "keep_prob": spec.keep_prob, "bias": spec.bias}
    raise TypeError(f"not an omission spec: {spec!r}")


def spec_from_dict(payload: dict) -> OmissionSpec:
    variant = payload.get("variant")
    if variant == "constant":
        return ConstantOmission(payload["keep_prob"])
    if variant == "state":
        return StateOmission(np.asarray(payload["omit_probs"]))
    if variant == "sentence-normal":
        return SentenceNormalOmission(payload["mean"], payload["sigma"])
    if variant == "markov":
        return MarkovOmission(payload["keep_prob"], payload["bias"])
    raise ValueError(f"unknown omission variant {variant!r}")


@dataclass
class OmittedSentence:
    """Kept observations plus whatever ground truth survives.

    obs: kept observation values, in original order.
    placement: kept original indices (strictly increasing), or None if unknown.
    full_len: original trajectory length N, or None if unknown.
    states: full latent state path (simulation truth), or None.
    """

    obs: np.ndarray
    placement: np.ndarray | None = None
    full_len: int | None = None
    states: np.ndarray | None = None

    def __post_init__(self):
        self.obs = np.asarray(self.obs)
        if self.placement is not None:
            self.placement = np.asarray(self.placement, dtype=np.intp)
            if self.placement.size != self.obs.size:
                raise ValueError("placement and obs lengths differ")
            if self.placement.size:
                if np.any(np.diff(self.placement) <= 0):
                    raise ValueError("placement must be strictly increasing")
                if self.placement[0] < 0:
                    raise ValueError("placement indices must be non-negative")
        if self.full_len is not None:
            self.full_len = int(self.full_len)
            if self.obs.size > self.full_len:
                raise ValueError("more observations than original length")
            if self.placement is not None and self.placement.size:
                if self.placement[-1] >= self.full_len:
                    raise ValueError("placement index beyond original length")
        if self.states is not None:
            self.states = np.asarray(self.states, dtype=np.intp)
            if self.full_len is not None and self.states.size != self.full_len:
                raise ValueError("states length must equal full_len")

    @property
    def n_obs(self) -> int:
        return self.obs.size


def _keep_mask(states: np.ndarray, spec: OmissionSpec, rng: np.random.Generator):
    n = states.size
    if isinstance(spec, ConstantOmission):
        return rng.random(n) < spec.keep_prob
    if isinstance(spec, StateOmission):
        if states.size and states.max() >= spec.omit_probs.size:
            raise ValueError(
                f"state {states.max()} has no omission probability "
                f"(spec covers {spec.omit_probs.size} states)"
            )
        return rng.random(n) < 1.0 - spec.omit_probs[states]
    if isinstance(spec, SentenceNormalOmission):
        p = min(max(rng.normal(spec.mean, spec.sigma), 0.01), 1.0)
        return rng.random(n) < p
    if isinstance(spec, MarkovOmission):
        stay = spec.keep_prob + spec.bias
        comeback = spec.keep_prob - spec.bias
        u = rng.random(n)
        mask = np.empty(n, dtype=bool)
        seen = u[0] < spec.keep_prob
        mask[0] = seen
        for t in range(1, n):
            seen = u[t] < (stay if seen else comeback)
            mask[t] = seen
        return mask
    raise TypeError(f"not an omission spec: {spec!r}")


def apply_omission(
    states, obs, spec: OmissionSpec, rng: np.random.Generator
) -> OmittedSentence:
    """Thin one trajectory, recording kept indices and the original length.

    Zero kept observations is a legal outcome.
    """
    states = np.asarray(states, dtype=np.intp)
    obs = np.asarray(obs)
    if states.shape != obs.shape:
        raise ValueError("states and obs must have equal length")
    mask = _keep_mask(states, spec, rng)
    kept = np.nonzero(mask)[0]
    return OmittedSentence(
        obs=obs[kept],
        placement=kept,
        full_len=states.size,
        states=states,
    )


def make_dataset(
    states_batch, obs_batch, spec: OmissionSpec, rng: np.random.Generator
) -> list[OmittedSentence]:
    """Apply the deletion process independently to each trajectory."""
    return [
        apply_omission(states_batch[i], obs_batch[i], spec, rng)
        for i in range(len(states_batch))
    ]


def generate_dataset(
    model,
    spec: OmissionSpec,
    n_sentences: int,
    full_len: int,
    rng: np.random.Generator,
) -> list[OmittedSentence]:
    """Sample trajectories from ``model`` and thin them in one call."""
    from .model import sample_trajectories

    states, obs = sample_trajectories(model, n_sentences, full_len, rng)
    return make_dataset(states, obs, spec, rng)


def strip_dataset(
    dataset: list[OmittedSentence],
    drop_placement: bool = True,
    drop_full_len: bool = True,
    drop_states: bool = True,
) -> list[OmittedSentence]:
    """Remove ground-truth fields to simulate unknown-gap input."""
    return [
        OmittedSentence(
            obs=s.obs,
            placement=None if drop_placement else s.placement,
            full_len=None if drop_full_len else s.full_len,
            states=None if drop_states else s.states,
        )
        for s in dataset
    ]


def dataset_keep_fraction(dataset: list[OmittedSentence]) -> float:
    """Fraction of original positions kept; requires full_len on every sentence."""
    total = 0
    kept = 0
    for s in dataset:
        if s.full_len is None:
            raise ValueError("keep fraction needs full_len on every sentence")
        total += s.full_len
        kept += s.n_obs
    if total == 0:
        raise ValueError("dataset has no positions")
    return kept / total


def _sentence_to_dict(s: OmittedSentence) -> dict:
    payload: dict = {"O": s.obs.tolist()}
    if s.placement is not None:
        payload["W"] = s.placement.tolist()
    if s.full_len is not None:
        payload["N"] = s.full_len
    if s.states is not None:
        payload["X"] = s.states.tolist()
    return payload


def _sentence_from_dict(payload: dict) -> OmittedSentence:
    return OmittedSentence(
        obs=np.asarray(payload["O"]),
        placement=(
            np.asarray(payload["W"], dtype=np.intp) if "W" in payload else None
        ),
        full_len=payload.get("N"),
        states=(np.asarray(payload["X"], dtype=np.intp) if "X" in payload else None),
    )


def save_dataset(dataset: list[OmittedSentence], path) -> None:
    """Write one JSON object per line with keys O and optional W, N, X."""
    with open(path, "w") as fh:
        for s in dataset:
            fh.write(json.dumps(_sentence_to_dict(s), sort_keys=True,
                                separators=(",", ":")))
            fh.write("\n")


def load_dataset(path) -> list[OmittedSentence]:
    sentences = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                sentences.append(_sentence_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"line {lineno}: bad sentence record ({exc})")
    return sentences
