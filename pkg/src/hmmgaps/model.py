"""Hidden Markov model container, simulation, and comparison utilities.

A model bundles a row-stochastic transition matrix, an emission family
(scalar Gaussian with shared spread, or categorical over a finite
vocabulary), and an initial state distribution.  Everything downstream
(omission machinery, samplers, benchmarks) works against this container.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

# Finite stand-in for log(0); exp() underflows to exactly 0.0 and sums of a
# few sentinels stay representable, which keeps recursions branch-free.
LOG_ZERO = -1.0e300

_ATOL_ROW = 1e-8
_ATOL_NEG = 1e-9


def _as_prob_matrix(entries, name: str) -> np.ndarray:
    mat = np.asarray(entries, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {mat.shape}")
    if np.min(mat) < -_ATOL_NEG:
        raise ValueError(f"{name} has negative entries (min {np.min(mat):.3e})")
    sums = mat.sum(axis=1)
    bad = np.where(np.abs(sums - 1.0) > _ATOL_ROW)[0]
    if bad.size:
        raise ValueError(
            f"{name} row {bad[0]} sums to {sums[bad[0]]!r}, expected 1"
        )
    return mat


def _as_prob_vector(entries, name: str) -> np.ndarray:
    vec = np.asarray(entries, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {vec.shape}")
    if np.min(vec) < -_ATOL_NEG:
        raise ValueError(f"{name} has negative entries (min {np.min(vec):.3e})")
    if abs(vec.sum() - 1.0) > _ATOL_ROW:
        raise ValueError(f"{name} sums to {vec.sum()!r}, expected 1")
    return vec


@dataclass
class GaussianEmissions:
    """Scalar Gaussian emissions: state ``i`` emits ``Normal(means[i], sd)``."""

    means: np.ndarray
    sd: float

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        if self.means.ndim != 1:
            raise ValueError("emission means must be a vector")
        self.sd = float(self.sd)
        if self.sd <= 0:
            raise ValueError(f"emission sd must be positive, got {self.sd}")

    @property
    def n_states(self) -> int:
        return self.means.size

    def loglik_matrix(self, values) -> np.ndarray:
        """Log density of each value under each state, shape (len, n_states)."""
        values = np.asarray(values, dtype=np.float64)
        z = (values[:, None] - self.means[None, :]) / self.sd
        return -0.5 * z * z - np.log(self.sd) - 0.5 * np.log(2.0 * np.pi)

    def sample(self, states, rng: np.random.Generator) -> np.ndarray:
        states = np.asarray(states, dtype=np.intp)
        return self.means[states] + self.sd * rng.standard_normal(states.shape)

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "means": self.means.tolist(), "sd": self.sd}


@dataclass
class CategoricalEmissions:
    """Categorical emissions over a finite vocabulary of symbol indices."""

    probs: np.ndarray
    vocab: list[str] | None = None

    def __post_init__(self):
        self.probs = _as_prob_matrix(self.probs, "emission probs")
        if self.vocab is not None:
            self.vocab = list(self.vocab)
            if len(self.vocab) != self.probs.shape[1]:
                raise ValueError(
                    f"vocab size {len(self.vocab)} does not match "
                    f"emission columns {self.probs.shape[1]}"
                )

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.probs.shape[1]

    def loglik_matrix(self, values) -> np.ndarray:
        values = np.asarray(values)
        if values.size and (values.min() < 0 or values.max() >= self.n_symbols):
            raise ValueError(
                f"observation symbol out of range [0, {self.n_symbols})"
            )
        cols = self.probs.T[np.asarray(values, dtype=np.intp)]
        with np.errstate(divide="ignore"):
            out = np.log(cols)
        out[cols == 0.0] = LOG_ZERO
        return out

    def sample(self, states, rng: np.random.Generator) -> np.ndarray:
        states = np.asarray(states, dtype=np.intp)
        cum = np.cumsum(self.probs, axis=1)
        u = rng.random(states.shape)
        return (cum[states] < u[..., None]).sum(axis=-1)

    def to_dict(self) -> dict:
        return {
            "kind": "categorical",
            "probs": self.probs.tolist(),
            "vocab": self.vocab,
        }


EmissionModel = GaussianEmissions | CategoricalEmissions


def emission_from_dict(payload: dict) -> EmissionModel:
    kind = payload.get("kind")
    if kind == "gaussian":
        return GaussianEmissions(np.asarray(payload["means"]), payload["sd"])
    if kind == "categorical":
        return CategoricalEmissions(np.asarray(payload["probs"]), payload.get("vocab"))
    raise ValueError(f"unknown emission kind {kind!r}")


@dataclass
class HmmModel:
    """Transition matrix + emission family + initial state distribution."""

    trans: np.ndarray
    emission: EmissionModel
    initial: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.trans = _as_prob_matrix(self.trans, "transition matrix")
        n = self.trans.shape[0]
        if self.trans.shape[1] != n:
            raise ValueError("transition matrix must be square")
        if self.emission.n_states != n:
            raise ValueError(
                f"emission describes {self.emission.n_states} states, "
                f"transition matrix has {n}"
            )
        if self.initial is None:
            self.initial = np.full(n, 1.0 / n)
        self.initial = _as_prob_vector(self.initial, "initial distribution")
        if self.initial.size != n:
            raise ValueError("initial distribution length must match n_states")

    @property
    def n_states(self) -> int:
        return self.trans.shape[0]

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "T": self.trans.tolist(),
            "emission": self.emission.to_dict(),
            "initial": self.initial.tolist(),
        }

    @staticmethod
    def from_dict(payload: dict) -> "HmmModel":
        model = HmmModel(
            trans=np.asarray(payload["T"]),
            emission=emission_from_dict(payload["emission"]),
            initial=np.asarray(payload["initial"]),
        )
        if model.n_states != payload.get("n_states", model.n_states):
            raise ValueError("n_states field disagrees with matrix shape")
        return model


def save_model(model: HmmModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> HmmModel:
    with open(path) as fh:
        return HmmModel.from_dict(json.load(fh))


def emission_loglik(model: HmmModel, state: int, value) -> float:
    """Log density/mass of a single observed value under one state."""
    if not 0 <= state < model.n_states:
        raise ValueError(f"state {state} out of range [0, {model.n_states})")
    return float(model.emission.loglik_matrix(np.asarray([value]))[0, state])


def sample_trajectory(model: HmmModel, length: int, rng: np.random.Generator):
    """Draw one latent state path and its emitted observations.

    Returns
    -------
    states : (length,) int array
    obs : (length,) array of emitted values
    """
    states, obs = sample_trajectories(model, 1, length, rng)
    return states[0], obs[0]


def sample_trajectories(
    model: HmmModel, n_sentences: int, length: int, rng: np.random.Generator
):
    """Draw ``n_sentences`` independent state paths and observations at once."""
    if length < 1:
        raise ValueError(f"trajectory length must be >= 1, got {length}")
    n = model.n_states
    states = np.empty((n_sentences, length), dtype=np.intp)
    init_cum = np.cumsum(model.initial)
    trans_cum = np.cumsum(model.trans, axis=1)
    u = rng.random(n_sentences)
    states[:, 0] = np.minimum((init_cum < u[:, None]).sum(axis=1), n - 1)
    for t in range(1, length):
        u = rng.random(n_sentences)
        nxt = (trans_cum[states[:, t - 1]] < u[:, None]).sum(axis=1)
        states[:, t] = np.minimum(nxt, n - 1)
    obs = model.emission.sample(states, rng)
    return states, obs


def stationary_distribution(
    trans: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000
) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix by power iteration.

    Iterates the lazy chain (T + I)/2 from the uniform vector, which has the
    same stationary points as T but converges for periodic chains as well.
    Reducible inputs resolve to the uniform-start limit.
    """
    trans = _as_prob_matrix(trans, "transition matrix")
    n = trans.shape[0]
    lazy = 0.5 * (trans + np.eye(n))
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ lazy
        if np.abs(nxt - pi).sum() < tol:
            pi = nxt
            break
        pi = nxt
    else:
        raise RuntimeError(
            f"power iteration did not reach tolerance {tol} in {max_iter} steps"
        )
    pi = pi / pi.sum()
    residual = np.abs(pi @ trans - pi).sum()
    if residual > 1e-10:
        raise RuntimeError(f"stationary residual {residual:.3e} exceeds 1e-10")
    return pi


def l1_transition_distance(
    a: np.ndarray, b: np.ndarray, weights: np.ndarray | None = None
) -> float:
    """Weighted mean of row-wise L1 differences between two stochastic matrices.

    Defaults to the uniform row weighting; a probability vector (for example
    a stationary distribution) can reweight rows.  Range is [0, 2].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    rows = np.abs(a - b).sum(axis=1)
    if weights is None:
        return float(rows.mean())
    weights = _as_prob_vector(weights, "row weights")
    return float(rows @ weights)


def align_states(learned: HmmModel, truth: HmmModel) -> np.ndarray:
    """Best relabeling of learned states onto true states by emission match.

    Solves the exact assignment problem on |mean difference| for Gaussian
    emissions or total-variation distance of emission rows for categorical
    ones.  Ties resolve to scipy's deterministic assignment order.

    Returns
    -------
    perm : (n,) int array with ``perm[i]`` the true index for learned state i.
    """
    if learned.n_states != truth.n_states:
        raise ValueError("models must have the same number of states")
    le, te = learned.emission, truth.emission
    if isinstance(le, GaussianEmissions) and isinstance(te, GaussianEmissions):
        cost = np.abs(le.means[:, None] - te.means[None, :])
    elif isinstance(le, CategoricalEmissions) and isinstance(te, CategoricalEmissions):
        cost = 0.5 * np.abs(le.probs[:, None, :] - te.probs[None, :, :]).sum(axis=2)
    else:
        raise ValueError("emission families differ between the two models")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(learned.n_states, dtype=np.intp)
    perm[rows] = cols
    return perm


def permute_states(model: HmmModel, perm: np.ndarray) -> HmmModel:
    """Relabel a model's states so index ``perm[i]`` plays the role of ``i``."""
    perm = np.asarray(perm, dtype=np.intp)
    inv = np.argsort(perm)
    trans = model.trans[np.ix_(inv, inv)]
    initial = model.initial[inv]
    if isinstance(model.emission, GaussianEmissions):
        emission = GaussianEmissions(model.emission.means[inv], model.emission.sd)
    else:
        emission = CategoricalEmissions(
            model.emission.probs[inv], model.emission.vocab
        )
    return HmmModel(trans=trans, emission=emission, initial=initial)


def aligned_l1(
    learned: HmmModel, truth: HmmModel, weights: np.ndarray | None = None
) -> float:
    """L1 transition distance after aligning learned states onto the truth."""
    perm = align_states(learned, truth)
    return l1_transition_distance(
        permute_states(learned, perm).trans, truth.trans, weights
    )
