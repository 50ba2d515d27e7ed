"""Benchmark model zoo, corpus ingestion, and the sweep harness.

Everything an experiment needs lives behind one JSON-serializable spec:
a model family, an omission regime, a method list, and an optional sweep.
Each (sweep value, replication) cell generates one dataset that every
method consumes in stripped form, so comparisons never see different data.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .analytic import semi_analytic_reconstruct
from .baselines import PLACEMENT_PERTURBATIONS, fit_known_w, fit_naive, perturb_dataset
from .gaps import fit_gaps
from .gibbs import GibbsConfig, Priors, log_probs
from .inference import label_sequence, viterbi_with_placement
from .matching import fit_matching
from .model import (
    CategoricalEmissions,
    GaussianEmissions,
    HmmModel,
    aligned_l1,
    load_model,
    sample_trajectories,
)
from .omission import (
    ConstantOmission,
    OmittedSentence,
    StateOmission,
    apply_omission,
    generate_dataset,
    spec_from_dict,
    spec_to_dict,
    strip_dataset,
)

DESK_SENTENCES = 200
DESK_LENGTH = 60
PAPER_SENTENCES = 1500
PAPER_LENGTH = 80

METHODS = (
    "naive",
    "matching",
    "gaps",
    "known-w",
    "semi-analytic",
    "random-w",
    "equivalent-w",
    "consecutive-w",
)
SWEEPS = ("p_c", "epsilon", "sigma", "psi-missing-fraction", "provided-p_c")

RESULTS_SCHEMA = "# hmmgaps-results v1"
RESULT_COLUMNS = (
    "model_id",
    "method",
    "sweep_param",
    "sweep_value",
    "replication",
    "l1",
    "seconds",
    "seed",
    "status",
)


# ---------------------------------------------------------------------------
# Model zoo


def is_strongly_connected(trans: np.ndarray) -> bool:
    n_comp, _ = connected_components(
        trans > 0.0, directed=True, connection="strong"
    )
    return int(n_comp) == 1


def degree_rows(d: int, n_states: int, rng: np.random.Generator) -> np.ndarray:
    """One raw draw of a degree-``d`` transition matrix, connected or not."""
    trans = np.zeros((n_states, n_states))
    for i in range(n_states):
        neighbors = rng.choice(n_states, size=d, replace=False)
        trans[i, neighbors] = rng.dirichlet(np.ones(d))
    return trans


def make_synthetic_degree(
    d: int,
    n_states: int = 10,
    rng: np.random.Generator | None = None,
    sigma: float = 0.1,
    max_tries: int = 200,
) -> HmmModel:
    """Random chain where every state has exactly ``d`` out-neighbors.

    Draws are rejected until the chain is strongly connected; disconnected
    draws are rare for d >= 2 but routine for d = 1.
    """
    if not 1 <= d <= n_states:
        raise ValueError(f"degree must lie in [1, {n_states}], got {d}")
    rng = np.random.default_rng() if rng is None else rng
    for _ in range(max_tries):
        trans = degree_rows(d, n_states, rng)
        if is_strongly_connected(trans):
            means = np.arange(n_states, dtype=np.float64)
            return HmmModel(trans, GaussianEmissions(means, sigma))
    raise RuntimeError(
        f"no strongly connected degree-{d} draw in {max_tries} tries"
    )


def make_cyclic_multipartite(
    rng: np.random.Generator | None = None,
    n_groups: int = 5,
    group_size: int = 5,
    sigma: float = 0.1,
) -> HmmModel:
    """Chain whose states move only from group g to group (g+1) mod G."""
    rng = np.random.default_rng() if rng is None else rng
    n = n_groups * group_size
    trans = np.zeros((n, n))
    for i in range(n):
        g = (i // group_size + 1) % n_groups
        block = slice(g * group_size, (g + 1) * group_size)
        trans[i, block] = rng.dirichlet(np.ones(group_size))
    means = np.arange(n, dtype=np.float64)
    return HmmModel(trans, GaussianEmissions(means, sigma))


def observable_variant(model: HmmModel) -> HmmModel:
    """Same dynamics with identity emissions: the walk is observed directly."""
    n = model.n_states
    return HmmModel(
        trans=model.trans,
        emission=CategoricalEmissions(np.eye(n)),
        initial=model.initial,
    )


# ---------------------------------------------------------------------------
# Part-of-speech corpus ingestion


def _parse_tagged_line(line: str, lineno: int):
    pairs = []
    for token in line.split():
        word, sep, tag = token.rpartition("/")
        if not sep or not word or not tag:
            raise ValueError(
                f"line {lineno}: token {token!r} is not of the form word/TAG"
            )
        pairs.append((word.lower(), tag))
    return pairs


def ingest_pos_counts(tagged_text_path, top_words: int = 200) -> HmmModel:
    """Tag-bigram HMM from a word/TAG corpus, add-one smoothed throughout.

    The vocabulary keeps the ``top_words`` most frequent words; everything
    else funnels into a trailing out-of-vocabulary bucket.
    """
    path = Path(tagged_text_path)
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            sentences.append(_parse_tagged_line(line, lineno))
    if not sentences:
        raise ValueError(f"{path}: no tagged sentences found")

    tags = sorted({tag for sent in sentences for _, tag in sent})
    tag_index = {t: i for i, t in enumerate(tags)}
    word_counts: dict[str, int] = {}
    for sent in sentences:
        for word, _ in sent:
            word_counts[word] = word_counts.get(word, 0) + 1
    ranked = sorted(word_counts, key=lambda w: (-word_counts[w], w))
    vocab = ranked[:top_words]
    word_index = {w: i for i, w in enumerate(vocab)}
    oov = len(vocab)

    n = len(tags)
    trans_counts = np.zeros((n, n))
    emit_counts = np.zeros((n, oov + 1))
    init_counts = np.zeros(n)
    for sent in sentences:
        prev = None
        for word, tag in sent:
            t = tag_index[tag]
            w = word_index.get(word, oov)
            emit_counts[t, w] += 1
            if prev is None:
                init_counts[t] += 1
            else:
                trans_counts[prev, t] += 1
            prev = t

    trans = trans_counts + 1.0
    trans /= trans.sum(axis=1, keepdims=True)
    emit = emit_counts + 1.0
    emit /= emit.sum(axis=1, keepdims=True)
    initial = init_counts + 1.0
    initial /= initial.sum()
    return HmmModel(
        trans=trans,
        emission=CategoricalEmissions(emit, vocab=vocab + ["<unk>"]),
        initial=initial,
    )


def pos_fixture_path() -> Path:
    """The tagged corpus shipped with the package for offline runs."""
    return Path(resources.files("hmmgaps").joinpath("data/pos_fixture.txt"))


def demo_spec_path() -> Path:
    """Shipped experiment spec: the gap-blind failure at half deletion."""
    return Path(resources.files("hmmgaps").joinpath("data/bench_demo.json"))


# ---------------------------------------------------------------------------
# Experiment specification


@dataclass
class ExperimentSpec:
    """One experiment: a model, an omission regime, methods, and a sweep."""

    model_id: str
    n_sentences: int = DESK_SENTENCES
    sentence_length: int = DESK_LENGTH
    omission: object = field(default_factory=lambda: ConstantOmission(0.5))
    methods: tuple = ("naive", "gaps", "known-w")
    sweep_param: str | None = None
    sweep_values: tuple = ()
    replications: int = 1
    seed: int = 0
    imputation: str = "none"       # none | sampling | random
    knowledge: str = "true"        # true | empirical
    n_iterations: int = 300
    burn_in: int = 100
    sigma: float = 0.1
    trans_alpha: float = 0.1
    inner_steps: int = 30
    top_words: int = 200

    def validate(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n_sentences < 1 or self.sentence_length < 1:
            raise ValueError("corpus dimensions must be positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.imputation not in ("none", "sampling", "random"):
            raise ValueError(f"unknown imputation mode {self.imputation!r}")
        if self.knowledge not in ("true", "empirical"):
            raise ValueError(f"unknown knowledge mode {self.knowledge!r}")
        if self.sweep_param is None:
            if self.sweep_values:
                raise ValueError("sweep values given without a sweep parameter")
            return
        if self.sweep_param not in SWEEPS:
            raise ValueError(
                f"unknown sweep {self.sweep_param!r}; expected one of {SWEEPS}"
            )
        if not self.sweep_values:
            raise ValueError("sweep parameter given without values")
        values = np.asarray(self.sweep_values, dtype=np.float64)
        if self.sweep_param in ("p_c", "provided-p_c"):
            if values.min() <= 0.0 or values.max() > 1.0:
                raise ValueError("keep probabilities must lie in (0, 1]")
        elif self.sweep_param == "epsilon":
            if values.min() < 0.0 or values.max() > 0.5:
                raise ValueError("epsilon must lie in [0, 0.5]")
        elif self.sweep_param == "psi-missing-fraction":
            if values.min() < 0.0 or values.max() > 1.0:
                raise ValueError("missing fractions must lie in [0, 1]")
        elif self.sweep_param == "sigma":
            if values.min() <= 0.0:
                raise ValueError("sigma values must be positive")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "n_sentences": self.n_sentences,
            "sentence_length": self.sentence_length,
            "omission": spec_to_dict(self.omission),
            "methods": list(self.methods),
            "sweep_param": self.sweep_param,
            "sweep_values": list(self.sweep_values),
            "replications": self.replications,
            "seed": self.seed,
            "imputation": self.imputation,
            "knowledge": self.knowledge,
            "n_iterations": self.n_iterations,
            "burn_in": self.burn_in,
            "sigma": self.sigma,
            "trans_alpha": self.trans_alpha,
            "inner_steps": self.inner_steps,
            "top_words": self.top_words,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentSpec":
        data = dict(payload)
        if "model_id" not in data:
            raise ValueError("experiment spec needs a model_id")
        if "omission" in data and isinstance(data["omission"], dict):
            data["omission"] = spec_from_dict(data["omission"])
        for key in ("methods", "sweep_values"):
            if key in data:
                data[key] = tuple(data[key])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown spec fields: {sorted(unknown)}")
        spec = cls(**data)
        spec.validate()
        return spec


def load_experiment_spec(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return ExperimentSpec.from_dict(json.load(fh))


@dataclass
class ResultRow:
    model_id: str
    method: str
    sweep_param: str
    sweep_value: float | None
    replication: int
    l1: float
    seconds: float
    seed: int
    status: str = "ok"

    def as_record(self) -> list[str]:
        value = "" if self.sweep_value is None else f"{self.sweep_value:g}"
        l1 = "" if np.isnan(self.l1) else f"{self.l1:.6f}"
        return [
            self.model_id,
            self.method,
            self.sweep_param or "",
            value,
            str(self.replication),
            l1,
            f"{self.seconds:.3f}",
            str(self.seed),
            self.status,
        ]


def write_results_csv(rows, path) -> None:
    """Append rows, writing the schema comment and header on a fresh file."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        if fresh:
            fh.write(RESULTS_SCHEMA + "\n")
            fh.write(",".join(RESULT_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row.as_record()) + "\n")


def dataset_digest(dataset: list[OmittedSentence]) -> str:
    """Hash of observation content only; ground-truth fields do not count."""
    h = hashlib.sha256()
    for s in dataset:
        h.update(np.int64(s.n_obs).tobytes())
        h.update(np.ascontiguousarray(s.obs).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Cell construction


def model_by_id(model_id: str, rng: np.random.Generator, sigma: float = 0.1,
                top_words: int = 200) -> HmmModel:
    if model_id.startswith("synthetic-degree-"):
        d = int(model_id.rsplit("-", 1)[1])
        return make_synthetic_degree(d, rng=rng, sigma=sigma)
    if model_id == "cyclic-multipartite":
        return make_cyclic_multipartite(rng, sigma=sigma)
    if model_id == "pos":
        return ingest_pos_counts(pos_fixture_path(), top_words=top_words)
    path = Path(model_id)
    if path.exists():
        return load_model(path)
    raise ValueError(f"unknown model id or missing file: {model_id!r}")


def _cell_rngs(spec: ExperimentSpec, sweep_idx: int, rep: int):
    root = np.random.SeedSequence([spec.seed, sweep_idx, rep])
    data_seq, psi_seq, fit_seq = root.spawn(3)
    fit_seed = int(fit_seq.generate_state(1)[0] % np.iinfo(np.int32).max)
    return np.random.default_rng(data_seq), np.random.default_rng(psi_seq), fit_seed


def _model_rng(spec: ExperimentSpec) -> np.random.Generator:
    # one model per experiment; cells vary only in data
    return np.random.default_rng(np.random.SeedSequence([spec.seed]))


def _cell_setup(spec: ExperimentSpec, value, psi_rng, n_states: int):
    """Resolve (generator omission, Psi handed to methods, provided keep)."""
    omission = spec.omission
    provided_keep = None
    if spec.sweep_param == "p_c":
        omission = ConstantOmission(float(value))
    elif spec.sweep_param == "epsilon":
        psi = psi_rng.uniform(0.5 - float(value), 0.5 + float(value), n_states)
        omission = StateOmission(1.0 - psi)
    elif spec.sweep_param == "psi-missing-fraction":
        psi = psi_rng.uniform(0.35, 0.65, n_states)
        omission = StateOmission(1.0 - psi)
    elif spec.sweep_param == "provided-p_c":
        provided_keep = float(value)
    return omission, provided_keep


def _true_omit_vector(omission, n_states: int) -> np.ndarray:
    if isinstance(omission, ConstantOmission):
        return np.full(n_states, 1.0 - omission.keep_prob)
    if isinstance(omission, StateOmission):
        return np.asarray(omission.omit_probs, dtype=np.float64)
    # sentence- or run-correlated regimes have no per-state vector; hand
    # methods the marginal rate instead
    from .omission import keep_prob

    rates = [1.0 - keep_prob(omission, s) for s in range(n_states)]
    return np.asarray(rates, dtype=np.float64)


def _method_dataset(method: str, data, rng: np.random.Generator):
    if method in ("naive", "gaps", "semi-analytic"):
        return strip_dataset(data)
    if method == "matching":
        return strip_dataset(data, drop_full_len=False)
    if method == "known-w":
        return strip_dataset(data, drop_placement=False, drop_full_len=False)
    if method in PLACEMENT_PERTURBATIONS:
        perturbed = perturb_dataset(data, method, rng)
        return strip_dataset(perturbed, drop_placement=False, drop_full_len=False)
    raise ValueError(f"unknown method {method!r}")


def _fit_method(method, dataset, n_states, omit_arg, keep_scalar, config,
                priors, n_symbols=None):
    if method in ("naive", "semi-analytic"):
        # gap-blind fits have no omission structure to impute
        config = replace(config, omit_mode="fixed")
    if method == "naive":
        return fit_naive(
            dataset, n_states, config=config, priors=priors, n_symbols=n_symbols
        )
    if method == "gaps":
        return fit_gaps(
            dataset, n_states, omit_arg, config=config, priors=priors,
            n_symbols=n_symbols,
        )
    if method == "matching":
        return fit_matching(
            dataset, n_states, omit_arg, config=config, priors=priors,
            n_symbols=n_symbols,
        )
    if method in ("known-w", "random-w", "equivalent-w", "consecutive-w"):
        return fit_known_w(
            dataset, n_states, omit_arg, config=config, priors=priors,
            n_symbols=n_symbols,
        )
    if method == "semi-analytic":
        def gibbs_naive(stripped):
            return fit_naive(
                stripped, n_states, config=config, priors=priors,
                n_symbols=n_symbols,
            ).model

        return semi_analytic_reconstruct(dataset, keep_scalar, gibbs_naive)
    raise ValueError(f"unknown method {method!r}")


def _run_cell(spec_dict: dict, sweep_idx: int, rep: int) -> list[ResultRow]:
    spec = ExperimentSpec.from_dict(spec_dict)
    values = spec.sweep_values or (None,)
    value = values[sweep_idx]
    sigma = float(value) if spec.sweep_param == "sigma" else spec.sigma

    model = model_by_id(
        spec.model_id, _model_rng(spec), sigma=sigma, top_words=spec.top_words
    )
    n_states = model.n_states
    data_rng, psi_rng, fit_seed = _cell_rngs(spec, sweep_idx, rep)
    omission, provided_keep = _cell_setup(spec, value, psi_rng, n_states)
    data = generate_dataset(
        model, omission, spec.n_sentences, spec.sentence_length, data_rng
    )
    digest = dataset_digest(data)

    true_omit = _true_omit_vector(omission, n_states)
    if spec.knowledge == "empirical":
        kept = sum(s.n_obs for s in data)
        total = spec.n_sentences * spec.sentence_length
        omit_handout = np.full(n_states, 1.0 - kept / total)
    elif provided_keep is not None:
        omit_handout = np.full(n_states, 1.0 - provided_keep)
    else:
        omit_handout = true_omit.copy()
    keep_scalar = float(1.0 - omit_handout.mean())

    omit_mode = "fixed"
    if spec.imputation != "none":
        n_hidden = int(np.ceil(float(value or 0.0) * n_states)) \
            if spec.sweep_param == "psi-missing-fraction" else 0
        hidden = psi_rng.choice(n_states, size=n_hidden, replace=False)
        omit_handout = omit_handout.copy()
        if spec.imputation == "sampling":
            omit_handout[hidden] = np.nan
            omit_mode = "sample-missing"
        else:
            omit_handout[hidden] = psi_rng.uniform(0.0, 1.0, n_hidden)

    config = GibbsConfig(
        n_iterations=spec.n_iterations,
        burn_in=spec.burn_in,
        seed=fit_seed,
        sigma=sigma,
        inner_steps=spec.inner_steps,
        omit_mode=omit_mode,
    )
    priors = Priors(trans_alpha=spec.trans_alpha)

    rows = []
    for method in spec.methods:
        perturb_rng = np.random.default_rng(
            np.random.SeedSequence(
                [spec.seed, sweep_idx, rep, METHODS.index(method)]
            )
        )
        t0 = time.perf_counter()
        try:
            subset = _method_dataset(method, data, perturb_rng)
            if dataset_digest(subset) != digest:
                raise RuntimeError("method dataset diverged from the cell data")
            n_symbols = (
                model.emission.n_symbols
                if isinstance(model.emission, CategoricalEmissions) else None
            )
            result = _fit_method(
                method, subset, n_states, omit_handout, keep_scalar,
                config, priors, n_symbols=n_symbols,
            )
            fitted = result if isinstance(result, HmmModel) else result.model
            l1 = aligned_l1(model, fitted)
            status = "ok"
        except Exception as exc:  # error rows keep the sweep going
            l1 = float("nan")
            status = "error: " + " ".join(str(exc).split())[:160]
        rows.append(
            ResultRow(
                model_id=spec.model_id,
                method=method,
                sweep_param=spec.sweep_param or "",
                sweep_value=None if value is None else float(value),
                replication=rep,
                l1=l1,
                seconds=time.perf_counter() - t0,
                seed=spec.seed,
                status=status,
            )
        )
    return rows


def run_experiment(
    spec: ExperimentSpec,
    out_path=None,
    threads: int = 1,
    wall_seconds: bool = False,
) -> list[ResultRow]:
    """Evaluate every (sweep value, replication) cell of the spec.

    Wall-clock seconds default to zero in the output so repeated runs with
    one seed stay byte-identical; pass ``wall_seconds=True`` to keep them.
    """
    spec.validate()
    values = spec.sweep_values or (None,)
    jobs = [
        (sweep_idx, rep)
        for sweep_idx in range(len(values))
        for rep in range(spec.replications)
    ]
    payload = spec.to_dict()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(
                pool.map(_run_cell, *zip(*[(payload, i, r) for i, r in jobs]))
            )
    else:
        chunks = [_run_cell(payload, i, r) for i, r in jobs]
    rows = [row for chunk in chunks for row in chunk]
    if not wall_seconds:
        for row in rows:
            row.seconds = 0.0
    if out_path is not None:
        write_results_csv(rows, out_path)
    return rows


# ---------------------------------------------------------------------------
# Protocol experiments beyond plain sweeps


def placement_convergence_experiment(
    model: HmmModel,
    dataset: list[OmittedSentence],
    omit_probs,
    methods=("gaps", "matching"),
    inner_steps=(30,),
    n_iterations: int = 100,
    seed: int = 0,
) -> list[dict]:
    """Freeze the true parameters and watch placement sampling alone.

    Per iteration records the mean over sentences of the joint
    log-likelihood of (observations, imputed path) under the true model,
    for each method and inner-step budget.
    """
    from .gaps import _observation_evidence, _sample_gaps_batch, \
        _sample_walk_marginal, build_gap_tables, placement_matrix
    from .gibbs import (
        SentenceBatch,
        _sample_paths,
        batch_joint_loglik,
        local_evidence,
        resolve_max_gap,
        resolve_omit_probs,
    )
    from .matching import _random_placements, mh_sweep_w

    batch = SentenceBatch(dataset)
    n_states = model.n_states
    omit, _ = resolve_omit_probs(omit_probs, n_states, "fixed")
    trans = model.trans
    obs_loglik = batch.obs_loglik(model.emission)
    log_init = log_probs(np.full(n_states, 1.0 / n_states))
    rows = []

    if "gaps" in methods:
        rng = np.random.default_rng(seed)
        cap = resolve_max_gap(omit)
        tables = build_gap_tables(trans, omit, cap)
        obs_evid = _observation_evidence(batch, obs_loglik, omit)
        for it in range(n_iterations):
            walk = _sample_walk_marginal(tables, obs_evid, batch.k_lens, rng)
            gaps = _sample_gaps_batch(tables, walk, batch.k_lens, batch.k_mask, rng)
            placements = placement_matrix(gaps, batch.k_mask)
            full_lens = gaps.sum(axis=1) + batch.k_lens
            evid = local_evidence(batch, obs_loglik, omit, placements, full_lens)
            paths = _sample_paths(log_init, trans, evid, full_lens, rng)
            score = batch_joint_loglik(evid, paths, trans, full_lens)
            rows.append({
                "method": "gaps", "inner_steps": 1, "iteration": it,
                "joint_loglik": float(score.mean()),
            })

    if "matching" in methods:
        if batch.full_lens is None:
            raise ValueError("matching convergence needs full_len on sentences")
        for steps in inner_steps:
            rng = np.random.default_rng(seed)
            config = GibbsConfig(inner_steps=int(steps))
            placements = _random_placements(batch, rng)
            evid = local_evidence(
                batch, obs_loglik, omit, placements, batch.full_lens
            )
            paths = _sample_paths(log_init, trans, evid, batch.full_lens, rng)
            for it in range(n_iterations):
                mh_sweep_w(
                    placements, paths, obs_loglik, omit,
                    batch.k_lens, batch.full_lens, config, rng,
                )
                evid = local_evidence(
                    batch, obs_loglik, omit, placements, batch.full_lens
                )
                paths = _sample_paths(log_init, trans, evid, batch.full_lens, rng)
                score = batch_joint_loglik(evid, paths, trans, batch.full_lens)
                rows.append({
                    "method": "matching", "inner_steps": int(steps),
                    "iteration": it, "joint_loglik": float(score.mean()),
                })
    return rows


def write_convergence_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# hmmgaps-convergence v1\n")
        fh.write("method,inner_steps,iteration,joint_loglik\n")
        for r in rows:
            fh.write(
                f"{r['method']},{r['inner_steps']},{r['iteration']},"
                f"{r['joint_loglik']:.6f}\n"
            )


def psi_imputation_experiment(spec: ExperimentSpec, out_path=None,
                              threads: int = 1) -> list[ResultRow]:
    """Hidden-Psi sweep: per-state omission drawn once, a fraction hidden."""
    if spec.sweep_param != "psi-missing-fraction":
        raise ValueError("spec must sweep psi-missing-fraction")
    if spec.imputation == "none":
        raise ValueError("imputation experiment needs sampling or random mode")
    return run_experiment(spec, out_path=out_path, threads=threads)


def label_accuracy_experiment(
    model: HmmModel,
    n_sentences: int,
    sentence_length: int,
    keep: float,
    rng: np.random.Generator,
    max_rounds: int = 20,
) -> dict[str, float]:
    """Mean labeling accuracy at kept positions for the four reference modes.

    full: decode the unthinned observation sequence with the true model;
    known-w: decode at the true placements; hmmop: alternating placement
    search with known original length; naive: decode the kept sequence as
    if gapless.  Accuracy is measured against the true states at kept
    positions only, so all four are comparable.
    """
    n_states = model.n_states
    omit = np.full(n_states, 1.0 - keep)
    zero = np.zeros(n_states)
    states_all, obs_all = sample_trajectories(
        model, n_sentences, sentence_length, rng
    )
    spec = ConstantOmission(keep)
    totals = {"full": 0.0, "known-w": 0.0, "hmmop": 0.0, "naive": 0.0}
    counted = 0
    for i in range(n_sentences):
        sentence = apply_omission(states_all[i], obs_all[i], spec, rng)
        if sentence.n_obs == 0:
            continue
        truth = states_all[i][sentence.placement]
        k = sentence.n_obs
        n = sentence_length

        full_states = viterbi_with_placement(
            model.trans, model.emission, obs_all[i],
            np.arange(n), n, zero,
        )
        known_states = viterbi_with_placement(
            model.trans, model.emission, sentence.obs,
            sentence.placement, n, omit,
        )
        labeled = label_sequence(
            model, sentence.obs, n, omit, max_rounds=max_rounds
        )
        naive_states = viterbi_with_placement(
            model.trans, model.emission, sentence.obs,
            np.arange(k), k, zero,
        )

        totals["full"] += float(np.mean(full_states[sentence.placement] == truth))
        totals["known-w"] += float(np.mean(known_states[sentence.placement] == truth))
        totals["hmmop"] += float(np.mean(labeled.labels == truth))
        totals["naive"] += float(np.mean(naive_states == truth))
        counted += 1
    if counted == 0:
        raise RuntimeError("every sentence lost all observations")
    return {name: value / counted for name, value in totals.items()}
