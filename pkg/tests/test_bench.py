import json

import numpy as np
import pytest

from hmmgaps.bench import (
    ExperimentSpec,
    ResultRow,
    dataset_digest,
    demo_spec_path,
    ingest_pos_counts,
    is_strongly_connected,
    label_accuracy_experiment,
    load_experiment_spec,
    make_cyclic_multipartite,
    make_synthetic_degree,
    model_by_id,
    observable_variant,
    placement_convergence_experiment,
    pos_fixture_path,
    psi_imputation_experiment,
    run_experiment,
    write_convergence_csv,
    write_results_csv,
    _cell_rngs,
    _parse_tagged_line,
)
from hmmgaps.model import CategoricalEmissions, save_model
from hmmgaps.omission import (
    ConstantOmission,
    OmittedSentence,
    StateOmission,
    generate_dataset,
)

from conftest import chain_model


def test_make_synthetic_degree_structure():
    rng = np.random.default_rng(0)
    model = make_synthetic_degree(3, n_states=8, rng=rng)
    assert model.n_states == 8
    assert np.all((model.trans > 0).sum(axis=1) == 3)
    assert np.allclose(model.trans.sum(axis=1), 1.0)
    assert is_strongly_connected(model.trans)
    assert np.array_equal(model.emission.means, np.arange(8.0))
    with pytest.raises(ValueError, match="degree"):
        make_synthetic_degree(0)


def test_make_cyclic_multipartite_block_support():
    model = make_cyclic_multipartite(np.random.default_rng(1))
    assert model.n_states == 25
    assert np.allclose(model.trans.sum(axis=1), 1.0)
    for i in range(25):
        target = (i // 5 + 1) % 5
        support = np.nonzero(model.trans[i] > 0)[0] // 5
        assert set(support) == {target}
    assert is_strongly_connected(model.trans)


def test_observable_variant_identity_emissions():
    model = chain_model(4)
    obs = observable_variant(model)
    assert np.array_equal(obs.trans, model.trans)
    assert isinstance(obs.emission, CategoricalEmissions)
    assert np.array_equal(obs.emission.probs, np.eye(4))


def test_parse_tagged_line():
    assert _parse_tagged_line("The/DT dog/NN", 1) == [("the", "DT"), ("dog", "NN")]
    with pytest.raises(ValueError, match="line 3.*word/TAG"):
        _parse_tagged_line("oops", 3)


def recount_pos(path, top_words):
    """Independent tag-bigram recount with add-one smoothing."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            sentences.append(
                [tok.rpartition("/") for tok in line.split()]
            )
    sentences = [[(w.lower(), t) for w, _, t in sent] for sent in sentences]
    tags = sorted({t for sent in sentences for _, t in sent})
    t_idx = {t: i for i, t in enumerate(tags)}
    counts = {}
    for sent in sentences:
        for w, _ in sent:
            counts[w] = counts.get(w, 0) + 1
    vocab = sorted(counts, key=lambda w: (-counts[w], w))[:top_words]
    w_idx = {w: i for i, w in enumerate(vocab)}
    n, v = len(tags), len(vocab) + 1
    trans = np.ones((n, n))
    emit = np.ones((n, v))
    init = np.ones(n)
    for sent in sentences:
        prev = None
        for w, t in sent:
            ti = t_idx[t]
            emit[ti, w_idx.get(w, v - 1)] += 1
            if prev is None:
                init[ti] += 1
            else:
                trans[prev, ti] += 1
            prev = ti
    return (
        trans / trans.sum(axis=1, keepdims=True),
        emit / emit.sum(axis=1, keepdims=True),
        init / init.sum(),
        vocab,
    )


def test_ingest_pos_counts_matches_recount():
    path = pos_fixture_path()
    assert path.exists()
    model = ingest_pos_counts(path, top_words=12)
    trans, emit, init, vocab = recount_pos(path, 12)
    assert np.allclose(model.trans, trans)
    assert np.allclose(model.emission.probs, emit)
    assert np.allclose(model.initial, init)
    assert model.emission.vocab == vocab + ["<unk>"]
    assert np.allclose(model.trans.sum(axis=1), 1.0)
    assert np.all(model.trans > 0)  # smoothing leaves no zeros


def test_ingest_pos_counts_rejects_empty(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("\n\n", encoding="utf-8")
    with pytest.raises(ValueError, match="no tagged sentences"):
        ingest_pos_counts(empty)


def test_experiment_spec_validation():
    with pytest.raises(ValueError, match="unknown methods"):
        ExperimentSpec(model_id="pos", methods=("voodoo",)).validate()
    with pytest.raises(ValueError, match="without a sweep parameter"):
        ExperimentSpec(model_id="pos", sweep_values=(0.5,)).validate()
    with pytest.raises(ValueError, match="without values"):
        ExperimentSpec(model_id="pos", sweep_param="p_c").validate()
    with pytest.raises(ValueError, match="unknown sweep"):
        ExperimentSpec(
            model_id="pos", sweep_param="beta", sweep_values=(1,)
        ).validate()
    with pytest.raises(ValueError, match=r"\(0, 1\]"):
        ExperimentSpec(
            model_id="pos", sweep_param="p_c", sweep_values=(0.0,)
        ).validate()
    with pytest.raises(ValueError, match="epsilon"):
        ExperimentSpec(
            model_id="pos", sweep_param="epsilon", sweep_values=(0.7,)
        ).validate()
    ExperimentSpec(
        model_id="pos", sweep_param="sigma", sweep_values=(0.1, 0.5)
    ).validate()


def test_experiment_spec_round_trip():
    spec = ExperimentSpec(
        model_id="synthetic-degree-3",
        omission=StateOmission(np.array([0.2, 0.8])),
        methods=("naive", "gaps"),
        sweep_param="p_c",
        sweep_values=(0.3, 0.6),
        replications=2,
        seed=7,
    )
    back = ExperimentSpec.from_dict(spec.to_dict())
    assert back.model_id == spec.model_id
    assert isinstance(back.omission, StateOmission)
    assert np.array_equal(back.omission.omit_probs, [0.2, 0.8])
    assert back.sweep_values == (0.3, 0.6)
    with pytest.raises(ValueError, match="unknown spec fields"):
        ExperimentSpec.from_dict({"model_id": "pos", "typo": 1})
    with pytest.raises(ValueError, match="model_id"):
        ExperimentSpec.from_dict({})


def test_result_row_formatting():
    row = ResultRow(
        model_id="pos", method="gaps", sweep_param="p_c", sweep_value=0.5,
        replication=0, l1=0.1234567, seconds=1.23456, seed=3,
    )
    rec = row.as_record()
    assert rec[3] == "0.5" and rec[5] == "0.123457" and rec[6] == "1.235"
    blank = ResultRow(
        model_id="pos", method="gaps", sweep_param="", sweep_value=None,
        replication=0, l1=float("nan"), seconds=0.0, seed=3, status="error: x",
    )
    rec = blank.as_record()
    assert rec[3] == "" and rec[5] == "" and rec[8] == "error: x"


def test_write_results_csv_schema(tmp_path):
    out = tmp_path / "r.csv"
    row = ResultRow(
        model_id="m", method="naive", sweep_param="", sweep_value=None,
        replication=0, l1=0.5, seconds=0.0, seed=0,
    )
    write_results_csv([row], out)
    write_results_csv([row], out)  # append must not repeat the header
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# hmmgaps-results v1"
    assert lines[1].startswith("model_id,method,sweep_param")
    assert len(lines) == 4


def test_dataset_digest_ignores_truth_fields():
    a = [OmittedSentence(obs=np.array([1.0, 2.0]), placement=np.array([0, 3]),
                         full_len=5, states=np.array([0, 1, 0, 1, 0]))]
    b = [OmittedSentence(obs=np.array([1.0, 2.0]))]
    c = [OmittedSentence(obs=np.array([1.0, 2.5]))]
    assert dataset_digest(a) == dataset_digest(b)
    assert dataset_digest(a) != dataset_digest(c)


def test_model_by_id_dispatch(tmp_path):
    rng = np.random.default_rng(2)
    assert model_by_id("synthetic-degree-2", rng).n_states == 10
    assert model_by_id("cyclic-multipartite", rng).n_states == 25
    assert model_by_id("pos", rng).n_states > 1
    path = tmp_path / "m.json"
    save_model(chain_model(3), path)
    assert model_by_id(str(path), rng).n_states == 3
    with pytest.raises(ValueError, match="unknown model id"):
        model_by_id("surprise", rng)


def test_cell_rngs_deterministic():
    spec = ExperimentSpec(model_id="pos", seed=11)
    d1, p1, f1 = _cell_rngs(spec, 2, 1)
    d2, p2, f2 = _cell_rngs(spec, 2, 1)
    assert f1 == f2
    assert d1.random() == d2.random()
    assert p1.random() == p2.random()
    _, _, f3 = _cell_rngs(spec, 2, 2)
    assert f3 != f1


def test_demo_spec_loads():
    spec = load_experiment_spec(demo_spec_path())
    assert spec.model_id == "cyclic-multipartite"
    assert set(spec.methods) == {"naive", "known-w"}


def _tiny_spec(**overrides):
    base = dict(
        model_id="synthetic-degree-3",
        n_sentences=12,
        sentence_length=15,
        methods=("naive", "known-w"),
        sweep_param="p_c",
        sweep_values=(0.7,),
        replications=1,
        seed=0,
        n_iterations=8,
        burn_in=2,
    )
    base.update(overrides)
    return ExperimentSpec(**base)


def test_run_experiment_writes_rows(tmp_path):
    out = tmp_path / "results.csv"
    rows = run_experiment(_tiny_spec(), out_path=out)
    assert len(rows) == 2
    assert all(r.status == "ok" for r in rows)
    assert all(r.seconds == 0.0 for r in rows)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# hmmgaps-results v1"
    assert len(lines) == 4
    timed = run_experiment(_tiny_spec(), wall_seconds=True)
    assert any(r.seconds > 0.0 for r in timed)


def test_run_experiment_deterministic_output(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    run_experiment(_tiny_spec(methods=("naive", "gaps")), out_path=a)
    run_experiment(_tiny_spec(methods=("naive", "gaps")), out_path=b)
    assert a.read_bytes() == b.read_bytes()


def test_run_experiment_naive_equals_known_w_without_deletions(tmp_path):
    rows = run_experiment(_tiny_spec(sweep_values=(1.0,)))
    by_method = {r.method: r for r in rows}
    assert by_method["naive"].as_record()[5] == by_method["known-w"].as_record()[5]


def test_run_experiment_error_rows_keep_going(monkeypatch):
    import hmmgaps.bench as bench

    def boom(*args, **kwargs):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(bench, "fit_naive", boom)
    rows = run_experiment(_tiny_spec(methods=("naive", "known-w")))
    by_method = {r.method: r for r in rows}
    assert by_method["naive"].status.startswith("error: synthetic failure")
    assert np.isnan(by_method["naive"].l1)
    assert by_method["known-w"].status == "ok"


def test_psi_imputation_experiment_validates():
    spec = _tiny_spec()
    with pytest.raises(ValueError, match="psi-missing-fraction"):
        psi_imputation_experiment(spec)
    spec2 = _tiny_spec(
        sweep_param="psi-missing-fraction", sweep_values=(0.5,),
        imputation="none",
    )
    with pytest.raises(ValueError, match="sampling or random"):
        psi_imputation_experiment(spec2)


def test_placement_convergence_rows_and_csv(tmp_path):
    model = chain_model(3, sigma=0.1, stay=0.2)
    dataset = generate_dataset(
        model, ConstantOmission(0.6), n_sentences=10, full_len=12,
        rng=np.random.default_rng(3),
    )
    rows = placement_convergence_experiment(
        model, dataset, np.full(3, 0.4), methods=("gaps", "matching"),
        inner_steps=(1, 5), n_iterations=4, seed=1,
    )
    methods = {(r["method"], r["inner_steps"]) for r in rows}
    assert methods == {("gaps", 1), ("matching", 1), ("matching", 5)}
    assert all(np.isfinite(r["joint_loglik"]) for r in rows)
    out = tmp_path / "conv.csv"
    write_convergence_csv(rows, out)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# hmmgaps-convergence v1"
    assert lines[1] == "method,inner_steps,iteration,joint_loglik"
    assert len(lines) == 2 + len(rows)


def test_label_accuracy_experiment_smoke():
    model = chain_model(3, sigma=0.1, stay=0.2)
    out = label_accuracy_experiment(
        model, n_sentences=12, sentence_length=14, keep=0.6,
        rng=np.random.default_rng(4),
    )
    assert set(out) == {"full", "known-w", "hmmop", "naive"}
    assert all(0.0 <= v <= 1.0 for v in out.values())
    # the unthinned decoder can only beat the gap-blind one
    assert out["full"] >= out["naive"]
