"""Command line front end.

Subcommands map onto the library surface: ``generate`` simulates a thinned
corpus, ``fit`` estimates a model with one of the five methods, ``infer``
labels observations under a fitted model, ``transform`` applies the
closed-form keep-rate maps to a model file, and ``bench`` drives the
experiment harness and renders its figures.

Exit codes: 0 on success, 1 when the input is rejected (single-line
``error: ...`` on stderr), 2 when a computation fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analytic import (
    composed_mismatch,
    invert_omit_transform,
    omit_transform,
    semi_analytic_reconstruct,
)
from .baselines import fit_known_w, fit_naive
from .bench import demo_spec_path, load_experiment_spec, run_experiment
from .gaps import fit_gaps
from .gibbs import GibbsConfig, Priors, write_diagnostics
from .inference import label_sequence
from .matching import fit_matching
from .model import HmmModel, load_model, save_model
from .omission import (
    ConstantOmission,
    MarkovOmission,
    SentenceNormalOmission,
    StateOmission,
    dataset_keep_fraction,
    generate_dataset,
    load_dataset,
    save_dataset,
    strip_dataset,
)

FIT_METHODS = ("naive", "matching", "gaps", "known-w", "semi-analytic")


class CliError(Exception):
    """Input rejected; the message is the single-line reason."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through the validation path instead
    def error(self, message):
        raise CliError(message)


# ---------------------------------------------------------------------------
# Input loading and shared option handling


def _env_seed() -> int | None:
    raw = os.environ.get("HMMOP_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"HMMOP_SEED must be an integer, got {raw!r}")


def _resolve_seed(flag_value: int | None) -> int | None:
    return flag_value if flag_value is not None else _env_seed()


def _load_model_file(path) -> HmmModel:
    try:
        return load_model(path)
    except FileNotFoundError:
        raise CliError(f"model file not found: {path}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"bad model file {path}: {exc}")


def _load_dataset_file(path):
    try:
        dataset = load_dataset(path)
    except FileNotFoundError:
        raise CliError(f"dataset file not found: {path}")
    except ValueError as exc:
        raise CliError(f"bad dataset file {path}: {exc}")
    if not dataset:
        raise CliError(f"dataset file {path} is empty")
    return dataset


def _load_psi_file(path, n_states: int) -> np.ndarray:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"psi file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"bad psi file {path}: {exc}")
    if not isinstance(payload, list):
        raise CliError(f"psi file {path} must hold a JSON list")
    values = np.asarray(
        [np.nan if v is None else float(v) for v in payload], dtype=np.float64
    )
    if values.shape != (n_states,):
        raise CliError(
            f"psi file {path} has {values.size} entries, model has {n_states} states"
        )
    known = values[~np.isnan(values)]
    if known.size and (known.min() < 0.0 or known.max() > 1.0):
        raise CliError(f"psi file {path} has entries outside [0, 1]")
    return values


def _check_keep(value: float, flag: str) -> float:
    if not 0.0 < value <= 1.0:
        raise CliError(f"{flag} must lie in (0, 1], got {value}")
    return value


def _omit_vector(args, n_states: int) -> np.ndarray | None:
    """Per-state omission probabilities from --psi / --p-c, None if absent."""
    if args.psi is not None:
        return _load_psi_file(args.psi, n_states)
    if args.p_c is not None:
        return np.full(n_states, 1.0 - _check_keep(args.p_c, "--p-c"))
    return None


def _load_config(path, seed: int | None) -> tuple[GibbsConfig, Priors | None]:
    payload = {}
    if path is not None:
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise CliError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise CliError(f"bad config file {path}: {exc}")
        if not isinstance(payload, dict):
            raise CliError(f"config file {path} must hold a JSON object")
    priors = None
    prior_payload = payload.pop("priors", None)
    if prior_payload is not None:
        allowed = {f.name for f in dataclass_fields(Priors)}
        unknown = set(prior_payload) - allowed
        if unknown:
            raise CliError(f"unknown prior fields: {sorted(unknown)}")
        for key in ("loc", "prec"):
            if prior_payload.get(key) is not None:
                prior_payload[key] = np.asarray(
                    prior_payload[key], dtype=np.float64
                )
        if "keep_beta" in prior_payload:
            prior_payload["keep_beta"] = tuple(prior_payload["keep_beta"])
        priors = Priors(**prior_payload)
    allowed = {f.name for f in dataclass_fields(GibbsConfig)}
    unknown = set(payload) - allowed
    if unknown:
        raise CliError(f"unknown config fields: {sorted(unknown)}")
    if seed is not None:
        payload["seed"] = seed
    try:
        config = GibbsConfig(**payload)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad config values: {exc}")
    return config, priors


# ---------------------------------------------------------------------------
# generate


def _omission_from_args(args):
    chosen = [
        name
        for name, value in [
            ("--p-c", args.p_c),
            ("--psi", args.psi),
            ("--sentence-normal", args.sentence_normal),
            ("--markov", args.markov),
        ]
        if value is not None
    ]
    if len(chosen) != 1:
        raise CliError(
            "exactly one of --p-c, --psi, --sentence-normal, --markov is required"
        )
    try:
        if args.p_c is not None:
            return ConstantOmission(_check_keep(args.p_c, "--p-c"))
        if args.psi is not None:
            values = _load_psi_file(args.psi, args.n_states)
            if np.isnan(values).any():
                raise CliError("--psi for generate cannot contain null entries")
            return StateOmission(values)
        if args.sentence_normal is not None:
            mean, sd = args.sentence_normal
            return SentenceNormalOmission(mean, sd)
        keep, bias = args.markov
        return MarkovOmission(keep, bias)
    except ValueError as exc:
        raise CliError(str(exc))


def _cmd_generate(args) -> int:
    model = _load_model_file(args.model)
    args.n_states = model.n_states
    spec = _omission_from_args(args)
    if args.sentences < 1 or args.length < 1:
        raise CliError("--sentences and --length must be positive")
    seed = _resolve_seed(args.seed)
    rng = np.random.default_rng(0 if seed is None else seed)
    dataset = generate_dataset(model, spec, args.sentences, args.length, rng)
    save_dataset(dataset, args.out)
    return 0


# ---------------------------------------------------------------------------
# fit


def _dataset_knowledge(dataset):
    has_w = any(s.placement is not None for s in dataset)
    has_n = any(s.full_len is not None for s in dataset)
    return has_w, has_n


def _fill_lengths(dataset, n: int | None):
    if n is None:
        return dataset
    if n < 1:
        raise CliError("--n must be positive")
    filled = []
    for s in dataset:
        if s.full_len is None:
            if n < s.n_obs:
                raise CliError(
                    f"--n {n} is shorter than an observed sentence ({s.n_obs})"
                )
            filled.append(replace(s, full_len=n))
        else:
            filled.append(s)
    return filled


def _prepare_fit_dataset(args, dataset):
    """Enforce the knowledge contract for the chosen method."""
    has_w, has_n = _dataset_knowledge(dataset)
    method = args.method
    if method in ("naive", "gaps", "semi-analytic"):
        if args.n is not None:
            raise CliError(f"method {method} does not take --n")
        if (has_w or has_n) and not args.strip:
            raise CliError(
                f"dataset retains placement or length fields; method {method} "
                "must not see them (pass --strip to discard)"
            )
        return strip_dataset(dataset)
    if method == "matching":
        if has_w and not args.strip:
            raise CliError(
                "dataset retains placement fields; method matching must not "
                "see them (pass --strip to discard)"
            )
        dataset = strip_dataset(dataset, drop_full_len=False)
        dataset = _fill_lengths(dataset, args.n)
        if any(s.full_len is None for s in dataset):
            raise CliError(
                "method matching needs a length on every sentence; the "
                "dataset lacks some and no --n was given"
            )
        return dataset
    if args.strip:
        raise CliError("--strip would discard the placements known-w needs")
    dataset = _fill_lengths(dataset, args.n)
    if not all(
        s.placement is not None and s.full_len is not None for s in dataset
    ):
        raise CliError("method known-w needs placement and length on every sentence")
    return strip_dataset(dataset, drop_placement=False, drop_full_len=False)


def _cmd_fit(args) -> int:
    dataset = _load_dataset_file(args.data)
    method = args.method
    if args.states < 1:
        raise CliError("--states must be positive")
    if args.psi is not None and args.p_c is not None:
        raise CliError("--psi and --p-c are mutually exclusive")
    if method in ("naive", "semi-analytic"):
        if args.psi is not None:
            raise CliError(f"method {method} does not take --psi")
        if method == "naive" and args.p_c is not None:
            raise CliError("method naive ignores omission rates; drop --p-c")
        if method == "semi-analytic" and args.p_c is None:
            raise CliError("method semi-analytic needs --p-c")
    seed = _resolve_seed(args.seed)
    config, priors = _load_config(args.config, seed)
    if method in ("naive", "semi-analytic") and config.omit_mode != "fixed":
        raise CliError(f"method {method} has no omission structure to sample")
    dataset = _prepare_fit_dataset(args, dataset)
    omit = _omit_vector(args, args.states)
    if method == "gaps" and omit is None and config.omit_mode == "fixed":
        raise CliError(
            "method gaps needs --psi or --p-c unless the config samples them"
        )
    if omit is not None and np.isnan(omit).any() and config.omit_mode == "fixed":
        raise CliError(
            "psi file has null entries; set omit_mode to sample-missing "
            "in --config to sample them"
        )
    if args.diagnostics is not None and method == "semi-analytic":
        raise CliError("method semi-analytic has no sampler diagnostics")
    if args.psi_out is not None and method in ("naive", "semi-analytic"):
        raise CliError(f"method {method} does not estimate omission rates")

    if method == "semi-analytic":
        def gapless_fit(stripped):
            return fit_naive(
                stripped, args.states, config=config, priors=priors,
                n_symbols=args.symbols,
            ).model

        model = semi_analytic_reconstruct(dataset, args.p_c, gapless_fit)
        save_model(model, args.out)
        return 0

    if method == "naive":
        result = fit_naive(
            dataset, args.states, config=config, priors=priors,
            n_symbols=args.symbols,
        )
    elif method == "gaps":
        result = fit_gaps(
            dataset, args.states, omit, config=config, priors=priors,
            n_symbols=args.symbols,
        )
    elif method == "matching":
        result = fit_matching(
            dataset, args.states, omit, config=config, priors=priors,
            n_symbols=args.symbols,
        )
    else:
        if omit is None:
            omit = np.full(args.states, 1.0 - dataset_keep_fraction(dataset))
        result = fit_known_w(
            dataset, args.states, omit, config=config, priors=priors,
            n_symbols=args.symbols,
        )
    save_model(result.model, args.out)
    if args.diagnostics is not None:
        write_diagnostics(result.diagnostics, args.diagnostics)
    if args.psi_out is not None:
        with open(args.psi_out, "w") as fh:
            json.dump([float(v) for v in result.omit_probs], fh)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# infer


def _cmd_infer(args) -> int:
    model = _load_model_file(args.model)
    dataset = _load_dataset_file(args.data)
    omit = _omit_vector(args, model.n_states)
    if omit is None:
        raise CliError("infer needs --psi or --p-c")
    if np.isnan(omit).any():
        raise CliError("infer needs fully known omission rates")
    dataset = _fill_lengths(dataset, args.n)
    if any(s.full_len is None for s in dataset):
        raise CliError(
            "infer needs a length on every sentence; the dataset lacks some "
            "and no --n was given"
        )
    if args.max_rounds < 1:
        raise CliError("--max-rounds must be positive")
    have_truth = all(
        s.states is not None and s.placement is not None for s in dataset
    )
    if args.accuracy is not None and not have_truth:
        raise CliError(
            "--accuracy needs ground-truth states and placements on every sentence"
        )
    acc_rows = []
    with open(args.out, "w") as fh:
        for idx, s in enumerate(dataset):
            res = label_sequence(
                model, s.obs, s.full_len, omit, max_rounds=args.max_rounds,
                max_gap=args.max_gap,
            )
            record = {
                "labels": res.labels.tolist(),
                "states": res.states.tolist(),
                "W": res.placement.tolist(),
                "rounds": res.rounds,
                "converged": res.converged,
            }
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
            if args.accuracy is not None:
                truth = s.states[s.placement]
                acc = float(np.mean(res.labels == truth)) if truth.size else 0.0
                acc_rows.append((idx, s.n_obs, acc))
    if args.accuracy is not None:
        with open(args.accuracy, "w") as fh:
            fh.write("sentence,n_obs,accuracy\n")
            for idx, n_obs, acc in acc_rows:
                fh.write(f"{idx},{n_obs},{acc!r}\n")
    return 0


# ---------------------------------------------------------------------------
# transform


def _tidy_simplex(trans: np.ndarray, clamp: bool, what: str) -> np.ndarray:
    """Zero out solver dust on structural zeros; real negatives need --clamp."""
    if clamp:
        trans = np.clip(trans, 0.0, None)
        return trans / trans.sum(axis=1, keepdims=True)
    if trans.min() < -1e-9:
        raise CliError(f"{what} left negative entries; rerun with --clamp")
    return np.clip(trans, 0.0, None)


def _cmd_transform(args) -> int:
    model = _load_model_file(args.model)
    keep = _check_keep(args.p_c, "--p-c")
    if args.op == "omit":
        trans = omit_transform(model.trans, keep)
    elif args.op == "invert":
        trans = invert_omit_transform(model.trans, keep, clamp=False)
        trans = _tidy_simplex(trans, args.clamp, "inverse transform")
    else:
        used = _check_keep(args.used_p_c, "--used-p-c")
        trans = composed_mismatch(model.trans, keep, used)
        trans = _tidy_simplex(trans, args.clamp, "composed transform")
    save_model(
        HmmModel(trans=trans, emission=model.emission, initial=model.initial),
        args.out,
    )
    return 0


# ---------------------------------------------------------------------------
# bench


def _cmd_bench_run(args) -> int:
    spec_path = demo_spec_path() if args.spec == "demo" else args.spec
    try:
        spec = load_experiment_spec(spec_path)
    except FileNotFoundError:
        raise CliError(f"spec file not found: {spec_path}")
    except (ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"bad spec file {spec_path}: {exc}")
    seed = _resolve_seed(args.seed)
    if seed is not None:
        spec = replace(spec, seed=seed)
    if args.threads < 1:
        raise CliError("--threads must be positive")
    run_experiment(
        spec, out_path=args.out, threads=args.threads,
        wall_seconds=args.wall_seconds,
    )
    if args.figures:
        from .plots import plot_results

        for path in plot_results(args.out, Path(args.out).parent):
            print(path)
    return 0


def _cmd_bench_plot(args) -> int:
    from .plots import plot_convergence, plot_results

    try:
        with open(args.results) as fh:
            header = fh.readline().strip()
    except FileNotFoundError:
        raise CliError(f"results file not found: {args.results}")
    out_dir = args.out_dir if args.out_dir is not None else Path(args.results).parent
    if header == "# hmmgaps-results v1":
        for path in plot_results(args.results, out_dir):
            print(path)
    elif header == "# hmmgaps-convergence v1":
        print(plot_convergence(args.results, out_dir))
    else:
        raise CliError(
            f"{args.results} is not a recognized results or convergence file"
        )
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="hmmgaps",
        description="Learn hidden Markov models from sequences with deleted "
        "observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    gen = sub.add_parser("generate", help="simulate a thinned dataset")
    gen.add_argument("--model", required=True, help="model JSON file")
    gen.add_argument("--sentences", type=int, required=True,
                     help="number of sentences")
    gen.add_argument("--length", type=int, required=True,
                     help="original length of every sentence")
    gen.add_argument("--out", required=True, help="output dataset JSONL file")
    gen.add_argument("--p-c", type=float, default=None,
                     help="constant keep probability")
    gen.add_argument("--psi", default=None,
                     help="JSON file with per-state omission probabilities")
    gen.add_argument("--sentence-normal", type=float, nargs=2, default=None,
                     metavar=("MEAN", "SD"),
                     help="per-sentence keep rate drawn from a clamped normal")
    gen.add_argument("--markov", type=float, nargs=2, default=None,
                     metavar=("KEEP", "BIAS"),
                     help="keep probability with a bias after each deletion")
    gen.add_argument("--seed", type=int, default=None,
                     help="RNG seed (falls back to HMMOP_SEED, then 0)")
    gen.set_defaults(func=_cmd_generate)

    fit = sub.add_parser("fit", help="estimate a model from a dataset")
    fit.add_argument("--method", required=True, choices=FIT_METHODS)
    fit.add_argument("--data", required=True, help="dataset JSONL file")
    fit.add_argument("--out", required=True, help="output model JSON file")
    fit.add_argument("--states", type=int, required=True,
                     help="number of hidden states")
    fit.add_argument("--psi", default=None,
                     help="JSON file with per-state omission probabilities "
                     "(null entries are sampled under omit_mode sample-missing)")
    fit.add_argument("--p-c", type=float, default=None,
                     help="constant keep probability")
    fit.add_argument("--n", type=int, default=None,
                     help="original sentence length when the dataset lacks it")
    fit.add_argument("--config", default=None,
                     help="JSON file with sampler settings (GibbsConfig "
                     "fields, optional priors object)")
    fit.add_argument("--strip", action="store_true",
                     help="discard ground-truth placement/length fields the "
                     "method must not see")
    fit.add_argument("--symbols", type=int, default=None,
                     help="vocabulary size for categorical data")
    fit.add_argument("--diagnostics", default=None,
                     help="write per-iteration chain diagnostics CSV here")
    fit.add_argument("--psi-out", default=None,
                     help="write posterior mean omission probabilities here")
    fit.add_argument("--seed", type=int, default=None,
                     help="RNG seed (falls back to HMMOP_SEED, then config)")
    fit.set_defaults(func=_cmd_fit)

    inf = sub.add_parser("infer", help="label observations under a model")
    inf.add_argument("--model", required=True, help="model JSON file")
    inf.add_argument("--data", required=True, help="dataset JSONL file")
    inf.add_argument("--out", required=True, help="output labels JSONL file")
    inf.add_argument("--psi", default=None,
                     help="JSON file with per-state omission probabilities")
    inf.add_argument("--p-c", type=float, default=None,
                     help="constant keep probability")
    inf.add_argument("--n", type=int, default=None,
                     help="original sentence length when the dataset lacks it")
    inf.add_argument("--max-rounds", type=int, default=20,
                     help="alternating search rounds per sentence")
    inf.add_argument("--max-gap", type=int, default=None,
                     help="cap on consecutive omissions in the search")
    inf.add_argument("--accuracy", default=None,
                     help="write per-sentence accuracy CSV here (needs "
                     "ground truth in the dataset)")
    inf.set_defaults(func=_cmd_infer)

    tra = sub.add_parser("transform",
                         help="closed-form keep-rate maps on a model file")
    tra_sub = tra.add_subparsers(dest="op", required=True, parser_class=_Parser)
    for op, blurb in [
        ("omit", "map a model to the law of its kept observations"),
        ("invert", "recover the underlying model from a kept-observation fit"),
        ("compose", "predict the model a wrong keep rate reconstructs"),
    ]:
        op_parser = tra_sub.add_parser(op, help=blurb)
        op_parser.add_argument("--model", required=True, help="model JSON file")
        op_parser.add_argument("--p-c", type=float, required=True,
                               help="keep probability"
                               + (" used by the thinning" if op == "compose"
                                  else ""))
        op_parser.add_argument("--out", required=True,
                               help="output model JSON file")
        if op in ("invert", "compose"):
            op_parser.add_argument("--clamp", action="store_true",
                                   help="clip negative entries and renormalize")
        if op == "compose":
            op_parser.add_argument("--used-p-c", type=float, required=True,
                                   help="keep probability used in the inversion")
        op_parser.set_defaults(func=_cmd_transform)

    ben = sub.add_parser("bench", help="experiment harness")
    ben_sub = ben.add_subparsers(dest="bench_command", required=True,
                                 parser_class=_Parser)
    run = ben_sub.add_parser("run", help="run an experiment spec")
    run.add_argument("--spec", required=True,
                     help="experiment spec JSON file, or 'demo' for the "
                     "shipped example")
    run.add_argument("--out", required=True, help="output results CSV file")
    run.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                     help="worker processes (default: logical cores)")
    run.add_argument("--figures", action="store_true",
                     help="render figures next to the results CSV")
    run.add_argument("--wall-seconds", action="store_true",
                     help="record wall-clock seconds (breaks byte-for-byte "
                     "reproducibility)")
    run.add_argument("--seed", type=int, default=None,
                     help="override the spec seed (falls back to HMMOP_SEED)")
    run.set_defaults(func=_cmd_bench_run)
    plo = ben_sub.add_parser("plot", help="render figures from a results file")
    plo.add_argument("results", help="results or convergence CSV file")
    plo.add_argument("--out-dir", default=None,
                     help="figure directory (default: beside the CSV)")
    plo.set_defaults(func=_cmd_bench_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
