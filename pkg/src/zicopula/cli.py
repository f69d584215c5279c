"""Command-line surface: dataset CSV I/O, JSON model files, and the
fit / score / synth / bench / ingest-credit commands.

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure. Expected
failures print a single ``ERR:<KIND> message`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .baselines import (
    GmmModel,
    KdeModel,
    fit_gmm,
    fit_kde_multi,
    gmm_loglik_rows,
    kde_loglik_rows,
    tune_gmm,
    tune_kde,
)
from .errors import DataError, NumericError
from .marginals import MarginalModel
from .mask_model import BernoulliMask, RbmMask, compute_log_z
from .rgd_copula import DEFAULT_MC_SAMPLES, RgdParams
from .synth_bench import (
    ALL_TAGS,
    PRESETS,
    default_variants,
    make_ground_truth,
    run_benchmark,
    sample_dataset,
    write_results_csv,
)
from .zibt_model import ZibtModel, fit_zibt, zibt_loglik_rows
from .zicar_model import ZicarModel, fit_zicar, zicar_loglik_rows

SCHEMA_VERSION = 1
ENV_SEED = "ZICOPULA_SEED"
ENV_UCI_CSV = "ZICOPULA_UCI_CSV"
DEFAULT_UCI_PATH = os.path.join("data", "UCI_Credit_Card.csv")

_PAY_COLUMNS = tuple(f"PAY_AMT{i}" for i in range(1, 7))
_BILL_COLUMNS = tuple(f"BILL_AMT{i}" for i in range(1, 7))
CREDIT_COLUMNS_FULL = _PAY_COLUMNS + _BILL_COLUMNS
CREDIT_COLUMNS_SMALL = ("PAY_AMT1", "BILL_AMT1")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# dataset CSV I/O


def _parse_float(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(f"line {lineno}: could not parse {token.strip()!r} as a number")


def read_data_csv(path, clip_negatives: bool = False) -> np.ndarray:
    """Read a comma-separated matrix with a required header row."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = None
        width = 0
        for lineno, record in enumerate(reader, start=1):
            if not record or all(c.strip() == "" for c in record):
                continue
            if header is None:
                header = [c.strip() for c in record]
                if all(_is_number(c) for c in header):
                    raise DataError("line 1: expected a header row, found numbers")
                width = len(header)
                continue
            if len(record) != width:
                raise DataError(
                    f"line {lineno}: expected {width} fields, got {len(record)}"
                )
            values = [_parse_float(c, lineno) for c in record]
            for v in values:
                if not math.isfinite(v):
                    raise DataError(f"line {lineno}: non-finite value {v!r}")
                if v < 0 and not clip_negatives:
                    raise DataError(
                        f"line {lineno}: negative value {v!r}; "
                        "pass --clip-negatives to replace it with 0"
                    )
            if clip_negatives:
                values = [max(0.0, v) for v in values]
            rows.append(values)
    if header is None:
        raise DataError(f"{path} is empty")
    if not rows:
        raise DataError(f"{path} has a header but no data rows")
    return np.array(rows, dtype=float)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def write_data_csv(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(matrix.shape[1])])
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def write_scores_csv(path, scores: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["nll"])
        for value in np.asarray(scores, dtype=float):
            writer.writerow([repr(float(value))])


# ---------------------------------------------------------------------------
# model files


def _finite_or_none(value: float):
    value = float(value)
    if math.isinf(value):
        if value > 0:
            raise ValueError("+inf has no serialized form")
        return None
    return value


def _threshold_from_json(value) -> float:
    return -math.inf if value is None else float(value)


def _marginal_to_dict(m: MarginalModel) -> dict:
    return {
        "q": float(m.q),
        "kde_centers": np.asarray(m.kde_centers, dtype=float).tolist(),
        "bandwidth": float(m.bandwidth),
        "rescale_b": float(m.rescale_b),
        "a": _finite_or_none(m.a),
    }


def _marginal_from_dict(d: dict) -> MarginalModel:
    return MarginalModel(
        q=float(d["q"]),
        kde_centers=np.asarray(d["kde_centers"], dtype=float),
        bandwidth=float(d["bandwidth"]),
        rescale_b=float(d["rescale_b"]),
        a=_threshold_from_json(d["a"]),
    )


def _mask_to_dict(mask) -> dict:
    if isinstance(mask, BernoulliMask):
        return {"type": "bernoulli", "q": np.asarray(mask.q, dtype=float).tolist()}
    return {
        "type": "rbm",
        "weights": np.asarray(mask.weights, dtype=float).tolist(),
        "visible_bias": np.asarray(mask.visible_bias, dtype=float).tolist(),
        "hidden_bias": np.asarray(mask.hidden_bias, dtype=float).tolist(),
        "log_z": float(mask.log_z),
    }


def _mask_from_dict(d: dict):
    if d["type"] == "bernoulli":
        return BernoulliMask(q=np.asarray(d["q"], dtype=float))
    if d["type"] != "rbm":
        raise DataError(f"unknown mask type: {d['type']!r}")
    weights = np.asarray(d["weights"], dtype=float)
    visible_bias = np.asarray(d["visible_bias"], dtype=float)
    hidden_bias = np.asarray(d["hidden_bias"], dtype=float)
    stored = float(d["log_z"])
    recomputed = compute_log_z(weights, visible_bias, hidden_bias)
    if abs(recomputed - stored) > 1e-9:
        raise DataError(
            "model file corrupt: stored log_Z "
            f"{stored!r} does not match its parameters ({recomputed!r})"
        )
    return RbmMask(
        weights=weights,
        visible_bias=visible_bias,
        hidden_bias=hidden_bias,
        log_z=stored,
    )


def model_to_dict(model) -> dict:
    if isinstance(model, ZicarModel):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "zicar",
            "marginals": [_marginal_to_dict(m) for m in model.marginals],
            "mask": _mask_to_dict(model.mask),
            "sigma": model.sigma.tolist(),
            "rescales": model.rescales.tolist(),
        }
    if isinstance(model, ZibtModel):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "zibt",
            "marginals": [_marginal_to_dict(m) for m in model.marginals],
            "sigma": model.copula.sigma.tolist(),
            "thresholds": [_finite_or_none(a) for a in model.copula.a],
            "rescales": model.rescales.tolist(),
            "likelihood_mode": model.likelihood_mode,
        }
    if isinstance(model, GmmModel):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "gmm",
            "weights": model.weights.tolist(),
            "means": model.means.tolist(),
            "covariances": model.covariances.tolist(),
        }
    if isinstance(model, KdeModel):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "kde",
            "centers": model.centers.tolist(),
            "bandwidths": model.bandwidths.tolist(),
        }
    raise ValueError(f"cannot serialize {type(model).__name__}")


def model_from_dict(payload) -> object:
    if not isinstance(payload, dict):
        raise DataError("model file must contain a JSON object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataError(f"unsupported schema_version: {version!r}")
    kind = payload.get("kind")
    try:
        if kind == "zicar":
            return ZicarModel(
                marginals=tuple(
                    _marginal_from_dict(m) for m in payload["marginals"]
                ),
                mask=_mask_from_dict(payload["mask"]),
                sigma=np.asarray(payload["sigma"], dtype=float),
                rescales=np.asarray(payload["rescales"], dtype=float),
            )
        if kind == "zibt":
            return ZibtModel(
                marginals=tuple(
                    _marginal_from_dict(m) for m in payload["marginals"]
                ),
                copula=RgdParams(
                    sigma=np.asarray(payload["sigma"], dtype=float),
                    a=np.array(
                        [_threshold_from_json(v) for v in payload["thresholds"]]
                    ),
                ),
                rescales=np.asarray(payload["rescales"], dtype=float),
                likelihood_mode=payload["likelihood_mode"],
            )
        if kind == "gmm":
            return GmmModel(
                weights=np.asarray(payload["weights"], dtype=float),
                means=np.asarray(payload["means"], dtype=float),
                covariances=np.asarray(payload["covariances"], dtype=float),
            )
        if kind == "kde":
            return KdeModel(
                centers=np.asarray(payload["centers"], dtype=float),
                bandwidths=np.asarray(payload["bandwidths"], dtype=float),
            )
    except KeyError as exc:
        raise DataError(f"model file missing field: {exc.args[0]!r}")
    raise DataError(f"unknown model kind: {kind!r}")


def save_model(path, model) -> None:
    payload = model_to_dict(model)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_model(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}")
    return model_from_dict(payload)


# ---------------------------------------------------------------------------
# config resolution


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise DataError(f"config file is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise DataError("config file must contain a JSON object")
    return config


def _resolve(args, defaults: dict, required: tuple = ()) -> None:
    """Apply precedence flags > config file > defaults (seed also falls back
    to the ZICOPULA_SEED environment variable)."""
    config = _load_config(getattr(args, "config", None))
    unknown = sorted(set(config) - set(defaults))
    if unknown:
        raise DataError(f"config has unknown keys: {', '.join(unknown)}")
    for key, fallback in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, fallback))
    if getattr(args, "seed", None) is None:
        env = os.environ.get(ENV_SEED)
        if env is not None:
            try:
                args.seed = int(env)
            except ValueError:
                raise DataError(f"{ENV_SEED} must be an integer, got {env!r}")
        else:
            args.seed = 0
    for key in required:
        if getattr(args, key) is None:
            raise _UsageError(f"--{key.replace('_', '-')} is required")


def _format_vector(values) -> str:
    return "[" + ", ".join(f"{float(v):.6g}" for v in np.asarray(values)) + "]"


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> None:
    _resolve(
        args,
        defaults={
            "data": None,
            "model": None,
            "out": None,
            "mask": "rbm",
            "likelihood": "approx",
            "no_mle": False,
            "no_rescale": False,
            "bandwidth_scale": 1.0,
            "n_hidden": None,
            "k": None,
            "bandwidth_mult": None,
            "clip_negatives": False,
        },
        required=("data", "model", "out"),
    )
    data = read_data_csv(args.data, clip_negatives=args.clip_negatives)
    seed = int(args.seed)

    if args.model == "zicar":
        model = fit_zicar(
            data,
            mask_kind=args.mask,
            use_mle_sigma=not args.no_mle,
            use_rescale=not args.no_rescale,
            n_hidden=args.n_hidden,
            seed=seed,
            bandwidth_scale=float(args.bandwidth_scale),
        )
        sigma = model.sigma
    elif args.model == "zibt":
        model = fit_zibt(
            data,
            use_mle_sigma=not args.no_mle,
            use_rescale=not args.no_rescale,
            likelihood_mode=args.likelihood,
            bandwidth_scale=float(args.bandwidth_scale),
        )
        sigma = model.copula.sigma
    elif args.model == "gmm":
        model = (
            tune_gmm(data, seed=seed)
            if args.k is None
            else fit_gmm(data, int(args.k), seed=seed)
        )
        sigma = None
    elif args.model == "kde":
        model = (
            tune_kde(data, seed=seed)
            if args.bandwidth_mult is None
            else fit_kde_multi(data, multiplier=float(args.bandwidth_mult))
        )
        sigma = None
    else:
        raise _UsageError(f"unknown model kind: {args.model!r}")

    save_model(args.out, model)
    print(f"model: {args.model}")
    print(f"rows: {data.shape[0]}, columns: {data.shape[1]}")
    if sigma is not None:
        print(f"q: {_format_vector([m.q for m in model.marginals])}")
        print(f"sigma condition number: {np.linalg.cond(sigma):.6g}")
        print(f"rescale factors: {_format_vector(model.rescales)}")
    elif isinstance(model, GmmModel):
        print(f"components: {model.k}, weights: {_format_vector(model.weights)}")
    else:
        print(f"bandwidths: {_format_vector(model.bandwidths)}")
    print(f"wrote model to {args.out}")


def cmd_score(args) -> None:
    _resolve(
        args,
        defaults={
            "model": None,
            "data": None,
            "out": None,
            "mc_samples": DEFAULT_MC_SAMPLES,
            "clip_negatives": False,
        },
        required=("model", "data", "out"),
    )
    model = load_model(args.model)
    data = read_data_csv(args.data, clip_negatives=args.clip_negatives)
    if isinstance(model, ZicarModel):
        nll = -zicar_loglik_rows(model, data)
    elif isinstance(model, ZibtModel):
        nll = -zibt_loglik_rows(
            model, data, mc_samples=int(args.mc_samples), base_seed=int(args.seed)
        )
    elif isinstance(model, GmmModel):
        nll = -gmm_loglik_rows(model, data)
    else:
        nll = -kde_loglik_rows(model, data)
    write_scores_csv(args.out, nll)
    print(f"wrote {nll.size} scores to {args.out}")


def cmd_synth(args) -> None:
    _resolve(
        args,
        defaults={
            "kind": None,
            "dim": None,
            "rows": None,
            "out": None,
            "sample_seed": 0,
            "sigma_out": None,
        },
        required=("kind", "dim", "rows", "out"),
    )
    truth = make_ground_truth(args.kind, int(args.dim), seed=int(args.seed))
    data = sample_dataset(truth, int(args.rows), seed=int(args.sample_seed))
    write_data_csv(args.out, data)
    if args.sigma_out is not None:
        write_data_csv(args.sigma_out, truth.sigma_true)
    zero_share = float((data == 0).mean())
    print(f"wrote {data.shape[0]} rows of {args.kind} data to {args.out}")
    print(f"zero fraction: {zero_share:.4f}")


def cmd_bench(args) -> None:
    _resolve(
        args,
        defaults={
            "kind": None,
            "dim": None,
            "preset": "desk",
            "out": "results.csv",
            "jobs": 1,
            "mc_samples": DEFAULT_MC_SAMPLES,
            "variants": None,
            "seeds": None,
        },
        required=("kind", "dim"),
    )
    variants = None
    if args.variants is not None:
        variants = tuple(t.strip() for t in str(args.variants).split(",") if t.strip())
        for tag in variants:
            if tag not in ALL_TAGS:
                raise _UsageError(
                    f"unknown variant {tag!r}; known: {', '.join(ALL_TAGS)}"
                )
    seeds = None
    if args.seeds is not None:
        try:
            seeds = tuple(int(t) for t in str(args.seeds).split(",") if t.strip())
        except ValueError:
            raise _UsageError(f"--seeds must be comma-separated integers")
        if not seeds:
            raise _UsageError("--seeds must name at least one seed")
    if args.preset not in PRESETS:
        raise _UsageError(f"unknown preset {args.preset!r}")

    rows = run_benchmark(
        args.kind,
        int(args.dim),
        preset=args.preset,
        variants=variants,
        jobs=int(args.jobs),
        mc_samples=int(args.mc_samples),
        seeds=seeds,
    )
    write_results_csv(args.out, rows)
    print(f"appended {len(rows)} rows to {args.out}")
    tags = variants if variants is not None else default_variants(args.kind)
    for tag in tags:
        aucs = [r.auc for r in rows if r.model_tag == tag]
        errs = [r.sigma_l2_error for r in rows if r.model_tag == tag]
        line = f"{tag}: mean AUC {np.mean(aucs):.4f}"
        if not all(math.isnan(e) for e in errs):
            line += f", mean sigma L2 error {np.mean(errs):.4f}"
        print(line)


def cmd_ingest_credit(args) -> None:
    _resolve(
        args,
        defaults={
            "raw": None,
            "out_train": None,
            "out_test": None,
            "small": False,
        },
        required=("out_train", "out_test"),
    )
    raw_path = args.raw
    if raw_path is None:
        raw_path = os.environ.get(ENV_UCI_CSV, DEFAULT_UCI_PATH)
    wanted = CREDIT_COLUMNS_SMALL if args.small else CREDIT_COLUMNS_FULL

    try:
        fh = open(raw_path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {raw_path}: {exc.strerror}")
    rows = []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{raw_path} is empty")
        fields = [c.strip() for c in reader.fieldnames]
        missing = [c for c in wanted if c not in fields]
        if missing:
            raise DataError(f"missing columns: {', '.join(missing)}")
        for record in reader:
            lineno = reader.line_num
            values = [
                _parse_float(record[c], lineno) for c in wanted
            ]
            # The raw file carries a few negative amounts; the models need
            # nonnegative input, so they are clamped to zero.
            rows.append([max(0.0, v) for v in values])
    if not rows:
        raise DataError(f"{raw_path} has no data rows")

    matrix = np.array(rows, dtype=float)
    n = matrix.shape[0]
    n_train = 21_000 if n == 30_000 else int(round(0.7 * n))
    order = np.random.Generator(np.random.PCG64(int(args.seed))).permutation(n)

    def _write(path, subset):
        with open(path, "w", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(list(wanted))
            for row in subset:
                writer.writerow([repr(float(v)) for v in row])

    _write(args.out_train, matrix[order[:n_train]])
    _write(args.out_test, matrix[order[n_train:]])
    print(f"read {n} rows from {raw_path}")
    print(f"train: {n_train} rows -> {args.out_train}")
    print(f"test: {n - n_train} rows -> {args.out_test}")


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> _Parser:
    parser = _Parser(prog="zicopula", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="JSON file supplying defaults for flags")
        p.add_argument("--seed", type=int, help=f"RNG seed (default ${ENV_SEED} or 0)")

    p_fit = sub.add_parser("fit", help="fit a model to a CSV dataset")
    common(p_fit)
    p_fit.add_argument("--data", help="training CSV (header row required)")
    p_fit.add_argument("--model", choices=("zicar", "zibt", "gmm", "kde"))
    p_fit.add_argument("--out", help="model file to write")
    p_fit.add_argument("--mask", choices=("bernoulli", "rbm"), help="zicar mask family")
    p_fit.add_argument("--likelihood", choices=("exact", "approx"), help="zibt scoring mode")
    p_fit.add_argument("--no-mle", action="store_true", default=None,
                       help="plain correlation instead of pairwise MLE")
    p_fit.add_argument("--no-rescale", action="store_true", default=None,
                       help="skip the per-column rescaling pass")
    p_fit.add_argument("--bandwidth-scale", type=float,
                       help="marginal KDE bandwidth multiplier (default 1.0)")
    p_fit.add_argument("--n-hidden", type=int, help="RBM hidden units (default 2D)")
    p_fit.add_argument("--k", type=int, help="GMM components (default: tuned)")
    p_fit.add_argument("--bandwidth-mult", type=float,
                       help="KDE baseline bandwidth multiplier (default: tuned)")
    p_fit.add_argument("--clip-negatives", action="store_true", default=None,
                       help="replace negative inputs with 0 instead of failing")

    p_score = sub.add_parser("score", help="negative log-likelihood per row")
    common(p_score)
    p_score.add_argument("--model", help="model file from fit")
    p_score.add_argument("--data", help="CSV to score")
    p_score.add_argument("--out", help="scores CSV to write")
    p_score.add_argument("--mc-samples", type=int,
                         help="orthant MC draws for exact zibt scoring")
    p_score.add_argument("--clip-negatives", action="store_true", default=None)

    p_synth = sub.add_parser("synth", help="draw a synthetic dataset")
    common(p_synth)
    p_synth.add_argument("--kind", choices=("zicar", "zibt"))
    p_synth.add_argument("--dim", type=int)
    p_synth.add_argument("--rows", type=int)
    p_synth.add_argument("--out", help="dataset CSV to write")
    p_synth.add_argument("--sample-seed", type=int,
                         help="seed for the draw itself (ground truth uses --seed)")
    p_synth.add_argument("--sigma-out", help="also write the true correlation matrix")

    p_bench = sub.add_parser("bench", help="corruption benchmark over seeds")
    common(p_bench)
    p_bench.add_argument("--kind", choices=("zicar", "zibt"))
    p_bench.add_argument("--dim", type=int)
    p_bench.add_argument("--preset", choices=tuple(PRESETS))
    p_bench.add_argument("--out", help="results CSV (appended; default results.csv)")
    p_bench.add_argument("--jobs", type=int, help="concurrent seeds (default 1)")
    p_bench.add_argument("--mc-samples", type=int)
    p_bench.add_argument("--variants", help="comma-separated model tags")
    p_bench.add_argument("--seeds", help="comma-separated seed list (overrides preset)")

    p_ingest = sub.add_parser("ingest-credit", help="extract the credit-card columns")
    common(p_ingest)
    p_ingest.add_argument("--raw", help=f"raw CSV (default ${ENV_UCI_CSV} or {DEFAULT_UCI_PATH})")
    p_ingest.add_argument("--out-train", help="training CSV to write")
    p_ingest.add_argument("--out-test", help="test CSV to write")
    p_ingest.add_argument("--small", action="store_true", default=None,
                          help="keep only PAY_AMT1 and BILL_AMT1")

    return parser


_HANDLERS = {
    "fit": cmd_fit,
    "score": cmd_score,
    "synth": cmd_synth,
    "bench": cmd_bench,
    "ingest-credit": cmd_ingest_credit,
}


def _print_error(kind: str, message: str) -> None:
    flat = " ".join(str(message).splitlines())
    print(f"ERR:{kind} {flat}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a command is required (fit, score, synth, bench, ingest-credit)")
        _HANDLERS[args.command](args)
        return 0
    except _UsageError as exc:
        _print_error("USAGE", str(exc))
        return 1
    except DataError as exc:
        _print_error("DATA", str(exc))
        return 2
    except NumericError as exc:
        _print_error("NUMERIC", str(exc))
        return 3
    except ValueError as exc:
        _print_error("USAGE", str(exc))
        return 1
    except OSError as exc:
        _print_error("DATA", str(exc))
        return 2
