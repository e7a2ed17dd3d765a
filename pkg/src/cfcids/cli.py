"""Command-line front end: ``cfc {sample,cluster,train,predict,evaluate}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .augment import ManipulationMode
from .cfc import JOBS_ENV, CfcConfig, load_model, predict_many, save_model, train
from .dataset import (DataError, Dataset, SchemaMismatchError, apply_normalization, fit_normalization,
                      kdd99_schema, load_dataset, load_schema, sample_indices)
from .fcm import FcmConfig, Layout, centroid_set_to_dict, fit as fcm_fit
from .infogain import FeatureWeights, compute_feature_weights
from .inducer import InducerSpec, evaluate
from .select import GeneticSearchConfig

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 1, 2, 3
# --schema value selecting the bundled KDD99 schema
BUILTIN_KDD99 = "kdd99"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_k_set(text: str) -> tuple[int, ...]:
    """``"2..50"``, ``"3"`` or ``"2,4,8"`` (ranges may appear in lists)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..", 1)
                lo, hi = int(lo), int(hi)
                if lo > hi:
                    raise UsageError(f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad cluster-count set {text!r}") from None
    if not out:
        raise UsageError("empty cluster-count set")
    return tuple(sorted(set(out)))


def parse_fractions(text: str | None) -> dict[str, float]:
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"fraction {part!r} is not of the form group=fraction")
        g, f = part.rsplit("=", 1)
        try:
            f = float(f)
        except ValueError:
            raise UsageError(f"fraction for {g!r} is not a number") from None
        if not 0.0 < f <= 1.0:
            raise UsageError(f"fraction for {g!r} must be in (0, 1], got {f}")
        out[g.strip()] = f
    return out


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _resolve(path):
    if path == BUILTIN_KDD99:
        from importlib.resources import files
        return files(__package__) / "data" / "kdd99_schema.json"
    return path


def _write_manifest(out, command: str, config: dict, inputs: dict, seed, timings: dict):
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "inputs": {k: {"path": str(p), "sha256": _digest(_resolve(p))}
                   for k, p in inputs.items() if p is not None},
        "seed": seed,
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    Path(f"{out}.manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                            encoding="utf-8")


def _require_file(path, what):
    if not Path(path).is_file():
        raise DataError(f"{what} not found: {path}")


def _require_out_dir(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise UsageError(f"output directory does not exist: {parent}")


def _schema(path):
    if path == BUILTIN_KDD99:
        return kdd99_schema()
    _require_file(path, "schema file")
    return load_schema(path)


def _load(args, label_required=True) -> Dataset:
    schema = _schema(args.schema)
    label = args.label_column or schema.label_column
    return load_dataset(args.data, schema, label, group_column=getattr(args, "strata_column", None),
                        delimiter=args.delimiter, header=not args.no_header, label_required=label_required)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- sample -----------------------------------------------------------------------

def cmd_sample(args) -> int:
    fractions = parse_fractions(args.fractions)
    _require_out_dir(args.out)
    t0 = time.perf_counter()
    d = _load(args)
    tags = d.strata()
    if tags is None:
        raise DataError("sampling needs a label or strata column")
    try:
        keep = sample_indices(tags, fractions, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    raw = [ln for ln in Path(args.data).read_text(encoding="utf-8").splitlines(keepends=True) if ln.strip()]
    head, body = (raw[:1], raw[1:]) if not args.no_header else ([], raw)
    if len(body) != d.n:
        raise DataError("could not align raw lines with parsed rows (multi-line quoted fields?)")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.writelines(head)
        for i in keep:
            line = body[i]
            fh.write(line if line.endswith("\n") else line + "\n")
    counts_in = {g: int(c) for g, c in zip(*np.unique(np.asarray(tags, dtype=str), return_counts=True))}
    kept_tags = np.asarray(tags, dtype=str)[keep]
    counts_out = {g: int((kept_tags == g).sum()) for g in counts_in}
    _write_manifest(args.out, "sample", {"fractions": fractions, "counts_in": counts_in,
                                         "counts_out": counts_out},
                    {"data": args.data, "schema": args.schema}, args.seed,
                    {"total": time.perf_counter() - t0})
    print(f"kept {len(keep)} of {d.n} instances -> {args.out}")
    return 0


# -- cluster ----------------------------------------------------------------------

def cmd_cluster(args) -> int:
    try:
        cfg = FcmConfig(args.k, args.alpha, args.tol, args.max_iter, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _require_out_dir(args.out)
    t0 = time.perf_counter()
    d = _load(args, label_required=False)
    xn = apply_normalization(d, fit_normalization(d))
    weights = (compute_feature_weights(xn, args.bins) if d.labels is not None
               else FeatureWeights((1.0,) * d.m, args.bins))
    layout = Layout.from_data(xn)
    res = fcm_fit(xn, cfg, weights, layout)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"w{j}" for j in range(1, cfg.k + 1)])
        for row in res.memberships:
            w.writerow([_fmt(v) for v in row])
    if args.centroids:
        doc = centroid_set_to_dict(res.centroids)
        doc["weights"] = list(weights.weights)
        doc["objective"] = res.objectives[-1]
        doc["iterations"] = res.n_iter
        doc["converged"] = res.converged
        Path(args.centroids).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(args.out, "cluster", {"k": cfg.k, "alpha": cfg.alpha, "tol": cfg.tolerance,
                                          "max_iter": cfg.max_iterations, "bins": args.bins,
                                          "iterations": res.n_iter, "converged": res.converged},
                    {"data": args.data, "schema": args.schema}, args.seed,
                    {"total": time.perf_counter() - t0})
    print(f"k={cfg.k}: {res.n_iter} iterations, converged={res.converged}, "
          f"objective={res.objectives[-1]:.6g}")
    return 0


# -- train ------------------------------------------------------------------------

def _train_config(args) -> CfcConfig:
    try:
        return CfcConfig(
            K=parse_k_set(args.K), mode=ManipulationMode(args.T), q=args.q,
            inducer=InducerSpec(confidence=args.confidence, min_leaf=args.min_leaf),
            alpha=args.alpha, tolerance=args.tol, max_iterations=args.max_iter,
            selection=GeneticSearchConfig(population=args.ga_population, generations=args.ga_generations,
                                          crossover=args.ga_crossover, mutation=args.ga_mutation,
                                          seed=args.ga_seed),
            selection_method="greedy" if args.ga_greedy else "genetic",
            bins=args.bins, seed=args.seed, strict_cv=args.strict_cv,
            stratify="groups" if args.strata_column else "auto", n_jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def candidate_table(results, best_k: int) -> str:
    rows = [["k", "cv_accuracy", "features", "fcm_iter", ""]]
    for r in results:
        rows.append([str(r.k), f"{r.accuracy:.4f}", str(r.n_features), str(r.fcm_iterations),
                     "*" if r.k == best_k else ""])
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def cmd_train(args) -> int:
    cfg = _train_config(args)
    _require_out_dir(args.model)
    if args.out:
        _require_out_dir(args.out)
    t0 = time.perf_counter()
    d = _load(args)
    t1 = time.perf_counter()
    if cfg.K[-1] > d.n:
        raise DataError(f"largest k ({cfg.K[-1]}) exceeds the {d.n} training instances")
    model, results = train(d, cfg)
    t2 = time.perf_counter()
    save_model(model, args.model)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "cv_accuracy", "n_features", "fcm_iterations", "fcm_converged", "selected", "subset"])
            for r in results:
                w.writerow([r.k, _fmt(r.accuracy), r.n_features, r.fcm_iterations, int(r.fcm_converged),
                            int(r.k == model.k), " ".join(r.subset.names) if r.subset else ""])
    print(candidate_table(results, model.k), end="")
    print(f"selected k*={model.k} -> {args.model}")
    _write_manifest(args.model, "train", cfg.to_dict(), {"data": args.data, "schema": args.schema},
                    cfg.seed, {"load": t1 - t0, "train": t2 - t1, "total": time.perf_counter() - t0})
    return 0


# -- predict ----------------------------------------------------------------------

def cmd_predict(args) -> int:
    _require_out_dir(args.out)
    t0 = time.perf_counter()
    _require_file(args.model, "model file")
    model = load_model(args.model)
    schema = model.schema
    if args.schema:
        given = _schema(args.schema)
        if given.fingerprint() != schema.fingerprint():
            raise SchemaMismatchError(
                f"schema {args.schema} (fingerprint {given.fingerprint()}) does not match the model "
                f"(fingerprint {schema.fingerprint()})")
        schema = given
    d = load_dataset(args.data, schema, schema.label_column, delimiter=args.delimiter,
                     header=not args.no_header, label_required=False)
    p = predict_many(model, d)
    cf = p.cluster_features
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["predicted", "probability", "z", "b"]
        if args.emit_memberships:
            head += [f"w{j}" for j in range(1, cf.k + 1)]
        w.writerow(head)
        for i in range(d.n):
            row = [p.labels[i], _fmt(p.probabilities[i].max()), int(cf.z[i]), _fmt(cf.b[i])]
            if args.emit_memberships:
                row += [_fmt(v) for v in cf.p[i]]
            w.writerow(row)
    _write_manifest(args.out, "predict", {"emit_memberships": args.emit_memberships, "k": model.k},
                    {"model": args.model, "data": args.data}, None, {"total": time.perf_counter() - t0})
    print(f"{d.n} predictions -> {args.out}")
    return 0


# -- evaluate ---------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    _require_out_dir(args.out)
    t0 = time.perf_counter()
    d = _load(args)
    _require_file(args.predictions, "predictions file")
    with open(args.predictions, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "predicted" not in rows[0]:
        raise DataError(f"{args.predictions}: no 'predicted' column")
    preds = [r["predicted"] for r in rows]
    if len(preds) != d.n:
        raise DataError(f"{len(preds)} predictions for {d.n} labeled instances")
    report = evaluate(preds, d.labels)
    text = report.format_table()
    Path(args.out).write_text(text, encoding="utf-8")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(report.table_rows())
    print(text, end="")
    _write_manifest(args.out, "evaluate", report.to_dict(),
                    {"data": args.data, "schema": args.schema, "predictions": args.predictions},
                    None, {"total": time.perf_counter() - t0})
    return 0


# -- parser -----------------------------------------------------------------------

def _data_args(p, schema_required=True):
    p.add_argument("--data", required=True, help="delimited data file")
    p.add_argument("--schema", required=schema_required,
                   help=f"JSON schema file, or {BUILTIN_KDD99!r} for the bundled KDD99 schema")
    p.add_argument("--label-column", help="overrides the schema's label column")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true",
                   help="columns are the schema features in order, then the label")


def _fcm_args(p):
    p.add_argument("--alpha", type=float, default=3.0, help="fuzzy degree (> 1)")
    p.add_argument("--tol", type=float, default=1e-6, help="termination tolerance")
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--bins", type=int, default=10, help="equal-frequency bins for information gain")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="keep a fraction of each large group, all of the rest")
    _data_args(p)
    p.add_argument("--strata-column", help="group tag column (default: raw labels)")
    p.add_argument("--fractions", help="group=fraction,... (unlisted groups are kept whole)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("cluster", help="run fuzzy c-means only and write memberships")
    _data_args(p)
    _fcm_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True, help="membership matrix CSV")
    p.add_argument("--centroids", help="optional JSON file for the centroids")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", help="select the best cluster count and write a model")
    _data_args(p)
    _fcm_args(p)
    p.add_argument("--strata-column", help="stratify CV folds by this column")
    p.add_argument("--K", default="2..50", help="candidate cluster counts, e.g. 2..50 or 2,4,8")
    p.add_argument("--T", type=int, choices=(1, 2, 3), default=1, help="cluster feature mode")
    p.add_argument("--q", type=int, default=10, help="cross-validation folds")
    p.add_argument("--confidence", type=float, default=0.2, help="pruning confidence")
    p.add_argument("--min-leaf", type=int, default=6)
    p.add_argument("--strict-cv", action="store_true", help="re-cluster inside every CV fold")
    p.add_argument("--ga-population", type=int, default=20)
    p.add_argument("--ga-generations", type=int, default=20)
    p.add_argument("--ga-crossover", type=float, default=0.6)
    p.add_argument("--ga-mutation", type=float, default=0.033)
    p.add_argument("--ga-seed", type=int, default=1)
    p.add_argument("--ga-greedy", action="store_true", help="greedy forward search instead of the GA")
    p.add_argument("--jobs", type=int, default=None, help=f"parallel candidates (default ${JOBS_ENV} or 1)")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--out", help="candidate report CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label a data file with a trained model")
    _data_args(p, schema_required=False)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-memberships", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="per-class TP/FP rates of a predictions file")
    _data_args(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True, help="aligned-text report")
    p.add_argument("--csv", help="delimited report")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cfc {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"cfc {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"cfc {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
