"""binsight command line: synth -> featurize -> split -> cv -> train -> eval.

Exit codes: 0 success, 1 data or model error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import Dataset, load_csv, stratified_split, write_csv
from .errors import BinsightError, EmptyInput, ParseError
from .evaluation import cross_validate, evaluate, export_heatmap
from .featurize import (FeatureConfig, bytes_to_image, export_pgm, featurize_bytes,
                        parse_width_rule)
from .forest import ForestConfig, load_model, save_model, thread_count, train_forest
from .synth import bundled_spec_text, parse_spec, read_manifest, synth_families, write_corpus

log = logging.getLogger("binsight")

MANIFEST_NAME = "manifest.tsv"


class UsageError(Exception):
    """Bad flags or config files (exit 2)."""


class DataError(Exception):
    """Bad input data or model (exit 1)."""


def _read_text(path, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None


def _load_dataset(path, label_names=None) -> Dataset:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    try:
        return load_csv(data, label_names)
    except ParseError as exc:
        raise DataError(f"{path}: {exc}") from None


def _write(path, data: bytes) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def _feature_config(args) -> FeatureConfig:
    rule = None
    if args.width_rule:
        try:
            rule = parse_width_rule(_read_text(args.width_rule, "width rule"))
        except ParseError as exc:
            raise UsageError(f"{args.width_rule}: {exc}") from None
    try:
        kwargs = {"interpolation": args.interp}
        if args.side is not None:
            kwargs["side"] = args.side
        if rule is not None:
            kwargs["width_rule"] = rule
        return FeatureConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _forest_config(args) -> ForestConfig:
    try:
        return ForestConfig(n_trees=args.trees, mtry=args.mtry, min_node_size=args.min_node,
                            max_depth=args.depth, bootstrap=not args.no_bootstrap,
                            seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _collect_inputs(root: Path, manifest):
    """Sorted ``(relative_path, label)`` pairs for the corpus under ``root``."""
    if manifest is not None:
        try:
            mapping = read_manifest(_read_text(manifest, "manifest"))
        except ParseError as exc:
            raise UsageError(f"{manifest}: {exc}") from None
        return sorted(mapping.items())
    entries = []
    for dirpath, _, filenames in os.walk(root):
        for name in filenames:
            full = Path(dirpath) / name
            if full.parent == root and name == MANIFEST_NAME:
                continue
            rel = full.relative_to(root).as_posix()
            entries.append((rel, full.parent.name))
    return sorted(entries)


def cmd_featurize(args) -> int:
    root = Path(args.input_dir)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        print(f"error: cannot read directory {root}", file=sys.stderr)
        return 2
    config = _feature_config(args)
    entries = _collect_inputs(root, args.labels)
    pgm_dir = Path(args.pgm_dir) if args.pgm_dir else None

    def work(entry):
        rel, label = entry
        try:
            data = (root / rel).read_bytes()
            vec = featurize_bytes(data, config)
            if pgm_dir is not None:
                _write(pgm_dir / (rel + ".pgm"), export_pgm(bytes_to_image(data, config.width_rule)))
            return rel, label, vec, None
        except EmptyInput:
            return rel, label, None, "file is empty"
        except OSError as exc:
            return rel, label, None, exc.strerror or str(exc)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(work, entries))

    bad = [(rel, msg) for rel, _, vec, msg in results if vec is None]
    for rel, msg in bad:
        print(f"{'error' if args.strict else 'warning'}: {rel}: {msg}"
              + ("" if args.strict else " (skipped)"), file=sys.stderr)
    if bad and args.strict:
        return 1
    good = [(rel, label, vec) for rel, label, vec, _ in results if vec is not None]
    names = sorted({label for _, label, _ in good})
    lookup = {n: i for i, n in enumerate(names)}
    X = (np.stack([v for _, _, v in good]) if good
         else np.zeros((0, config.feature_len), np.uint8))
    ds = Dataset(X, [lookup[label] for _, label, _ in good], names,
                 tuple(rel for rel, _, _ in good))
    try:
        _write(args.output, write_csv(ds))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    print(f"featurize: {len(good)} files, {len(names)} families, {len(bad)} skipped, "
          f"side={config.side} interp={config.interpolation} -> {args.output}")
    return 0


def cmd_synth(args) -> int:
    text = _read_text(args.spec, "spec") if args.spec else bundled_spec_text()
    try:
        spec = parse_spec(text)
    except ParseError as exc:
        raise UsageError(f"{args.spec or 'bundled spec'}: {exc}") from None
    corpus = synth_families(spec, args.seed)
    manifest = write_corpus(corpus, args.output)
    print(f"synth: seed={args.seed} {len(corpus)} files, {len(spec.families)} families "
          f"-> {args.output} (manifest {manifest.name})")
    return 0


def cmd_split(args) -> int:
    if not 0.0 < args.fraction < 1.0:
        raise UsageError(f"--fraction must lie in (0, 1), got {args.fraction}")
    ds = _load_dataset(args.input)
    try:
        result = stratified_split(ds, args.fraction, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _write(args.train, write_csv(result.train))
    _write(args.test, write_csv(result.test))
    print(f"split: seed={args.seed} fraction={args.fraction} train={len(result.train)} "
          f"test={len(result.test)}")
    return 0


def cmd_train(args) -> int:
    config = _forest_config(args)
    ds = _load_dataset(args.input)
    try:
        config.resolved_mtry(ds.feature_len)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(ds) == 0:
        raise DataError(f"{args.input}: no samples")
    model = train_forest(ds, config)
    _write(args.output, save_model(model))
    print(f"train: seed={config.seed} trees={config.n_trees} "
          f"mtry={config.resolved_mtry(ds.feature_len)} samples={len(ds)} -> {args.output}")
    return 0


def _load_model_file(path):
    try:
        return load_model(Path(path).read_bytes())
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _check_lengths(model, feature_len: int) -> None:
    if feature_len != model.feature_len:
        raise DataError(f"feature length mismatch: model expects {model.feature_len}, "
                        f"data has {feature_len}")


def cmd_predict(args) -> int:
    model = _load_model_file(args.model)
    path = Path(args.input)
    if path.suffix.lower() == ".csv":
        ds = _load_dataset(path)
        _check_lengths(model, ds.feature_len)
        X = ds.X
    else:
        if args.side is None:
            args.side = math.isqrt(model.feature_len)
        config = _feature_config(args)
        try:
            X = featurize_bytes(path.read_bytes(), config)[None, :]
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from None
        except EmptyInput:
            raise DataError(f"{path}: file is empty") from None
        _check_lengths(model, X.shape[1])
    proba = model.predict_proba(X)
    pred = np.argmax(proba, axis=1)
    for cls, p in zip(pred, proba):
        print(f"{model.label_names[cls]}\t{p[cls]:.6f}")
    return 0


def _write_report(path, text: str, cm, scale: int) -> list[str]:
    path = Path(path)
    base = path.with_suffix("") if path.suffix else path
    conf_path = base.with_name(base.name + ".confusion.csv")
    heat_path = base.with_name(base.name + ".heatmap.pgm")
    _write(path, text.encode("utf-8"))
    _write(conf_path, cm.to_csv().encode("utf-8"))
    _write(heat_path, export_heatmap(cm, scale)[1])
    return [str(path), str(conf_path), str(heat_path)]


def cmd_eval(args) -> int:
    if args.heatmap_scale < 1:
        raise UsageError("--heatmap-scale must be >= 1")
    model = _load_model_file(args.model)
    ds = _load_dataset(args.input, label_names=None)
    _check_lengths(model, ds.feature_len)
    try:
        report = evaluate(model, ds)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    files = _write_report(args.output, report.to_text("held-out test"), report.confusion,
                          args.heatmap_scale)
    print(f"eval: {report.summary()} -> {', '.join(files)}")
    return 0


def cmd_cv(args) -> int:
    if args.folds < 2:
        raise UsageError(f"--folds must be >= 2, got {args.folds}")
    if args.heatmap_scale < 1:
        raise UsageError("--heatmap-scale must be >= 1")
    config = _forest_config(args)
    ds = _load_dataset(args.input)
    try:
        config.resolved_mtry(ds.feature_len)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        result = cross_validate(ds, args.folds, config, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    files = _write_report(args.output, result.to_text(), result.pooled_confusion,
                          args.heatmap_scale)
    print(f"cv: seed={args.seed} folds={args.folds} mean_fold_accuracy="
          f"{result.mean_accuracy:.4f} pooled {result.pooled_report.summary()} "
          f"-> {', '.join(files)}")
    return 0


def _add_feature_flags(p, side_default=32):
    p.add_argument("--side", type=int, default=side_default,
                   help="resized image side n; features = n*n (default %(default)s)")
    p.add_argument("--interp", choices=("nearest", "bilinear"), default="nearest")
    p.add_argument("--width-rule", metavar="FILE",
                   help="file of '<max_bytes> <width>' bands, last band '* <width>'")


def _add_forest_flags(p):
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--mtry", type=int, default=None,
                   help="features tried per split (default floor(sqrt(features)))")
    p.add_argument("--min-node", type=int, default=1)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--no-bootstrap", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binsight", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"binsight {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="binaries -> labeled feature CSV")
    p.add_argument("input_dir")
    p.add_argument("-o", "--output", required=True, help="output CSV")
    p.add_argument("--labels", metavar="MANIFEST",
                   help="'path<TAB>family' lines; default label is the parent directory")
    p.add_argument("--strict", action="store_true", help="fail (exit 1) on any bad file")
    p.add_argument("--pgm-dir", help="also dump each full-size grayscale image as PGM")
    _add_feature_flags(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("synth", help="generate a synthetic family corpus")
    p.add_argument("spec", nargs="?", help="spec file (default: bundled twin spec)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="stratified train/test split of a CSV")
    p.add_argument("input")
    p.add_argument("--fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a random forest")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="model file")
    p.add_argument("--seed", type=int, default=0)
    _add_forest_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify CSV rows or one raw binary")
    p.add_argument("model")
    p.add_argument("input", help="feature CSV (*.csv) or a raw binary")
    _add_feature_flags(p, side_default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a model on a held-out CSV")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="report path")
    p.add_argument("--heatmap-scale", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="report path")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heatmap-scale", type=int, default=1)
    _add_forest_flags(p)
    p.set_defaults(func=cmd_cv)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be in [0, 2**64)", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, BinsightError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
