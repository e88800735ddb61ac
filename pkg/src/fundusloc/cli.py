"""Command-line entry point.

Subcommands: localize, propose, serve, export-gt, eval-loc, eval-clf,
split, synth. Exit codes: 0 success, 1 per-item failures (listed on
stderr), 2 usage or configuration errors. File outputs are written
atomically (temp file in the target directory, then rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import annotation, evaluation, synth
from .errors import ConfigError, FunduslocError
from .evaluation import LocalizationPair, ScoredPrediction
from .imaging import load_image
from .localizer import LocalizerConfig, localize_disc

POSITIVE_CLASS = "glaucoma"
DECISION_THRESHOLD = 0.5  # score >= threshold predicts the positive class


class _AtomicWriter:
    """Write to a temp file next to the target, rename on success."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._tmp = None
        self._fh = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, self._tmp = tempfile.mkstemp(dir=self.path.parent,
                                         prefix=self.path.name + ".", suffix=".tmp")
        self._fh = os.fdopen(fd, "w")
        return self._fh

    def __exit__(self, exc_type, exc, tb):
        self._fh.close()
        if exc_type is None:
            os.replace(self._tmp, self.path)
        else:
            os.unlink(self._tmp)
        return False


def _load_config(path: str | None) -> LocalizerConfig:
    if path is None:
        return LocalizerConfig()
    return LocalizerConfig.from_file(path)


def _parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"--listen expects HOST:PORT, got {value!r}")
    return host, int(port)


# -- subcommands -----------------------------------------------------------

def _cmd_localize(args) -> int:
    cfg = _load_config(args.config)
    manifest = annotation.load_manifest(args.manifest)
    root = Path(args.manifest).parent

    def run_one(entry):
        try:
            img = load_image(root / entry.path)
            return entry.image_id, localize_disc(img, cfg), None
        except (FunduslocError, OSError, ValueError) as exc:
            return entry.image_id, None, f"{type(exc).__name__}: {exc}"

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, manifest.images))
    else:
        results = [run_one(entry) for entry in manifest.images]

    failures = []
    with _AtomicWriter(args.out) as fh:
        for image_id, result, error in results:
            if error is None:
                fh.write(json.dumps(result.to_dict(image_id),
                                    separators=(",", ":")) + "\n")
            else:
                fh.write(json.dumps({"image_id": image_id, "error": error},
                                    separators=(",", ":")) + "\n")
                failures.append((image_id, error))
    if failures:
        for image_id, error in failures:
            print(f"localize failed: {image_id}: {error}", file=sys.stderr)
        return 1
    return 0


def _cmd_propose(args) -> int:
    cfg = _load_config(args.config)
    manifest = annotation.load_manifest(args.manifest)
    root = Path(args.manifest).parent
    out = Path(args.out)
    if out.exists():
        print(f"error: store log {out} already exists", file=sys.stderr)
        return 2
    store = annotation.generate_proposals(manifest, cfg, out, root)
    counts = store.progress()
    store.close()
    print(f"proposed {counts['proposed']}, needing manual annotation "
          f"{counts['rejected']}, total {counts['total']}")
    return 0


def _cmd_serve(args) -> int:
    from .server import serve

    manifest = annotation.load_manifest(args.manifest)
    root = Path(args.manifest).parent
    store = annotation.AnnotationStore.open(manifest, args.store)
    host, port = _parse_listen(args.listen)
    serve(store, root, host, port, ui_dir=args.ui_dir)
    return 0


def _cmd_export_gt(args) -> int:
    manifest = annotation.load_manifest(args.manifest)
    store = annotation.AnnotationStore.open(manifest, args.store)
    with _AtomicWriter(args.out) as fh:
        counts = store.export_ground_truth(fh)
    print(f"exported {counts['exported']} boxes "
          f"(accepted {counts['accepted']}, corrected {counts['corrected']}, "
          f"rejected {counts['rejected']}, still proposed {counts['proposed']})")
    return 0


def _cmd_eval_loc(args) -> int:
    truth = annotation.read_ground_truth(args.gt)
    preds = annotation.read_predictions(args.pred)
    pairs = [LocalizationPair(i, preds.get(i), box) for i, box in sorted(truth.items())]
    if not pairs:
        print("error: ground truth file is empty", file=sys.stderr)
        return 2
    thresholds = [float(t) for t in args.thresholds.split(",")]
    table = evaluation.localization_accuracy(pairs, thresholds, metric=args.metric)
    mean = evaluation.mean_overlap(pairs, metric=args.metric)
    missing = sum(1 for p in pairs if p.predicted is None)

    print(f"Localization accuracy, metric = {args.metric} "
          f"(strictly greater than each threshold)")
    print("  ".join(f"{t * 100:>7.0f}%" for t in thresholds))
    print("  ".join(f"{table[t]:>8.2f}" for t in thresholds))
    print(f"Mean overlap: {mean:.2f}%   pairs: {len(pairs)}   "
          f"missing predictions: {missing}")

    if args.out:
        report = {
            "metric": args.metric,
            "thresholds": {str(t): table[t] for t in thresholds},
            "mean_overlap_pct": mean,
            "pairs": len(pairs),
            "missing_predictions": missing,
        }
        with _AtomicWriter(args.out) as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return 0


def _read_scores(path: str | Path) -> list[ScoredPrediction]:
    preds = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            preds.append(ScoredPrediction(str(obj["image_id"]),
                                          str(obj["true_label"]),
                                          float(obj["score"])))
    return preds


def _cmd_eval_clf(args) -> int:
    preds = _read_scores(args.pred)
    if not preds:
        print("error: prediction file is empty", file=sys.stderr)
        return 2
    positive = args.positive
    labels = sorted({p.true_label for p in preds})
    if positive not in labels:
        print(f"error: positive class {positive!r} absent from data "
              f"(labels: {labels})", file=sys.stderr)
        return 2

    def predicted_label(score: float) -> str:
        if score >= DECISION_THRESHOLD:
            return positive
        others = [l for l in labels if l != positive]
        return others[0] if others else positive

    cm = evaluation.ConfusionMatrix.from_predictions(
        [(p.true_label, predicted_label(p.score)) for p in preds],
        classes=[l for l in ("healthy", "glaucoma") if l in labels]
                or labels,
    )
    report = evaluation.classification_report(cm)
    print(report.to_text())

    out: dict = {
        "confusion_matrix": cm.to_dict(),
        "report": report.to_dict(),
        "positive_class": positive,
        "decision_threshold": DECISION_THRESHOLD,
    }
    try:
        auc_value = evaluation.auc(preds, positive)
        print(f"AUC: {auc_value:.4f}")
        out["auc"] = auc_value
        out["roc"] = [pt._asdict() for pt in evaluation.roc_curve(preds, positive)]
    except FunduslocError as exc:
        print(f"AUC undefined: {exc}")
        out["auc"] = None

    if args.at_specificity is not None:
        try:
            op = evaluation.sensitivity_at_specificity(preds, positive,
                                                       args.at_specificity)
            print(f"Sensitivity {op.sensitivity * 100:.2f}% at observed "
                  f"specificity {op.specificity * 100:.2f}% "
                  f"(target {args.at_specificity * 100:.0f}%)")
            out["sensitivity_at_specificity"] = op._asdict()
        except FunduslocError as exc:
            print(f"Specificity target unreachable: {exc}")
            out["sensitivity_at_specificity"] = None

    if args.folds:
        with open(args.folds) as fh:
            folds = json.load(fh)
        assignment = {k: int(v) for k, v in folds["assignment"].items()}
        per_fold = []
        for fold in range(int(folds["k"])):
            subset = [p for p in preds if assignment.get(p.image_id) == fold]
            try:
                per_fold.append(evaluation.auc(subset, positive))
            except FunduslocError:
                per_fold.append(None)
        valid = [a for a in per_fold if a is not None]
        mean_auc = sum(valid) / len(valid) if valid else None
        print(f"AUC pooled: {out['auc']:.4f}   per-fold mean: "
              f"{mean_auc:.4f} over {len(valid)} folds" if mean_auc is not None
              else "per-fold AUC undefined")
        out["auc_per_fold"] = per_fold
        out["auc_per_fold_mean"] = mean_auc

    if args.out:
        with _AtomicWriter(args.out) as fh:
            json.dump(out, fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_split(args) -> int:
    manifest = annotation.load_manifest(args.manifest)
    if (args.k is None) == (args.train_n is None):
        print("error: pass exactly one of --k or --train-n", file=sys.stderr)
        return 2
    if args.k is not None:
        result = evaluation.stratified_kfold(manifest, args.k, args.seed)
        payload = result.to_dict()
        payload["seed"] = args.seed
        sizes = [len(result.fold_ids(f)) for f in range(args.k)]
        print(f"{args.k} folds, sizes {sizes}")
    else:
        result = evaluation.stratified_subsample(manifest, args.train_n, args.seed)
        payload = result.to_dict()
        payload["seed"] = args.seed
        print(f"train {len(result.train)}, test {len(result.test)}"
              + (" (forced at least one per class)"
                 if result.forced_min_per_class else ""))
    if args.out:
        with _AtomicWriter(args.out) as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_synth(args) -> int:
    result = synth.generate_corpus(args.n, args.seed, args.out_dir,
                                   fringe_rate=args.fringe_rate,
                                   spot_rate=args.spot_rate)
    n_fringe = sum(1 for e in result.log_entries if e["fringe"])
    print(f"wrote {len(result.manifest)} images to {args.out_dir} "
          f"({n_fringe} with fringe artifacts)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundusloc",
        description="Optic disc localization, annotation review, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("localize", help="run the localizer over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("propose", help="seed an annotation store with proposals")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="store log path (JSONL)")
    p.set_defaults(func=_cmd_propose)

    p = sub.add_parser("serve", help="run the review HTTP service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--listen", default="127.0.0.1:8760", metavar="HOST:PORT")
    p.add_argument("--ui-dir", help="static review UI to serve at /")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("export-gt", help="export accepted and corrected boxes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_gt)

    p = sub.add_parser("eval-loc", help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--metric", choices=("iou", "coverage"), default="iou")
    p.add_argument("--thresholds", default="0,0.2,0.5,0.6,0.7,0.8")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval_loc)

    p = sub.add_parser("eval-clf", help="classification metrics from scored predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--positive", default=POSITIVE_CLASS)
    p.add_argument("--at-specificity", type=float, default=None, metavar="FRACTION")
    p.add_argument("--folds", help="fold assignment JSON for per-fold AUC")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval_clf)

    p = sub.add_parser("split", help="deterministic stratified splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--train-n", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("synth", help="generate a synthetic evaluation corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fringe-rate", type=float, default=0.3)
    p.add_argument("--spot-rate", type=float, default=0.4)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FunduslocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
