"""Command-line interface: one entry point per pipeline stage.

Subcommands: preprocess, train, evaluate, selftrain, pipeline, ablation,
grid-search. Every invocation writes a run manifest (inputs digested before
processing, config snapshot, seed, duration, outcome). Identical inputs,
config, and seed produce byte-identical primary outputs; manifests are the
only files carrying volatile fields.

The pipeline command derives one seed per stage from the master seed, so a
stage rerun with its derived seed reproduces the stage exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__, calibration, corpus, dataio, modelio, selftrain, training
from .manifest import ManifestWriter



class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for error reporting."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def stage_seed(master_seed: int, stage: str) -> int:
    """Deterministic per-stage seed split from the master seed."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _resolve_config(args) -> dict[str, str]:
    return dataio.load_config(args.config)


def _resolve_seed(args, cfg: dict[str, str]) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("seed", 0))


def _selftrain_config(cfg: dict[str, str], k=None) -> selftrain.SelfTrainConfig:
    return selftrain.SelfTrainConfig(
        k=float(cfg.get("k", 200)) if k is None else float(k),
        rounds=int(cfg.get("rounds", 1)),
    )


def _write_report(path, rep: calibration.CalibrationReport, classes, n_bins: int) -> None:
    payload = {
        "n": rep.n,
        "n_bins": n_bins,
        "classes": list(classes),
        "accuracy": rep.overall_accuracy,
        "confidence": rep.overall_mean_confidence,
        "ece": rep.ece,
        "oe": rep.oe,
        "precision": rep.precision,
        "recall": rep.recall,
        "f1": rep.f1,
        "bins": [
            {
                "bin": b.bin_index,
                "count": b.count,
                "accuracy": b.accuracy,
                "confidence": b.mean_confidence,
            }
            for b in rep.bins
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _print_metrics(prefix: str, rep: calibration.CalibrationReport) -> None:
    f1 = "n/a" if rep.f1 is None else f"{rep.f1:.4f}"
    print(
        f"{prefix}: n={rep.n} accuracy={rep.overall_accuracy:.4f} "
        f"confidence={rep.overall_mean_confidence:.4f} ece={rep.ece:.4f} "
        f"oe={rep.oe:.4f} f1={f1}"
    )


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    cfg = _resolve_config(args)
    groups = [corpus.normalize_group(g) for g in args.eval_groups.split(",")]
    inputs = [args.abstracts, args.entities, args.relations]
    with ManifestWriter(
        "preprocess", args.invocation_argv, {**cfg, "eval_groups": ",".join(groups)},
        inputs, None, __version__, args.manifest_dir,
    ):
        examples = corpus.preprocess(args.abstracts, args.entities, args.relations, groups)
        dataio.write_examples(args.out, examples)
        stats = corpus.dataset_stats(examples)
        for label, count in stats.items():
            print(f"{label}\t{count}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args, cfg)
    train_cfg = training.TrainConfig.from_mapping({**cfg, "seed": seed})
    inputs = [args.data] + ([args.dev] if args.dev else [])
    with ManifestWriter(
        "train", args.invocation_argv, train_cfg.to_dict(), inputs, seed,
        __version__, args.manifest_dir,
    ):
        examples = dataio.read_examples(args.data)
        dev = None
        if args.dev:
            dev_examples = dataio.read_examples(args.dev)
            dev = ([e.text for e in dev_examples], [e.label for e in dev_examples])
        clf = training.classifier_from_config(train_cfg)
        clf.fit([e.text for e in examples], [e.label for e in examples], dev=dev)
        modelio.save_model(clf, args.out_model)
        if args.log:
            dataio.write_jsonl(args.log, clf.log_)
        final = clf.log_[-1]
        print(f"trained {len(examples)} examples, final loss {final['loss']:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    with ManifestWriter(
        "evaluate", args.invocation_argv, {**cfg, "bins": str(args.bins)},
        [args.model, args.data], None, __version__, args.manifest_dir,
    ):
        clf = modelio.load_model(args.model)
        examples = dataio.read_examples(args.data)
        records = training.predict_records(
            clf,
            [e.text for e in examples],
            example_ids=[e.example_id for e in examples],
            gold_labels=[e.label for e in examples],
        )
        rep = calibration.report(records, args.bins, classes=list(clf.classes_))
        _write_report(args.report, rep, clf.classes_, args.bins)
        Path(args.histogram).write_text(calibration.histogram_table(rep))
        if args.predictions:
            dataio.write_predictions(args.predictions, records, clf.classes_)
        _print_metrics("evaluate", rep)
    return 0


def cmd_selftrain(args) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args, cfg)
    train_cfg = training.TrainConfig.from_mapping({**cfg, "seed": seed})
    st_cfg = _selftrain_config(cfg, k=args.k)
    with ManifestWriter(
        "selftrain", args.invocation_argv,
        {**train_cfg.to_dict(), "k": st_cfg.k, "rounds": st_cfg.rounds},
        [args.labeled, args.pool], seed, __version__, args.manifest_dir,
    ):
        labeled = dataio.read_examples(args.labeled)
        pool = dataio.read_pool(args.pool)
        clf, provenance = selftrain.selftrain_round(
            ([e.text for e in labeled], [e.label for e in labeled]),
            pool, train_cfg, st_cfg,
        )
        modelio.save_model(clf, args.out_model)
        dataio.write_jsonl(args.provenance, provenance)
        print(f"selftrain: {len(provenance)} pseudo-labeled examples added")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args, cfg)
    workdir = Path(cfg.get("workdir", "pipeline-out"))
    workdir.mkdir(parents=True, exist_ok=True)
    seeds = {name: stage_seed(seed, name) for name in ("train", "selftrain")}
    input_keys = [k for k in cfg if k.endswith(("_abstracts", "_entities", "_relations"))]
    inputs = [cfg[k] for k in input_keys] + ([cfg["pool"]] if "pool" in cfg else [])
    with ManifestWriter(
        "pipeline", args.invocation_argv,
        {**cfg, "master_seed": seed, **{f"seed_{k}": v for k, v in seeds.items()}},
        inputs, seed, __version__, args.manifest_dir,
    ):
        _run_pipeline(cfg, seeds, workdir, args)
    return 0


def _stage_done(paths) -> bool:
    return all(Path(p).is_file() for p in paths)


def _run_pipeline(cfg: dict[str, str], seeds: dict[str, int], workdir: Path, args) -> None:
    bins = int(cfg.get("bins", 10))
    k = float(cfg.get("k", 0))
    groups = [
        corpus.normalize_group(g)
        for g in cfg.get("eval_groups", ",".join(corpus.EVALUATED_GROUPS)).split(",")
    ]
    datasets: dict[str, Path] = {}

    # preprocess: one labeled file per provided split
    for split in ("train", "dev", "test"):
        key = f"{split}_abstracts"
        if key not in cfg:
            continue
        out = workdir / f"{split}.jsonl"
        datasets[split] = out
        if args.resume and _stage_done([out]):
            continue
        try:
            examples = corpus.preprocess(
                cfg[key], cfg[f"{split}_entities"], cfg[f"{split}_relations"], groups
            )
            dataio.write_examples(out, examples)
        except Exception as exc:
            raise StageError("preprocess", exc) from exc
    if "train" not in datasets:
        raise StageError("preprocess", ValueError("config lacks train_abstracts"))
    if "test" not in datasets:
        raise StageError("preprocess", ValueError("config lacks test_abstracts"))

    model_base = workdir / "model_base.bin"
    train_log = workdir / "train_log.jsonl"
    train_cfg = training.TrainConfig.from_mapping({**cfg, "seed": seeds["train"]})
    if not (args.resume and _stage_done([model_base, train_log])):
        try:
            train_examples = dataio.read_examples(datasets["train"])
            dev = None
            if "dev" in datasets:
                dev_examples = dataio.read_examples(datasets["dev"])
                dev = ([e.text for e in dev_examples], [e.label for e in dev_examples])
            clf = training.classifier_from_config(train_cfg)
            clf.fit(
                [e.text for e in train_examples],
                [e.label for e in train_examples],
                dev=dev,
            )
            modelio.save_model(clf, model_base)
            dataio.write_jsonl(train_log, clf.log_)
        except Exception as exc:
            raise StageError("train", exc) from exc

    def evaluate_stage(model_path: Path, tag: str) -> None:
        report_path = workdir / f"report_{tag}.json"
        histogram_path = workdir / f"histogram_{tag}.txt"
        predictions_path = workdir / f"predictions_{tag}.jsonl"
        if args.resume and _stage_done([report_path, histogram_path, predictions_path]):
            return
        try:
            clf = modelio.load_model(model_path)
            examples = dataio.read_examples(datasets["test"])
            records = training.predict_records(
                clf,
                [e.text for e in examples],
                example_ids=[e.example_id for e in examples],
                gold_labels=[e.label for e in examples],
            )
            rep = calibration.report(records, bins, classes=list(clf.classes_))
            _write_report(report_path, rep, clf.classes_, bins)
            histogram_path.write_text(calibration.histogram_table(rep))
            dataio.write_predictions(predictions_path, records, clf.classes_)
            _print_metrics(f"evaluate[{tag}]", rep)
        except Exception as exc:
            raise StageError("evaluate", exc) from exc

    evaluate_stage(model_base, "base")

    model_final = workdir / "model_final.bin"
    provenance = workdir / "provenance.jsonl"
    if not (args.resume and _stage_done([model_final, provenance])):
        try:
            if k == 0:
                # No augmentation requested: final model is the base model.
                shutil.copyfile(model_base, model_final)
                dataio.write_jsonl(provenance, [])
            else:
                if "pool" not in cfg:
                    raise ValueError("selftrain requires a 'pool' config entry when k > 0")
                pool_path = Path(cfg["pool"])
                if not pool_path.is_file():
                    raise FileNotFoundError(f"pool file not found: {pool_path}")
                pool = dataio.read_pool(pool_path)
                base = modelio.load_model(model_base)
                records = selftrain.predict_pool(base, pool)
                st_cfg = _selftrain_config(cfg)
                batch = selftrain.select_topk(records, st_cfg, base.classes_)
                labeled = dataio.read_examples(datasets["train"])
                by_id = {p.example_id: p for p in pool}
                texts = [e.text for e in labeled]
                labels = [e.label for e in labeled]
                rows = []
                for entry in batch.entries:
                    texts.append(by_id[entry.example_id].text)
                    labels.append(entry.label)
                    rows.append(
                        {
                            "example_id": entry.example_id,
                            "label": entry.label,
                            "probability": entry.probability,
                            "round": 1,
                            "pseudo_labeled": True,
                        }
                    )
                final_cfg = training.TrainConfig.from_mapping(
                    {**cfg, "seed": seeds["selftrain"]}
                )
                clf = training.classifier_from_config(final_cfg).fit(texts, labels)
                modelio.save_model(clf, model_final)
                dataio.write_jsonl(provenance, rows)
        except StageError:
            raise
        except Exception as exc:
            raise StageError("selftrain", exc) from exc

    evaluate_stage(model_final, "final")


def cmd_ablation(args) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args, cfg)
    toggles = {t.strip() for t in args.toggles.split(",") if t.strip()}
    unknown = toggles - {"mixup", "cpl", "selftrain"}
    if unknown:
        raise ValueError(f"unknown ablation toggles: {sorted(unknown)}")
    inputs = [args.train, args.test] + ([args.pool] if args.pool else [])
    with ManifestWriter(
        "ablation", args.invocation_argv,
        {**cfg, "toggles": ",".join(sorted(toggles)), "replicates": str(args.replicates)},
        inputs, seed, __version__, args.manifest_dir,
    ):
        rows = run_ablation(args, cfg, seed, toggles)
        Path(args.out).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
        _print_ablation_table(rows)
    return 0


def run_ablation(args, cfg: dict[str, str], seed: int, toggles: set[str]) -> list[dict]:
    """Train every combination of the enabled toggles, with replicates.

    Axes not listed in `toggles` stay off. Each row reports mean and
    standard deviation of precision, recall, F1, accuracy, confidence,
    ECE, and OE on the test split.
    """
    train_examples = dataio.read_examples(args.train)
    test_examples = dataio.read_examples(args.test)
    texts = [e.text for e in train_examples]
    labels = [e.label for e in train_examples]
    test_x = [e.text for e in test_examples]
    test_y = [e.label for e in test_examples]
    pool = dataio.read_pool(args.pool) if args.pool else []
    base_cfg = training.TrainConfig.from_mapping({**cfg, "seed": seed})

    axes = [ax for ax in ("mixup", "cpl", "selftrain") if ax in toggles]
    combos = [
        dict(zip(axes, values))
        for values in itertools.product((False, True), repeat=len(axes))
    ]
    rows = []
    for combo in combos:
        use_mixup = combo.get("mixup", False)
        use_cpl = combo.get("cpl", False)
        use_st = combo.get("selftrain", False)
        if use_st and not pool:
            raise ValueError("selftrain toggle requires --pool")
        metrics_runs = []
        for r in range(args.replicates):
            run_cfg = training.TrainConfig(
                **{
                    **base_cfg.to_dict(),
                    "mix_per_example": base_cfg.mix_per_example if use_mixup else 0,
                    "beta": base_cfg.beta if use_cpl else 0.0,
                    "seed": seed + r,
                }
            )
            if use_st:
                clf, _ = selftrain.selftrain_round(
                    (texts, labels), pool, run_cfg, _selftrain_config(cfg)
                )
            else:
                clf = training.classifier_from_config(run_cfg).fit(texts, labels)
            metrics_runs.append(training.evaluate_split(clf, test_x, test_y))
        row = {
            "mixup": use_mixup,
            "cpl": use_cpl,
            "selftrain": use_st,
            "replicates": args.replicates,
        }
        for metric in ("precision", "recall", "f1", "accuracy", "confidence", "ece", "oe"):
            values = np.array([m[metric] for m in metrics_runs], dtype=np.float64)
            row[f"{metric}_mean"] = float(values.mean())
            row[f"{metric}_std"] = float(values.std(ddof=1)) if args.replicates > 1 else 0.0
        rows.append(row)
    return rows


def _print_ablation_table(rows: list[dict]) -> None:
    header = ("mixup", "cpl", "selftrain", "f1", "accuracy", "confidence", "ece", "oe")
    print("\t".join(header))
    for row in rows:
        cells = [str(row["mixup"]), str(row["cpl"]), str(row["selftrain"])]
        for metric in ("f1", "accuracy", "confidence", "ece", "oe"):
            cells.append(f"{row[f'{metric}_mean']:.4f}±{row[f'{metric}_std']:.4f}")
        print("\t".join(cells))


def cmd_grid_search(args) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args, cfg)
    candidates = [float(b) for b in args.betas.split(",") if b.strip()]
    with ManifestWriter(
        "grid-search", args.invocation_argv,
        {**cfg, "betas": args.betas, "replicates": str(args.replicates)},
        [args.train, args.dev], seed, __version__, args.manifest_dir,
    ):
        train_examples = dataio.read_examples(args.train)
        dev_examples = dataio.read_examples(args.dev)
        base_cfg = training.TrainConfig.from_mapping({**cfg, "seed": seed})
        best, rows = training.grid_search_beta(
            ([e.text for e in train_examples], [e.label for e in train_examples]),
            ([e.text for e in dev_examples], [e.label for e in dev_examples]),
            candidates, base_cfg, replicates=args.replicates,
        )
        payload = {"chosen_beta": best, "rows": rows}
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print("beta\tf1_mean\tf1_var\taccuracy\tconfidence\tece\toe")
        for row in rows:
            print(
                f"{row['beta']}\t{row['f1_mean']:.4f}\t{row['f1_var']:.2e}\t"
                f"{row['accuracy_mean']:.4f}\t{row['confidence_mean']:.4f}\t"
                f"{row['ece_mean']:.4f}\t{row['oe_mean']:.4f}"
            )
        print(f"chosen beta: {best}")
    return 0


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master random seed")
    common.add_argument("--config", default=None, help="keyed text config file")
    common.add_argument("--manifest-dir", default="manifests")

    parser = argparse.ArgumentParser(
        prog="calrex",
        description="Calibrated chemical-protein sentence classification toolkit",
    )
    parser.add_argument("--version", action="version", version=f"calrex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="extract labeled sentences")
    p.add_argument("--abstracts", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--relations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eval-groups", default=",".join(corpus.EVALUATED_GROUPS))
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", parents=[common], help="train a classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--dev", default=None)
    p.add_argument("--out-model", required=True)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="measure calibration")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--report", required=True)
    p.add_argument("--histogram", required=True)
    p.add_argument("--predictions", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("selftrain", parents=[common], help="one self-training round")
    p.add_argument("--labeled", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--out-model", required=True)
    p.add_argument("--provenance", required=True)
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("pipeline", parents=[common], help="full preprocess-to-report run")
    p.add_argument("--resume", action="store_true", help="skip stages whose outputs exist")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("ablation", parents=[common], help="toggle-combination study")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--pool", default=None)
    p.add_argument("--toggles", default="mixup,cpl")
    p.add_argument("--replicates", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("grid-search", parents=[common], help="pick beta on the dev set")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--betas", default="0.1,0.3,0.5")
    p.add_argument("--replicates", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid_search)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(argv)
    args.invocation_argv = list(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error [{args.command}:{exc.stage}]: {exc.cause}", file=sys.stderr)
        return 1
    except Exception as exc:  # fail fast, but always name the failing command
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
