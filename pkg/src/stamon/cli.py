"""Command-line front end: simulate -> snapshot -> train -> eval.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure (non-finite loss).  Diagnostics go to stderr, result summaries to
stdout, artifacts to files.  Every artifact embeds the run configuration
and the artifact version; repeated runs with identical inputs and flags
write byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .evaluation import evaluate, format_report, report_to_json
from .gcn import (
    TrainingConfig,
    TrainingDivergedError,
    fit,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .simulator import write_benchmark_data
from .snapshot import (
    SnapshotConfig,
    build_snapshots,
    load_snapshot_batch,
    save_snapshot_batch,
)
from .timeseries import (
    DataError,
    apply_standardizer,
    fit_standardizer,
    load_dataset,
    segment_windows,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

LOCK_FILENAME = ".stamon.lock"


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextmanager
def _locked_output_dir(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_FILENAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if that run is dead)"
        ) from None
    try:
        yield
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


def _refuse_overwrite(path: Path, force: bool):
    if path.exists() and not force:
        raise DataError(f"{path} already exists; pass --force to overwrite")


def _run_config(args, command: str) -> dict:
    """Full run configuration echoed into every artifact of this run."""
    get = lambda name, default: getattr(args, name, default)
    stride = get("stride", None)
    window = get("window", 20)
    if stride is None:
        stride = window
    train_stride = get("train_stride", None)
    if train_stride is None:
        train_stride = stride
    return {
        "subcommand": command,
        "artifact_version": __version__,
        "manifest": get("manifest", None),
        "snapshots": get("snapshots", None),
        "checkpoint": get("checkpoint", None),
        "out": args.out,
        "window_length": window,
        "stride": stride,
        "train_stride": train_stride,
        "threshold": get("threshold", 0.6),
        "weighted": bool(get("weighted", False)),
        "hidden": get("hidden", 64),
        "learning_rate": get("learning_rate", 1e-3),
        "momentum": get("momentum", 0.9),
        "epochs": get("epochs", 200),
        "batch_size": get("batch_size", 32),
        "seed": get("seed", 0),
        "classes": get("classes", None),
        "vars": get("vars", None),
        "train_samples": get("train_samples", None),
        "test_samples": get("test_samples", None),
        "sampling_period": get("sampling_period", None),
    }


def cmd_simulate(args) -> int:
    if args.classes < 2:
        raise DataError(f"--classes must be >= 2, got {args.classes}")
    if args.train_samples < 1 or args.test_samples < 1:
        raise DataError("--train-samples and --test-samples must be >= 1")
    out_dir = Path(args.out)
    config = _run_config(args, "simulate")
    with _locked_output_dir(out_dir):
        _refuse_overwrite(out_dir / "manifest.json", args.force)
        summary = write_benchmark_data(
            out_dir,
            class_count=args.classes,
            num_variables=args.vars,
            train_samples=args.train_samples,
            test_samples=args.test_samples,
            seed=args.seed,
            sampling_period=args.sampling_period,
            run_config=config,
        )
    print(f"wrote {len(summary['rows_per_file'])} CSV files to {out_dir}")
    for filename, rows in sorted(summary["rows_per_file"].items()):
        print(f"  {filename}: {rows} rows")
    print(f"manifest: {out_dir / summary['manifest']}")
    print(f"generation record: {out_dir / summary['generation_record']}")
    return EXIT_OK


def _snapshot_counts(snapshots, class_names) -> str:
    counts = {name: 0 for name in class_names}
    for snap in snapshots:
        counts[class_names[snap.label]] += 1
    return " ".join(f"{name}={counts[name]}" for name in class_names)


def cmd_snapshot(args) -> int:
    config = _run_config(args, "snapshot")
    snap_config = SnapshotConfig(threshold=config["threshold"], weighted=config["weighted"])
    train_data = load_dataset(args.manifest, split="train")
    test_data = load_dataset(args.manifest, split="test")
    stats = fit_standardizer(train_data, range(train_data.num_samples))
    train_std = apply_standardizer(train_data, stats)
    test_std = apply_standardizer(test_data, stats)
    window = config["window_length"]
    train_windows = segment_windows(train_std, window, config["train_stride"])
    test_windows = segment_windows(test_std, window, config["stride"])
    if not train_windows or not test_windows:
        raise DataError(
            f"no label-pure windows of length {window} in "
            f"{'train' if not train_windows else 'test'} split"
        )
    train_snaps = build_snapshots(train_windows, snap_config)
    test_snaps = build_snapshots(test_windows, snap_config)
    out_dir = Path(args.out)
    with _locked_output_dir(out_dir):
        _refuse_overwrite(out_dir / "train.snapshots", args.force)
        _refuse_overwrite(out_dir / "test.snapshots", args.force)
        meta = {"class_names": train_data.class_names, "run_config": config}
        save_snapshot_batch(out_dir / "train.snapshots", train_snaps,
                            {**meta, "split": "train"})
        save_snapshot_batch(out_dir / "test.snapshots", test_snaps,
                            {**meta, "split": "test"})
    print(f"train snapshots per class: {_snapshot_counts(train_snaps, train_data.class_names)}")
    print(f"test snapshots per class: {_snapshot_counts(test_snaps, train_data.class_names)}")
    print(f"wrote {out_dir / 'train.snapshots'} ({len(train_snaps)} snapshots)")
    print(f"wrote {out_dir / 'test.snapshots'} ({len(test_snaps)} snapshots)")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _run_config(args, "train")
    snapshots, batch_meta = load_snapshot_batch(args.snapshots)
    class_names = batch_meta.get("class_names")
    if not class_names:
        raise DataError(f"{args.snapshots}: batch meta lacks class_names")
    training = TrainingConfig(
        learning_rate=config["learning_rate"],
        epochs=config["epochs"],
        batch_size=config["batch_size"],
        seed=config["seed"],
        hidden=config["hidden"],
        momentum=config["momentum"],
    )
    out_dir = Path(args.out)
    with _locked_output_dir(out_dir):
        checkpoint_path = out_dir / "checkpoint.gcn"
        log_path = out_dir / "training_log.txt"
        _refuse_overwrite(checkpoint_path, args.force)
        model = init_model(
            num_features=batch_meta["num_features"],
            hidden=training.hidden,
            num_classes=len(class_names),
            seed=training.seed,
        )
        model, log = fit(model, snapshots, training)
        meta = {
            "class_names": class_names,
            "run_config": config,
            "snapshot_run_config": batch_meta.get("run_config"),
        }
        save_checkpoint(checkpoint_path, model, training, meta)
        lines = [
            "# gcn training log",
            f"# artifact version: {__version__}",
            "# config: " + json.dumps(config, sort_keys=True),
        ]
        lines += [
            f"epoch {entry.epoch} loss {entry.mean_loss:.6f} acc {entry.accuracy:.4f}"
            for entry in log
        ]
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    final = log[-1]
    print(f"trained {training.epochs} epochs on {len(snapshots)} snapshots")
    print(f"final epoch loss {final.mean_loss:.6f} train acc {final.accuracy:.4f}")
    print(f"wrote {checkpoint_path}")
    print(f"wrote {log_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _run_config(args, "eval")
    model, _, checkpoint_meta = load_checkpoint(args.checkpoint)
    snapshots, batch_meta = load_snapshot_batch(args.snapshots)
    class_names = checkpoint_meta.get("class_names") or batch_meta.get("class_names")
    echo = {
        "run": config,
        "training_run_config": checkpoint_meta.get("run_config"),
        "snapshot_run_config": batch_meta.get("run_config"),
        "model_dims": list(model.dims),
    }
    report = evaluate(model, snapshots, class_names, config=echo)
    text = format_report(report)
    out_dir = Path(args.out)
    with _locked_output_dir(out_dir):
        _refuse_overwrite(out_dir / "report.txt", args.force)
        (out_dir / "report.txt").write_text(text, encoding="utf-8")
        (out_dir / "report.json").write_text(report_to_json(report), encoding="utf-8")
    print(text, end="")
    print(f"wrote {out_dir / 'report.txt'}")
    print(f"wrote {out_dir / 'report.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="stamon",
        description="correlation-graph snapshots + GCN classification for "
                    "multivariate process monitoring",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sim = sub.add_parser("simulate", help="generate a synthetic benchmark (CSVs + manifest)")
    sim.add_argument("--classes", type=int, default=3, help="number of classes incl. normal (default 3)")
    sim.add_argument("--vars", type=int, default=16, help="number of variables (default 16)")
    sim.add_argument("--train-samples", type=int, default=5000, help="rows per class, train (default 5000)")
    sim.add_argument("--test-samples", type=int, default=2000, help="rows per class, test (default 2000)")
    sim.add_argument("--sampling-period", type=float, default=3.0, help="minutes per sample (default 3)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--force", action="store_true", help="overwrite existing outputs")
    sim.set_defaults(func=cmd_simulate)

    snap = sub.add_parser("snapshot", help="standardize, window and build graph snapshots")
    snap.add_argument("--manifest", required=True, help="dataset manifest (JSON)")
    snap.add_argument("--window", type=int, default=20, help="window length (default 20)")
    snap.add_argument("--stride", type=int, default=None, help="window stride (default: window length)")
    snap.add_argument("--train-stride", type=int, default=None,
                      help="stride for the train split only, e.g. 1 for augmentation (default: --stride)")
    snap.add_argument("--threshold", type=float, default=0.6,
                      help="|association| threshold for edges (default 0.6)")
    snap.add_argument("--weighted", action="store_true",
                      help="keep |association| as edge weight instead of 0/1")
    snap.add_argument("--out", required=True, help="output directory")
    snap.add_argument("--force", action="store_true", help="overwrite existing outputs")
    snap.set_defaults(func=cmd_snapshot)

    train = sub.add_parser("train", help="train the graph classifier on a snapshot batch")
    train.add_argument("--snapshots", required=True, help="training snapshot batch")
    train.add_argument("--hidden", type=int, default=64)
    train.add_argument("--learning-rate", type=float, default=1e-3)
    train.add_argument("--momentum", type=float, default=0.9)
    train.add_argument("--epochs", type=int, default=200)
    train.add_argument("--batch-size", type=int, default=32)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out", required=True, help="output directory")
    train.add_argument("--force", action="store_true", help="overwrite existing outputs")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a checkpoint on a snapshot batch")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--snapshots", required=True, help="evaluation snapshot batch")
    ev.add_argument("--out", required=True, help="output directory")
    ev.add_argument("--force", action="store_true", help="overwrite existing outputs")
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"stamon: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"stamon: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
