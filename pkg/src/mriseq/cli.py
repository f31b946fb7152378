"""Command-line front door for the whole pipeline.

Subcommands: scan, assemble, train, eval, sweep, predict, explain, plot.
A JSON config file supplies defaults; explicit flags override it. Every
experiment run writes a run.json (config copy, seed, manifest hash) next to
its outputs so the run can be reproduced.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .errors import MriSeqError
from .labels import DEFAULT_RULES, RuleTable, SequenceType
from .manifest import Manifest, Split, Variant, assemble_variant, variant_num_classes
from .model import ARCHITECTURES, Checkpoint, ModelConfig, load_checkpoint, save_checkpoint
from .scan import read_listing, scan_root, write_listing
from .training import TrainConfig, evaluate, predict_volume, save_sweep_csv, sweep_depth, train
from .volume import VolumeStore

log = logging.getLogger(__name__)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _setting(args, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _write_run_record(out_dir: Path, command: str, settings: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(
        json.dumps({"command": command, **settings}, indent=2, default=str) + "\n"
    )


def _build_train_configs(args, config: dict, num_classes: int) -> tuple[ModelConfig, TrainConfig]:
    n = int(_setting(args, config, "n", 4))
    model_config = ModelConfig(
        architecture=_setting(args, config, "arch", "resnet18"),
        in_channels=n,
        num_classes=num_classes,
        init_seed=int(_setting(args, config, "seed", 0)),
    )
    train_config = TrainConfig(
        batch_size=int(_setting(args, config, "batch_size", 32)),
        learning_rate=float(_setting(args, config, "lr", 0.01)),
        epochs=int(_setting(args, config, "epochs", 300)),
        momentum=float(_setting(args, config, "momentum", 0.9)),
        n=n,
        seed=int(_setting(args, config, "seed", 0)),
    )
    return model_config, train_config


def cmd_scan(args) -> int:
    rules = RuleTable.from_file(args.rules) if args.rules else DEFAULT_RULES
    from .manifest import BaseDataset
    from .scan import ScanResult

    merged = ScanResult(records=[], skipped=[])
    for pair in args.roots:
        if "=" not in pair:
            raise MriSeqError(f"expected TAG=PATH, got {pair!r}")
        tag, root = pair.split("=", 1)
        result = scan_root(
            root, BaseDataset(tag), rules=rules, validate=not args.no_validate
        )
        merged.records.extend(result.records)
        merged.skipped.extend(result.skipped)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_listing(merged, out)
    print(f"listed {len(merged.records)} volumes, skipped {len(merged.skipped)}")
    return 0


def cmd_assemble(args) -> int:
    records = read_listing(args.listing)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = list(Variant) if args.variant == "all" else [Variant(args.variant)]
    for variant in variants:
        manifest = assemble_variant(variant, records, args.seed)
        manifest.save(out_dir / f"{variant.value}.csv")
        print(f"{variant.value}: " + ", ".join(
            f"{split.value}={len(manifest.records_for(split))}" for split in Split
        ))
    return 0


def cmd_train(args) -> int:
    config = _load_config_file(args.config)
    manifest = Manifest.load(args.manifest)
    model_config, train_config = _build_train_configs(
        args, config, variant_num_classes(manifest.variant)
    )
    out_dir = Path(args.out)
    _write_run_record(out_dir, "train", {
        "manifest": str(args.manifest),
        "manifest_hash": manifest.content_hash(),
        "model_config": dataclasses.asdict(model_config),
        "seed": train_config.seed,
        "epochs": train_config.epochs,
        "batch_size": train_config.batch_size,
        "learning_rate": train_config.learning_rate,
    })
    store = VolumeStore.from_records(manifest.records)
    checkpoint, history = train(store, manifest, model_config, train_config, out_dir=out_dir)
    save_checkpoint(checkpoint, out_dir / "checkpoint.pt")
    print(
        f"best epoch {checkpoint.epoch}: "
        f"val macro-accuracy {checkpoint.val_macro_accuracy:.4f}"
    )
    return 0


def cmd_eval(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    manifest = Manifest.load(args.manifest)
    split = Split(args.split.upper())
    store = VolumeStore.from_records(manifest.records_for(split))
    metrics = evaluate(checkpoint, store, manifest, split)
    out_dir = Path(args.out)
    _write_run_record(out_dir, "eval", {
        "checkpoint": str(args.checkpoint),
        "manifest": str(args.manifest),
        "manifest_hash": manifest.content_hash(),
        "split": split.value,
    })
    (out_dir / "metrics.json").write_text(json.dumps(metrics.to_json(), indent=2) + "\n")
    metrics.confusion.save_csv(out_dir / "confusion.csv")
    print(f"{split.value} macro-accuracy: {metrics.macro_accuracy:.4f}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config_file(args.config)
    manifest = Manifest.load(args.manifest)
    model_config, train_config = _build_train_configs(
        args, config, variant_num_classes(manifest.variant)
    )
    n_values = [int(x) for x in args.n_values.split(",")]
    out_dir = Path(args.out)
    _write_run_record(out_dir, "sweep", {
        "manifest": str(args.manifest),
        "manifest_hash": manifest.content_hash(),
        "n_values": n_values,
        "seed": train_config.seed,
    })
    store = VolumeStore.from_records(manifest.records)
    rows = sweep_depth(store, manifest, model_config, train_config, n_values)
    sweep_csv = out_dir / "sweep.csv"
    save_sweep_csv(rows, sweep_csv)
    from .plots import plot_accuracy_vs_depth

    plot_accuracy_vs_depth(sweep_csv, out_dir / "accuracy_vs_n.png")
    for n, acc in rows:
        print(f"n={n}: val macro-accuracy {acc:.4f}")
    return 0


def cmd_predict(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    label, probs = predict_volume(checkpoint, args.volume)
    print(f"{args.volume}: {label.value}")
    for cls, p in probs.items():
        print(f"  {cls.value}: {p:.4f}")
    return 0


def cmd_explain(args) -> int:
    from .augment import central_subgroups, standardize
    from .explain import integrated_gradients, render_overlay, save_attributions
    from .volume import canonicalize

    checkpoint = load_checkpoint(args.checkpoint)
    volume = canonicalize(args.volume)
    stack = standardize(central_subgroups(volume, checkpoint.config.in_channels)[0])

    if args.target:
        target = list(checkpoint.class_order).index(SequenceType(args.target.upper()))
    else:
        label, _ = predict_volume(checkpoint, args.volume)
        target = list(checkpoint.class_order).index(label)

    saliency = integrated_gradients(checkpoint, stack, target, steps=args.steps)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = render_overlay(saliency, stack, out_dir)
    save_attributions(saliency, out_dir / "attributions.raw")
    print(
        f"target {checkpoint.class_order[target].value}, "
        f"completeness gap {saliency.completeness_gap:.6f}, "
        f"{len(paths)} overlays in {out_dir}"
    )
    return 0


def cmd_plot(args) -> int:
    from .plots import plot_accuracy_vs_depth, plot_loss_curves

    if args.sweep_csv:
        path = plot_accuracy_vs_depth(args.sweep_csv, args.out)
    elif args.loss_csv:
        path = plot_loss_curves(args.loss_csv, args.out)
    else:
        raise MriSeqError("plot needs --sweep-csv or --loss-csv")
    print(f"wrote {path}")
    return 0


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file with defaults")
    parser.add_argument("--n", type=int, help="input depth (slices per sample)")
    parser.add_argument("--arch", choices=ARCHITECTURES)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--momentum", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mriseq",
        description="Whole-volume brain MRI sequence-type classification",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="scan roots and write a labeled listing")
    p.add_argument("roots", nargs="+", metavar="TAG=PATH",
                   help="base-dataset tag and root, e.g. TCGA_GBM=/data/tcga")
    p.add_argument("--rules", help="JSON token-rule overrides")
    p.add_argument("--out", required=True, help="listing CSV path")
    p.add_argument("--no-validate", action="store_true",
                   help="skip load validation of every volume")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("assemble", help="build dataset variant manifests")
    p.add_argument("--listing", required=True)
    p.add_argument("--variant", default="all",
                   choices=[v.value for v in Variant] + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("train", help="train a classifier on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train once per input depth n")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-values", dest="n_values", default=",".join(str(i) for i in range(1, 17)))
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="classify one volume")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("volume")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="integrated-gradients saliency overlays")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("volume")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=128)
    p.add_argument("--target", help="class name to attribute (default: prediction)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("plot", help="regenerate a figure from its CSV")
    p.add_argument("--sweep-csv", dest="sweep_csv")
    p.add_argument("--loss-csv", dest="loss_csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except MriSeqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
