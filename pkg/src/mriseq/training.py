"""Training loop, checkpoint selection, volume-level evaluation, and the
input-depth sweep.

Each epoch re-draws a random contiguous subgroup per training volume,
augments and standardizes it, and optimizes with SGD + cross-entropy.
Validation and test always use the centered subgroup(s) with no
augmentation, and every metric is computed per volume, never per slice.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .augment import (
    AugmentationDraw,
    AugmentationRanges,
    DEFAULT_RANGES,
    SliceStack,
    augment,
    central_subgroups,
    sample_subgroup,
    standardize,
)
from .errors import ChannelMismatch, DivergedLoss, InvalidDepth
from .labels import SequenceType
from .manifest import Manifest, Split, variant_num_classes
from .model import (
    Checkpoint,
    ModelConfig,
    REDUCED_LR_ARCHITECTURES,
    build_model,
)
from .volume import VolumeStore, canonicalize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.01
    epochs: int = 300
    momentum: float = 0.9
    n: int = 4
    seed: int = 0
    augmentation: AugmentationRanges = DEFAULT_RANGES

    def effective_lr(self, architecture: str) -> float:
        if architecture in REDUCED_LR_ARCHITECTURES:
            return self.learning_rate * 0.1
        return self.learning_rate


@dataclass
class ConfusionMatrix:
    """Per-class prediction counts; rows are actual, columns predicted."""

    counts: np.ndarray
    class_order: tuple[SequenceType, ...]

    @classmethod
    def from_pairs(cls, actual, predicted, class_order) -> "ConfusionMatrix":
        index = {c: i for i, c in enumerate(class_order)}
        counts = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
        for a, p in zip(actual, predicted, strict=True):
            counts[index[a], index[p]] += 1
        return cls(counts=counts, class_order=tuple(class_order))

    def per_class_recall(self) -> dict[SequenceType, float]:
        out = {}
        for i, cls_ in enumerate(self.class_order):
            total = int(self.counts[i].sum())
            if total > 0:
                out[cls_] = float(self.counts[i, i]) / total
        return out

    def macro_accuracy(self) -> float:
        recalls = self.per_class_recall()
        if not recalls:
            return 0.0
        return float(np.mean(list(recalls.values())))

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["actual\\predicted"] + [c.value for c in self.class_order])
            for i, cls_ in enumerate(self.class_order):
                writer.writerow([cls_.value] + [int(x) for x in self.counts[i]])


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_macro_accuracy: float


@dataclass
class Metrics:
    macro_accuracy: float
    per_class_recall: dict[SequenceType, float]
    confusion: ConfusionMatrix
    loss_curve: list[EpochStats] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "macro_accuracy": self.macro_accuracy,
            "per_class_recall": {c.value: r for c, r in self.per_class_recall.items()},
            "confusion": self.confusion.counts.tolist(),
            "class_order": [c.value for c in self.confusion.class_order],
        }


def _to_batch(stacks: list[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(stacks).astype(np.float32))


def _central_inputs(volume, n: int) -> list[SliceStack]:
    return [standardize(s) for s in central_subgroups(volume, n)]


@torch.no_grad()
def _predict_stacks(model: nn.Module, stacks: list[SliceStack]) -> np.ndarray:
    """Mean softmax over the (one or two) central stacks of a single volume."""
    batch = _to_batch([s.pixels for s in stacks])
    probs = torch.softmax(model(batch), dim=1)
    return probs.mean(dim=0).numpy()


def _unique_volumes(manifest: Manifest, split: Split):
    seen = {}
    for record in manifest.records_for(split):
        if record.volume_ref not in seen:
            seen[record.volume_ref] = record
    return list(seen.values())


def _evaluate_model(
    model: nn.Module,
    store: VolumeStore,
    manifest: Manifest,
    split: Split,
    n: int,
    class_order,
    criterion: nn.Module | None = None,
) -> tuple[Metrics, float]:
    """Volume-level metrics and (optionally) the mean per-volume loss."""
    model.eval()
    records = _unique_volumes(manifest, split)
    index = {c: i for i, c in enumerate(class_order)}
    actual, predicted = [], []
    losses = []
    for record in records:
        stacks = _central_inputs(store[record.volume_ref], n)
        probs = _predict_stacks(model, stacks)
        predicted.append(class_order[int(np.argmax(probs))])
        actual.append(record.label)
        if criterion is not None:
            with torch.no_grad():
                batch = _to_batch([s.pixels for s in stacks])
                logits = model(batch).mean(dim=0, keepdim=True)
                target = torch.tensor([index[record.label]])
                losses.append(float(criterion(logits, target)))
    confusion = ConfusionMatrix.from_pairs(actual, predicted, class_order)
    metrics = Metrics(
        macro_accuracy=confusion.macro_accuracy(),
        per_class_recall=confusion.per_class_recall(),
        confusion=confusion,
    )
    return metrics, float(np.mean(losses)) if losses else float("nan")


def train(
    store: VolumeStore,
    manifest: Manifest,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_dir: str | Path | None = None,
    select: str = "best-val",
) -> tuple[Checkpoint, list[EpochStats]]:
    """Train on the manifest's TRAIN split; return the best-validation snapshot.

    Best is the epoch with the highest validation macro-accuracy, first on
    ties; select="final" keeps the last epoch's weights instead. Per-epoch
    loss/accuracy artifacts are written under out_dir when given.
    """
    if select not in ("best-val", "final"):
        raise ValueError(f"select must be 'best-val' or 'final', got {select!r}")
    manifest.require_non_empty(Split.TRAIN, Split.VAL)
    if model_config.in_channels != train_config.n:
        raise ChannelMismatch(
            f"model expects {model_config.in_channels} channels but n={train_config.n}"
        )

    class_order = model_config.class_order
    index = {c: i for i, c in enumerate(class_order)}
    train_records = list(manifest.records_for(Split.TRAIN))
    for record in train_records:
        if record.label not in index:
            raise ValueError(
                f"record {record.volume_ref} has label {record.label} outside the model's classes"
            )

    torch.manual_seed(train_config.seed)
    model = build_model(model_config)
    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=train_config.effective_lr(model_config.architecture),
        momentum=train_config.momentum,
    )
    criterion = nn.CrossEntropyLoss()

    history: list[EpochStats] = []
    best: Checkpoint | None = None

    for epoch in range(train_config.epochs):
        model.train()
        rng = np.random.default_rng([train_config.seed, epoch])
        order = rng.permutation(len(train_records))
        # Drop the partial trailing batch when full batches exist: a tiny
        # remainder batch gives a high-variance momentum update (and a
        # size-1 batch would break batch norm in train mode).
        n_full = len(order) // train_config.batch_size
        if n_full > 0:
            order = order[: n_full * train_config.batch_size]
        epoch_losses = []
        for start in range(0, len(order), train_config.batch_size):
            chunk = order[start : start + train_config.batch_size]
            inputs, targets = [], []
            for i in chunk:
                record = train_records[i]
                stack = sample_subgroup(store[record.volume_ref], train_config.n, rng)
                draw = AugmentationDraw.sample(rng, ranges=train_config.augmentation)
                stack = standardize(augment(stack, draw, rng))
                inputs.append(stack.pixels)
                targets.append(index[record.label])
            batch = _to_batch(inputs)
            target = torch.tensor(targets, dtype=torch.long)
            optimizer.zero_grad()
            loss = criterion(model(batch), target)
            if not torch.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))

        val_metrics, val_loss = _evaluate_model(
            model, store, manifest, Split.VAL, train_config.n, class_order, criterion
        )
        stats = EpochStats(
            epoch=epoch,
            train_loss=float(np.mean(epoch_losses)),
            val_loss=val_loss,
            val_macro_accuracy=val_metrics.macro_accuracy,
        )
        history.append(stats)
        log.info(
            "epoch %d: train loss %.4f, val loss %.4f, val macro-acc %.4f",
            stats.epoch, stats.train_loss, stats.val_loss, stats.val_macro_accuracy,
        )

        keep = (
            select == "final"
            or best is None
            or val_metrics.macro_accuracy > best.val_macro_accuracy
        )
        if keep:
            best = Checkpoint(
                state_dict={k: v.detach().clone() for k, v in model.state_dict().items()},
                config=model_config,
                epoch=epoch,
                val_macro_accuracy=val_metrics.macro_accuracy,
                class_order=class_order,
                manifest_hash=manifest.content_hash(),
            )

    assert best is not None
    if out_dir is not None:
        _write_training_artifacts(Path(out_dir), history)
    return best, history


def _write_training_artifacts(out_dir: Path, history: list[EpochStats]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "loss_curve.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_macro_accuracy"])
        for s in history:
            writer.writerow([s.epoch, s.train_loss, s.val_loss, s.val_macro_accuracy])
    metrics_json = [
        {
            "epoch": s.epoch,
            "train_loss": s.train_loss,
            "val_loss": s.val_loss,
            "val_macro_accuracy": s.val_macro_accuracy,
        }
        for s in history
    ]
    (out_dir / "epoch_metrics.json").write_text(json.dumps(metrics_json, indent=2) + "\n")


def evaluate(
    checkpoint: Checkpoint,
    store: VolumeStore,
    manifest: Manifest,
    split: Split = Split.TEST,
) -> Metrics:
    """Evaluate a checkpoint on one manifest split, one prediction per volume."""
    manifest.require_non_empty(split)
    if variant_num_classes(manifest.variant) != len(checkpoint.class_order):
        raise ChannelMismatch(
            f"{len(checkpoint.class_order)}-class checkpoint cannot be evaluated "
            f"against the {variant_num_classes(manifest.variant)}-class variant "
            f"{manifest.variant.value}"
        )
    model = checkpoint.build()
    metrics, _ = _evaluate_model(
        model, store, manifest, split, checkpoint.config.in_channels,
        checkpoint.class_order,
    )
    return metrics


def predict_volume(checkpoint: Checkpoint, path: str | Path):
    """Canonicalize one on-disk volume and classify it.

    Returns (predicted SequenceType, per-class probability dict). For odd n
    the softmax of the two centermost stacks is averaged.
    """
    model = checkpoint.build()
    volume = canonicalize(path)
    stacks = _central_inputs(volume, checkpoint.config.in_channels)
    probs = _predict_stacks(model, stacks)
    label = checkpoint.class_order[int(np.argmax(probs))]
    return label, {c: float(p) for c, p in zip(checkpoint.class_order, probs)}


def sweep_depth(
    store: VolumeStore,
    manifest: Manifest,
    model_config: ModelConfig,
    train_config: TrainConfig,
    n_values,
) -> list[tuple[int, float]]:
    """Train once per input depth n and tabulate best validation macro-accuracy."""
    n_values = list(n_values)
    for n in n_values:
        if not 1 <= n <= 16:
            raise InvalidDepth(f"n must be in [1, 16], got {n}")
    rows = []
    for n in n_values:
        cfg_m = ModelConfig(
            architecture=model_config.architecture,
            in_channels=n,
            num_classes=model_config.num_classes,
            init_seed=model_config.init_seed,
        )
        cfg_t = TrainConfig(
            batch_size=train_config.batch_size,
            learning_rate=train_config.learning_rate,
            epochs=train_config.epochs,
            momentum=train_config.momentum,
            n=n,
            seed=train_config.seed,
            augmentation=train_config.augmentation,
        )
        checkpoint, _ = train(store, manifest, cfg_m, cfg_t)
        rows.append((n, checkpoint.val_macro_accuracy))
    return rows


def save_sweep_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n", "val_macro_accuracy"])
        for n, acc in rows:
            writer.writerow([n, acc])
