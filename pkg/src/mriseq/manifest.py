"""Dataset assembly: stratified splits, oversampling, and the five variants.

Splits are drawn once per seed on the full record union and variants are
derived by filtering, so a given volume lands in the same split in every
variant built from the same seed.

Per stratum (base dataset x class) of size N the split sizes are
floor(0.1 N) validation, floor(0.7 N) train, remainder test. Training
records are then duplicated (with replacement, seeded) until every class
within a base-dataset group reaches the group's largest class count; the
OTHER class, absent from BraTS, can additionally be raised to the combined
per-class total across groups.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import EmptySplit, UnknownVariant
from .labels import SequenceType


class BaseDataset(Enum):
    BRATS15_TRAIN = "BRATS15_TRAIN"
    BRATS15_VAL = "BRATS15_VAL"
    BRATS19_TRAIN = "BRATS19_TRAIN"
    BRATS19_VAL = "BRATS19_VAL"
    TCGA_GBM = "TCGA_GBM"


BRATS_DATASETS = frozenset(
    {
        BaseDataset.BRATS15_TRAIN,
        BaseDataset.BRATS15_VAL,
        BaseDataset.BRATS19_TRAIN,
        BaseDataset.BRATS19_VAL,
    }
)


class Split(Enum):
    TRAIN = "TRAIN"
    VAL = "VAL"
    TEST = "TEST"


class Variant(Enum):
    BRATS_TCGA5 = "BRATS_TCGA5"
    BRATS_TCGA4 = "BRATS_TCGA4"
    TCGA5 = "TCGA5"
    TCGA4 = "TCGA4"
    BRATS4 = "BRATS4"


_VARIANT_BASES = {
    Variant.BRATS_TCGA5: frozenset(BaseDataset),
    Variant.BRATS_TCGA4: frozenset(BaseDataset),
    Variant.TCGA5: frozenset({BaseDataset.TCGA_GBM}),
    Variant.TCGA4: frozenset({BaseDataset.TCGA_GBM}),
    Variant.BRATS4: BRATS_DATASETS,
}

_FOUR_CLASS_VARIANTS = {Variant.BRATS_TCGA4, Variant.TCGA4, Variant.BRATS4}


def variant_num_classes(variant: Variant) -> int:
    return 4 if variant in _FOUR_CLASS_VARIANTS else 5


@dataclass(frozen=True)
class SampleRecord:
    volume_ref: str
    label: SequenceType
    base_dataset: BaseDataset
    split: Split | None = None
    is_oversampled_copy: bool = False


@dataclass(frozen=True)
class Manifest:
    variant: Variant
    seed: int
    records: tuple[SampleRecord, ...]

    def records_for(self, split: Split) -> tuple[SampleRecord, ...]:
        return tuple(r for r in self.records if r.split == split)

    def counts(self, split: Split) -> dict[SequenceType, int]:
        out: dict[SequenceType, int] = defaultdict(int)
        for r in self.records_for(split):
            out[r.label] += 1
        return dict(out)

    def require_non_empty(self, *splits: Split) -> None:
        for split in splits:
            if not self.records_for(split):
                raise EmptySplit(f"{self.variant.value}: split {split.value} is empty")

    def save(self, csv_path: str | Path) -> None:
        """Write the records CSV plus a JSON sidecar with variant/seed/counts."""
        csv_path = Path(csv_path)
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["volume_ref", "label", "base_dataset", "split", "oversampled"])
            for r in self.records:
                writer.writerow(
                    [r.volume_ref, r.label.value, r.base_dataset.value,
                     r.split.value if r.split else "", int(r.is_oversampled_copy)]
                )
        sidecar = {
            "variant": self.variant.value,
            "seed": self.seed,
            "counts": {
                split.value: {k.value: v for k, v in sorted(self.counts(split).items(), key=lambda kv: kv[0].value)}
                for split in Split
            },
        }
        csv_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def load(cls, csv_path: str | Path) -> "Manifest":
        csv_path = Path(csv_path)
        sidecar = json.loads(csv_path.with_suffix(".json").read_text())
        records = []
        with open(csv_path, newline="") as f:
            for row in csv.DictReader(f):
                records.append(
                    SampleRecord(
                        volume_ref=row["volume_ref"],
                        label=SequenceType(row["label"]),
                        base_dataset=BaseDataset(row["base_dataset"]),
                        split=Split(row["split"]) if row["split"] else None,
                        is_oversampled_copy=bool(int(row["oversampled"])),
                    )
                )
        return cls(
            variant=Variant(sidecar["variant"]),
            seed=int(sidecar["seed"]),
            records=tuple(records),
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.variant.value}:{self.seed}".encode())
        for r in self.records:
            h.update(
                f"{r.volume_ref},{r.label.value},{r.base_dataset.value},"
                f"{r.split.value if r.split else ''},{int(r.is_oversampled_copy)}\n".encode()
            )
        return h.hexdigest()


def split_sizes(n: int) -> tuple[int, int, int]:
    """Per-stratum (val, test, train) sizes for a stratum of n samples."""
    n_val = int(np.floor(0.1 * n))
    n_train = int(np.floor(0.7 * n))
    return n_val, n - n_val - n_train, n_train


def stratified_split(records, seed: int) -> tuple[SampleRecord, ...]:
    """Assign VAL/TEST/TRAIN per (base dataset, class) stratum, seeded.

    Deterministic in (records-as-set, seed): strata are processed in a fixed
    order and records are sorted by volume_ref before the seeded shuffle.
    """
    strata: dict[tuple[BaseDataset, SequenceType], list[SampleRecord]] = defaultdict(list)
    for record in records:
        strata[(record.base_dataset, record.label)].append(record)

    rng = np.random.default_rng(seed)
    out: list[SampleRecord] = []
    for key in sorted(strata, key=lambda k: (k[0].value, k[1].value)):
        members = sorted(strata[key], key=lambda r: r.volume_ref)
        order = rng.permutation(len(members))
        n_val, n_test, _ = split_sizes(len(members))
        for rank, idx in enumerate(order):
            if rank < n_val:
                split = Split.VAL
            elif rank < n_val + n_test:
                split = Split.TEST
            else:
                split = Split.TRAIN
            out.append(replace(members[idx], split=split))
    return tuple(out)


def oversample_train(records, seed: int, raise_other_to_cross_total: bool = False):
    """Balance TRAIN class counts by duplicating records (seeded, replacement).

    Within each base-dataset group every class is raised to the group's
    pre-oversampling maximum. With raise_other_to_cross_total, OTHER is then
    raised further to the per-class total summed across groups.
    """
    records = list(records)
    rng = np.random.default_rng(seed)
    train = [r for r in records if r.split == Split.TRAIN]

    groups: dict[BaseDataset, dict[SequenceType, list[SampleRecord]]] = defaultdict(
        lambda: defaultdict(list)
    )
    for r in train:
        groups[r.base_dataset][r.label].append(r)

    copies: list[SampleRecord] = []
    balanced_counts: dict[BaseDataset, int] = {}
    for base in sorted(groups, key=lambda b: b.value):
        by_class = groups[base]
        target = max(len(v) for v in by_class.values())
        balanced_counts[base] = target
        for label in sorted(by_class, key=lambda c: c.value):
            originals = sorted(by_class[label], key=lambda r: r.volume_ref)
            deficit = target - len(originals)
            for idx in rng.integers(0, len(originals), size=deficit):
                copies.append(replace(originals[idx], is_oversampled_copy=True))

    if raise_other_to_cross_total:
        per_class_total = sum(balanced_counts.values())
        other_originals = sorted(
            (r for r in train if r.label == SequenceType.OTHER),
            key=lambda r: r.volume_ref,
        )
        if other_originals:
            have = len(other_originals) + sum(
                1 for c in copies if c.label == SequenceType.OTHER
            )
            deficit = per_class_total - have
            for idx in rng.integers(0, len(other_originals), size=max(deficit, 0)):
                copies.append(replace(other_originals[idx], is_oversampled_copy=True))

    return tuple(records) + tuple(copies)


def assemble_variant(variant: Variant, all_records, seed: int) -> Manifest:
    """Build one dataset variant from the full record union.

    The union is split once with the given seed; the variant then filters
    base datasets (and, for four-class variants, drops OTHER after the
    oversampling of its five-class parent).
    """
    if not isinstance(variant, Variant):
        try:
            variant = Variant(variant)
        except ValueError as exc:
            raise UnknownVariant(str(variant)) from exc

    split_records = stratified_split(all_records, seed)
    kept = tuple(r for r in split_records if r.base_dataset in _VARIANT_BASES[variant])

    # TCGA5 deliberately skips the cross-group OTHER raise; for BRATS4 both
    # steps are no-ops on balanced BraTS data but run for uniformity.
    raise_other = variant in (Variant.BRATS_TCGA5, Variant.BRATS_TCGA4)
    oversampled = oversample_train(kept, seed, raise_other_to_cross_total=raise_other)

    if variant in _FOUR_CLASS_VARIANTS:
        oversampled = tuple(r for r in oversampled if r.label != SequenceType.OTHER)

    return Manifest(variant=variant, seed=seed, records=oversampled)


def assemble_all(all_records, seed: int) -> dict[Variant, Manifest]:
    return {v: assemble_variant(v, all_records, seed) for v in Variant}
