"""Directory scanning: discover volumes, parse labels, validate loadability.

Produces a listing CSV (one row per usable volume) plus a report CSV for
names that could not be parsed and volumes that failed validation (for
example per-slice series with mismatching dimensions).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import MixedSliceDimensions, MriSeqError, NotASequenceFile, UnreadableFile
from .labels import DEFAULT_RULES, ParseResult, RuleTable, parse_brats_label, parse_label
from .manifest import BRATS_DATASETS, BaseDataset, SampleRecord
from .volume import DICOM_SERIES, detect_format, load_volume

log = logging.getLogger(__name__)

_VOLUME_SUFFIXES = (".nii", ".nii.gz", ".mha", ".mhd")


@dataclass
class ScanResult:
    records: list[SampleRecord]
    skipped: list[tuple[str, str]]  # (path, reason)


def _iter_volume_paths(root: Path):
    """Yield candidate volume paths: recognized files and DICOM-bearing dirs."""
    if root.is_file():
        yield root
        return
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name.lower().endswith(_VOLUME_SUFFIXES):
            yield path
        elif path.is_dir():
            try:
                if detect_format(path) == DICOM_SERIES and any(
                    p.is_file() for p in path.iterdir()
                ):
                    # Only treat leaf directories holding files as series.
                    if not any(p.is_dir() for p in path.iterdir()):
                        yield path
            except MriSeqError:
                continue


def _parse_name(path: Path, base_dataset: BaseDataset, rules: RuleTable) -> ParseResult:
    if base_dataset in BRATS_DATASETS:
        return parse_brats_label(path.name)
    return parse_label(path.name, rules)


def scan_root(
    root: str | Path,
    base_dataset: BaseDataset,
    rules: RuleTable = DEFAULT_RULES,
    validate: bool = True,
) -> ScanResult:
    """Scan one root, returning labeled records and a skip report."""
    root = Path(root)
    if not root.exists():
        raise UnreadableFile(f"{root}: no such path")
    records: list[SampleRecord] = []
    skipped: list[tuple[str, str]] = []
    for path in _iter_volume_paths(root):
        try:
            parsed = _parse_name(path, base_dataset, rules)
        except NotASequenceFile as exc:
            skipped.append((str(path), f"not a sequence file: {exc}"))
            continue
        if not parsed.is_known:
            skipped.append((str(path), "UNKNOWN label"))
            continue
        if validate:
            try:
                load_volume(path)
            except MixedSliceDimensions as exc:
                skipped.append((str(path), f"mismatching slice dimensions: {exc}"))
                continue
            except UnreadableFile as exc:
                skipped.append((str(path), f"unreadable: {exc}"))
                continue
        records.append(
            SampleRecord(
                volume_ref=str(path),
                label=parsed.label,
                base_dataset=base_dataset,
            )
        )
    if not records:
        raise UnreadableFile(f"{root}: no readable labeled volumes found")
    return ScanResult(records=records, skipped=skipped)


def write_listing(result: ScanResult, listing_path: str | Path) -> None:
    """Write the listing CSV and a sibling report CSV of skipped entries."""
    listing_path = Path(listing_path)
    with open(listing_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["volume_ref", "label", "base_dataset"])
        for r in result.records:
            writer.writerow([r.volume_ref, r.label.value, r.base_dataset.value])
    report_path = listing_path.with_name(listing_path.stem + "_report.csv")
    with open(report_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "reason"])
        for path, reason in result.skipped:
            writer.writerow([path, reason])


def read_listing(listing_path: str | Path) -> list[SampleRecord]:
    from .labels import SequenceType

    records = []
    with open(listing_path, newline="") as f:
        for row in csv.DictReader(f):
            records.append(
                SampleRecord(
                    volume_ref=row["volume_ref"],
                    label=SequenceType(row["label"]),
                    base_dataset=BaseDataset(row["base_dataset"]),
                )
            )
    return records
