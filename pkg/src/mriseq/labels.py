"""Ground-truth label inference from file and directory names.

Two parsers: a heuristic token parser for heterogeneous clinical naming
(TCGA-GBM style) and a strict suffix parser for standardized BraTS files.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import NotASequenceFile

log = logging.getLogger(__name__)


class SequenceType(Enum):
    FLAIR = "FLAIR"
    T1 = "T1"
    T1C = "T1C"
    T2 = "T2"
    OTHER = "OTHER"

    def __str__(self) -> str:
        return self.value


# Canonical class order used by every model head and confusion matrix.
CLASS_ORDER_5 = (
    SequenceType.FLAIR,
    SequenceType.T1,
    SequenceType.T1C,
    SequenceType.T2,
    SequenceType.OTHER,
)
CLASS_ORDER_4 = CLASS_ORDER_5[:4]


@dataclass(frozen=True)
class ParseResult:
    """Outcome of parsing one name; label None means unparseable (UNKNOWN)."""

    label: SequenceType | None
    matched_tokens: tuple[str, ...]
    source_name: str

    @property
    def is_known(self) -> bool:
        return self.label is not None


def _char_class(ch: str) -> str:
    if ch.isalpha():
        return "alpha"
    if ch.isdigit():
        return "digit"
    return "other"


def _token_present(name: str, token: str) -> bool:
    """True if token occurs in name bounded by delimiters or class transitions.

    A boundary exists at the string edges, at any non-alphanumeric character,
    and wherever the character class (letter vs digit) changes. This keeps
    "PD" from firing inside "UPDATE" while still matching "T2FLAIR".
    """
    start = 0
    while True:
        idx = name.find(token, start)
        if idx < 0:
            return False
        before_ok = idx == 0 or _char_class(name[idx - 1]) != _char_class(token[0])
        end = idx + len(token)
        after_ok = end == len(name) or _char_class(name[end]) != _char_class(token[-1])
        if before_ok and after_ok:
            return True
        start = idx + 1


@dataclass(frozen=True)
class RuleTable:
    """Token rules with fixed precedence: OTHER > FLAIR > T2 > T1/T1c."""

    other_tokens: tuple[str, ...] = ("DIFF", "DWI", "DTI", "PERF", "PD")
    flair_tokens: tuple[str, ...] = ("FLAIR",)
    t2_tokens: tuple[str, ...] = ("T2",)
    t1_tokens: tuple[str, ...] = ("T1",)
    post_contrast_tokens: tuple[str, ...] = ("POST", "GD", "GAD")
    pre_contrast_tokens: tuple[str, ...] = ("PRE",)

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleTable":
        """Load site-specific token overrides from a JSON file.

        Keys mirror the field names; missing keys keep the built-in defaults.
        """
        data = json.loads(Path(path).read_text())
        kwargs = {
            key: tuple(token.upper() for token in value)
            for key, value in data.items()
        }
        return cls(**kwargs)

    def _matches(self, name: str, tokens: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(t for t in tokens if _token_present(name, t))

    def parse(self, name: str) -> ParseResult:
        upper = name.upper()

        matched = self._matches(upper, self.other_tokens)
        if matched:
            return ParseResult(SequenceType.OTHER, matched, name)

        matched = self._matches(upper, self.flair_tokens)
        if matched:
            return ParseResult(SequenceType.FLAIR, matched, name)

        matched = self._matches(upper, self.t2_tokens)
        if matched:
            return ParseResult(SequenceType.T2, matched, name)

        t1 = self._matches(upper, self.t1_tokens)
        if t1:
            post = self._matches(upper, self.post_contrast_tokens)
            pre = self._matches(upper, self.pre_contrast_tokens)
            if post and pre:
                # Post-contrast markers outrank PRE; flag the ambiguity.
                log.warning("name %r carries both pre- and post-contrast tokens", name)
            if post:
                return ParseResult(SequenceType.T1C, t1 + post, name)
            return ParseResult(SequenceType.T1, t1 + pre, name)

        return ParseResult(None, (), name)


DEFAULT_RULES = RuleTable()


def parse_label(name: str, rules: RuleTable = DEFAULT_RULES) -> ParseResult:
    """Infer a sequence type from a heterogeneous clinical series name."""
    if not name:
        raise ValueError("name must be non-empty")
    return rules.parse(name)


_BRATS_SUFFIXES = {
    "flair": SequenceType.FLAIR,
    "t1": SequenceType.T1,
    "t1c": SequenceType.T1C,
    "t1ce": SequenceType.T1C,
    "t2": SequenceType.T2,
}


def parse_brats_label(filename: str) -> ParseResult:
    """Parse a standardized BraTS filename by its trailing modality token."""
    stem = Path(filename).name.lower()
    for ext in (".gz", ".nii", ".mha", ".mhd"):
        if stem.endswith(ext):
            stem = stem[: -len(ext)]
    # Modality is the last non-numeric token (2015 MetaImage names carry a
    # trailing numeric id, 2019 NIfTI names end with the modality).
    tokens = [t for t in re.split(r"[._]", stem) if t]
    for token in reversed(tokens):
        if token in ("seg", "ot"):
            raise NotASequenceFile(
                f"{filename}: segmentation ground truth, not a sequence"
            )
        if token in _BRATS_SUFFIXES:
            return ParseResult(_BRATS_SUFFIXES[token], (token,), filename)
        if not token.isdigit():
            break
    raise NotASequenceFile(f"{filename}: no recognized modality suffix")
