import json

import pytest

from mriseq.errors import NotASequenceFile
from mriseq.labels import RuleTable, SequenceType, parse_brats_label, parse_label

S = SequenceType

# Hand-labeled naming corpus: every protocol token, case variants, and
# boundary traps. Expected labels were assigned by hand; None means UNKNOWN.
NAMING_CORPUS = [
    # direct FLAIR / T2
    ("AXIAL_FLAIR", S.FLAIR),
    ("flair", S.FLAIR),
    ("Ax Flair irFSE H", S.FLAIR),
    ("T2-FLAIR", S.FLAIR),
    ("T2 FLAIR AXIAL", S.FLAIR),
    ("3D FLAIR SAG", S.FLAIR),
    ("AX T2", S.T2),
    ("t2_tse_tra", S.T2),
    ("T2 AXIAL FSE", S.T2),
    ("Sag T2", S.T2),
    ("PROP T2 AX", S.T2),
    # T1 pre/bare
    ("AX T1", S.T1),
    ("t1_se_tra", S.T1),
    ("T1 PRE", S.T1),
    ("SAG T1 PRE GD", S.T1C),  # post marker outranks PRE
    ("T1 AXIAL PRE-CONTRAST", S.T1),
    ("3d t1 pre", S.T1),
    # T1 post-contrast
    ("T1 POST GAD", S.T1C),
    ("AX T1 POST", S.T1C),
    ("T1 GD", S.T1C),
    ("t1 gad axial", S.T1C),
    ("SAG T1 POST", S.T1C),
    ("T1+GD", S.T1C),
    ("MPRAGE T1 POST CONTRAST", S.T1C),
    # OTHER: diffusion / perfusion / proton density
    ("dti_axial", S.OTHER),
    ("AX DWI", S.OTHER),
    ("DIFF TENSOR", S.OTHER),
    ("PERF AX", S.OTHER),
    ("AX PD", S.OTHER),
    ("pd_tse", S.OTHER),
    ("DWI b1000", S.OTHER),
    ("ep2d_diff_3scan", S.OTHER),
    # OTHER outranks everything else
    ("T2 PD DUAL ECHO", S.OTHER),
    ("T1 DWI COMBO", S.OTHER),
    ("FLAIR DTI FUSION", S.OTHER),
    # boundary traps: tokens inside unrelated words must not fire
    ("UPDATE_SCAN", None),      # PD inside UPDATE
    ("RAPID_SURVEY", None),     # PD inside RAPID
    ("T12 SPINE", None),        # T1 inside T12
    ("localizer", None),
    ("SCOUT", None),
    ("3 PLANE LOC", None),
    # digit/letter transitions are boundaries
    ("T2FLAIR", S.FLAIR),
    ("AX3T1", S.T1),
    ("2T2", S.T2),
]


@pytest.mark.parametrize("name,expected", NAMING_CORPUS)
def test_naming_corpus(name, expected):
    result = parse_label(name)
    assert result.label == expected, f"{name!r}: got {result.label}, want {expected}"


def test_case_insensitive():
    for name, _ in NAMING_CORPUS:
        assert parse_label(name).label == parse_label(name.upper()).label
        assert parse_label(name).label == parse_label(name.lower()).label


def test_known_labels_carry_tokens():
    for name, expected in NAMING_CORPUS:
        result = parse_label(name)
        if result.is_known:
            assert result.matched_tokens
        else:
            assert result.matched_tokens == ()


def test_other_precedence_is_total():
    # Any name with both an OTHER token and a T1 token is OTHER.
    for other in ("DIFF", "DWI", "DTI", "PERF", "PD"):
        assert parse_label(f"T1 {other} POST").label == S.OTHER


def test_t1c_requires_t1_and_post_marker():
    assert parse_label("POST GAD").label is None
    assert parse_label("GD ENHANCED").label is None
    assert parse_label("T1 POST").label == S.T1C


def test_empty_name_rejected():
    with pytest.raises(ValueError):
        parse_label("")


def test_pre_and_post_conflict_logged(caplog):
    import logging

    with caplog.at_level(logging.WARNING, logger="mriseq.labels"):
        result = parse_label("T1 PRE POST")
    assert result.label == S.T1C
    assert any("pre- and post-contrast" in r.message for r in caplog.records)


def test_rule_table_from_file(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps({"other_tokens": ["DIFF", "DWI", "DTI", "PERF", "PD", "ASL"]}))
    rules = RuleTable.from_file(path)
    assert parse_label("ASL PERFUSION", rules).label == S.OTHER
    # untouched fields keep defaults
    assert parse_label("AX FLAIR", rules).label == S.FLAIR


class TestBratsParser:
    @pytest.mark.parametrize(
        "filename,expected",
        [
            ("BraTS19_TCIA01_131_1_t1ce.nii.gz", S.T1C),
            ("BraTS19_TCIA01_131_1_t1c.nii.gz", S.T1C),
            ("BraTS19_TCIA01_131_1_flair.nii.gz", S.FLAIR),
            ("BraTS19_TCIA01_131_1_t1.nii.gz", S.T1),
            ("BraTS19_TCIA01_131_1_t2.nii.gz", S.T2),
            ("VSD.Brain.XX.O.MR_Flair.54512.mha", S.FLAIR),
            ("VSD.Brain.XX.O.MR_T1c.54514.mha", S.T1C),
        ],
    )
    def test_standard_suffixes(self, filename, expected):
        assert parse_brats_label(filename).label == expected

    def test_segmentation_rejected(self):
        with pytest.raises(NotASequenceFile):
            parse_brats_label("BraTS19_TCIA01_131_1_seg.nii.gz")

    def test_unrecognized_suffix_rejected(self):
        with pytest.raises(NotASequenceFile):
            parse_brats_label("BraTS19_TCIA01_131_1_mask.nii.gz")
