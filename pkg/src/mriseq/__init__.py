"""Whole-volume brain MRI sequence-type classification pipeline."""

from .labels import CLASS_ORDER_4, CLASS_ORDER_5, SequenceType, parse_brats_label, parse_label
from .manifest import BaseDataset, Manifest, SampleRecord, Split, Variant, assemble_variant
from .model import Checkpoint, ModelConfig, build_model, load_checkpoint, save_checkpoint
from .training import ConfusionMatrix, Metrics, TrainConfig, evaluate, predict_volume, sweep_depth, train
from .volume import CanonicalVolume, RawVolume, VolumeStore, canonicalize, load_volume

__version__ = "0.1.0"

__all__ = [
    "BaseDataset",
    "CanonicalVolume",
    "Checkpoint",
    "CLASS_ORDER_4",
    "CLASS_ORDER_5",
    "ConfusionMatrix",
    "Manifest",
    "Metrics",
    "ModelConfig",
    "RawVolume",
    "SampleRecord",
    "SequenceType",
    "Split",
    "TrainConfig",
    "Variant",
    "VolumeStore",
    "assemble_variant",
    "build_model",
    "canonicalize",
    "evaluate",
    "load_checkpoint",
    "load_volume",
    "parse_brats_label",
    "parse_label",
    "predict_volume",
    "save_checkpoint",
    "sweep_depth",
    "train",
]
