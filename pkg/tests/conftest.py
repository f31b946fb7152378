import numpy as np
import pytest

from mriseq.augment import AugmentationRanges
from mriseq.labels import CLASS_ORDER_5, SequenceType
from mriseq.manifest import (
    BaseDataset,
    Manifest,
    SampleRecord,
    Split,
    Variant,
    assemble_variant,
)
from mriseq.model import ModelConfig
from mriseq.training import TrainConfig, train
from mriseq.volume import CanonicalVolume, VolumeStore

# Per-class bright-block density. The fraction of bright 10x10 blocks is an
# intensity signature that survives rotation, translation, brightness scaling
# and per-slice standardization, so the toy classes stay separable under the
# full augmentation protocol.
CLASS_DENSITIES = {
    SequenceType.FLAIR: 0.08,
    SequenceType.T1: 0.25,
    SequenceType.T1C: 0.50,
    SequenceType.T2: 0.75,
    SequenceType.OTHER: 0.92,
}


def make_toy_volume(label: SequenceType, rng: np.random.Generator) -> np.ndarray:
    """A 16x200x200 volume whose bright-block density encodes the class."""
    density = CLASS_DENSITIES[label]
    out = np.empty((16, 200, 200), dtype=np.float32)
    block = np.ones((10, 10), dtype=np.float32)
    for i in range(16):
        blocks = (rng.random((20, 20)) < density).astype(np.float32)
        out[i] = 25.0 + 205.0 * np.kron(blocks, block)
    out += rng.normal(0, 3.0, size=out.shape)
    return np.clip(out, 0, 255).astype(np.float32)


def build_toy_dataset(volumes_per_class: int = 10, seed: int = 7):
    """In-memory store + BRATS_TCGA5 manifest over synthetic grating volumes."""
    rng = np.random.default_rng(seed)
    store = VolumeStore()
    records = []
    for label in CLASS_ORDER_5:
        for i in range(volumes_per_class):
            ref = f"toy/{label.value}/{i:03d}"
            store.add(
                ref,
                CanonicalVolume(
                    voxels=make_toy_volume(label, rng),
                    source_path=ref,
                    base_dataset=BaseDataset.TCGA_GBM.value,
                    label=label,
                ),
            )
            records.append(
                SampleRecord(volume_ref=ref, label=label, base_dataset=BaseDataset.TCGA_GBM)
            )
    manifest = assemble_variant(Variant.BRATS_TCGA5, records, seed=seed)
    return store, manifest


def published_corpus_records():
    """Synthetic record union matching the published per-class volume counts."""
    records = []

    def add(count, label, base):
        for i in range(count):
            records.append(
                SampleRecord(
                    volume_ref=f"{base.value}/{label.value}/{i:04d}",
                    label=label,
                    base_dataset=base,
                )
            )

    four = (SequenceType.FLAIR, SequenceType.T1, SequenceType.T1C, SequenceType.T2)
    for base, count in (
        (BaseDataset.BRATS15_TRAIN, 335),
        (BaseDataset.BRATS15_VAL, 125),
        (BaseDataset.BRATS19_TRAIN, 274),
        (BaseDataset.BRATS19_VAL, 110),
    ):
        for label in four:
            add(count, label, base)
    for label, count in (
        (SequenceType.FLAIR, 693),
        (SequenceType.T1, 788),
        (SequenceType.T1C, 634),
        (SequenceType.T2, 440),
        (SequenceType.OTHER, 1120),
    ):
        add(count, label, BaseDataset.TCGA_GBM)
    return records


def build_overfit_dataset(seed: int = 7):
    """Fifty toy volumes: 40 TRAIN (each replicated six times so every epoch
    sees several full batches) and 10 VAL, manifest built directly."""
    rng = np.random.default_rng(seed)
    store = VolumeStore()
    records = []
    for label in CLASS_ORDER_5:
        for i in range(10):
            ref = f"toy/{label.value}/{i:03d}"
            store.add(
                ref,
                CanonicalVolume(
                    voxels=make_toy_volume(label, rng),
                    source_path=ref,
                    base_dataset=BaseDataset.TCGA_GBM.value,
                    label=label,
                ),
            )
            split = Split.VAL if i >= 8 else Split.TRAIN
            replicas = 1 if split is Split.VAL else 6
            for k in range(replicas):
                records.append(
                    SampleRecord(
                        volume_ref=ref,
                        label=label,
                        base_dataset=BaseDataset.TCGA_GBM,
                        split=split,
                        is_oversampled_copy=k > 0,
                    )
                )
    manifest = Manifest(variant=Variant.BRATS_TCGA5, seed=seed, records=tuple(records))
    return store, manifest


@pytest.fixture(scope="session")
def toy_dataset():
    return build_toy_dataset()


@pytest.fixture(scope="session")
def overfit_run():
    """ResNet-18 trained to overfit the toy volumes at the protocol defaults."""
    store, manifest = build_overfit_dataset()
    model_config = ModelConfig(architecture="resnet18", in_channels=4, num_classes=5, init_seed=0)
    train_config = TrainConfig(
        batch_size=32,
        learning_rate=0.01,
        epochs=30,
        momentum=0.9,
        n=4,
        seed=0,
        augmentation=AugmentationRanges(),
    )
    checkpoint, history = train(store, manifest, model_config, train_config, select="final")
    return store, manifest, checkpoint, history
