"""Synthetic desk-scale datasets.

Blobs: every class is an isotropic Gaussian around its mean, with all class
means placed in one shared low-dimensional subspace of the input space.
Classes kept back for out-of-distribution surrogates come from the same
generator, so they share that subspace without sharing any label.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from odskit.config_schema import DatasetSpec
from odskit.storage import json_store

logger = logging.getLogger("odskit")

DATASET_KIND = "dataset"
MAX_PLACEMENT_TRIES = 1000


class DatasetSpecError(ValueError):
    """Generator settings cannot produce a usable dataset."""
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DatasetSpecError(
                f"Features {self.features.shape} do not match labels {self.labels.shape}"
            )

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


def _class_means(spec: DatasetSpec, total: int, rng: np.random.Generator) -> np.ndarray:
    latent = min(spec.latent_dim, spec.dim)
    basis, _ = np.linalg.qr(rng.normal(size=(spec.dim, latent)))
    radius = 1.5 * spec.separation * spec.sigma
    min_gap = spec.separation * spec.sigma

    means = []
    for k in range(total):
        for _ in range(MAX_PLACEMENT_TRIES):
            c = rng.normal(size=latent)
            candidate = 0.5 + basis @ (radius * c / np.linalg.norm(c))
            if all(np.linalg.norm(candidate - m) >= min_gap for m in means):
                means.append(candidate)
                break
        else:
            raise DatasetSpecError(
                f"Could not place class {k} at least {min_gap:.3g} from the others; "
                "lower separation or raise latent_dim"
            )
    return np.array(means)


def make_blobs(spec: DatasetSpec) -> Dataset:
    """Gaussian blobs for spec.classes + spec.ood_classes classes, clipped to [0,1]."""
    if spec.latent_dim < 1:
        raise DatasetSpecError("latent_dim must be >= 1")
    rng = np.random.default_rng(spec.seed)
    total = spec.classes + spec.ood_classes
    means = _class_means(spec, total, rng)

    features = np.concatenate([
        m + spec.sigma * rng.normal(size=(spec.samples_per_class, spec.dim))
        for m in means
    ])
    labels = np.repeat(np.arange(total), spec.samples_per_class)
    logger.debug(f"Generated {len(labels)} blob samples in {spec.dim} dims, {total} classes")
    return Dataset(
        features=np.clip(features, 0.0, 1.0),
        labels=labels,
        num_classes=total,
        metadata={"generator": "blobs", "seed": spec.seed},
    )


_DIGIT_TEMPLATES = [
    ["..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    ["...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####.."],
    ["..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."],
    [".#####..", "......#.", "......#.", "..####..", "......#.", "......#.", "......#.", ".#####.."],
    ["....##..", "...#.#..", "..#..#..", ".#...#..", ".######.", ".....#..", ".....#..", ".....#.."],
    [".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."],
    ["..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    [".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."],
    ["..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    ["..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", ".....#..", "..###..."],
]


def make_digits(spec: DatasetSpec) -> Dataset:
    """8x8 digit-like glyphs with one-pixel jitter and pixel noise."""
    if spec.dim != 64:
        raise DatasetSpecError("Digit glyphs are 8x8; dim must be 64")
    if spec.classes + spec.ood_classes > len(_DIGIT_TEMPLATES):
        raise DatasetSpecError(f"Only {len(_DIGIT_TEMPLATES)} digit classes exist")
    rng = np.random.default_rng(spec.seed)
    total = spec.classes + spec.ood_classes

    features, labels = [], []
    for k in range(total):
        glyph = np.array([[0.9 if c == "#" else 0.1 for c in row] for row in _DIGIT_TEMPLATES[k]])
        for _ in range(spec.samples_per_class):
            shifted = np.roll(glyph, shift=tuple(rng.integers(-1, 2, size=2)), axis=(0, 1))
            features.append(shifted.ravel() + spec.sigma * rng.normal(size=64))
            labels.append(k)
    return Dataset(
        features=np.clip(np.array(features), 0.0, 1.0),
        labels=np.array(labels),
        num_classes=total,
        metadata={"generator": "digits", "seed": spec.seed},
    )


def generate(spec: DatasetSpec) -> Dataset:
    if spec.kind == "blobs":
        return make_blobs(spec)
    if spec.kind == "digits":
        return make_digits(spec)
    raise DatasetSpecError(f"Unknown dataset kind: {spec.kind}")


def split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Stratified shuffled train/test split."""
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for k in np.unique(dataset.labels):
        idx = rng.permutation(np.flatnonzero(dataset.labels == k))
        cut = int(round(train_fraction * len(idx)))
        train_idx.append(idx[:cut])
        test_idx.append(idx[cut:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))

    def take(indices):
        return Dataset(
            features=dataset.features[indices],
            labels=dataset.labels[indices],
            num_classes=dataset.num_classes,
            metadata=dict(dataset.metadata),
        )
    return take(train_idx), take(test_idx)


def select_classes(dataset: Dataset, classes: Sequence[int], relabel: bool = True) -> Dataset:
    """Keep only the given classes; relabel them 0..len(classes)-1 in order."""
    classes = [int(c) for c in classes]
    mask = np.isin(dataset.labels, classes)
    labels = dataset.labels[mask]
    if relabel:
        mapping = {c: i for i, c in enumerate(classes)}
        labels = np.array([mapping[int(v)] for v in labels], dtype=np.int64)
    metadata = dict(dataset.metadata)
    metadata["source_classes"] = classes
    return Dataset(
        features=dataset.features[mask],
        labels=labels,
        num_classes=len(classes) if relabel else dataset.num_classes,
        metadata=metadata,
    )


def _dump(dataset: Dataset) -> Dict:
    return {
        "num_classes": dataset.num_classes,
        "features": dataset.features.tolist(),
        "labels": dataset.labels.tolist(),
    }


def save_splits(path, train: Dataset, test: Dataset, spec: DatasetSpec) -> None:
    """Write both splits plus the generating spec into one document."""
    json_store.save_document(path, DATASET_KIND, {
        "spec": {k: getattr(spec, k) for k in spec.__dataclass_fields__},
        "metadata": train.metadata,
        "train": _dump(train),
        "test": _dump(test),
    })


def load_splits(path) -> Tuple[Dataset, Dataset]:
    doc = json_store.load_document(path, DATASET_KIND)
    try:
        parts = [
            Dataset(
                features=doc[name]["features"],
                labels=doc[name]["labels"],
                num_classes=doc[name]["num_classes"],
                metadata=dict(doc.get("metadata", {})),
            )
            for name in ("train", "test")
        ]
    except (KeyError, TypeError) as e:
        raise json_store.DocumentFormatError(f"Dataset document {path} is incomplete: {e}")
    return parts[0], parts[1]
