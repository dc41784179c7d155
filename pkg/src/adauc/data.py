"""Datasets: synthetic long-tail generators, LT subsampling, IDX/CIFAR readers, ADSET1 files."""

import struct
from dataclasses import dataclass

import numpy as np

from .core_math import Prng

DATASET_MAGIC = b"ADSET1"
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 3073


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    p: float
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels).astype(np.int64).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"features {X.shape} do not match {y.shape[0]} labels")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        if X.size and (not np.all(np.isfinite(X)) or X.min() < 0.0 or X.max() > 1.0):
            raise ValueError("features must be finite and lie in [0, 1]")
        p = float(y.sum()) / y.size if y.size else 0.0
        if self.p != p:
            raise ValueError(f"p={self.p} disagrees with label mean {p}")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_arrays(cls, features, labels, name=""):
        y = np.asarray(labels).astype(np.int64).reshape(-1)
        p = float(y.sum()) / y.size if y.size else 0.0
        return cls(np.asarray(features, dtype=np.float64), y, p, name)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, idx, name=None):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset.from_arrays(self.features[idx], self.labels[idx],
                                   self.name if name is None else name)

    def with_features(self, features, name=None):
        return Dataset(np.asarray(features, dtype=np.float64), self.labels, self.p,
                       self.name if name is None else name)


@dataclass(frozen=True)
class LongTailSpec:
    n_classes: int
    n_max: int
    imbalance: float
    positive_class_ids: frozenset

    def __post_init__(self):
        if not 0.0 < self.imbalance <= 1.0:
            raise ValueError("imbalance must lie in (0, 1]")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        object.__setattr__(self, "positive_class_ids", frozenset(self.positive_class_ids))


def longtail_class_sizes(spec):
    """size_c = round(n_max * imbalance ** (c / (C - 1))), c = 0..C-1."""
    if spec.n_classes < 2:
        raise ValueError("need at least two classes")
    c = np.arange(spec.n_classes)
    return np.rint(spec.n_max * spec.imbalance ** (c / (spec.n_classes - 1))).astype(np.int64)


def binarize_longtail(class_sizes, positive_class_ids):
    """Returns (n_pos, n_neg, rho) with rho = n_pos / n_neg."""
    sizes = np.asarray(class_sizes, dtype=np.int64)
    pos_ids = set(int(c) for c in positive_class_ids)
    is_pos = np.array([c in pos_ids for c in range(sizes.size)])
    if not is_pos.any() or is_pos.all():
        raise ValueError("positive_class_ids must split the classes into two nonempty sides")
    n_pos = int(sizes[is_pos].sum())
    n_neg = int(sizes[~is_pos].sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("one side of the binarization is empty")
    return n_pos, n_neg, n_pos / n_neg


def last_half_positive(n_classes):
    return frozenset(range(n_classes // 2, n_classes))


def _rescale_unit_box(X):
    lo, hi = float(X.min()), float(X.max())
    if hi == lo:
        return np.full_like(X, 0.5)
    return np.clip((X - lo) / (hi - lo), 0.0, 1.0)


def gen_synthetic_longtail(seed, n, d, rho, separation, name="synthetic"):
    """Two unit-variance Gaussian classes, ``separation`` apart along a random direction.

    The positive class holds round(rho * n) points. All features go through one
    shared affine map into [0, 1] so geometry (and the eps scale) is preserved
    across coordinates.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if d < 2:
        raise ValueError("d must be >= 2")
    n_pos = int(round(rho * n))
    if n_pos < 1 or n_pos >= n:
        raise ValueError(f"n={n} too small for rho={rho}")
    rng = Prng(seed)
    direction = rng.unit_vector(d)
    X = rng.normal(size=(n, d))
    y = np.zeros(n, dtype=np.int64)
    y[:n_pos] = 1
    X[:n_pos] += separation * direction
    order = rng.permutation(n)
    X, y = X[order], y[order]
    return Dataset.from_arrays(_rescale_unit_box(X), y, name)


def train_test_split(dataset, test_fraction, seed):
    """Stratified split; deterministic per seed."""
    rng = Prng(seed)
    test_idx, train_idx = [], []
    for label in (0, 1):
        idx = np.flatnonzero(dataset.labels == label)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(test_fraction * idx.size))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return (dataset.subset(train, dataset.name + "-train"),
            dataset.subset(test, dataset.name + "-test"))


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated {what}: wanted {n} bytes, got {len(data)}")
    return data


def read_idx_images(path):
    with open(path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, "IDX header"))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(f"{path}: bad IDX image magic 0x{magic:08x}")
        raw = _read_exact(fh, count * rows * cols, "IDX pixels")
    return np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)


def read_idx_labels(path):
    with open(path, "rb") as fh:
        magic, count = struct.unpack(">II", _read_exact(fh, 8, "IDX header"))
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(f"{path}: bad IDX label magic 0x{magic:08x}")
        raw = _read_exact(fh, count, "IDX labels")
    return np.frombuffer(raw, dtype=np.uint8).copy()


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 images (n, rows, cols) and labels in IDX format (fixture helper)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.tobytes())


@dataclass
class ClassPool:
    """Raw multi-class instances (features already in [0, 1])."""
    features: np.ndarray
    classes: np.ndarray

    def indices_of(self, c):
        return np.flatnonzero(self.classes == c)


def load_mnist_idx(images_path, labels_path):
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError("image and label counts differ")
    return ClassPool(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def load_cifar10_bin(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) % CIFAR_RECORD:
        raise FormatError(f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD}")
    recs = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    return ClassPool(recs[:, 1:].astype(np.float64) / 255.0, recs[:, 0].astype(np.int64))


def write_cifar10_bin(path, images, labels):
    images = np.asarray(images, dtype=np.uint8).reshape(len(labels), 3072)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    with open(path, "wb") as fh:
        fh.write(np.hstack([labels, images]).tobytes())


def subsample_longtail(pool, spec, seed, name="longtail"):
    """Per-class subsample to the long-tail sizes, binarized and shuffled."""
    sizes = longtail_class_sizes(spec)
    rng = Prng(seed)
    chosen, labels = [], []
    for c, size in enumerate(sizes):
        idx = pool.indices_of(c)
        if idx.size < size:
            raise ValueError(f"class {c} has {idx.size} instances, need {size}")
        pick = idx[rng.permutation(idx.size)[:size]]
        chosen.append(np.sort(pick))
        labels.append(np.full(size, 1 if c in spec.positive_class_ids else 0, dtype=np.int64))
    chosen = np.concatenate(chosen)
    labels = np.concatenate(labels)
    order = rng.permutation(chosen.size)
    return Dataset.from_arrays(pool.features[chosen[order]], labels[order], name)


def binarize_pool(pool, positive_class_ids, name="test"):
    """Full pool, binarized without long-tail subsampling (used for test splits)."""
    ids = frozenset(positive_class_ids)
    y = np.array([1 if c in ids else 0 for c in pool.classes], dtype=np.int64)
    return Dataset.from_arrays(pool.features, y, name)


def dataset_to_bytes(ds):
    header = DATASET_MAGIC + struct.pack("<QQd", ds.n, ds.d, ds.p)
    return (header + np.ascontiguousarray(ds.features).astype("<f8").tobytes()
            + ds.labels.astype(np.uint8).tobytes())


def dataset_from_bytes(data, name=""):
    head = len(DATASET_MAGIC) + 24
    if len(data) < head or data[:len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise FormatError("bad or truncated ADSET1 header")
    n, d, p = struct.unpack("<QQd", data[len(DATASET_MAGIC):head])
    need = head + 8 * n * d + n
    if len(data) != need:
        raise FormatError(f"ADSET1 body has {len(data) - head} bytes, expected {need - head}")
    X = np.frombuffer(data[head:head + 8 * n * d], dtype="<f8").astype(np.float64).reshape(n, d)
    y = np.frombuffer(data[head + 8 * n * d:], dtype=np.uint8).astype(np.int64)
    try:
        return Dataset(X, y, p, name)
    except ValueError as exc:
        raise FormatError(f"corrupt ADSET1 payload: {exc}") from None


def save_dataset(path, ds):
    with open(path, "wb") as fh:
        fh.write(dataset_to_bytes(ds))


def load_dataset(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return dataset_from_bytes(data, name=str(path))
