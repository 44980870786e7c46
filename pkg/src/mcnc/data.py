"""Desk-scale datasets: MNIST IDX files and a synthetic blob substitute."""
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError
from .rng import Xoshiro256pp

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

DATA_DIR_ENV = "MCNC_DATA_DIR"


@dataclass
class Dataset:
    inputs: np.ndarray  # (N, F) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64
    split: str = ""
    n_classes: int = 10

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.ndim != 1 or len(self.inputs) != len(self.labels):
            raise FormatError(
                f"inputs {self.inputs.shape} and labels {self.labels.shape} do not form a dataset"
            )
        if len(self.labels) < 1:
            raise ConfigError("dataset must contain at least one sample")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise FormatError(
                f"labels outside [0, {self.n_classes}): range [{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self):
        return len(self.labels)

    @property
    def n_features(self):
        return self.inputs.shape[1]

    def subset(self, idx, split=None):
        return Dataset(self.inputs[idx], self.labels[idx], split or self.split, self.n_classes)


def _read_exact(fh, n, path, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"{path}: truncated while reading {what} at offset {fh.tell() - len(buf)}")
    return buf


def load_mnist_idx(images_path, labels_path, split=""):
    """Parse big-endian IDX image/label files into a flat [0,1]-scaled Dataset."""
    with open(images_path, "rb") as fh:
        magic, n_images, rows, cols = struct.unpack(">4i", _read_exact(fh, 16, images_path, "image header"))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(f"{images_path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_IMAGES_MAGIC:08x}")
        pixels = np.frombuffer(_read_exact(fh, n_images * rows * cols, images_path, "pixel data"), dtype=np.uint8)
    with open(labels_path, "rb") as fh:
        magic, n_labels = struct.unpack(">2i", _read_exact(fh, 8, labels_path, "label header"))
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(f"{labels_path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_LABELS_MAGIC:08x}")
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path, "label data"), dtype=np.uint8)
    if n_images != n_labels:
        raise FormatError(f"image count {n_images} ({images_path}) != label count {n_labels} ({labels_path})")
    inputs = pixels.reshape(n_images, rows * cols).astype(np.float64) / 255.0
    return Dataset(inputs, labels.astype(np.int64), split=split, n_classes=10)


def mnist_from_dir(data_dir=None, split="train"):
    """Load a standard-named MNIST split from ``data_dir`` or $MCNC_DATA_DIR."""
    data_dir = data_dir or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        raise ConfigError(f"no data directory given and {DATA_DIR_ENV} is unset")
    prefix = "train" if split == "train" else "t10k"
    return load_mnist_idx(
        os.path.join(data_dir, f"{prefix}-images-idx3-ubyte"),
        os.path.join(data_dir, f"{prefix}-labels-idx1-ubyte"),
        split=split,
    )


def make_synthetic(n, d_in, n_classes, seed, split="train", spread=0.08):
    """Gaussian class blobs with fixed axis-aligned means, clipped to [0, 1].

    Class c is centered at 0.2 everywhere except coordinate c mod d_in,
    which sits at 0.8, so a linear model separates the classes by
    construction.
    """
    if n < 1:
        raise ConfigError(f"synthetic dataset needs n >= 1, got {n}")
    if d_in < 1 or n_classes < 1:
        raise ConfigError(f"invalid synthetic dims d_in={d_in}, n_classes={n_classes}")
    rng = Xoshiro256pp(seed)
    labels = (rng.raw(n) % np.uint64(n_classes)).astype(np.int64)
    means = np.full((n_classes, d_in), 0.2)
    for c in range(n_classes):
        means[c, c % d_in] = 0.8
    inputs = means[labels] + spread * rng.normal(n * d_in).reshape(n, d_in)
    return Dataset(np.clip(inputs, 0.0, 1.0), labels, split=split, n_classes=n_classes)
