"""Bit-exact reader/writer for IDX image and label files."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .nn import LabeledBatch

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class IdxDataset:
    """Raw image bytes (n, rows, cols) and label bytes (n,)."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.images.ndim != 3:
            raise FormatError("images must be (n, rows, cols)")
        if self.labels.shape != (self.images.shape[0],):
            raise FormatError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return self.images.shape[0]


def _read_header(fh, path: str, fields: int) -> tuple[int, ...]:
    raw = fh.read(4 * fields)
    if len(raw) < 4 * fields:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    return struct.unpack(f">{fields}i", raw)


def load_idx(images_path: str, labels_path: str) -> IdxDataset:
    """Parse big-endian IDX image/label files and pair them up."""
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = _read_header(fh, images_path, 4)
        if magic != IMAGE_MAGIC:
            raise FormatError(
                f"{images_path}: bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"
            )
        payload = np.frombuffer(fh.read(), dtype=np.uint8)
    expected = count * rows * cols
    if payload.size != expected:
        raise FormatError(
            f"{images_path}: payload holds {payload.size} bytes, header promises {expected}"
        )
    images = payload.reshape(count, rows, cols)

    with open(labels_path, "rb") as fh:
        magic, label_count = _read_header(fh, labels_path, 2)
        if magic != LABEL_MAGIC:
            raise FormatError(
                f"{labels_path}: bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"
            )
        labels = np.frombuffer(fh.read(), dtype=np.uint8)
    if labels.size != label_count:
        raise FormatError(
            f"{labels_path}: payload holds {labels.size} labels, header promises {label_count}"
        )
    if label_count != count:
        raise FormatError(f"image count {count} != label count {label_count}")
    return IdxDataset(images, labels)


def write_idx(dataset: IdxDataset, images_path: str, labels_path: str) -> None:
    """Inverse of load_idx; a write/load round trip is byte identical."""
    n, rows, cols = dataset.images.shape
    tmp = images_path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack(">4i", IMAGE_MAGIC, n, rows, cols))
        fh.write(dataset.images.tobytes())
    os.replace(tmp, images_path)
    tmp = labels_path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack(">2i", LABEL_MAGIC, n))
        fh.write(dataset.labels.tobytes())
    os.replace(tmp, labels_path)


def to_batch(dataset: IdxDataset) -> LabeledBatch:
    """Flatten to (n, rows*cols) floats in [0, 1] for the classifiers."""
    n = len(dataset)
    inputs = dataset.images.reshape(n, -1).astype(np.float64) / 255.0
    return LabeledBatch(inputs, dataset.labels.astype(np.int64))


def from_float_images(images: np.ndarray, labels: np.ndarray, rows: int, cols: int) -> IdxDataset:
    """Pack float images in [0, 1] back into IDX bytes (for attack exports)."""
    pixels = np.clip(np.round(np.asarray(images) * 255.0), 0, 255).astype(np.uint8)
    return IdxDataset(pixels.reshape(-1, rows, cols), np.asarray(labels, dtype=np.uint8))
