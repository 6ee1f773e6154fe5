"""Malware binaries as grayscale images, plus the texture features trained on.

A binary is read byte-for-byte into a row-major image whose width comes from
a fixed value or a file-size band table. Texture descriptors: six gray-level
co-occurrence features (energy, entropy, contrast, dissimilarity,
homogeneity, correlation), local-binary-pattern histogram energy, and the
entropy of a Gabor filter response.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError

# (max file size exclusive, image width); larger files fall to DEFAULT_WIDTH.
SIZE_BANDS = (
    (10 * 1024, 32),
    (30 * 1024, 64),
    (60 * 1024, 128),
    (100 * 1024, 256),
    (200 * 1024, 384),
)
DEFAULT_WIDTH = 512

FEATURE_COLUMNS = (
    "energy",
    "entropy",
    "contrast",
    "dissimilarity",
    "homogeneity",
    "correlation",
    "lbp_energy",
    "gabor_entropy",
)


def width_for_size(n_bytes: int) -> int:
    for bound, width in SIZE_BANDS:
        if n_bytes < bound:
            return width
    return DEFAULT_WIDTH


def bytes_to_image(data: bytes, width: int | None = None) -> np.ndarray:
    """One byte per pixel, row-major; the final partial row is zero-padded.

    ``width`` None selects the size-banded width table.
    """
    if len(data) == 0:
        raise InputError("cannot image an empty byte sequence")
    if width is None:
        width = width_for_size(len(data))
    if width < 1:
        raise ParameterError("width must be >= 1")
    height = math.ceil(len(data) / width)
    pixels = np.zeros(height * width, dtype=np.uint8)
    pixels[: len(data)] = np.frombuffer(data, dtype=np.uint8)
    return pixels.reshape(height, width)


def glcm(
    image: np.ndarray,
    levels: int = 8,
    offset: tuple[int, int] = (0, 1),
    symmetric: bool = True,
) -> np.ndarray:
    """Normalized gray-level co-occurrence matrix at a single pixel offset.

    Gray values are quantized into ``levels`` equal-width bins over 0..255.
    With ``symmetric`` each pair is counted in both directions. Entries sum
    to 1.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise InputError("image must be 2-D")
    if levels < 2:
        raise ParameterError("levels must be >= 2")
    dr, dc = offset
    h, w = image.shape
    if h - abs(dr) < 1 or w - abs(dc) < 1:
        raise InputError(f"image {h}x{w} too small for offset {offset}")
    q = (image.astype(np.int64) * levels) // 256
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    a = q[r0:r1, c0:c1].ravel()
    b = q[r0 + dr : r1 + dr, c0 + dc : c1 + dc].ravel()
    if a.size == 0:
        raise InputError(f"image {h}x{w} has no valid pixel pair for offset {offset}")
    counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)
    counts = counts.astype(np.float64)
    if symmetric:
        counts = counts + counts.T
    return counts / counts.sum()


@dataclass
class TextureFeatures:
    energy: float
    entropy: float
    contrast: float
    dissimilarity: float
    homogeneity: float
    correlation: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.energy,
            self.entropy,
            self.contrast,
            self.dissimilarity,
            self.homogeneity,
            self.correlation,
        )


def texture_features(g: np.ndarray) -> TextureFeatures:
    """The six co-occurrence descriptors of a normalized GLCM.

    correlation is defined as 1 when either marginal is degenerate (single
    occupied gray level), which also pins the constant-image feature vector
    to (1, 0, 0, 0, 1, 1).
    """
    g = np.asarray(g, dtype=np.float64)
    levels = g.shape[0]
    i = np.arange(levels)[:, None]
    j = np.arange(levels)[None, :]
    energy = float((g**2).sum())
    nz = g[g > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    contrast = float((g * (i - j) ** 2).sum())
    dissimilarity = float((g * np.abs(i - j)).sum())
    homogeneity = float((g / (1.0 + (i - j) ** 2)).sum())
    pi = g.sum(axis=1)
    pj = g.sum(axis=0)
    mu_i = float((np.arange(levels) * pi).sum())
    mu_j = float((np.arange(levels) * pj).sum())
    var_i = float(((np.arange(levels) - mu_i) ** 2 * pi).sum())
    var_j = float(((np.arange(levels) - mu_j) ** 2 * pj).sum())
    denom = math.sqrt(var_i) * math.sqrt(var_j)
    if denom == 0.0:
        correlation = 1.0
    else:
        correlation = float((g * (i - mu_i) * (j - mu_j)).sum() / denom)
    return TextureFeatures(energy, entropy, contrast, dissimilarity, homogeneity, correlation)


# Neighbor offsets in bit order, clockwise from the top-left corner.
_LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def lbp_energy(image: np.ndarray) -> float:
    """Energy of the 256-bin local-binary-pattern code histogram.

    A neighbor >= center sets its bit, so the measure is invariant to adding
    a constant to every pixel.
    """
    image = np.asarray(image)
    if image.ndim != 2 or image.shape[0] < 3 or image.shape[1] < 3:
        raise InputError("LBP needs an image of at least 3x3")
    center = image[1:-1, 1:-1].astype(np.int64)
    h, w = center.shape
    codes = np.zeros((h, w), dtype=np.int64)
    for bit, (dr, dc) in enumerate(_LBP_OFFSETS):
        neighbor = image[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w].astype(np.int64)
        codes |= (neighbor >= center).astype(np.int64) << bit
    hist = np.bincount(codes.ravel(), minlength=256).astype(np.float64)
    hist /= hist.sum()
    return float((hist**2).sum())


def gabor_kernel(
    size: int = 7, wavelength: float = 4.0, sigma: float = 2.0, aspect: float = 0.5, orientation: float = 0.0
) -> np.ndarray:
    """Real (cosine) Gabor kernel on a size x size grid."""
    half = size // 2
    yy, xx = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    xr = xx * math.cos(orientation) + yy * math.sin(orientation)
    yr = -xx * math.sin(orientation) + yy * math.cos(orientation)
    envelope = np.exp(-(xr**2 + (aspect * yr) ** 2) / (2.0 * sigma**2))
    return envelope * np.cos(2.0 * math.pi * xr / wavelength)


def gabor_entropy(image: np.ndarray, bins: int = 32, kernel: np.ndarray | None = None) -> float:
    """Shannon entropy (bits) of the binned Gabor response magnitudes.

    The valid-mode response magnitudes are quantized into ``bins`` uniform
    bins over their observed range; a flat response (constant image) has
    entropy 0, and the value is bounded by log2(bins).
    """
    image = np.asarray(image, dtype=np.float64)
    if kernel is None:
        kernel = gabor_kernel()
    kh, kw = kernel.shape
    if image.ndim != 2 or image.shape[0] < kh or image.shape[1] < kw:
        raise InputError(f"image smaller than the {kh}x{kw} kernel")
    windows = np.lib.stride_tricks.sliding_window_view(image, (kh, kw))
    response = np.abs(np.einsum("ijkl,kl->ij", windows, kernel))
    lo, hi = float(response.min()), float(response.max())
    if hi <= lo:
        return 0.0
    hist, _ = np.histogram(response, bins=bins, range=(lo, hi))
    p = hist[hist > 0] / response.size
    return float(-(p * np.log2(p)).sum())


@dataclass
class FeatureRow:
    path: str
    label: str
    sublabel: str
    energy: float
    entropy: float
    contrast: float
    dissimilarity: float
    homogeneity: float
    correlation: float
    lbp_energy: float
    gabor_entropy: float

    def feature_vector(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in FEATURE_COLUMNS])


def extract_file(path: str | Path, label: str, sublabel: str, width: int | None = None, levels: int = 8) -> FeatureRow:
    data = Path(path).read_bytes()
    image = bytes_to_image(data, width)
    tf = texture_features(glcm(image, levels=levels))
    return FeatureRow(
        str(path), label, sublabel, *tf.as_tuple(), lbp_energy(image), gabor_entropy(image)
    )


def extract_dataset(
    root: str | Path, width: int | None = None, levels: int = 8
) -> tuple[list[FeatureRow], list[str]]:
    """Walk a class/family/file tree and extract one feature row per file.

    Files are visited in lexicographic path order, so the output is
    deterministic. Unreadable or too-small files are recorded as skips and
    extraction continues.
    """
    root = Path(root)
    rows: list[FeatureRow] = []
    skipped: list[str] = []
    for path in sorted(root.glob("*/*/*")):
        if not path.is_file():
            continue
        label = path.parent.parent.name
        sublabel = path.parent.name
        try:
            rows.append(extract_file(path, label, sublabel, width, levels))
        except (OSError, InputError) as exc:
            skipped.append(f"{path}: {exc}")
    return rows, skipped


def write_features_csv(rows: list[FeatureRow], path: str | Path) -> None:
    """CSV with path, label, sublabel, then the eight features at 9 digits."""
    tmp = str(path) + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label", "sublabel", *FEATURE_COLUMNS])
        for row in rows:
            writer.writerow(
                [row.path, row.label, row.sublabel]
                + [f"{getattr(row, c):.9g}" for c in FEATURE_COLUMNS]
            )
    os.replace(tmp, path)


def read_features_csv(path: str | Path) -> tuple[np.ndarray, list[str], list[str], list[str]]:
    """Load a features CSV back as (X, labels, sublabels, paths)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["path", "label", "sublabel", *FEATURE_COLUMNS]
        if header != expected:
            raise InputError(f"unexpected feature CSV header: {header}")
        paths, labels, sublabels, feats = [], [], [], []
        for rec in reader:
            paths.append(rec[0])
            labels.append(rec[1])
            sublabels.append(rec[2])
            feats.append([float(v) for v in rec[3:]])
    X = np.asarray(feats, dtype=np.float64) if feats else np.empty((0, len(FEATURE_COLUMNS)))
    return X, labels, sublabels, paths
