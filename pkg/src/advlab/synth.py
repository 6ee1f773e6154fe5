"""Synthetic stand-in corpora for exercising the pipeline without real data.

``make_digits`` renders seven-segment style digit glyphs into 28x28 images
with random translation, thickness and pixel noise; it is not a substitute
for real handwriting benchmarks but gives every stage of the workbench a
learnable, attackable task. ``make_binary_corpus`` writes a tiny
class/family tree of synthetic "binaries" whose byte statistics differ per
family, for the texture-feature pipeline.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .idx import IdxDataset

# Segment layout on a 3x2 grid of anchor points:
#   0 --- 1
#   |     |
#   2 --- 3
#   |     |
#   4 --- 5
_ANCHORS = {0: (4, 7), 1: (4, 20), 2: (13, 7), 3: (13, 20), 4: (22, 7), 5: (22, 20)}
_SEGMENTS = {
    "top": (0, 1),
    "tl": (0, 2),
    "tr": (1, 3),
    "mid": (2, 3),
    "bl": (2, 4),
    "br": (3, 5),
    "bot": (4, 5),
}
_DIGIT_SEGMENTS = {
    0: ("top", "tl", "tr", "bl", "br", "bot"),
    1: ("tr", "br"),
    2: ("top", "tr", "mid", "bl", "bot"),
    3: ("top", "tr", "mid", "br", "bot"),
    4: ("tl", "tr", "mid", "br"),
    5: ("top", "tl", "mid", "br", "bot"),
    6: ("top", "tl", "mid", "bl", "br", "bot"),
    7: ("top", "tr", "br"),
    8: ("top", "tl", "tr", "mid", "bl", "br", "bot"),
    9: ("top", "tl", "tr", "mid", "br", "bot"),
}


def _draw_segment(canvas: np.ndarray, p0, p1, thickness: float) -> None:
    rr, cc = np.mgrid[0 : canvas.shape[0], 0 : canvas.shape[1]].astype(np.float64)
    (r0, c0), (r1, c1) = p0, p1
    dr, dc = r1 - r0, c1 - c0
    length2 = dr * dr + dc * dc
    t = np.clip(((rr - r0) * dr + (cc - c0) * dc) / length2, 0.0, 1.0)
    dist2 = (rr - (r0 + t * dr)) ** 2 + (cc - (c0 + t * dc)) ** 2
    canvas[:] = np.maximum(canvas, np.exp(-dist2 / (2.0 * thickness**2)))


def make_digits(n: int, rng_seed: int = 0) -> IdxDataset:
    """Deterministic 28x28 digit corpus with labels cycling through 0..9."""
    rng = np.random.default_rng(rng_seed)
    images = np.zeros((n, 28, 28), dtype=np.uint8)
    labels = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        digit = i % 10
        canvas = np.zeros((28, 28))
        shift_r, shift_c = rng.integers(-3, 4, size=2)
        thickness = rng.uniform(0.9, 1.6)
        for seg in _DIGIT_SEGMENTS[digit]:
            a, b = _SEGMENTS[seg]
            p0 = (_ANCHORS[a][0] + shift_r, _ANCHORS[a][1] + shift_c)
            p1 = (_ANCHORS[b][0] + shift_r, _ANCHORS[b][1] + shift_c)
            _draw_segment(canvas, p0, p1, thickness)
        canvas = canvas * rng.uniform(0.75, 1.0) + rng.normal(0.0, 0.04, canvas.shape)
        images[i] = np.clip(np.round(canvas * 255.0), 0, 255).astype(np.uint8)
        labels[i] = digit
    order = rng.permutation(n)
    return IdxDataset(images[order], labels[order])


def make_binary_corpus(root: str | Path, files_per_family: int = 3, rng_seed: int = 0) -> Path:
    """Write a small class/family tree of synthetic binaries under ``root``.

    Each family draws bytes from its own mixture (runs of constants, text-like
    ranges, uniform noise) so texture features separate them.
    """
    rng = np.random.default_rng(rng_seed)
    root = Path(root)
    families = {
        "worm": ["alpha", "bravo"],
        "trojan": ["charlie", "delta"],
    }
    for li, (label, fams) in enumerate(families.items()):
        for fam_i, fam in enumerate(fams):
            fam_dir = root / label / fam
            fam_dir.mkdir(parents=True, exist_ok=True)
            for k in range(files_per_family):
                size = int(rng.integers(4096, 16384))
                style = (2 * li + fam_i) % 3
                if style == 0:
                    data = rng.integers(0, 256, size)
                elif style == 1:
                    runs = rng.integers(0, 256, size // 64 + 1)
                    data = np.repeat(runs, 64)[:size]
                else:
                    data = rng.integers(32, 127, size)
                (fam_dir / f"sample_{k}.bin").write_bytes(data.astype(np.uint8).tobytes())
    return root
