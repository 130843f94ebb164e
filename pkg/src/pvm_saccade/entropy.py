"""Local image entropy: per-channel Shannon entropy of intensity histograms
over a disk neighborhood, channels summed.

Values are quantized to 256 levels (round(v*255)); the disk is clipped at
frame borders and the histogram normalized over the pixels actually present,
so border pixels are not diluted by padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

_BINS = 256


@dataclass(frozen=True)
class EntropyConfig:
    disk_radius: int = 5

    def __post_init__(self) -> None:
        if self.disk_radius < 1:
            raise ConfigurationError("disk_radius must be >= 1")


def disk_offsets(radius: int) -> list[tuple[int, int]]:
    """Offsets (dy, dx) with Euclidean center distance <= radius."""
    offs = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy * dy + dx * dx <= radius * radius:
                offs.append((dy, dx))
    return offs


def _channel_counts(q: np.ndarray, offsets) -> tuple[np.ndarray, np.ndarray]:
    """Histogram counts [h, w, 256] of the clipped disk around each pixel."""
    h, w = q.shape
    idx_chunks = []
    ys, xs = np.mgrid[0:h, 0:w]
    for dy, dx in offsets:
        y0, y1 = max(0, -dy), max(0, min(h, h - dy))
        x0, x1 = max(0, -dx), max(0, min(w, w - dx))
        if y1 <= y0 or x1 <= x0:
            continue
        center_y = ys[y0:y1, x0:x1]
        center_x = xs[y0:y1, x0:x1]
        vals = q[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
        idx_chunks.append(((center_y * w + center_x) * _BINS + vals).ravel())
    flat = np.bincount(np.concatenate(idx_chunks), minlength=h * w * _BINS)
    counts = flat.reshape(h, w, _BINS).astype(np.int64)
    total = counts.sum(axis=2)
    return counts, total


def _entropy_from_counts(counts: np.ndarray, total: np.ndarray) -> np.ndarray:
    """-sum p log2 p, accumulated bin-by-bin in ascending bin order."""
    h, w = total.shape
    ent = np.zeros((h, w), dtype=np.float64)
    totf = total.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        for b in range(_BINS):
            c = counts[:, :, b]
            p = c / totf
            term = np.where(c > 0, p * np.log2(p), 0.0)
            ent -= term
    return ent


def local_entropy_map(frame: np.ndarray, config: EntropyConfig) -> np.ndarray:
    """Summed-channel local entropy in bits, shape [h, w]."""
    q = np.rint(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.intp)
    offsets = disk_offsets(config.disk_radius)
    out = np.zeros(frame.shape[:2], dtype=np.float64)
    for c in range(frame.shape[2]):
        counts, total = _channel_counts(q[:, :, c], offsets)
        out += _entropy_from_counts(counts, total)
    return out


def view_entropy(entropy_map: np.ndarray, x: int, y: int, w: int, h: int) -> float:
    """Mean of the entropy map over the view rectangle."""
    mh, mw = entropy_map.shape
    if x < 0 or y < 0 or x + w > mw or y + h > mh:
        raise ValueError(f"view ({x},{y},{w},{h}) outside map {mw}x{mh}")
    return float(np.mean(entropy_map[y:y + h, x:x + w]))
