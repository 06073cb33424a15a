"""Temporal smoothers for noisy epoch-level predictions, plus the frozen head.

Four smoothers share one job: turn a fragmented per-epoch signal into a
temporally coherent hypnogram.

- ``moving_average_smooth`` averages probability rows over a centered
  sliding window and re-decides by argmax.
- ``majority_filter_smooth`` takes the modal label over a centered sliding
  window (an integer-median variant is available behind a flag).
- ``fixed_attention_smooth`` replaces each feature row by its non-overlapping
  window mean: pure uniform averaging, the global term of the closed-form
  kernel with the content term switched off.
- ``random_transformer_smooth`` runs a frozen randomly initialized encoder
  over each non-overlapping window with the same weights everywhere.

Feature-space smoothers are paired with a nearest-centroid classifier
(``fit_centroids`` / ``classify``) fitted on smoothed training features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import EncoderConfig, build_encoder_weights, encoder_forward
from .sequences import FeatureSequence, ProbSequence, StageSequence

__all__ = [
    "window_partition",
    "moving_average_smooth",
    "majority_filter_smooth",
    "fixed_attention_smooth",
    "random_transformer_smooth",
    "CentroidClassifier",
    "fit_centroids",
    "classify",
]


def window_partition(t_len: int, w: int) -> list[tuple[int, int]]:
    """Non-overlapping [start, stop) windows of width ``w`` covering [0, t_len).

    The final window is shorter when ``w`` does not divide ``t_len``.
    """
    if w < 1:
        raise ValueError(f"window width must be >= 1, got {w}")
    if t_len < 0:
        raise ValueError(f"t_len must be >= 0, got {t_len}")
    return [(start, min(start + w, t_len)) for start in range(0, t_len, w)]


def _sliding_bounds(t_len: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    # Centered window [t - w//2, t + w//2], truncated at the edges.
    half = w // 2
    idx = np.arange(t_len)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, t_len)
    return lo, hi


def moving_average_smooth(p: ProbSequence, w: int) -> StageSequence:
    """Average probability rows over a centered sliding window, then argmax.

    The window spans [t - w//2, t + w//2], truncated at the sequence edges.
    Argmax ties resolve to the smallest class index.
    """
    if w < 1:
        raise ValueError(f"window width must be >= 1, got {w}")
    lo, hi = _sliding_bounds(p.t_len, w)
    csum = np.vstack([np.zeros((1, p.n_classes)), np.cumsum(p.probs, axis=0)])
    means = (csum[hi] - csum[lo]) / (hi - lo)[:, np.newaxis]
    return StageSequence(np.argmax(means, axis=1), p.n_classes)


def majority_filter_smooth(
    s: StageSequence, w: int, integer_median: bool = False
) -> StageSequence:
    """Modal label over a centered sliding window.

    Ties resolve in favour of the original center label when it is among the
    modal labels, otherwise to the smallest label index. With
    ``integer_median`` the (lower) median of the window labels is used
    instead, which treats labels as ordered integers.
    """
    if w < 1:
        raise ValueError(f"window width must be >= 1, got {w}")
    labels = s.labels
    lo, hi = _sliding_bounds(s.t_len, w)
    out = np.empty_like(labels)
    for t in range(s.t_len):
        win = labels[lo[t] : hi[t]]
        if integer_median:
            out[t] = np.sort(win)[(win.size - 1) // 2]
        else:
            counts = np.bincount(win, minlength=s.n_classes)
            top = counts.max()
            out[t] = labels[t] if counts[labels[t]] == top else int(np.argmax(counts))
    return StageSequence(out, s.n_classes)


def fixed_attention_smooth(x: FeatureSequence, w: int) -> FeatureSequence:
    """Replace each feature row by its non-overlapping window mean."""
    out = np.empty_like(x.data)
    for start, stop in window_partition(x.t_len, w):
        out[start:stop] = x.data[start:stop].mean(axis=0)
    return FeatureSequence(out)


def random_transformer_smooth(x: FeatureSequence, cfg: EncoderConfig) -> FeatureSequence:
    """Run the frozen random encoder over each non-overlapping window.

    Every window sees the same weights, drawn once from ``cfg.seed``; a
    ragged tail window reuses the leading rows of the positional table.
    """
    weights = build_encoder_weights(cfg, x.dim)
    parts = [
        encoder_forward(FeatureSequence(x.data[start:stop]), cfg, weights).data
        for start, stop in window_partition(x.t_len, cfg.window_w)
    ]
    return FeatureSequence(np.concatenate(parts, axis=0))


@dataclass(frozen=True)
class CentroidClassifier:
    """Per-class mean feature vectors with their training counts."""

    centroids: np.ndarray
    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.centroids.shape[0]


def fit_centroids(x_train: FeatureSequence, y_train: StageSequence, n_classes: int) -> CentroidClassifier:
    """Mean feature vector per class. Every class must appear in ``y_train``."""
    if x_train.t_len != y_train.t_len:
        raise ValueError(
            f"features ({x_train.t_len}) and labels ({y_train.t_len}) differ in length"
        )
    if n_classes < y_train.n_classes:
        raise ValueError(
            f"n_classes={n_classes} below label space {y_train.n_classes}"
        )
    centroids = np.empty((n_classes, x_train.dim))
    counts = np.empty(n_classes, dtype=np.int64)
    for c in range(n_classes):
        mask = y_train.labels == c
        if not mask.any():
            raise ValueError(f"class {c} has no training examples; cannot place a centroid")
        centroids[c] = x_train.data[mask].mean(axis=0)
        counts[c] = int(mask.sum())
    return CentroidClassifier(centroids=centroids, counts=counts)


def classify(x: FeatureSequence, clf: CentroidClassifier) -> StageSequence:
    """Nearest-centroid labels (Euclidean); ties go to the smallest class index."""
    cent = clf.centroids
    if cent.shape[1] != x.dim:
        raise ValueError(f"classifier expects d={cent.shape[1]} features, got d={x.dim}")
    d2 = (
        np.sum(x.data**2, axis=1, keepdims=True)
        - 2.0 * (x.data @ cent.T)
        + np.sum(cent**2, axis=1)[np.newaxis, :]
    )
    return StageSequence(np.argmin(d2, axis=1), clf.n_classes)
