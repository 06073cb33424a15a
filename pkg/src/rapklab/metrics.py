"""Hypnogram quality metrics.

Two smoothing diagnostics plus standard classification scores:

- Weighted transition entropy (WTE): the entropy of the empirical next-stage
  distribution, averaged over current stages weighted by how often each
  stage is departed. Fragmented, flickering hypnograms score high; clean
  stage runs score low. Natural log, so the ceiling is ln(n_classes).
- Local smoothing impact index (LSII): for every epoch a smoother changed,
  the fraction of the other epochs in its non-overlapping window that agree
  with the new label. Values near 1 mean corrections follow local context;
  values near 1/n_classes mean corrections look arbitrary.

Both come with exhaustive brute-force oracles in the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sequences import StageSequence

__all__ = [
    "TransitionStats",
    "transition_stats",
    "wte",
    "wte_pooled",
    "lsii",
    "lsii_pooled",
    "accuracy",
    "per_class_f1",
    "weighted_f1",
    "metric_accuracy_correlation",
    "EvalReport",
]


@dataclass(frozen=True)
class TransitionStats:
    """Empirical stage-transition counts and row-normalized probabilities.

    ``row_probs`` rows for stages that never occur as a transition source are
    all zero. ``class_weights`` are the departure frequencies R_c / (T - 1).
    """

    counts: np.ndarray
    row_probs: np.ndarray
    row_totals: np.ndarray
    class_weights: np.ndarray


def transition_stats(s: StageSequence) -> TransitionStats:
    """Count consecutive-epoch transitions of a stage sequence (needs T >= 2)."""
    if s.t_len < 2:
        raise ValueError(f"transition statistics need at least 2 epochs, got {s.t_len}")
    c = s.n_classes
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (s.labels[:-1], s.labels[1:]), 1)
    row_totals = counts.sum(axis=1)
    row_probs = np.zeros((c, c))
    nz = row_totals > 0
    row_probs[nz] = counts[nz] / row_totals[nz, np.newaxis]
    class_weights = row_totals / (s.t_len - 1)
    return TransitionStats(
        counts=counts, row_probs=row_probs, row_totals=row_totals, class_weights=class_weights
    )


def _wte_from_counts(counts: np.ndarray) -> float:
    row_totals = counts.sum(axis=1)
    grand = row_totals.sum()
    if grand == 0:
        raise ValueError("no transitions observed")
    out = 0.0
    for c in np.nonzero(row_totals)[0]:
        p = counts[c] / row_totals[c]
        nz = p > 0
        entropy = -float(np.sum(p[nz] * np.log(p[nz])))
        out += (row_totals[c] / grand) * entropy
    return float(out)


def wte(s: StageSequence) -> float:
    """Weighted transition entropy of a stage sequence.

    Rows of the transition matrix are entropy-scored with the natural log
    (0 log 0 = 0) and averaged with weights proportional to how often each
    stage is departed. Constant sequences score 0; the upper bound is
    ln(n_classes).
    """
    return _wte_from_counts(transition_stats(s).counts)


def wte_pooled(sequences: list[StageSequence] | tuple[StageSequence, ...]) -> float:
    """WTE of several sequences with transition counts pooled.

    Counts are summed per sequence, so no transition spans a sequence
    boundary. All sequences must share the same label space.
    """
    if not sequences:
        raise ValueError("need at least one sequence")
    c = sequences[0].n_classes
    if any(s.n_classes != c for s in sequences):
        raise ValueError("sequences disagree on n_classes")
    counts = np.zeros((c, c), dtype=np.int64)
    for s in sequences:
        counts += transition_stats(s).counts
    return _wte_from_counts(counts)


def _lsii_terms(none_labels: np.ndarray, corr_labels: np.ndarray, w: int) -> list[float]:
    t_len = none_labels.shape[0]
    terms: list[float] = []
    for t in np.nonzero(none_labels != corr_labels)[0]:
        start = (int(t) // w) * w
        stop = min(start + w, t_len)
        others = stop - start - 1
        if others == 0:
            # Singleton window: no context to agree with.
            continue
        agree = int(np.count_nonzero(corr_labels[start:stop] == corr_labels[t])) - 1
        terms.append(agree / others)
    return terms


def lsii(
    none_preds: StageSequence,
    corr_preds: StageSequence,
    y_true: StageSequence,
    w: int,
) -> float | None:
    """Local smoothing impact index of a corrected prediction sequence.

    For each epoch where ``corr_preds`` differs from ``none_preds``, measures
    the fraction of the other epochs in its non-overlapping width-``w``
    window whose corrected label matches the corrected label at that epoch,
    and averages over corrections. Returns ``None`` when there are no
    corrections (or none with window context to score).

    ``y_true`` is accepted for interface compatibility but does not enter
    the score: agreement is measured against the corrected sequence itself.
    """
    if w < 2:
        raise ValueError(f"window width must be >= 2, got {w}")
    if not (none_preds.t_len == corr_preds.t_len == y_true.t_len):
        raise ValueError(
            f"sequence lengths differ: none={none_preds.t_len}, "
            f"corrected={corr_preds.t_len}, true={y_true.t_len}"
        )
    terms = _lsii_terms(none_preds.labels, corr_preds.labels, w)
    if not terms:
        return None
    return sum(terms) / len(terms)


def lsii_pooled(
    none_list: list[StageSequence],
    corr_list: list[StageSequence],
    w: int,
) -> float | None:
    """LSII with corrections pooled across several sequences (e.g. subjects)."""
    if len(none_list) != len(corr_list):
        raise ValueError("need one corrected sequence per baseline sequence")
    if w < 2:
        raise ValueError(f"window width must be >= 2, got {w}")
    terms: list[float] = []
    for none_s, corr_s in zip(none_list, corr_list):
        if none_s.t_len != corr_s.t_len:
            raise ValueError("paired sequences differ in length")
        terms.extend(_lsii_terms(none_s.labels, corr_s.labels, w))
    if not terms:
        return None
    return sum(terms) / len(terms)


def accuracy(pred: StageSequence, true: StageSequence) -> float:
    """Fraction of epochs with matching labels."""
    if pred.t_len != true.t_len:
        raise ValueError(f"lengths differ: pred={pred.t_len}, true={true.t_len}")
    return float(np.mean(pred.labels == true.labels))


def per_class_f1(pred: StageSequence, true: StageSequence, n_classes: int) -> np.ndarray:
    """F1 per class; classes with zero precision+recall score 0."""
    if pred.t_len != true.t_len:
        raise ValueError(f"lengths differ: pred={pred.t_len}, true={true.t_len}")
    f1 = np.zeros(n_classes)
    for c in range(n_classes):
        tp = int(np.count_nonzero((pred.labels == c) & (true.labels == c)))
        fp = int(np.count_nonzero((pred.labels == c) & (true.labels != c)))
        fn = int(np.count_nonzero((pred.labels != c) & (true.labels == c)))
        denom = 2 * tp + fp + fn
        f1[c] = 2 * tp / denom if denom > 0 else 0.0
    return f1


def weighted_f1(pred: StageSequence, true: StageSequence, n_classes: int) -> float:
    """Support-weighted mean of per-class F1 (zero-support classes drop out)."""
    f1 = per_class_f1(pred, true, n_classes)
    support = np.bincount(true.labels, minlength=n_classes)[:n_classes]
    return float(np.sum(f1 * support) / true.t_len)


def metric_accuracy_correlation(points: list[tuple[float, float]]) -> float:
    """Pearson correlation of (metric, accuracy) pairs across runs.

    Needs at least 3 points and nonzero variance on both coordinates.
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    arr = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain non-finite values")
    if np.std(arr[:, 0]) == 0.0 or np.std(arr[:, 1]) == 0.0:
        raise ValueError("correlation undefined: a coordinate has zero variance")
    return float(np.corrcoef(arr[:, 0], arr[:, 1])[0, 1])


@dataclass(frozen=True)
class EvalReport:
    """One evaluated run: classification scores plus smoothing diagnostics.

    ``lsii`` is ``None`` exactly when the smoother changed nothing that can
    be scored (in particular for the identity smoother).
    """

    accuracy: float
    weighted_f1: float
    wte: float
    lsii: float | None
    per_class_f1: tuple[float, ...]
    config_digest: str
    seed: int

    def __post_init__(self) -> None:
        for name in ("accuracy", "weighted_f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not (math.isfinite(self.wte) and self.wte >= 0.0):
            raise ValueError(f"wte must be finite and >= 0, got {self.wte}")
        if self.lsii is not None and not 0.0 <= self.lsii <= 1.0:
            raise ValueError(f"lsii must lie in [0, 1], got {self.lsii}")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "wte": self.wte,
            "lsii": self.lsii,
            "per_class_f1": list(self.per_class_f1),
            "config_digest": self.config_digest,
            "seed": self.seed,
        }
