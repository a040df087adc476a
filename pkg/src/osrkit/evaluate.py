"""Open-set evaluation: closed-set accuracy, AUROC, and the OSCR score.

The open-set score of a sample is its maximum classification logit;
higher means more known-like, and no threshold is ever baked in. AUROC is
computed from the Mann-Whitney rank statistic (ties credited 0.5) and is
cross-checked in tests against the trapezoidal area under the exact ROC
curve. OSCR sweeps every distinct score value and integrates the correct
classification rate on knowns against the false positive rate on
unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvalError, UsageError
from .losses import LossConfig, classification_logits
from .model import Embedder, ReciprocalBank, embed_forward
from .numerics import as_matrix

Curve = list[tuple[float, float, float]]  # (threshold, fpr, tpr-or-ccr)


@dataclass
class EvalReport:
    closed_accuracy: float
    auroc: float
    oscr: float
    roc_curve: Curve
    oscr_curve: Curve


def predict_closed(logits) -> np.ndarray:
    """Per-row argmax labels; ties break to the lowest index."""
    z = as_matrix(logits, "logits")
    if z.shape[0] == 0:
        raise UsageError("empty batch")
    return z.argmax(axis=1)


def openset_score(logits) -> np.ndarray:
    """Max logit per row. Higher means more known-like."""
    z = as_matrix(logits, "logits")
    return z.max(axis=1)


def _as_score_flags(scores, is_known) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    k = np.asarray(is_known, dtype=bool)
    if s.ndim != 1 or k.shape != s.shape:
        raise EvalError("scores and is_known must be 1-D of equal length")
    if not np.isfinite(s).all():
        raise EvalError("scores contain non-finite entries")
    if not k.any() or k.all():
        raise EvalError("need at least one known and one unknown sample")
    return s, k


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks, ties receiving the mean of their rank span."""
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    start = 0
    for i in range(1, x.size + 1):
        if i == x.size or sx[i] != sx[start]:
            ranks[order[start:i]] = 0.5 * (start + 1 + i)
            start = i
    return ranks


def _trapezoid(xs: np.ndarray, ys: np.ndarray) -> float:
    return float(((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) * 0.5).sum())


def auroc(scores, is_known) -> float:
    """Rank-based AUROC of known-vs-unknown detection, ties credited 0.5."""
    s, k = _as_score_flags(scores, is_known)
    n_known = int(k.sum())
    n_unknown = s.size - n_known
    ranks = _average_ranks(s)
    u = ranks[k].sum() - n_known * (n_known + 1) / 2.0
    return float(u / (n_known * n_unknown))


def roc_points(scores, is_known) -> Curve:
    """Exact ROC sweep over every distinct score, descending.

    Returns (threshold, fpr, tpr) triples starting at (+inf, 0, 0); a
    sample counts as predicted-known when its score is >= the threshold.
    """
    s, k = _as_score_flags(scores, is_known)
    n_known = int(k.sum())
    n_unknown = s.size - n_known
    thresholds = np.unique(s)[::-1]
    curve: Curve = [(float("inf"), 0.0, 0.0)]
    for t in thresholds:
        sel = s >= t
        tpr = float((sel & k).sum() / n_known)
        fpr = float((sel & ~k).sum() / n_unknown)
        curve.append((float(t), fpr, tpr))
    return curve


def roc_auc_trapezoid(scores, is_known) -> float:
    """Trapezoidal area under the exact ROC curve (cross-check for auroc)."""
    curve = roc_points(scores, is_known)
    fpr = np.array([p[1] for p in curve])
    tpr = np.array([p[2] for p in curve])
    return _trapezoid(fpr, tpr)


def oscr(logits, true_labels, is_known) -> tuple[float, Curve]:
    """Open-set classification rate: area of CCR vs FPR over all thresholds.

    CCR(t) is the fraction of known samples that are correctly classified
    and score >= t; FPR(t) is the fraction of unknown samples scoring
    >= t. ``true_labels`` is only consulted at known positions.
    """
    z = as_matrix(logits, "logits")
    s = openset_score(z)
    _, k = _as_score_flags(s, is_known)
    y = np.asarray(true_labels)
    if y.shape != (z.shape[0],):
        raise EvalError(f"true_labels must have length {z.shape[0]}")
    pred = predict_closed(z)
    correct_known = k & (pred == y)
    n_known = int(k.sum())
    n_unknown = s.size - n_known
    thresholds = np.unique(s)[::-1]
    curve: Curve = [(float("inf"), 0.0, 0.0)]
    for t in thresholds:
        sel = s >= t
        ccr = float((sel & correct_known).sum() / n_known)
        fpr = float((sel & ~k).sum() / n_unknown)
        curve.append((float(t), fpr, ccr))
    fpr = np.array([p[1] for p in curve])
    ccr = np.array([p[2] for p in curve])
    return _trapezoid(fpr, ccr), curve


def evaluate(embedder: Embedder, bank: ReciprocalBank, split, config: LossConfig) -> EvalReport:
    """Score a frozen model on an open-set split (known + unknown test sets)."""
    config.validate()
    if len(split.test_known) == 0 or len(split.test_unknown) == 0:
        raise EvalError("split must contain known and unknown test samples")
    feats_known, _ = embed_forward(embedder, split.test_known.inputs)
    feats_unknown, _ = embed_forward(embedder, split.test_unknown.inputs)
    logits_known = classification_logits(
        feats_known, bank, config.classification_metric, config.tau
    )
    logits_unknown = classification_logits(
        feats_unknown, bank, config.classification_metric, config.tau
    )
    preds = predict_closed(logits_known)
    closed_acc = float((preds == split.test_known.labels).mean())

    logits = np.vstack([logits_known, logits_unknown])
    is_known = np.concatenate(
        [np.ones(len(split.test_known), dtype=bool), np.zeros(len(split.test_unknown), dtype=bool)]
    )
    labels = np.concatenate(
        [split.test_known.labels, np.full(len(split.test_unknown), -1, dtype=np.int64)]
    )
    scores = openset_score(logits)
    auc = auroc(scores, is_known)
    roc = roc_points(scores, is_known)
    oscr_value, oscr_curve = oscr(logits, labels, is_known)
    return EvalReport(closed_acc, auc, oscr_value, roc, oscr_curve)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_roc_csv(path, curve: Curve) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,fpr,tpr\n")
        for t, fpr, tpr in curve:
            fh.write(f"{_fmt(t)},{_fmt(fpr)},{_fmt(tpr)}\n")


def write_oscr_csv(path, curve: Curve) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,fpr,ccr\n")
        for t, fpr, ccr in curve:
            fh.write(f"{_fmt(t)},{_fmt(fpr)},{_fmt(ccr)}\n")
