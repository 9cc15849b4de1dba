"""External clustering evaluation.

Mutual information, its expectation under the hypergeometric permutation
model, adjusted mutual information (arithmetic-mean normalisation),
majority-rule mapping of clusters to classes, confusion matrices and the
per-class sensitivity/specificity derived from them. Logs are natural.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ROW_TRUTH = "row-truth"
COLUMN_TRUTH = "column-truth"


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or np.any(counts < 0):
            raise ValueError("counts must be a 2-D table of non-negative integers")
        if counts.sum() < 1:
            raise ValueError("contingency table is empty")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns are (mapped) predicted classes."""

    classes: tuple[str, ...]
    counts: np.ndarray


def _check_pair(labels_a, labels_b):
    a = np.asarray(labels_a).reshape(-1)
    b = np.asarray(labels_b).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"labelings differ in length: {a.size} vs {b.size}")
    if a.size < 1:
        raise ValueError("labelings are empty")
    return a, b


def contingency(labels_a, labels_b) -> ContingencyTable:
    """Joint counts; rows follow the sorted distinct values of ``labels_a``."""
    a, b = _check_pair(labels_a, labels_b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    counts = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(counts, (ai.reshape(-1), bi.reshape(-1)), 1)
    return ContingencyTable(counts)


def entropy(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    counts = counts[counts > 0]
    n = counts.sum()
    # same rounding as the diagonal terms of mutual_information, so that
    # MI(U, U) == H(U) bit for bit
    return float(np.sum(counts / n * np.log(n / counts)))


def mutual_information(table: ContingencyTable) -> float:
    n = table.total
    counts = table.counts.astype(np.float64)
    a = table.row_sums.astype(np.float64)
    b = table.col_sums.astype(np.float64)
    i, j = np.nonzero(counts)
    nij = counts[i, j]
    mi = np.sum(nij / n * np.log(n * nij / (a[i] * b[j])))
    return max(float(mi), 0.0)


def expected_mi(table: ContingencyTable) -> float:
    """E[MI] over all labelings with the same margins.

    For every cell the overlap n_ij follows a hypergeometric law on
    [max(1, a_i + b_j - N), min(a_i, b_j)]; the zero-overlap term contributes
    nothing.
    """
    n = table.total
    a = table.row_sums
    b = table.col_sums
    # log k! for k = 0..N
    logfact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, n + 1)))])
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            log_pmf = (logfact[ai] + logfact[bj] + logfact[n - ai] + logfact[n - bj]
                       - logfact[n] - logfact[nij] - logfact[ai - nij] - logfact[bj - nij]
                       - logfact[n - ai - bj + nij])
            terms = nij / n * np.log(n * nij / (ai * bj)) * np.exp(log_pmf)
            emi += float(terms.sum())
    return emi


def ami(labels_a, labels_b, details: bool = False):
    """Adjusted mutual information, (MI - EMI) / (mean(H_a, H_b) - EMI).

    Returns 0 when the denominator vanishes (below 1e-12), which covers a
    constant labeling on either side. With ``details`` a dict with the
    intermediate quantities is returned instead.
    """
    a, b = _check_pair(labels_a, labels_b)
    table = contingency(a, b)
    mi = mutual_information(table)
    h_a = entropy(table.row_sums)
    h_b = entropy(table.col_sums)
    emi = expected_mi(table)
    denom = 0.5 * (h_a + h_b) - emi
    if abs(denom) < 1e-12:
        score = 0.0
    else:
        score = (mi - emi) / denom
    if details:
        return {"ami": score, "mi": mi, "emi": emi, "entropy_a": h_a, "entropy_b": h_b}
    return score


def majority_map(pred, truth) -> dict[int, int]:
    """Map each predicted cluster to its most frequent true class (ties: smaller class)."""
    pred, truth = _check_pair(pred, truth)
    mapping = {}
    for cluster in np.unique(pred):
        members = truth[pred == cluster]
        classes, counts = np.unique(members, return_counts=True)
        # np.unique sorts, and argmax returns the first maximum
        mapping[int(cluster)] = int(classes[np.argmax(counts)])
    return mapping


def confusion_matrix(pred, truth, mapping: dict[int, int],
                     class_names: Sequence[str] | None = None) -> ConfusionMatrix:
    pred, truth = _check_pair(pred, truth)
    n_classes = len(class_names) if class_names is not None else int(truth.max()) + 1
    if class_names is None:
        class_names = [str(c) for c in range(n_classes)]
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for p, t in zip(pred, truth):
        try:
            mapped = mapping[int(p)]
        except KeyError:
            raise ValueError(f"cluster {int(p)} has no mapping") from None
        counts[int(t), mapped] += 1
    return ConfusionMatrix(tuple(class_names), counts)


def sensitivity_specificity(cm, class_index: int, convention: str = ROW_TRUTH):
    """Per-class (sensitivity, specificity); ``None`` marks a zero denominator.

    ``row-truth`` is the usual reading of a truth-by-prediction matrix.
    ``column-truth`` applies the same formulas to the transpose.
    """
    counts = np.asarray(getattr(cm, "counts", cm), dtype=np.int64)
    if convention == COLUMN_TRUTH:
        counts = counts.T
    elif convention != ROW_TRUTH:
        raise ValueError(f"unknown convention {convention!r}")
    if not 0 <= class_index < counts.shape[0]:
        raise ValueError(f"class index {class_index} out of range")
    tp = counts[class_index, class_index]
    fn = counts[class_index].sum() - tp
    fp = counts[:, class_index].sum() - tp
    tn = counts.sum() - tp - fn - fp
    sens = tp / (tp + fn) if tp + fn else None
    spec = tn / (tn + fp) if tn + fp else None
    return (None if sens is None else float(sens), None if spec is None else float(spec))


def macro_average(values) -> float:
    values = list(values)
    if not values:
        raise ValueError("cannot average an empty list")
    return math.fsum(values) / len(values)


def purity(pred, truth) -> float:
    pred, truth = _check_pair(pred, truth)
    table = contingency(pred, truth)
    return float(table.counts.max(axis=1).sum() / table.total)


def evaluate(pred, truth, class_names: Sequence[str]) -> dict:
    """Everything that goes into ``metrics.json`` for one clustering."""
    pred, truth = _check_pair(pred, truth)
    scores = ami(truth, pred, details=True)
    mapping = majority_map(pred, truth)
    cm = confusion_matrix(pred, truth, mapping, class_names)
    per_class = {}
    for convention in (ROW_TRUTH, COLUMN_TRUTH):
        rows = {}
        for idx, name in enumerate(class_names):
            sens, spec = sensitivity_specificity(cm, idx, convention)
            rows[name] = {"sens": sens, "spec": spec}
        per_class[convention] = rows
    return {
        **scores,
        "n_clusters": int(len(np.unique(pred))),
        "purity": purity(pred, truth),
        "classes": list(class_names),
        "confusion": cm.counts.tolist(),
        "per_class": per_class,
    }


def write_metrics_json(metrics: dict, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=2)
        fh.write("\n")
