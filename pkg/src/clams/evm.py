"""External validation measures between clusterings, and Spearman rank correlation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .core import as_labels
from .errors import EmptyOverlap, LengthMismatch, TooFewClusterings, ZeroVariance

EVMS = ("arand", "ami", "vm", "homo", "comp")


@dataclass(frozen=True)
class Contingency:
    table: np.ndarray  # counts, rows = classes of the first clustering
    rows: np.ndarray  # row marginals
    cols: np.ndarray  # column marginals

    @property
    def n(self) -> int:
        return int(self.table.sum())


def contingency(c1, c2, unassigned: str = "exclude") -> Contingency:
    """Co-occurrence counts of two labelings.

    `unassigned="exclude"` drops points labelled -1 in either input;
    `"singleton"` gives every such point its own cluster instead.
    """
    a, b = as_labels(c1), as_labels(c2)
    if len(a) != len(b):
        raise LengthMismatch(f"clusterings have lengths {len(a)} and {len(b)}")
    if unassigned == "singleton":
        a, b = _singletons(a), _singletons(b)
    elif unassigned == "exclude":
        keep = (a >= 0) & (b >= 0)
        a, b = a[keep], b[keep]
    else:
        raise ValueError(f"unknown unassigned mode {unassigned!r}")
    if len(a) == 0:
        raise EmptyOverlap("no point is assigned in both clusterings")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return Contingency(table, table.sum(axis=1), table.sum(axis=0))


def _singletons(labels: np.ndarray) -> np.ndarray:
    out = labels.copy()
    free = np.flatnonzero(out < 0)
    out[free] = out.max(initial=-1) + 1 + np.arange(len(free))
    return out


def adjusted_rand(c1, c2, unassigned: str = "exclude") -> float:
    ct = contingency(c1, c2, unassigned)
    if len(ct.rows) == 1 and len(ct.cols) == 1:
        return 1.0
    # exact integer pair counts; the ratio below is scaled by 2 * C(n, 2) so only the final division rounds
    pairs = lambda counts: sum(int(c) * (int(c) - 1) // 2 for c in counts.ravel())  # noqa: E731
    index, sum_a, sum_b, total = pairs(ct.table), pairs(ct.rows), pairs(ct.cols), ct.n * (ct.n - 1) // 2
    num = 2 * (index * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


def _entropy(counts: np.ndarray) -> float:
    counts = counts[counts > 0].astype(float)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def mutual_info(ct: Contingency) -> float:
    n = ct.n
    i, j = np.nonzero(ct.table)
    nij = ct.table[i, j].astype(float)
    return float((nij / n * np.log(n * nij / (ct.rows[i] * ct.cols[j]))).sum())


def expected_mutual_info(ct: Contingency) -> float:
    """E[MI] under random relabelling with fixed marginals (hypergeometric model)."""
    n = ct.n
    total = 0.0
    lg_n = gammaln(n + 1)
    for a in ct.rows:
        for b in ct.cols:
            lo, hi = max(1, a + b - n), min(a, b)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=float)
            log_p = (
                gammaln(a + 1) + gammaln(b + 1) + gammaln(n - a + 1) + gammaln(n - b + 1)
                - lg_n - gammaln(nij + 1) - gammaln(a - nij + 1) - gammaln(b - nij + 1)
                - gammaln(n - a - b + nij + 1)
            )
            total += float((nij / n * np.log(n * nij / (a * b)) * np.exp(log_p)).sum())
    return total


def adjusted_mutual_info(c1, c2, unassigned: str = "exclude") -> float:
    ct = contingency(c1, c2, unassigned)
    mi = mutual_info(ct)
    emi = expected_mutual_info(ct)
    norm = 0.5 * (_entropy(ct.rows) + _entropy(ct.cols))
    denom = norm - emi
    if abs(denom) < 1e-15:
        return 0.0
    return float((mi - emi) / denom)


def homogeneity_completeness_v(c1, c2, unassigned: str = "exclude") -> tuple[float, float, float]:
    """c1 holds the reference classes, c2 the predicted clusters."""
    ct = contingency(c1, c2, unassigned)
    h_c, h_k = _entropy(ct.rows), _entropy(ct.cols)
    mi = mutual_info(ct)
    # H(C|K) = H(C) - MI
    h = 1.0 if h_c == 0 else 1.0 - (h_c - mi) / h_c
    c = 1.0 if h_k == 0 else 1.0 - (h_k - mi) / h_k
    v = 0.0 if h + c == 0 else 2.0 * h * c / (h + c)
    return h, c, v


def evm_score(c1, c2, evm: str, unassigned: str = "exclude") -> float:
    if evm == "arand":
        return adjusted_rand(c1, c2, unassigned)
    if evm == "ami":
        return adjusted_mutual_info(c1, c2, unassigned)
    if evm in ("vm", "homo", "comp"):
        h, c, v = homogeneity_completeness_v(c1, c2, unassigned)
        return {"vm": v, "homo": h, "comp": c}[evm]
    raise ValueError(f"unknown evm {evm!r}; choose from {EVMS}")


def ground_truth_ambiguity(clusterings: Sequence, evm: str = "ami", unassigned: str = "exclude") -> float:
    """1 - mean pairwise agreement between observers' clusterings, clipped to [0, 1]."""
    if len(clusterings) < 2:
        raise TooFewClusterings("need at least 2 clusterings")
    labels = [as_labels(c) for c in clusterings]
    if len({len(l) for l in labels}) != 1:
        raise LengthMismatch("clusterings differ in length")
    scores = []
    for a, b in itertools.combinations(labels, 2):
        try:
            scores.append(evm_score(a, b, evm, unassigned))
        except EmptyOverlap:
            continue
    if not scores:
        raise EmptyOverlap("every clustering pair lacked co-assigned points")
    return float(min(1.0, max(0.0, 1.0 - float(np.mean(scores)))))


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    sorted_v = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if len(a) != len(b):
        raise LengthMismatch(f"sequences have lengths {len(a)} and {len(b)}")
    if len(a) < 3:
        raise LengthMismatch("spearman_rho needs at least 3 observations")
    ra, rb = average_ranks(a), average_ranks(b)
    da, db = ra - ra.mean(), rb - rb.mean()
    sa, sb = float((da * da).sum()), float((db * db).sum())
    if sa == 0 or sb == 0:
        raise ZeroVariance("one sequence is constant")
    rho = float((da * db).sum()) / math.sqrt(sa * sb)
    return max(-1.0, min(1.0, rho))
