"""BIC and partition-agreement scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidRequestError


def bic(loglik: float, rho: int, n: int) -> float:
    """Bayesian information criterion ``2 l - rho log n`` (larger is better)."""
    if n < 1:
        raise InvalidRequestError(f"n must be >= 1, got {n}")
    return 2.0 * loglik - rho * np.log(n)


@dataclass(frozen=True)
class CrossTab:
    """Counts of (row label, column label) pairs.

    ``rows`` and ``cols`` hold the distinct labels in order of first
    appearance.
    """

    table: np.ndarray
    rows: tuple
    cols: tuple

    @property
    def total(self) -> int:
        return int(self.table.sum())

    def format(self) -> str:
        width = max(len(str(v)) for v in [*self.rows, *self.cols, self.table.max(initial=0)]) + 1
        head = " " * width + "".join(f"{str(c):>{width}}" for c in self.cols)
        lines = [head]
        for r, row in zip(self.rows, self.table):
            lines.append(f"{str(r):>{width}}" + "".join(f"{v:>{width}d}" for v in row))
        return "\n".join(lines)


def _check_pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or a.shape != b.shape:
        raise InvalidRequestError(f"label vectors differ in shape: {a.shape} vs {b.shape}")
    return a, b


def _codes(labels):
    # first-appearance order, unlike np.unique's sorted order
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse.ravel()], tuple(labels[np.sort(first)].tolist())


def cross_tab(a, b) -> CrossTab:
    """Contingency table of labelling ``a`` (rows) against ``b`` (columns)."""
    a, b = _check_pair(a, b)
    ia, rows = _codes(a)
    ib, cols = _codes(b)
    table = np.zeros((len(rows), len(cols)), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return CrossTab(table, rows, cols)


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2.0


def _pair_counts(table):
    table = np.asarray(table)
    n = table.sum()
    same_both = _comb2(table).sum()
    same_a = _comb2(table.sum(axis=1)).sum()
    same_b = _comb2(table.sum(axis=0)).sum()
    return n, same_both, same_a, same_b


def rand_index(a, b) -> float:
    """Fraction of object pairs on which two partitions agree."""
    a, b = _check_pair(a, b)
    if len(a) < 2:
        raise InvalidRequestError("need at least two objects")
    n, both, sa, sb = _pair_counts(cross_tab(a, b).table)
    total = _comb2(n)
    # agreements = pairs together in both + pairs apart in both
    return float((total + 2 * both - sa - sb) / total)


def ari_from_table(table) -> float:
    """Adjusted Rand index from a contingency table (Hubert and Arabie)."""
    n, both, sa, sb = _pair_counts(table)
    if n < 2:
        raise InvalidRequestError("need at least two objects")
    expected = sa * sb / _comb2(n)
    maximum = 0.5 * (sa + sb)
    if maximum == expected:
        # only reachable when both partitions are trivial in the same way
        return 1.0
    return float((both - expected) / (maximum - expected))


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected Rand index of two labellings."""
    a, b = _check_pair(a, b)
    return ari_from_table(cross_tab(a, b).table)
