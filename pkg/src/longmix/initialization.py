"""Starting responsibilities and multi-start fitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import as_matrix
from .em import FitConfig, Responsibilities, fit
from .exceptions import AllStartsFailedError, InvalidRequestError, LongmixError

log = logging.getLogger(__name__)

STRATEGIES = ("kmeans", "random", "mixed")


@dataclass(frozen=True)
class InitSpec:
    """How to generate starts.

    ``strategy="mixed"`` runs ``ceil(n_starts / 2)`` k-means starts followed
    by random starts for the rest.
    """

    strategy: str = "mixed"
    n_starts: int = 10
    seed: int = 0
    kmeans_max_iter: int = 100

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidRequestError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.n_starts < 1:
            raise InvalidRequestError("n_starts must be >= 1")

    def start_kinds(self):
        if self.strategy == "mixed":
            n_km = (self.n_starts + 1) // 2
            return ["kmeans"] * n_km + ["random"] * (self.n_starts - n_km)
        return [self.strategy] * self.n_starts


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _check_g(n, g):
    if g < 1 or g > n:
        raise InvalidRequestError(f"cannot form {g} clusters from {n} rows")


def _nearest(x, centers):
    d2 = (x * x).sum(axis=1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(axis=1)[None, :]
    # argmin returns the lowest index on ties
    return np.argmin(d2, axis=1), d2


def kmeans_labels(data, g: int, seed=None, max_iter: int = 100) -> np.ndarray:
    """Lloyd's algorithm from ``g`` distinct random rows.

    Empty clusters are reseeded with the point farthest from its centroid.
    """
    x = as_matrix(data)
    n = x.shape[0]
    _check_g(n, g)
    rng = _rng(seed)
    _, first = np.unique(x, axis=0, return_index=True)
    pool = np.sort(first)
    if len(pool) < g:
        pool = np.arange(n)
    centers = x[rng.choice(pool, size=g, replace=False)].copy()
    labels = None
    for _ in range(max_iter):
        new, d2 = _nearest(x, centers)
        for k in range(g):
            if not np.any(new == k):
                # farthest point from its own centroid
                own = d2[np.arange(n), new]
                counts = np.bincount(new, minlength=g)
                own = np.where(counts[new] > 1, own, -np.inf)
                i = int(np.argmax(own))
                new[i] = k
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(g):
            centers[k] = x[labels == k].mean(axis=0)
    return labels


def kmeans_init(data, g: int, seed=None, max_iter: int = 100) -> Responsibilities:
    """One-hot responsibilities from a k-means partition.

    Components are numbered by first appearance in the data, so equal
    partitions give equal responsibilities whatever the centroid order.
    """
    labels = kmeans_labels(data, g, seed, max_iter)
    _, first = np.unique(labels, return_index=True)
    rank = np.empty(g, dtype=int)
    rank[labels[np.sort(first)]] = np.arange(len(first))
    return Responsibilities.from_labels(rank[labels], g)


def random_init(n: int, g: int, seed=None, max_tries: int = 1000) -> Responsibilities:
    """Uniformly random one-hot responsibilities with every component nonempty."""
    _check_g(n, g)
    rng = _rng(seed)
    for _ in range(max_tries):
        labels = rng.integers(0, g, size=n)
        if len(np.unique(labels)) == g:
            return Responsibilities.from_labels(labels, g)
    # n close to g: fall back to a random surjection
    labels = rng.integers(0, g, size=n)
    labels[rng.permutation(n)[:g]] = np.arange(g)
    return Responsibilities.from_labels(labels, g)


def start_seeds(seed, n_starts):
    """Independent per-start seed sequences derived from a master seed."""
    return np.random.SeedSequence(seed).spawn(n_starts)


def make_starts(data, g: int, spec: InitSpec):
    x = as_matrix(data)
    starts = []
    for kind, ss in zip(spec.start_kinds(), start_seeds(spec.seed, spec.n_starts)):
        rng = np.random.default_rng(ss)
        if kind == "kmeans":
            starts.append((kind, kmeans_init(x, g, rng, spec.kmeans_max_iter)))
        else:
            starts.append((kind, random_init(x.shape[0], g, rng)))
    return starts


def multi_start_fit(data, g: int, q: int, constraint, spec: Optional[InitSpec] = None,
                    config: Optional[FitConfig] = None, return_all: bool = False):
    """Run :func:`~longmix.em.fit` from every start and keep the best.

    The winner has the highest final log-likelihood among successful starts
    that converged, or among all successful starts when none converged (lowest
    start index on ties).  A start whose responsibilities repeat an earlier
    start's reuses that outcome, since the fit is deterministic.  Raises :class:`AllStartsFailedError` when
    no start succeeds.  With ``return_all`` the per-start results (None for
    failures) and diagnostics are returned as well.
    """
    spec = spec or InitSpec()
    config = config or FitConfig()
    n, p = as_matrix(data).shape
    _check_g(n, g)
    if not 1 <= q < p:
        raise InvalidRequestError(f"need 1 <= q < p, got q={q}, p={p}")
    results = []
    failures = []
    best = None
    seen = {}
    for i, (kind, init) in enumerate(make_starts(data, g, spec)):
        key = init.z_hat.tobytes()
        if key in seen:
            j = seen[key]
            if results[j] is None:
                failures.append(f"start {i} ({kind}): same start as {j}")
            results.append(results[j])
            continue
        seen[key] = i
        try:
            res = fit(data, g, q, constraint, init, config)
        except LongmixError as exc:
            failures.append(f"start {i} ({kind}): {exc}")
            log.debug("start %d failed: %s", i, exc)
            results.append(None)
            continue
        results.append(res)
    ok = [r for r in results if r is not None]
    if not ok:
        raise AllStartsFailedError(failures)
    # converged starts win over ones stopped by max_iter
    pool = [r for r in ok if r.converged] or ok
    for res in pool:
        if best is None or res.loglik > best.loglik:
            best = res
    if return_all:
        return best, results, failures
    return best
