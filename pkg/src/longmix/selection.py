"""Model selection over a grid of (G, q, constraint) by BIC."""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ModelConstraint, as_matrix, count_free_parameters
from .em import FitConfig, FitResult
from .exceptions import EmptyReportError, InvalidRequestError, LongmixError
from .initialization import InitSpec, multi_start_fit

log = logging.getLogger(__name__)

THREADS_ENV = "LONGMIX_THREADS"


@dataclass(frozen=True)
class SelectionEntry:
    g: int
    q: int
    constraint: ModelConstraint
    rho: int
    bic: float = float("nan")
    loglik: float = float("nan")
    converged: bool = False
    fit: Optional[FitResult] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.fit is not None and np.isfinite(self.bic)


@dataclass(frozen=True)
class SelectionReport:
    """Grid of fits sorted by (g, q, constraint); ``best`` indexes the chosen entry."""

    entries: tuple
    best: int
    n: int
    p: int

    @property
    def best_entry(self) -> SelectionEntry:
        return self.entries[self.best]

    @property
    def best_fit(self) -> FitResult:
        return self.entries[self.best].fit

    def bic_table(self):
        """Rows of (g, q, code, loglik, rho, bic, converged)."""
        return [(e.g, e.q, e.constraint.value, e.loglik, e.rho, e.bic, e.converged) for e in self.entries]


def _run_cell(args):
    x, g, q, constraint, spec, config = args
    rho = count_free_parameters(g, x.shape[1], q, constraint)
    try:
        res = multi_start_fit(x, g, q, constraint, spec, config)
    except LongmixError as exc:
        return SelectionEntry(g, q, constraint, rho, error=str(exc))
    return SelectionEntry(g, q, constraint, rho, res.bic, res.loglik, res.converged, res)


def default_jobs() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return 1


def select_best(entries: Sequence[SelectionEntry]) -> int:
    """Index of the largest finite BIC; ties go to smaller rho, then smaller G."""
    ok = [i for i, e in enumerate(entries) if e.ok]
    if not ok:
        raise EmptyReportError("every grid cell failed")
    return min(ok, key=lambda i: (-entries[i].bic, entries[i].rho, entries[i].g, i))


def grid_search(data, g_range, q_range, constraints=(ModelConstraint.VVA,),
                spec: Optional[InitSpec] = None, config: Optional[FitConfig] = None,
                n_jobs: Optional[int] = None) -> SelectionReport:
    """Multi-start fit of every (G, q, constraint) cell and BIC selection.

    Cells run in ``n_jobs`` worker processes (default from the
    ``LONGMIX_THREADS`` environment variable, else 1); the report does not
    depend on the worker count.
    """
    x = as_matrix(data)
    n, p = x.shape
    g_range = sorted(set(int(g) for g in g_range))
    q_range = sorted(set(int(q) for q in q_range))
    constraints = sorted({ModelConstraint.parse(c) for c in constraints}, key=lambda c: c.value)
    if not g_range or not q_range or not constraints:
        raise InvalidRequestError("empty grid")
    if q_range[0] < 1 or q_range[-1] >= p:
        raise InvalidRequestError(f"every q must satisfy 1 <= q < p = {p}")
    spec = spec or InitSpec()
    config = config or FitConfig()
    cells = [(x, g, q, c, spec, config) for g, q, c in itertools.product(g_range, q_range, constraints)]
    n_jobs = default_jobs() if n_jobs is None else max(1, int(n_jobs))
    if n_jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, len(cells))) as pool:
            entries = list(pool.map(_run_cell, cells))
    else:
        entries = [_run_cell(c) for c in cells]
    for e in entries:
        if e.error:
            log.info("cell G=%d q=%d %s failed: %s", e.g, e.q, e.constraint.value, e.error)
    return SelectionReport(tuple(entries), select_best(entries), n, p)
