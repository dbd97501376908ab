"""CSV ingestion, preprocessing and result files.

Files written by :func:`emit_results`:

``assignments.csv``
    ``row,label,resp_1,...,resp_G`` (row ids and labels are 0-based).
``bic_table.csv``
    ``g,q,constraint,loglik,rho,bic,converged``, one row per fitted cell.
``params.json``
    the fitted :class:`~longmix.core.ModelParams`.
``trajectories.csv``
    ``time,group_1,...,group_G``: the mean trajectory ``Lambda xi_g`` of each
    group at each time point.

Floats are written with the shortest representation that round-trips.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .core import Dataset, ModelConstraint, ModelParams
from .em import FitResult
from .exceptions import DataError
from .selection import SelectionReport


@dataclass(frozen=True)
class Preprocessing:
    """Applied in order: ``x -> -log2(x)``, then per-column standardization."""

    neg_log2: bool = False
    standardize_columns: bool = False


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_csv(path, has_labels: bool = False) -> Dataset:
    """Read a comma-separated numeric matrix.

    A first row containing any non-numeric cell is taken as a header.  With
    ``has_labels`` the last column holds integer class labels.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path} is empty")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path} has a header but no data")
    width = len(header) if header is not None else len(rows[0])
    offset = 1 if header is not None else 0
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"expected {width} fields, found {len(row)}", row=i + offset)
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r}", row=i + offset, column=j) from None
    labels = None
    names = header
    if has_labels:
        if width < 3:
            raise DataError("a label column needs at least two data columns beside it")
        lab = values[:, -1]
        if np.any(lab != np.round(lab)):
            bad = int(np.flatnonzero(lab != np.round(lab))[0])
            raise DataError("labels must be integers", row=bad + offset, column=width - 1)
        labels = lab.astype(np.int64)
        values = values[:, :-1]
        names = header[:-1] if header is not None else None
    return Dataset(values, labels, tuple(names) if names is not None else None)


def write_dataset(data: Dataset, path) -> None:
    """Write ``data`` with a header; labels, when present, go in a trailing ``label`` column."""
    names = data.time_names or tuple(f"t{j + 1}" for j in range(data.p))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"] if data.labels is not None else list(names))
        for i, row in enumerate(data.x):
            cells = [_fmt(v) for v in row]
            if data.labels is not None:
                cells.append(_fmt(data.labels[i]))
            w.writerow(cells)


def read_labels(path) -> np.ndarray:
    """Labels from a CSV: the ``label`` column when a header names one, else the last column."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path} is empty")
    col = -1
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip().lower() for c in rows[0]]
        if "label" in header:
            col = header.index("label")
        rows = rows[1:]
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(row[col].strip())
        except IndexError:
            raise DataError("missing label field", row=i) from None
    return np.array(out)


def preprocess(data: Dataset, spec: Preprocessing) -> Dataset:
    """Negative base-2 logarithm and/or column standardization (unbiased variance)."""
    x = np.array(data.x, dtype=float)
    if spec.neg_log2:
        bad = np.argwhere(x <= 0)
        if len(bad):
            raise DataError("log transform needs positive entries", row=int(bad[0, 0]), column=int(bad[0, 1]))
        x = -np.log2(x)
    if spec.standardize_columns:
        if x.shape[0] < 2:
            raise DataError("standardization needs at least two rows")
        sd = x.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise DataError("constant column cannot be standardized", column=int(np.flatnonzero(sd == 0)[0]))
        x = (x - x.mean(axis=0)) / sd
    return Dataset(x, data.labels, data.time_names)


def params_to_dict(params: ModelParams) -> dict:
    return {
        "constraint": params.constraint.value,
        "g": params.g_components,
        "q": params.q_latent,
        "p": params.p,
        "pi": params.pi.tolist(),
        "xi": params.xi.tolist(),
        "t": params.t.tolist(),
        "d": params.d.tolist(),
        "lambda": params.lam.tolist(),
        "psi": params.psi.tolist(),
    }


def params_from_dict(obj: dict) -> ModelParams:
    try:
        return ModelParams(
            pi=obj["pi"], xi=obj["xi"], t=obj["t"], d=obj["d"],
            lam=obj["lambda"], psi=obj["psi"], constraint=ModelConstraint.parse(obj["constraint"]),
        )
    except KeyError as exc:
        raise DataError(f"params file is missing field {exc}") from None


def save_params(params: ModelParams, path) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_dict(params), fh, indent=1)
        fh.write("\n")


def load_params(path) -> ModelParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def emit_results(result: Union[FitResult, SelectionReport], out_dir, time_names=None) -> dict:
    """Write the four result files for a fit or a selection report.

    For a report, ``bic_table.csv`` lists every cell (failed ones with empty
    numeric fields) and the remaining files describe the selected fit.
    Returns a mapping from file kind to path.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"{out} is not writable")
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from None

    if isinstance(result, SelectionReport):
        fit = result.best_fit
        table = [(e.g, e.q, e.constraint.value, e.loglik if e.ok else "", e.rho,
                  e.bic if e.ok else "", e.converged) for e in result.entries]
    else:
        fit = result
        table = [(fit.g, fit.q, fit.constraint.value, fit.loglik, fit.rho, fit.bic, fit.converged)]

    paths = {k: out / f"{k}.{ext}" for k, ext in
             (("assignments", "csv"), ("bic_table", "csv"), ("params", "json"), ("trajectories", "csv"))}
    z = fit.responsibilities.z_hat
    G = z.shape[1]
    _write_rows(paths["assignments"], ["row", "label", *[f"resp_{g + 1}" for g in range(G)]],
                ([i, int(fit.assignments[i]), *z[i]] for i in range(z.shape[0])))
    _write_rows(paths["bic_table"], ["g", "q", "constraint", "loglik", "rho", "bic", "converged"], table)
    save_params(fit.params, paths["params"])
    means = fit.params.means()
    names = time_names or [f"t{j + 1}" for j in range(means.shape[1])]
    _write_rows(paths["trajectories"], ["time", *[f"group_{g + 1}" for g in range(G)]],
                ([names[j], *means[:, j]] for j in range(means.shape[1])))
    return paths
