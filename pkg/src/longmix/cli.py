"""Command line entry point: ``longmix {simulate,fit,select,score}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 when every fit failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .core import ModelConstraint
from .em import FitConfig
from .exceptions import (
    AllStartsFailedError,
    DataError,
    EmptyReportError,
    FitFailedError,
    InvalidRequestError,
    LongmixError,
)
from .initialization import InitSpec, multi_start_fit
from .io import Preprocessing, emit_results, preprocess, read_csv, read_labels, write_dataset
from .metrics import adjusted_rand_index, cross_tab, rand_index
from .selection import grid_search
from .simulation import simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FAILED = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _int_range(text: str) -> range:
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if b < a:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return range(a, b + 1)


def _models(text: str):
    try:
        return [ModelConstraint.parse(c) for c in text.split(",") if c.strip()]
    except InvalidRequestError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(sp):
    sp.add_argument("--input", required=True, help="CSV matrix, one subject per row")
    sp.add_argument("--labels", action="store_true", help="last input column holds class labels")
    sp.add_argument("--out", default=None, help="directory for result files")
    sp.add_argument("--neg-log2", action="store_true", help="replace x by -log2(x) first")
    sp.add_argument("--standardize", action="store_true", help="scale columns to mean 0, variance 1")
    sp.add_argument("--starts", type=int, default=10, help="number of EM starts")
    sp.add_argument("--init", default="mixed", choices=("mixed", "kmeans", "random"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epsilon", type=float, default=1e-5)
    sp.add_argument("--max-iter", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="longmix", description="Latent Gaussian mixtures for longitudinal data.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="write a simulated dataset")
    sp.add_argument("--design", type=int, choices=(1, 2), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output CSV (with a trailing label column)")

    sp = sub.add_parser("fit", help="fit one (G, q, model) cell")
    _add_common(sp)
    sp.add_argument("--g", type=int, required=True)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--model", type=ModelConstraint.parse, default=ModelConstraint.VVA)

    sp = sub.add_parser("select", help="grid search by BIC")
    _add_common(sp)
    sp.add_argument("--g-range", type=_int_range, required=True)
    sp.add_argument("--q-range", type=_int_range, required=True)
    sp.add_argument("--models", type=_models, default=[ModelConstraint.VVA],
                    help="comma separated constraint codes (default VVA)")
    sp.add_argument("--jobs", type=int, default=None, help="worker processes (default LONGMIX_THREADS or 1)")

    sp = sub.add_parser("score", help="compare two labelings")
    sp.add_argument("--truth", required=True)
    sp.add_argument("--pred", required=True)
    return ap


def _load(args):
    data = read_csv(args.input, has_labels=args.labels)
    return preprocess(data, Preprocessing(args.neg_log2, args.standardize))


def _specs(args):
    if args.starts < 1:
        raise InvalidRequestError("--starts must be >= 1")
    return (InitSpec(strategy=args.init, n_starts=args.starts, seed=args.seed),
            FitConfig(epsilon=args.epsilon, max_iter=args.max_iter, seed=args.seed))


def _summary(fit, data, out) -> None:
    print(f"G={fit.g} q={fit.q} model={fit.constraint.value} loglik={fit.loglik:.6f} "
          f"rho={fit.rho} bic={fit.bic:.6f} converged={fit.converged} iterations={fit.iterations}", file=out)
    if data.labels is not None:
        print(f"ARI={adjusted_rand_index(data.labels, fit.assignments):.6f}", file=out)


def _cmd_simulate(args, out):
    write_dataset(simulate(args.design, args.seed), args.out)
    return EXIT_OK


def _cmd_fit(args, out):
    data = _load(args)
    spec, config = _specs(args)
    fit = multi_start_fit(data, args.g, args.q, args.model, spec, config)
    _summary(fit, data, out)
    if args.out:
        emit_results(fit, args.out, data.time_names)
    return EXIT_OK


def _cmd_select(args, out):
    data = _load(args)
    spec, config = _specs(args)
    report = grid_search(data, args.g_range, args.q_range, args.models, spec, config, args.jobs)
    print("g,q,model,loglik,rho,bic,converged", file=out)
    for g, q, code, ll, rho, b, conv in report.bic_table():
        print(f"{g},{q},{code},{ll:.6f},{rho},{b:.6f},{conv}", file=out)
    _summary(report.best_fit, data, out)
    if args.out:
        emit_results(report, args.out, data.time_names)
    return EXIT_OK


def _cmd_score(args, out):
    truth, pred = read_labels(args.truth), read_labels(args.pred)
    if truth.shape != pred.shape:
        raise DataError(f"label files differ in length ({truth.shape[0]} vs {pred.shape[0]})")
    print(f"RI={rand_index(truth, pred):.6f}", file=out)
    print(f"ARI={adjusted_rand_index(truth, pred):.6f}", file=out)
    print(cross_tab(truth, pred).format(), file=out)
    return EXIT_OK


_COMMANDS = {"simulate": _cmd_simulate, "fit": _cmd_fit, "select": _cmd_select, "score": _cmd_score}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args, out)
    except (AllStartsFailedError, EmptyReportError, FitFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except InvalidRequestError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, LongmixError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
