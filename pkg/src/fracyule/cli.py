"""Command-line front end: ``simulate``, ``pmf``, ``estimate``, ``study``.

Data go to stdout (or ``--output``), diagnostics to stderr.  Exit codes:
0 success, 2 usage or malformed input, 3 I/O failure, 4 solver failure.
The default seed comes from the ``FYP_SEED`` environment variable.
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .distributions import FypParams, population_mean, population_variance, state_pmf
from .estimation import DEFAULT_KAPPAS, estimate_fractional_moments, estimate_log_moments
from .exceptions import CancellationError, DegenerateDataError, DomainError, EstimationError, FypError
from .sampling import RandomStream, simulate_classical_yule, simulate_path_alg2
from .study import DEFAULT_NU_GRID, STUDY_COLUMNS, StudyConfig, run_study

SEED_ENV = "FYP_SEED"
SIMULATE_STREAM_ID = 1

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4

# the mixture fallback is trusted only while normalization holds to this
PMF_TOLERANCE = 1e-8


class UsageError(Exception):
    pass


def _version():
    from . import __version__

    return __version__


def _fmt(x):
    """Shortest round-trip text for a float; blank for NaN/None."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _write_text(path, text):
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_manifest(args, command, parameters, outputs):
    """JSON sidecar next to the output file (or at ``--manifest``)."""
    path = args.manifest
    if path is None:
        if args.output == "-":
            return
        path = args.output + ".manifest.json"
    doc = {
        "tool": "fracyule",
        "version": _version(),
        "command": command,
        "seed": args.seed,
        "parameters": parameters,
        "outputs": outputs,
    }
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _seed_default():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if not 0 <= seed < 2**64:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an unsigned 64-bit integer")
    return seed


def _seed_arg(text):
    try:
        seed = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return seed


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _params(args):
    try:
        return FypParams(args.nu, args.lam)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# simulate


GNUPLOT_TEMPLATE = """set datafile separator ','
set key off
set xlabel 'time'
set ylabel 'population'
plot '{data}' using 2:3 every ::1 with steps
"""


def cmd_simulate(args):
    params = _params(args)
    if args.algorithm == "alg1":
        raise UsageError(
            "alg1 yields only the population at a single time, not a path; use alg2 or --classical"
        )
    if args.births < 1:
        raise UsageError(f"--births must be >= 1, got {args.births}")
    stream = RandomStream(args.seed, SIMULATE_STREAM_ID)
    if args.classical:
        params = FypParams(1.0, params.lam)
        path = simulate_classical_yule(stream, params.lam, args.births)
    else:
        path = simulate_path_alg2(stream, params, args.births)
    header = ["index", "birth_time", "population"]
    cols = [np.arange(1, path.n_births + 1), path.birth_times, np.arange(2, path.n_births + 2)]
    if not args.no_sojourn:
        header.append("sojourn")
        cols.append(path.sojourns)
    _write_text(args.output, _csv_text(header, zip(*cols)))
    outputs = {"data": args.output, "columns": header}
    if args.gnuplot:
        _write_text(args.gnuplot, GNUPLOT_TEMPLATE.format(data=args.output))
        outputs["gnuplot"] = args.gnuplot
    _write_manifest(
        args,
        "simulate",
        {"nu": params.nu, "lambda": params.lam, "births": args.births, "algorithm": path.algorithm,
         "stream": path.seed_info},
        outputs,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# pmf


def cmd_pmf(args):
    params = _params(args)
    if not args.t > 0.0:
        raise UsageError(f"--t must be positive, got {args.t}")
    if args.kmax < 1:
        raise UsageError(f"--kmax must be >= 1, got {args.kmax}")
    pmf = state_pmf(params, args.t, args.kmax)
    off = abs(pmf.total - 1.0)
    if "mixture" in pmf.sources and (off > PMF_TOLERANCE or pmf.mixture_error > PMF_TOLERANCE):
        raise CancellationError(
            f"k_max={args.kmax} needs the mixture evaluator and it reports low confidence "
            f"(normalization off by {off:.2e}, quadrature error {pmf.mixture_error:.2e})"
        )
    rows = [(int(k), p) for k, p in zip(pmf.k, pmf.probs)]
    rows += [
        ("tail_mass", pmf.tail_mass),
        ("mean", population_mean(params, args.t)),
        ("variance", population_variance(params, args.t)),
    ]
    _write_text(args.output, _csv_text(["k", "p_k"], rows))
    _write_manifest(
        args,
        "pmf",
        {"nu": params.nu, "lambda": params.lam, "t": args.t, "kmax": args.kmax,
         "mixture_entries": [int(k) for k, s in zip(pmf.k, pmf.sources) if s == "mixture"]},
        {"data": args.output},
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate


def read_durations(text):
    """Sojourns from CSV text: a ``duration`` or ``sojourn`` column, else differenced ``birth_time``."""
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise UsageError(f"malformed CSV: {exc}") from None
    for name in ("duration", "sojourn"):
        if name in fields:
            col = name
            break
    else:
        col = "birth_time" if "birth_time" in fields else None
    if col is None:
        raise UsageError(f"input needs a 'duration', 'sojourn' or 'birth_time' column, got {fields}")
    try:
        values = np.array([float(r[col]) for r in rows], dtype=float)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"non-numeric value in column {col!r}: {exc}") from None
    if col == "birth_time":
        values = np.diff(np.concatenate([[0.0], values]))
        if np.any(values <= 0.0):
            raise UsageError(
                "birth times are not strictly increasing, so differenced sojourns are not positive; "
                "supply the sojourn column instead"
            )
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise UsageError(f"column {col!r} must hold positive finite numbers")
    return values


def cmd_estimate(args):
    durations = read_durations(_read_text(args.input))
    if args.method == "log-moment":
        result = estimate_log_moments(durations)
    else:
        k1 = DEFAULT_KAPPAS[0] if args.kappa1 is None else args.kappa1
        k2 = DEFAULT_KAPPAS[1] if args.kappa2 is None else args.kappa2
        result = estimate_fractional_moments(durations, k1, k2)
    doc = result.to_dict()
    lines = [f"{key}={_fmt(doc[key]) if not isinstance(doc[key], str) else doc[key]}"
             for key in ("nu_hat", "lambda_hat", "n", "method", "converged", "iterations", "residual")]
    lines.append(json.dumps(doc, sort_keys=True))
    sys.stdout.write("\n".join(lines) + "\n")
    if not result.converged:
        print(f"fracyule: solver did not converge (residual {result.residual:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# ---------------------------------------------------------------------------
# study


def cmd_study(args):
    method = {"log-moment": "log_moment", "frac-moment": "fractional_moment"}[args.method]
    try:
        config = StudyConfig(
            nu_grid=args.nu_grid,
            lambda_grid=args.lambda_grid,
            n_list=args.n_list,
            replicates=args.replicates,
            seed=args.seed,
            method=method,
            kappa1=DEFAULT_KAPPAS[0] if args.kappa1 is None else args.kappa1,
            kappa2=DEFAULT_KAPPAS[1] if args.kappa2 is None else args.kappa2,
        )
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    rows = run_study(config, workers=args.workers, timing=args.timing)
    table = [[getattr(r, c) for c in STUDY_COLUMNS] for r in rows]
    _write_text(args.output, _csv_text(STUDY_COLUMNS, table))
    failed = sum(not r.converged for r in rows)
    if failed:
        print(f"fracyule: {failed} of {len(rows)} cells did not converge", file=sys.stderr)
    _write_manifest(
        args,
        "study",
        {"nu_grid": list(config.nu_grid), "lambda_grid": list(config.lambda_grid),
         "n_list": list(config.n_list), "replicates": config.replicates, "method": config.method,
         "kappa1": config.kappa1, "kappa2": config.kappa2},
        {"data": args.output, "columns": list(STUDY_COLUMNS), "failed_cells": failed},
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser(default_seed=0):
    seed_help = f"unsigned 64-bit seed (default: ${SEED_ENV} or 0)"
    # --seed is accepted before or after the subcommand; SUPPRESS keeps the
    # subcommand from overwriting a value given up front
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=_seed_arg, default=argparse.SUPPRESS, help=seed_help)
    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--output", "-o", default="-", help="output file, '-' for stdout")
    output.add_argument("--manifest", default=None,
                        help="JSON manifest path (default: <output>.manifest.json when --output is a file)")

    parser = _Parser(prog="fracyule", description="Fractional Yule process toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    parser.add_argument("--seed", type=_seed_arg, default=default_seed, help=seed_help)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_args(p):
        p.add_argument("--nu", type=float, required=True, help="fractional order in (0, 1]")
        p.add_argument("--lambda", dest="lam", type=float, required=True, help="birth intensity > 0")

    p = sub.add_parser("simulate", parents=[seeded, output], help="simulate one path (CSV of birth times)")
    model_args(p)
    p.add_argument("--births", type=int, required=True)
    p.add_argument("--algorithm", choices=("alg2", "alg1"), default="alg2")
    p.add_argument("--classical", action="store_true", help="classical Yule process (nu = 1)")
    p.add_argument("--no-sojourn", action="store_true", help="omit the sojourn column")
    p.add_argument("--gnuplot", default=None, help="also write a gnuplot script plotting the path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pmf", parents=[seeded, output], help="state probabilities P(N(t) = k)")
    model_args(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--kmax", type=int, required=True)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("estimate", parents=[seeded], help="fit (nu, lambda) to sojourn data")
    p.add_argument("--input", "-i", default="-", help="CSV input, '-' for stdin")
    p.add_argument("--method", choices=("log-moment", "frac-moment"), default="log-moment")
    p.add_argument("--kappa1", type=float, default=None)
    p.add_argument("--kappa2", type=float, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("study", parents=[seeded, output], help="simulate-and-estimate study over a grid")
    p.add_argument("--nu-grid", type=_float_list, default=DEFAULT_NU_GRID)
    p.add_argument("--lambda-grid", type=_float_list, default=(0.2, 10.0))
    p.add_argument("--n-list", type=_int_list, default=(100, 1000, 10000))
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--method", choices=("log-moment", "frac-moment"), default="log-moment")
    p.add_argument("--kappa1", type=float, default=None)
    p.add_argument("--kappa2", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record wall_time (makes output run-dependent)")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    try:
        parser = build_parser(_seed_default())
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"fracyule: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CancellationError as exc:
        print(f"fracyule: cancellation: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDataError as exc:
        print(f"fracyule: degenerate_data: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except EstimationError as exc:
        kind = type(exc).__name__
        extra = ""
        if getattr(exc, "residual_low", None) is not None:
            extra = f" (residual_low={exc.residual_low:.6g}, residual_high={exc.residual_high:.6g})"
        print(f"fracyule: solver failure [{kind}]: {exc}{extra}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, FypError) as exc:
        print(f"fracyule: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fracyule: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
