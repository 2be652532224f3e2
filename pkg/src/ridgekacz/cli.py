"""ridgekacz command line: gen, solve, bench, rates, verify.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys

import numpy as np

from . import densela, harness, problems, solvers, theory, verify
from .solvers import IZInit, SolverKind

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3
SPECTRUM_PRINT_LIMIT = 10

CONFIG_HELP = """\
config file grammar: one "key = value" per line, '#' starts a comment,
lists are comma separated, missing keys keep their defaults.
  dims        = 1000x1000,10000x100,100x10000
  lambdas     = 0.001,0.01,0.1
  sigma_mins  = 1,0.1,0.01,0.001
  algorithms  = rgs-ridge,rk-ridge,iz0,iz1,izmix,izrnd
                (also rk, rgs, naive-rk, naive-rgs)
  iterations  = 10000
  trace_every = 100
  trials      = 20
  base_seed   = 0
  metrics     = err_beta,err_normal,err_weighted,noop_count
"""


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sigma_min(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("sigma-min must be in (0,1]")
    return v


def _nonneg(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("lambda must be a nonnegative number")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _add_generator_flags(p, required):
    p.add_argument("--m", type=_positive_int, required=required, help="rows")
    p.add_argument("--n", type=_positive_int, required=required, help="columns")
    p.add_argument("--sigma-min", type=_sigma_min, default=0.1,
                   help="smallest singular value, in (0,1] (default 0.1)")
    p.add_argument("--lambda", dest="lam", type=_nonneg, default=0.01,
                   help="ridge parameter (default 0.01)")
    p.add_argument("--seed", type=_seed, default=0, help="instance seed (default 0)")


def build_parser():
    parser = ArgumentParser(
        prog="ridgekacz",
        description="Randomized Kaczmarz / Gauss-Seidel solvers for ridge regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    g = sub.add_parser("gen", help="generate an instance directory")
    _add_generator_flags(g, required=True)
    g.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("solve", help="run one solver and write its trace as CSV")
    s.add_argument("--in", dest="indir", help="instance directory (instead of generator flags)")
    _add_generator_flags(s, required=False)
    s.add_argument("--alg", required=True, choices=solvers.ALGORITHM_NAMES, metavar="NAME",
                   help="one of: " + ", ".join(solvers.ALGORITHM_NAMES))
    s.add_argument("--iz-init", choices=[i.value for i in IZInit], help="IZ initialization")
    s.add_argument("--iters", type=_positive_int, default=10**4)
    s.add_argument("--trace-every", type=_positive_int, default=100)
    s.add_argument("--solver-seed", type=_seed, default=None,
                   help="sampling seed (default: derived from --seed and the algorithm)")
    s.add_argument("--csv", help="output CSV path (default stdout)")
    s.add_argument("--wall-clock", action="store_true", help="fill the wall_ns column")

    b = sub.add_parser("bench", help="run the experiment grid",
                       epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    b.add_argument("--config", help="config file (default: built-in grid)")
    b.add_argument("--out", help="output CSV path (default stdout)")
    b.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    b.add_argument("--wall-clock", action="store_true", help="fill the wall_ns column")

    r = sub.add_parser("rates", help="print contraction factors and IZ condition numbers")
    r.add_argument("--in", dest="indir", help="instance directory (instead of generator flags)")
    _add_generator_flags(r, required=False)

    v = sub.add_parser("verify", help="run the deterministic verification suite")
    mode = v.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", help="small-instance checks (default)")
    mode.add_argument("--full", action="store_true", help="also run the crossover orderings")
    return parser


def _fmt(v):
    return f"{v:.10g}"


def _instance(args):
    if args.indir:
        return problems.load(args.indir)
    if args.m is None or args.n is None:
        raise UsageError("give --in DIR or both --m and --n")
    return problems.generate(args.m, args.n, args.sigma_min, args.lam, args.seed)


def _print_spectrum(p, out):
    s = densela.singular_values(p.X)
    if s.size <= SPECTRUM_PRINT_LIMIT:
        print("spectrum: " + " ".join(_fmt(v) for v in s), file=out)
    else:
        print(f"spectrum: {s.size} values from {_fmt(s[0])} to {_fmt(s[-1])}", file=out)
    return s


def cmd_gen(args, out):
    p = problems.generate(args.m, args.n, args.sigma_min, args.lam, args.seed)
    problems.save(p, args.out)
    _print_spectrum(p, out)
    res = theory.oracle_residuals(p.X, p.y, p.lam, p.oracle)
    print("oracle residuals: " + " ".join(f"{k}={v:.3e}" for k, v in res.items()), file=out)
    return EXIT_OK


@contextlib.contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def cmd_solve(args, out):
    kind = SolverKind(args.alg)
    if kind is SolverKind.IZ and args.iz_init is None:
        raise UsageError("iz requires --iz-init")
    if kind is not SolverKind.IZ and args.iz_init is not None:
        raise UsageError(f"--iz-init only applies to iz, not {kind.value}")
    if kind is SolverKind.IZ and args.indir is None and not args.lam > 0:
        raise UsageError("iz needs --lambda > 0")
    if args.trace_every > args.iters:
        raise UsageError("--trace-every must not exceed --iters")
    iz_init = IZInit(args.iz_init) if args.iz_init else None
    p = _instance(args)
    if kind is SolverKind.IZ and not p.lam > 0:
        raise UsageError("iz needs lambda > 0")
    label = harness.algorithm_label(kind, iz_init)
    seed = args.solver_seed
    if seed is None:
        sigma = p.sigma_min if p.sigma_min is not None else float("nan")
        seed = harness.solver_seed(p.seed or 0, (p.m, p.n, p.lam, sigma), 0, label)
    records = harness.run_algorithm(p, kind, iz_init, seed, args.iters, args.trace_every,
                                    wall_clock=args.wall_clock)
    with _open_out(args.csv) as fh:
        fh.write(harness.CSV_HEADER + "\n")
        fh.write("".join(harness.format_record(r) + "\n" for r in records))
    last = records[-1]
    print(f"{label}: {last.iteration} iterations, err_beta={last.err_beta:.6e}, "
          f"noops={last.noop_count}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args, out):
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"ridgekacz: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        text = ""
    try:
        config = harness.parse_config(text)
    except harness.ConfigError as exc:
        raise UsageError(f"{args.config or 'config'}: {exc}") from None
    config.record_wall = args.wall_clock
    with _open_out(args.out) as fh:
        summary = harness.run_grid(config, fh, jobs=args.jobs)
    print(f"bench: {summary.cells} cells x {summary.trials} trials, "
          f"{summary.records} records in {summary.wall_seconds:.1f}s", file=sys.stderr)
    return EXIT_OK


SQUARE_NOTE = ("note: square case uses sigma_1^2 + lambda, the smallest eigenvalue of both "
               "X^T X + lambda I and X X^T + lambda I")


def cmd_rates(args, out):
    p = _instance(args)
    spectrum = densela.singular_values(p.X)
    regime = theory.regime_of(p.m, p.n)
    print(f"instance: {p.m}x{p.n} lambda={_fmt(p.lam)} regime={regime.value}", file=out)
    for kind in (SolverKind.RKRidge, SolverKind.RGSRidge, SolverKind.PlainRK,
                 SolverKind.PlainRGS, SolverKind.NaiveRKNormal, SolverKind.NaiveRGSNormal):
        b = theory.contraction_factor(kind, p.m, p.n, p.lam, spectrum)
        print(f"{kind.value:<10} factor={b.factor!r} norm={b.norm_matrix.value} "
              f"regime={b.regime.value}", file=out)
    if regime is theory.Regime.Square:
        print(SQUARE_NOTE, file=out)
    if p.lam > 0:
        cond_a, cond_m = theory.iz_condition_check(p.X, p.lam)
        root = math.sqrt(cond_m)
        print(f"iz         cond_A={cond_a!r} cond_M={cond_m!r} sqrt(cond_M)={root!r} "
              f"rel_discrepancy={abs(cond_a - root) / cond_a:.3e}", file=out)
        if p.m > p.n:
            print("note: for m > n A also has eigenvalue sqrt(lambda), so cond_A is the "
                  "square root of cond(X X^T + lambda I) instead", file=out)
    else:
        print("iz         undefined for lambda = 0", file=out)
    return EXIT_OK


def cmd_verify(args, out):
    results = verify.run_checks(full=args.full)
    for r in results:
        print(r.line(), file=out)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=out)
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "bench": cmd_bench,
            "rates": cmd_rates, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, sys.stdout)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ridgekacz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (problems.InstanceFormatError, densela.MatrixMarketError) as exc:
        print(f"ridgekacz: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"ridgekacz: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"ridgekacz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
