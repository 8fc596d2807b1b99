"""Command-line front end.

Exit codes: 0 success, 2 unreadable input, 3 infeasible request (rank cap,
coverage, size bound), 4 unmet precondition (for example a permutation that
does not preserve columns).
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from . import io as fmt
from .approx import approximate_by_column_permutation, wate
from .config import rank_cap, settings
from .dyadic import format_exact, parse_exact
from .errors import (
    CoverageInfeasible,
    ParseError,
    PreconditionError,
    RankError,
    TooLarge,
)
from .grid import GridGeometry
from .mixing import (
    GridFunction,
    cesaro_sequence,
    half_square,
    mixing_deviation,
    render_root,
    strong_mixing_statistic,
    weak_mixing_witness,
    witness_lower_bound,
)
from .perms import (
    metric_d_bounds,
    metric_d_bruteforce,
    metric_dprime,
    project_to_base,
    random_column_preserving,
)
from .towers import conjugacy, uate

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_PRECONDITION = 0, 2, 3, 4


def _rational(text):
    try:
        value = parse_exact(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


class _Output:
    """Writes named artifacts into ``--out`` or, without it, to stdout."""

    def __init__(self, out_dir):
        self.dir = out_dir
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    def write(self, name, text, primary=True):
        if self.dir:
            fmt.write_text(os.path.join(self.dir, name), text)
        elif primary:
            sys.stdout.write(text)

    def path(self, name):
        return os.path.join(self.dir, name) if self.dir else None


def _read_perm(path):
    return fmt.parse_permutation(fmt.read_text(path))


def _deviation_csv(devs, rank):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["square", "column", "row", "deviation", "deviation_exact"])
    side = 1 << rank
    for i, d in enumerate(devs):
        w.writerow([i + 1, i % side, i // side, f"{float(d):.12g}", format_exact(d)])
    return buf.getvalue()


def cmd_approx(args, out):
    t = _read_perm(args.input)
    res = approximate_by_column_permutation(t, args.rank, args.epsilon)
    out.write("q.perm", fmt.format_permutation(res.q))
    out.write("deviations.csv", _deviation_csv(res.deviations, args.rank), primary=False)
    out.write("trace.txt", "\n".join(res.trace) + "\n", primary=False)
    worst = max(Fraction(d) for d in res.deviations)
    print(f"working rank {res.working_rank}, worst deviation {format_exact(worst)}", file=sys.stderr)
    return EXIT_OK if worst < Fraction(args.epsilon) else EXIT_INFEASIBLE


def cmd_wate(args, out):
    p = _read_perm(args.input)
    res = wate(p, args.epsilon, args.rank or 1, cyclic=args.cyclic)
    out.write("q.perm", fmt.format_permutation(res.q))
    out.write("trace.txt", "\n".join(res.trace) + "\n", primary=False)
    out.write("deviations.csv", _deviation_csv(res.deviations, p.coarsest().rank), primary=False)
    if args.plot and out.dir:
        from .plotting import plot_permutation

        plot_permutation(res.q, out.path("q.png"), title=f"k={res.k}")
    print(f"k={res.k} K={res.cycles} bound={res.bound}", file=sys.stderr)
    return EXIT_OK


def cmd_uate(args, out):
    t = _read_perm(args.input)
    res = uate(t, args.n, args.epsilon)
    out.write("r.perm", fmt.format_permutation(res.r))
    out.write("trace.txt", "\n".join(res.trace) + "\n", primary=False)
    bound = Fraction(1, args.n) + Fraction(args.epsilon)
    print(f"d'(R,t)={res.dprime} bound 1/n+epsilon={format_exact(bound)}", file=sys.stderr)
    return EXIT_OK if Fraction(res.dprime) <= bound else EXIT_INFEASIBLE


def cmd_conjugate(args, out):
    target = _read_perm(args.input)
    t0 = _read_perm(args.t0)
    res = conjugacy(target, t0, args.rank, args.epsilon)
    out.write("s.perm", fmt.format_permutation(res.s))
    out.write("conjugate.perm", fmt.format_permutation(res.conjugate), primary=False)
    out.write("trace.txt", "\n".join(res.trace) + "\n", primary=False)
    print("Q = S^-1 R S verified", file=sys.stderr)
    inside = all(Fraction(d) < Fraction(args.epsilon) for d in res.deviations)
    print(f"inside neighborhood: {inside}", file=sys.stderr)
    return EXIT_OK if inside else EXIT_INFEASIBLE


def _mix_functions(args, t):
    g = t.geometry
    if args.half_square:
        a = half_square(g)
        return a, a, None
    if args.witness:
        L = args.witness
        if g.rows != L:
            raise PreconditionError(f"--witness {L} needs a grid with {L} levels, got {g.rows}")
        f = weak_mixing_witness(L, g.weights, g.rank)
        return f, f, witness_lower_bound(L, g.weights)
    if not args.f:
        raise PreconditionError("give --f (and --g), --witness L or --half-square")
    f = fmt.parse_function(fmt.read_text(args.f))
    g_fn = fmt.parse_function(fmt.read_text(args.g)) if args.g else f
    return f, g_fn, None


def cmd_mix(args, out):
    t = _read_perm(args.input)
    project_to_base(t)
    f, g, lower = _mix_functions(args, t)
    conv = args.koopman_convention
    if args.n is not None:
        v = mixing_deviation(t, f, g, args.n, conv)
        exact = v.exact
        print(format_exact(exact) if exact is not None else str(v))
        return EXIT_OK
    seq = cesaro_sequence(t, f, g, args.N, conv)
    out.write("mix.csv", fmt.format_sequence(seq))
    if seq.terms:
        line = (
            f"min {render_root(seq.min_squared())} "
            f"mean {sum(float(x) for x in seq.values()) / len(seq):.12g} "
            f"final cesaro {seq.cesaro[-1]:.12g}"
        )
        if lower is not None:
            line += f" lower bound {format_exact(lower)} holds {seq.all_at_least(lower)}"
        print(line, file=sys.stderr)
    if args.plot and out.dir:
        from .plotting import plot_sequence

        plot_sequence(seq, out.path("mix.png"), lower_bound=lower)
    return EXIT_OK


SAMPLE_FIELDS = [
    "index",
    "period",
    "cycles",
    "base_cycles",
    "witness_cesaro",
    "witness_min_sq_exact",
    "strong_mixing",
    "strong_mixing_exact",
]


def _sample_row(index, seed, rank, N):
    t = random_column_preserving(rank, [seed, index])
    g = t.geometry
    witness = GridFunction.from_levels(g, [-(g.rows - 1)] + [1] * (g.rows - 1)) if rank else None
    row = {
        "index": index,
        "period": t.period(),
        "cycles": len(t.cycles()),
        "base_cycles": len(project_to_base(t).cycles()),
    }
    if witness is not None and N > 0:
        seq = cesaro_sequence(t, witness, witness, N)
        row["witness_cesaro"] = f"{seq.cesaro[-1]:.12g}"
        row["witness_min_sq_exact"] = format_exact(seq.min_squared())
    else:
        row["witness_cesaro"] = row["witness_min_sq_exact"] = ""
    if rank >= 1:
        v = strong_mixing_statistic(t, t.period())
        row["strong_mixing"] = str(v)
        exact = v.exact
        row["strong_mixing_exact"] = format_exact(exact) if exact is not None else ""
    else:
        row["strong_mixing"] = row["strong_mixing_exact"] = ""
    return row


def sample_csv(rank, count, seed, N, threads=1):
    """CSV text of per-sample statistics; the bytes depend only on the arguments."""
    if rank > settings.rank_cap:
        raise RankError(f"rank {rank} exceeds the rank cap {settings.rank_cap}")
    GridGeometry.square(rank)
    work = range(count)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda i: _sample_row(i, seed, rank, N), work))
    else:
        rows = [_sample_row(i, seed, rank, N) for i in work]
    rows.sort(key=lambda r: r["index"])
    buf = io.StringIO()
    w = csv.DictWriter(buf, SAMPLE_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue(), rows


def cmd_sample(args, out):
    text, rows = sample_csv(args.rank, args.samples, args.seed, args.N, args.threads)
    out.write("sample.csv", text)
    if args.plot and out.dir and rows:
        from .plotting import plot_sample

        plot_sample(rows, out.path("sample.png"))
    return EXIT_OK


def cmd_metrics(args, out):
    s = _read_perm(args.input)
    t = _read_perm(args.other)
    lines = [f"d_prime,{format_exact(metric_dprime(s, t))}"]
    lower, upper = metric_d_bounds(s, t)
    lines.append(f"d_lower,{format_exact(lower)}")
    lines.append(f"d_upper,{format_exact(upper)}")
    try:
        lines.append(f"d_exact,{format_exact(metric_d_bruteforce(s, t))}")
    except TooLarge:
        lines.append("d_exact,")
    out.write("metrics.csv", "metric,value\n" + "\n".join(lines) + "\n")
    return EXIT_OK


def _add_common(parser, default, flag_default):
    parser.add_argument("--rank-cap", type=int, default=default, help="largest rank allowed")
    parser.add_argument("--out", default=default, help="directory for output files (default stdout)")
    parser.add_argument(
        "--plot", action="store_true", default=flag_default,
        help="also write PNG figures into --out",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dyadext",
        description="Exact constructions with dyadic permutations of the square.",
    )
    _add_common(parser, None, False)
    # the same options are accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, argparse.SUPPRESS, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    add = sub.add_parser

    def sub_parser(name, **kw):
        return add(name, parents=[common], **kw)

    sub.add_parser = sub_parser

    p = sub.add_parser("approx", help="column-preserving approximation")
    p.add_argument("input")
    p.add_argument("--rank", type=int, required=True, help="rank of the neighborhood squares")
    p.add_argument("--epsilon", type=_rational, required=True)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("wate", help="approximation with a cyclic base")
    p.add_argument("input")
    p.add_argument("--epsilon", type=_rational, required=True)
    p.add_argument("--rank", type=int, default=1, help="lower bound k0 for the output rank")
    p.add_argument("--cyclic", action="store_true", help="chain all passes into one cycle")
    p.set_defaults(func=cmd_wate)

    p = sub.add_parser("uate", help="periodic approximation from a tower")
    p.add_argument("input")
    p.add_argument("--n", type=int, required=True, help="tower height")
    p.add_argument("--epsilon", type=_rational, required=True)
    p.set_defaults(func=cmd_uate)

    p = sub.add_parser("conjugate", help="conjugate t0 into a neighborhood of the target")
    p.add_argument("input", help="target permutation")
    p.add_argument("t0", help="permutation to conjugate")
    p.add_argument("--rank", type=int, required=True, help="rank of the neighborhood squares")
    p.add_argument("--epsilon", type=_rational, required=True)
    p.set_defaults(func=cmd_conjugate)

    p = sub.add_parser("mix", help="relative mixing deviations")
    p.add_argument("input")
    p.add_argument("--f", help="function file")
    p.add_argument("--g", help="second function file (default: same as --f)")
    p.add_argument("--witness", type=int, metavar="L", help="use the L-level witness for f and g")
    p.add_argument("--half-square", action="store_true", help="use the lower half indicator")
    p.add_argument("--n", type=int, default=None, help="print the single term n")
    p.add_argument("--N", type=int, default=32, help="number of terms")
    p.add_argument("--koopman-convention", choices=("inverse", "forward"), default="inverse")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("sample", help="statistics of random column-preserving permutations")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--N", type=int, default=16, help="Cesaro length for the witness pair")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("metrics", help="d' and bounds on d between two permutations")
    p.add_argument("input")
    p.add_argument("other")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    out = _Output(args.out)
    cap = args.rank_cap if args.rank_cap is not None else settings.rank_cap
    try:
        with rank_cap(cap):
            return args.func(args, out)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CoverageInfeasible as exc:
        print(f"infeasible: {exc} (best achievable {exc.best})", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RankError, TooLarge) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


__all__ = ["main", "build_parser", "sample_csv"]
