"""Command-line front end: design, evaluate and validate filters as batch jobs.

Subcommands: design, wcr, eval, curve, solve, sweep, gl.  Output is
key=value lines on stdout plus file artifacts; every run is deterministic
under --seed and every output file embeds the format version and the
invoking configuration.  Exit codes: 0 success, 1 usage/input error,
2 finished without convergence (best result still written).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import gauss_legendre_filter
from .design import DesignConfig, minimize_wcr
from .eigensolver import (
    EigenProblem,
    FilterFormatError,
    generate_slices,
    flop_estimate,
    load_problem,
    subspace_iteration,
)
from .filters import (
    FilterError,
    RationalFilter,
    compute_wcr,
    eval_filter,
    load_filter,
    save_filter,
)
from .optim import BoxSpec
from .weights import WeightError, initial_weight_vector


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _worker_count() -> int:
    cap = os.environ.get("RATFILT_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        try:
            workers = max(1, min(workers, int(cap)))
        except ValueError:
            raise UsageError(f"RATFILT_THREADS must be an integer, got {cap!r}")
    return workers


def _config_line(args: argparse.Namespace, keys) -> str:
    parts = [f"command={args.command}"]
    for key in keys:
        parts.append(f"{key}={getattr(args, key)}")
    return " ".join(parts)


def _load_filter_or_fail(path) -> RationalFilter:
    try:
        return load_filter(path)
    except FilterFormatError as exc:
        raise UsageError(str(exc))


def cmd_design(args) -> int:
    if not 0.0 < args.gap < 1.0:
        raise UsageError(f"--gap must lie in (0, 1), got {args.gap}")
    if args.poles < 1:
        raise UsageError("--poles must be >= 1")
    if args.lb is not None and args.lb <= 0.0:
        raise UsageError("--lb must be positive")
    box = BoxSpec.for_poles(args.poles, args.lb) if args.lb is not None else None
    cfg = DesignConfig(gap=args.gap, m=args.poles, s=args.intervals, box=box,
                       res_tol=args.res_tol, inner_tol=args.inner_tol, seed=args.seed,
                       max_outer_iters=args.max_outer, de_evals=args.de_evals,
                       nm_evals=args.nm_evals)
    v0 = initial_weight_vector(args.intervals, args.gap)
    f0 = gauss_legendre_filter(args.poles, gap=args.gap)
    on_outer = None
    if args.verbose:
        def on_outer(entry):
            print(f"outer={entry.outer_iter} h={entry.h:.6e} "
                  f"residual={entry.residual:.3e}", file=sys.stderr)
    result = minimize_wcr(v0, f0, cfg, on_outer=on_outer)
    config = {
        "command": "design", "gap": args.gap, "poles": args.poles,
        "intervals": args.intervals, "lb": args.lb if args.lb is not None else "none",
        "seed": args.seed, "res_tol": args.res_tol, "inner_tol": args.inner_tol,
        "max_outer": args.max_outer, "de_evals": args.de_evals, "nm_evals": args.nm_evals,
    }
    save_filter(result.filter, args.output, wcr=result.wcr, config=config)
    if args.trace:
        lines = ["# " + _config_line(args, ("gap", "poles", "intervals", "seed")),
                 "outer_iter,h,residual,f_omega,inner_iters"]
        for t in result.trace:
            lines.append(f"{t.outer_iter},{_fmt(t.h)},{_fmt(t.residual)},"
                         f"{_fmt(t.f_omega)},{t.inner_iters}")
        with open(args.trace, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    print(f"wcr={_fmt(result.wcr)} unscaled_wcr={_fmt(result.unscaled_wcr)} "
          f"outer_iters={len(result.trace)} converged={str(result.converged).lower()} "
          f"output={args.output}")
    return 0 if result.converged else 2


def cmd_wcr(args) -> int:
    f = _load_filter_or_fail(args.filter)
    if not 0.0 < args.gap < 1.0:
        raise UsageError(f"--gap must lie in (0, 1), got {args.gap}")
    report = compute_wcr(f, args.gap, args.inner)
    print(f"wcr={_fmt(report.wcr)} num_max={_fmt(report.num_max)} "
          f"num_argmax={_fmt(report.num_argmax)} den_min={_fmt(report.den_min)} "
          f"den_argmin={_fmt(report.den_argmin)} inner={args.inner}")
    return 0


def cmd_eval(args) -> int:
    f = _load_filter_or_fail(args.filter)
    for x in args.x:
        print(f"x={_fmt(x)} r={_fmt(eval_filter(f, x))}")
    return 0


def cmd_curve(args) -> int:
    f = _load_filter_or_fail(args.filter)
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if args.spacing == "log":
        if args.start <= 0 or args.stop <= 0:
            raise UsageError("log spacing needs positive endpoints")
        xs = np.geomspace(args.start, args.stop, args.points)
    else:
        xs = np.linspace(args.start, args.stop, args.points)
    vals = eval_filter(f, xs)
    lines = ["# " + _config_line(args, ("filter", "start", "stop", "points", "spacing")),
             "x,r,abs_r"]
    for x, r in zip(xs, vals):
        lines.append(f"{_fmt(x)},{_fmt(r)},{_fmt(abs(r))}")
    with open(args.output, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"points={args.points} output={args.output}")
    return 0


def cmd_solve(args) -> int:
    try:
        problem = load_problem(args.problem)
    except FilterFormatError as exc:
        raise UsageError(str(exc))
    f = _load_filter_or_fail(args.filter)
    report = subspace_iteration(f, problem, C=args.C, tol=args.tol,
                                max_iters=args.max_iters, seed=args.seed)
    lines = ["# " + _config_line(args, ("problem", "filter", "C", "tol", "seed")),
             "iter,max_residual"]
    for i, res in enumerate(report.residual_history, start=1):
        lines.append(f"{i},{_fmt(res)}")
    with open(args.output, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"iterations={report.iterations} converged={str(report.converged).lower()} "
          f"converged_count={report.converged_count} M0={report.M0} "
          f"observed_rate={_fmt(report.observed_rate)} "
          f"predicted_rate={_fmt(report.predicted_rate)} output={args.output}")
    return 0 if report.converged else 2


def cmd_sweep(args) -> int:
    try:
        import json
        with open(args.spectrum) as fh:
            doc = json.load(fh)
        spectrum = np.asarray(doc["spectrum"], dtype=float)
    except Exception as exc:
        raise UsageError(f"cannot read spectrum file {args.spectrum}: {exc}")
    filters = [(path, _load_filter_or_fail(path)) for path in args.filters]
    try:
        problems = generate_slices(np.sort(spectrum), args.slices, seed=args.seed)
    except Exception as exc:
        raise UsageError(str(exc))

    jobs = []
    for slice_idx, prob in enumerate(problems):
        for name, filt in filters:
            for C in args.C:
                jobs.append((slice_idx, prob, name, filt, C))

    def run(job):
        slice_idx, prob, name, filt, C = job
        rep = subspace_iteration(filt, prob, C=C, tol=args.tol, max_iters=args.max_iters,
                                 seed=args.seed + slice_idx)
        flops = flop_estimate(prob.n, filt.m, rep.M0, rep.iterations)
        return (slice_idx, name, C, rep.iterations, int(rep.converged), rep.M0, flops)

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]

    lines = ["# " + _config_line(args, ("spectrum", "slices", "C", "tol", "seed")),
             "slice,filter,C,iterations,converged,M0,flops_model"]
    for row in rows:
        lines.append(f"{row[0]},{row[1]},{_fmt(row[2])},{row[3]},{row[4]},{row[5]},{_fmt(row[6])}")
    with open(args.output, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    for name, _ in filters:
        for C in args.C:
            sel = [r for r in rows if r[1] == name and r[2] == C]
            mean_it = float(np.mean([r[3] for r in sel]))
            mean_fl = float(np.mean([r[6] for r in sel]))
            print(f"filter={name} C={_fmt(C)} mean_iterations={_fmt(mean_it)} "
                  f"mean_flops_model={_fmt(mean_fl)}")
    print(f"rows={len(rows)} output={args.output}")
    return 0


def cmd_gl(args) -> int:
    if args.poles < 1:
        raise UsageError("--poles must be >= 1")
    if not 0.0 < args.gap < 1.0:
        raise UsageError(f"--gap must lie in (0, 1), got {args.gap}")
    f = gauss_legendre_filter(args.poles, gap=args.gap)
    config = {"command": "gl", "poles": args.poles, "gap": args.gap}
    save_filter(f, args.output, config=config)
    print(f"m={args.poles} output={args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratfilt",
                                     description="Rational spectral filter toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design a filter by worst-case-rate minimization")
    p.add_argument("--gap", type=float, required=True)
    p.add_argument("--poles", "-m", type=int, required=True)
    p.add_argument("--intervals", "-s", type=int, default=5)
    p.add_argument("--lb", type=float, default=None,
                   help="minimum pole distance from the real axis (box constraint)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--res-tol", type=float, default=1e-9)
    p.add_argument("--inner-tol", type=float, default=1e-8)
    p.add_argument("--max-outer", type=int, default=50)
    p.add_argument("--de-evals", type=int, default=200)
    p.add_argument("--nm-evals", type=int, default=600)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--trace", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("wcr", help="worst-case convergence rate of a filter file")
    p.add_argument("filter")
    p.add_argument("--gap", type=float, required=True)
    p.add_argument("--inner", choices=("gap", "full"), default="gap")
    p.set_defaults(func=cmd_wcr)

    p = sub.add_parser("eval", help="evaluate a filter at points")
    p.add_argument("filter")
    p.add_argument("-x", type=float, action="append", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="write r(x) samples to CSV")
    p.add_argument("filter")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--spacing", choices=("linear", "log"), default="linear")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("solve", help="run the subspace iteration on a problem file")
    p.add_argument("problem")
    p.add_argument("filter")
    p.add_argument("--C", type=float, default=1.1)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iters", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve generated interval slices for several filters")
    p.add_argument("spectrum")
    p.add_argument("--filters", nargs="+", required=True)
    p.add_argument("--C", type=float, nargs="+", default=[1.1])
    p.add_argument("--slices", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gl", help="write a Gauss-Legendre baseline filter file")
    p.add_argument("--poles", "-m", type=int, required=True)
    p.add_argument("--gap", type=float, default=0.95)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gl)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FilterError, WeightError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
