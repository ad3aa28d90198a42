"""maxlab command line.

Exit codes: 0 ok, 1 a checked property failed, 2 usage or validation error,
3 I/O error.  Messages go to standard error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

from . import __version__
from .deriv import l1_derivative_distance, near_point_variation, profile, tail_variation, total_variation
from .exact import Q, format_rational
from .experiments import (
    GridSpec,
    build_grid,
    default_grid_spec,
    default_region,
    find_near_point_delta,
    find_tail_bound,
    run_continuity,
    verify_decomposition,
    verify_luiro,
    verify_m1_bound,
    verify_m2_regularity,
    verify_oracle,
)
from .fnspace import ExclusionRegion, Partition, PiecewiseLinearFn, perturbation_sequence, simple_approximation
from .maxops import DegenerateConstraint, Operator
from .oracle import OracleConfig
from .report import csv_text, dumps_json, write_csv, write_json, write_svg, atomic_write

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

VERIFICATIONS = ("decomposition", "m1", "m2", "luiro", "oracle", "tails", "points")
KINDS = ("bump", "shift", "dilation", "noise", "identity")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers

def _rational(text: str):
    try:
        return Q(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _positive(text: str):
    q = _rational(text)
    if q <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return q


def _grid(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _points(text: str) -> list:
    try:
        return [Q(t) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad point list: {text!r}") from exc


def _jlist(text: str) -> list:
    try:
        js = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad j list: {text!r}") from exc
    if not js or any(j < 1 for j in js) or any(a >= b for a, b in zip(js, js[1:])):
        raise argparse.ArgumentTypeError("j list must be positive and strictly increasing")
    return js


def _interval(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("interval must look like lo:hi")
    lo, hi = (None if p.strip() in ("", "inf", "-inf") else _rational(p) for p in parts)
    if lo is not None and hi is not None and lo >= hi:
        raise argparse.ArgumentTypeError("interval must have lo < hi")
    return lo, hi


def _load(path: str) -> PiecewiseLinearFn:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise exc
    try:
        return PiecewiseLinearFn.from_json(text)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: malformed function file ({exc})") from exc


def _config(args) -> dict:
    """The resolved configuration, rendered deterministically."""
    out = {"version": __version__}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        out[k] = _render(v)
    out["threads"] = os.environ.get("MAXLAB_THREADS", "")
    return out


def _render(v):
    if isinstance(v, GridSpec):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_render(t) for t in v]
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    try:
        return format_rational(v)
    except Exception:
        return str(v)


def _emit_text(path: Optional[str], text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


def _partition_for(args, f) -> Partition:
    if getattr(args, "partition", None):
        return Partition.of_points(args.partition)
    return simple_approximation(f, args.epsilon)[1]


def _operator(args, f) -> Operator:
    if args.op in ("M1", "M2"):
        if not args.partition:
            raise UsageError(f"--op {args.op} needs --partition")
        return Operator(args.op, partition=Partition.of_points(args.partition))
    if args.op == "MI":
        if args.interval is None:
            raise UsageError("--op MI needs --interval")
        return Operator("MI", interval=args.interval)
    return Operator(args.op)


def _profile_grid(args, f, op):
    spec = args.grid or default_grid_spec(f)
    avoid = ()
    if op.partition is not None:
        avoid = tuple(op.partition.points) + op.partition.midpoints()
    return build_grid(spec, avoid=avoid)


# ---------------------------------------------------------------------------
# commands

def cmd_maximal(args) -> int:
    f = _load(args.input)
    op = _operator(args, f)
    prof = profile(f, _profile_grid(args, f, op), op)
    _emit_text(args.output, csv_text(prof.csv_rows()))
    return EXIT_OK


def cmd_derivative(args) -> int:
    f = _load(args.input)
    op = _operator(args, f)
    grid = _profile_grid(args, f, op)
    prof = profile(f, grid, op)
    _emit_text(args.output, csv_text(prof.csv_rows()))
    if args.report:
        rep = {"config": _config(args), "operator": prof.operator, "total_variation": total_variation(prof)}
        if args.against:
            other = profile(_load(args.against), grid, op)
            region = None
            if args.delta is not None and args.K is not None:
                if op.partition is None:
                    raise UsageError("a region needs --partition")
                region = ExclusionRegion(op.partition, args.delta, args.K)
            rep["distance"] = l1_derivative_distance(prof, other, region).to_dict()
        write_json(args.report, rep)
    return EXIT_OK


def cmd_continuity(args) -> int:
    f = _load(args.input)
    rep = run_continuity(f, args.kind, args.j, args.epsilon, args.grid, seed=args.seed,
                         radius_tol=args.radius_tol)
    os.makedirs(args.out_dir, exist_ok=True)
    data = rep.to_dict()
    data["config"] = _config(args)
    write_json(os.path.join(args.out_dir, "continuity.json"), data)
    write_csv(os.path.join(args.out_dir, "continuity.csv"), rep.summary_rows())
    if args.svg:
        write_svg(os.path.join(args.out_dir, "continuity.svg"),
                  [float(r.j) for r in rep.records], [r.derivative_gap for r in rep.records],
                  title=f"derivative gap, {args.kind} sequence", xlabel="j", ylabel="derivative_gap",
                  log_x=True, log_y=True)
    if not rep.passed:
        print(f"continuity check failed: decrease_ok={rep.decrease_ok} sup_ok={rep.sup_ok}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _verify_tails(f, args) -> dict:
    sel = find_tail_bound(f, args.epsilon)
    recheck = tail_variation(f, sel.K, Q("1/32"))
    return {"passed": recheck < float(args.epsilon) / 2, "selection": sel.to_dict(), "recheck_double_density": recheck}


def _verify_points(f, args) -> dict:
    pts = args.partition or list(simple_approximation(f, args.epsilon)[1].points)
    sel = find_near_point_delta(f, pts, args.epsilon)
    step = sel.delta / 16
    recheck = math.fsum(near_point_variation(f, p, sel.delta, step) for p in pts)
    ok = recheck < float(args.epsilon) / 2 and sel.escaping_violations == 0
    return {"passed": ok, "selection": sel.to_dict(), "recheck_double_density": recheck}


def cmd_verify(args) -> int:
    f = _load(args.input)
    which = args.which
    if which == "decomposition":
        P = _partition_for(args, f)
        region = default_region(f, P, args.delta, args.K)
        grid = build_grid(args.grid, avoid=P.points) if args.grid else None
        data = verify_decomposition(f, P, region, grid).to_dict()
    elif which == "m1":
        fj = perturbation_sequence(f, args.kind, args.j, args.seed).fn if args.kind != "identity" else f
        data = verify_m1_bound(fj, f, args.epsilon, args.C).to_dict()
    elif which == "m2":
        P = _partition_for(args, f)
        region = default_region(f, P, args.delta, args.K)
        grid = None
        if args.grid:
            grid = build_grid(args.grid, avoid=tuple(P.points) + P.midpoints())
        data = verify_m2_regularity(f, P, region.delta, region.cutoff, grid).to_dict()
    elif which == "luiro":
        grid = build_grid(args.grid, avoid=f.breakpoints) if args.grid else None
        data = verify_luiro(f, grid, h=args.h).to_dict()
    elif which == "oracle":
        cfg = OracleConfig(radius_step=float(args.radius_step), seed=args.seed)
        data = verify_oracle([f], args.points, args.seed, cfg).to_dict()
    elif which == "tails":
        data = _verify_tails(f, args)
    else:
        data = _verify_points(f, args)
    data["which"] = which
    data["config"] = _config(args)
    text = dumps_json(data)
    _emit_text(args.output, text)
    if not data["passed"]:
        print(f"verification {which} failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_approx(args) -> int:
    f = _load(args.input)
    g, P, err = simple_approximation(f, args.epsilon, coarsen=args.coarsen)
    data = {
        "config": _config(args),
        "step_function": g.to_dict(),
        "partition": P.to_dict(),
        "error": format_rational(err),
    }
    _emit_text(args.output, dumps_json(data))
    return EXIT_OK


def cmd_perturb(args) -> int:
    f = _load(args.input)
    p = perturbation_sequence(f, args.kind, args.j, args.seed)
    _emit_text(args.output, p.fn.to_json() + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maxlab", description="Exact 1-D maximal functions of piecewise-linear data.")
    ap.add_argument("--version", action="version", version=f"maxlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def profile_args(p):
        p.add_argument("input")
        p.add_argument("--op", choices=("M", "Mu", "MI", "M1", "M2"), default="M")
        p.add_argument("--grid", type=_grid)
        p.add_argument("--partition", type=_points, help="comma-separated points, e.g. -1,0,1")
        p.add_argument("--interval", type=_interval, help="lo:hi for --op MI")
        p.add_argument("-o", "--output", help="CSV path (default: stdout)")

    p = sub.add_parser("maximal", help="sample an operator on a grid and write its CSV profile")
    profile_args(p)
    p.set_defaults(func=cmd_maximal)

    p = sub.add_parser("derivative", help="profile with derivatives, optional L1 distance report")
    profile_args(p)
    p.add_argument("--against", help="second function file to compare derivative profiles with")
    p.add_argument("--delta", type=_positive)
    p.add_argument("--K", type=_positive)
    p.add_argument("--report", help="JSON report path")
    p.set_defaults(func=cmd_derivative)

    p = sub.add_parser("continuity", help="run the continuity experiment along a sequence f_j -> f")
    p.add_argument("input")
    p.add_argument("--kind", choices=KINDS, default="bump")
    p.add_argument("--j", type=_jlist, default=[1, 2, 4, 8, 16, 32, 64])
    p.add_argument("--epsilon", type=_positive, default=Q("1/10"))
    p.add_argument("--grid", type=_grid)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius-tol", type=float, default=1e-3)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_continuity)

    p = sub.add_parser("verify", help="run one named verification and write a JSON report")
    p.add_argument("input")
    p.add_argument("--which", required=True, choices=VERIFICATIONS)
    p.add_argument("--partition", type=_points)
    p.add_argument("--epsilon", type=_positive, default=Q("1/10"))
    p.add_argument("--delta", type=_positive)
    p.add_argument("--K", type=_positive)
    p.add_argument("--C", type=_positive, default=Q(100))
    p.add_argument("--kind", choices=KINDS, default="bump")
    p.add_argument("--j", type=int, default=64)
    p.add_argument("--grid", type=_grid)
    p.add_argument("--h", type=_positive, default=Q("1/100000"))
    p.add_argument("--radius-step", type=_positive, default=Q("1/10000"))
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("approx", help="build the simple-function approximation of f'")
    p.add_argument("input")
    p.add_argument("--epsilon", type=_positive, default=Q("1/10"))
    p.add_argument("--coarsen", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("perturb", help="write the j-th member of a perturbation sequence")
    p.add_argument("input")
    p.add_argument("--kind", choices=KINDS[:-1], default="bump")
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_perturb)
    return ap


_VALUE_OPTIONS = ("--grid", "--partition", "--interval")


def _join_negative_values(argv: list) -> list:
    # "--grid -4:4:0.01" would otherwise read -4:4:0.01 as an option
    out, k = [], 0
    while k < len(argv):
        a = argv[k]
        if a in _VALUE_OPTIONS and k + 1 < len(argv) and argv[k + 1].startswith("-"):
            out.append(f"{a}={argv[k + 1]}")
            k += 2
            continue
        out.append(a)
        k += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except OSError as exc:
        print(f"maxlab: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, ZeroDivisionError, DegenerateConstraint) as exc:
        print(f"maxlab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
