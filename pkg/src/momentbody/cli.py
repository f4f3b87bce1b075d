"""Command-line interface.

Exit codes for ``solve``: 0 feasible, 1 infeasible, 2 not interior,
3 indeterminate. ``verify`` exits 0 when the certificate checks out and 1
when it does not. Usage errors exit 64, malformed data 65, unreadable input 66.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import instances as inst_io
from .errors import InvalidConfig, InvalidInput, NotUnit, RankDeficient, SchemaError
from .moment_map import Instance
from .oracle import (
    boundary_sample,
    circle_directions,
    decide,
    sphere_directions,
    verify_feasible,
    verify_infeasible,
)
from .precondition import precondition
from .solver import SolverConfig

EXIT_BY_VERDICT = {"feasible": 0, "infeasible": 1, "not_interior": 2, "indeterminate": 3}
EX_USAGE, EX_DATAERR, EX_NOINPUT = 64, 65, 66


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-8, help="gradient-norm tolerance (default 1e-8)")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--memory", type=int, default=10, help="L-BFGS history length (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="momentbody", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write an instance file")
    g.add_argument("--kind", default="random",
                   choices=["random", "infeasible", "example-2.1", "example-2.2", "interval"])
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--margin", type=float, default=0.1, help="outward scaling for --kind infeasible")
    g.add_argument("--b", type=str, default=None, help="comma-separated target for fixture kinds")
    g.add_argument("--out", required=True)

    pc = sub.add_parser("precondition", help="center and whiten an instance")
    pc.add_argument("input")
    pc.add_argument("--out", required=True)
    pc.add_argument("--record", default=None, help="transform record path (default OUT.record.json)")

    s = sub.add_parser("solve", help="decide membership and write a certificate")
    s.add_argument("input")
    s.add_argument("--out", default=None, help="certificate path")
    _solver_args(s)
    s.add_argument("--no-precondition", action="store_true")
    s.add_argument("--force", action="store_true", help="allow --no-precondition on raw maps")
    s.add_argument("--blocks", action="store_true", help="use the block-separable dual")
    s.add_argument("--verbose", action="store_true", help="iteration trace on stderr")

    v = sub.add_parser("verify", help="re-check a certificate against an instance")
    v.add_argument("input")
    v.add_argument("certificate")
    v.add_argument("--eps", type=float, default=2e-8)

    bd = sub.add_parser("boundary", help="boundary point cloud for m = 2 or 3")
    bd.add_argument("input")
    bd.add_argument("--directions", type=int, default=360)
    bd.add_argument("--format", choices=["csv", "json"], default="csv")
    bd.add_argument("--both", action="store_true", help="also emit the preconditioned body")
    bd.add_argument("--out", default=None)

    bn = sub.add_parser("bench", help="timing table over random instances")
    bn.add_argument("--grid", type=str, default="50,100,200", help="comma-separated n values (m = n)")
    bn.add_argument("--m", type=str, default=None, help="comma-separated m values (default: m = n)")
    bn.add_argument("--seeds", type=int, default=3)
    bn.add_argument("--seed", type=int, default=0, help="first seed")
    _solver_args(bn)
    bn.add_argument("--format", choices=["csv", "json"], default="csv")
    bn.add_argument("--out", default=None)
    return parser


def _ints(text: str, name: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name}: expected comma-separated integers") from exc
    if not vals:
        raise UsageError(f"--{name}: empty list")
    return vals


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError("--b: expected comma-separated numbers") from exc


def _config(args) -> SolverConfig:
    try:
        return SolverConfig(tol=args.tol, max_iters=args.max_iters, memory=args.memory)
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------


def cmd_generate(args) -> int:
    kind = args.kind
    if kind == "random":
        inst = inst_io.gen_random(args.n, args.m, args.seed)
    elif kind == "infeasible":
        inst = inst_io.gen_infeasible(args.n, args.m, args.seed, args.margin)
    else:
        maker = {
            "example-2.1": inst_io.gen_example_2_1,
            "example-2.2": inst_io.gen_example_2_2,
            "interval": lambda b: inst_io.gen_interval(b[0]),
        }[kind]
        defaults = {"example-2.1": [0.0, 0.0], "example-2.2": [0.0, 0.0, 0.0], "interval": [0.0]}
        b = _floats(args.b) if args.b else defaults[kind]
        if len(b) != len(defaults[kind]):
            raise UsageError(f"--b must have {len(defaults[kind])} entries for {kind}")
        inst = maker(b)
    inst_io.write_instance(inst, args.out)
    print(f"wrote {inst.label} (n={inst.n}, m={inst.m}) to {args.out}")
    return 0


def cmd_precondition(args) -> int:
    inst = inst_io.read_instance(args.input)
    pre = precondition(inst)
    out = Instance(pre.map, pre.b_hat, label=inst.label, meta={**inst.meta, "preconditioned": True})
    record_path = args.record or str(Path(args.out).with_suffix("")) + ".record.json"
    inst_io.write_instance(out, args.out)
    inst_io.write_record(pre.record, record_path)
    print(f"wrote preconditioned instance to {args.out} and transform record to {record_path}")
    print(f"centered Gram condition number: {pre.record.condition_number:.6g}")
    return 0


def cmd_solve(args) -> int:
    inst = inst_io.read_instance(args.input)
    config = _config(args)
    if args.no_precondition and not inst.map.normalized and not args.force:
        raise UsageError("--no-precondition needs a traceless, orthonormal map (add --force to override)")
    if args.verbose:
        logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    report = decide(
        inst,
        config,
        precondition_map=not args.no_precondition,
        force=args.force,
        use_blocks=args.blocks,
    )
    if args.verbose and report.trace is not None:
        print(f"{'k':>5} {'f':>22} {'|grad|':>12} {'|y|':>12} {'step':>10} {'evals':>5}", file=sys.stderr)
        for r in report.trace.records:
            print(f"{r.k:5d} {r.value:22.15g} {r.grad_norm:12.4e} {r.y_norm:12.4e} "
                  f"{r.step:10.3g} {r.ls_evals:5d}", file=sys.stderr)
    if args.out:
        inst_io.write_certificate(report, args.out, label=inst.label)

    print(f"instance:   {inst.label or args.input} (n={inst.n}, m={inst.m})")
    print(f"verdict:    {report.verdict}")
    print(f"iterations: {report.iterations}")
    if report.quick_reject_reason:
        print(f"rejected:   {report.quick_reject_reason}")
    if report.verdict == "feasible":
        print(f"residual:   {report.certificate['residual']:.3e}")
        print(f"duality:    f* = {report.duality_check['f_star']:.12g}, "
              f"mismatch = {report.duality_check['mismatch']:.3e}")
    elif report.verdict == "infeasible":
        print(f"gap:        {report.certificate['gap']:.6e}")
    elif report.verdict == "not_interior":
        print(f"margin:     {report.certificate['margin']}")
    else:
        print(f"reason:     {report.certificate.get('reason')}")
    if "passed" in report.verification and report.verification["passed"] is not None:
        print(f"verified:   {report.verification['passed']}")
    return EXIT_BY_VERDICT[report.verdict]


def cmd_verify(args) -> int:
    inst = inst_io.read_instance(args.input)
    cert = inst_io.read_certificate(args.certificate)
    verdict = cert["verdict"]
    try:
        if verdict == "feasible":
            check = verify_feasible(inst, np.asarray(cert["payload"]["X"], dtype=float), args.eps)
            print(f"feasibility certificate: residual = {check.residual:.3e}, "
                  f"min eigenvalue = {check.min_eigenvalue:.3e}, trace error = {check.trace_error:.3e}")
        elif verdict == "infeasible":
            check = verify_infeasible(inst, np.asarray(cert["payload"]["u"], dtype=float))
            print(f"infeasibility certificate: gap = {check.gap:.6e}")
        else:
            print(f"verdict '{verdict}' carries no verifiable certificate")
            return EXIT_BY_VERDICT[verdict]
    except (InvalidInput, NotUnit) as exc:
        raise SchemaError(f"{args.certificate}: {exc}") from exc
    print("PASS" if check.passed else "FAIL")
    return 0 if check.passed else 1


def _boundary_rows(map, dirs, body: str) -> list[dict]:
    points, h = boundary_sample(map, dirs)
    rows = []
    for u, x, hv in zip(dirs, points, h):
        row = {"body": body}
        row.update({f"u{i + 1}": float(v) for i, v in enumerate(u)})
        row["support"] = float(hv)
        row.update({f"x{i + 1}": float(v) for i, v in enumerate(x)})
        rows.append(row)
    return rows


def cmd_boundary(args) -> int:
    inst = inst_io.read_instance(args.input)
    m = inst.m
    if m not in (2, 3):
        raise UsageError(f"boundary needs m = 2 or 3, instance has m = {m}")
    if args.directions < 1:
        raise UsageError("--directions must be positive")
    dirs = circle_directions(args.directions) if m == 2 else sphere_directions(args.directions)
    rows = _boundary_rows(inst.map, dirs, "raw")
    if args.both:
        rows += _boundary_rows(precondition(inst).map, dirs, "preconditioned")
    _emit(_format(rows, args.format), args.out)
    return 0


def _format(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_bench(ns: list[int], ms: list[int] | None, seeds: int, first_seed: int,
              config: SolverConfig) -> list[dict]:
    """Median wall time and iteration counts for each grid cell."""
    rows = []
    for i, n in enumerate(ns):
        m = ms[i] if ms is not None else n
        times, iters, residuals, verdicts = [], [], [], []
        for seed in range(first_seed, first_seed + seeds):
            inst = inst_io.gen_random(n, m, seed)
            t0 = time.perf_counter()
            report = decide(inst, config)
            times.append(time.perf_counter() - t0)
            iters.append(report.iterations)
            residuals.append(report.certificate.get("residual", float("nan")))
            verdicts.append(report.verdict)
        rows.append({
            "n": n,
            "m": m,
            "seeds": seeds,
            "median_time_s": statistics.median(times),
            "median_iters": statistics.median(iters),
            "iters": " ".join(map(str, iters)),
            "max_residual": max(residuals),
            "verdicts": " ".join(sorted(set(verdicts))),
        })
    return rows


def cmd_bench(args) -> int:
    ns = _ints(args.grid, "grid")
    ms = _ints(args.m, "m") if args.m else None
    if ms is not None and len(ms) != len(ns):
        raise UsageError("--m must have as many entries as --grid")
    if args.seeds < 1:
        raise UsageError("--seeds must be positive")
    rows = run_bench(ns, ms, args.seeds, args.seed, _config(args))
    _emit(_format(rows, args.format), args.out)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "precondition": cmd_precondition,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "boundary": cmd_boundary,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"momentbody: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except SchemaError as exc:
        missing = isinstance(exc.__cause__, OSError)
        print(f"momentbody: {exc}", file=sys.stderr)
        return EX_NOINPUT if missing else EX_DATAERR
    except (InvalidInput, RankDeficient) as exc:
        print(f"momentbody: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_DATAERR


if __name__ == "__main__":
    sys.exit(main())
