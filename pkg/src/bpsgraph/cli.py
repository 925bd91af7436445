"""``bps`` command-line interface.

Usage::

    bps check    --graph G.json --problem P.json
    bps solve    --graph G.json --problem P.json [--tol X] [--max-iter N]
                 [--divergence-floor F] [--trace] [--route R] [--starts K --seed S]
    bps verify   --graph G.json --solution S.json [--problem P.json] [--tol X]
    bps spectrum --graph G.json
    bps sweep    --graph G.json --problem P.json --values 0:5 [--equation J] [--vertex V]

Exit codes: 0 success / solvable, 2 nonexistence detected (threshold failure
or divergence diagnosis), 1 usage, parse or numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import diagnostics
from .abelian import AbelianProblem, check_solvable_abelian
from .energy import SolverOptions
from .errors import BPSError, DivergenceDetected, NotSolvable, ProblemFormatError
from .io import load_graph, load_problem, parse_problem, parse_solution_u, solution_to_dict, _read_json
from .nonabelian import check_solvable_nonabelian
from .poisson import VortexSet

EXIT_OK, EXIT_ERROR, EXIT_NONEXISTENCE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ProblemFormatError(f"usage: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", required=True, help="graph JSON file")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="write output here instead of stdout")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--problem", help="problem JSON file")
    solver.add_argument("--tol", type=float, default=1e-10)
    solver.add_argument("--max-iter", type=int, default=200)
    solver.add_argument("--divergence-floor", type=float, default=-50.0)
    solver.add_argument("--seed", type=int, default=0)
    solver.add_argument("--starts", type=int, default=1)
    solver.add_argument("--trace", action="store_true", help="include the minimiser trace")
    solver.add_argument("--route", choices=("unconstrained", "constrained"), default="unconstrained")
    solver.add_argument(
        "--no-threshold",
        action="store_true",
        help="skip the solvability pre-check and let the divergence detector decide",
    )

    p = _Parser(prog="bps", description="BPS vortex equations on finite graphs")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("check", parents=[common, solver], help="report K_j / q_i and solvability")
    sub.add_parser("solve", parents=[common, solver], help="solve and emit the solution")
    v = sub.add_parser("verify", parents=[common, solver], help="re-verify a solution file")
    v.add_argument("--solution", required=True)
    sub.add_parser("spectrum", parents=[common], help="Laplacian eigenvalues and Poincaré constant")
    s = sub.add_parser("sweep", parents=[common, solver], help="vary one vortex multiplicity")
    s.add_argument("--values", required=True, help="start:stop[:step] (stop exclusive) or a,b,c")
    s.add_argument("--equation", type=int, default=1, help="1-based equation index")
    s.add_argument("--vertex", help="vertex receiving the vortices (default: first vertex)")
    return p


def _options(args) -> SolverOptions:
    return SolverOptions(
        tol=args.tol,
        max_iter=args.max_iter,
        divergence_floor=args.divergence_floor,
        enforce_threshold=not args.no_threshold,
        record_trace=True,
    )


def _check(G, prob):
    if isinstance(prob, AbelianProblem):
        return check_solvable_abelian(G, prob)
    return check_solvable_nonabelian(G, prob)


def _rows_to_csv(rows: list[dict]) -> str:
    buf = _io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _emit(args, payload: dict, rows: list[dict] | None = None) -> None:
    if args.format == "csv" and rows is not None:
        text = _rows_to_csv(rows)
    else:
        text = json.dumps(payload, indent=2, allow_nan=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _require_problem(args):
    if not args.problem:
        raise ProblemFormatError("--problem is required for this command")
    return load_problem(args.problem)


def cmd_check(args) -> int:
    G = load_graph(args.graph)
    prob = _require_problem(args)
    rep = _check(G, prob)
    rows = [{"index": k + 1, "margin": m, "positive": m > 0} for k, m in enumerate(rep.margins)]
    _emit(args, rep.to_dict(), rows)
    return EXIT_OK if rep.solvable else EXIT_NONEXISTENCE


def _nonexistence_payload(exc) -> dict:
    out = {"error": {"code": exc.code, "message": str(exc)}}
    if exc.report is not None:
        out["report"] = exc.report.to_dict()
    if exc.diagnosis is not None:
        out["diagnosis"] = exc.diagnosis.to_dict()
    return out


def cmd_solve(args) -> int:
    G = load_graph(args.graph)
    prob = _require_problem(args)
    opts = _options(args)
    try:
        sol = diagnostics.solve(G, prob, opts, route=args.route)
    except (NotSolvable, DivergenceDetected) as exc:
        print(f"bps: {exc}", file=sys.stderr)
        _emit(args, _nonexistence_payload(exc))
        return EXIT_NONEXISTENCE
    payload = solution_to_dict(G, prob, sol, _check(G, prob))
    if args.starts > 1:
        payload["uniqueness_distance"] = diagnostics.uniqueness_probe(
            G, prob, args.starts, args.seed, replace(opts, record_trace=False)
        )
    if args.trace:
        payload["trace"] = [
            {"value": t.value, "grad_norm": t.grad_norm, "means": list(t.monitor)} for t in sol.result.trace
        ]
    rows = [
        {"equation": j + 1, "vertex": v, "u": float(sol.u[j, x]), "u0": float(sol.u0[j, x])}
        for j in range(sol.u.shape[0])
        for x, v in enumerate(G.vertices)
    ]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    G = load_graph(args.graph)
    sol_obj = _read_json(args.solution)
    if args.problem:
        prob = load_problem(args.problem)
    elif isinstance(sol_obj, dict) and "problem" in sol_obj:
        prob = parse_problem(sol_obj["problem"])
    else:
        raise ProblemFormatError("no problem given and the solution file carries none")
    u = parse_solution_u(G, prob, sol_obj)
    rep = diagnostics.verify(G, prob, u, args.tol)
    d = rep.to_dict()
    _emit(args, d, [{"key": k, "value": v} for k, v in d.items() if not isinstance(v, list)])
    if not rep.passed:
        print(f"bps: verification failed\n{rep.details}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_ERROR


def cmd_spectrum(args) -> int:
    G = load_graph(args.graph)
    d = diagnostics.spectrum_report(G)
    _emit(args, d, [{"k": k, "eigenvalue": x} for k, x in enumerate(d["eigenvalues"])])
    return EXIT_OK


def _parse_values(text: str) -> list[int]:
    try:
        if ":" in text:
            parts = [int(t) for t in text.split(":")]
            return list(range(*parts))
        return [int(t) for t in text.split(",") if t.strip()]
    except (ValueError, TypeError):
        raise ProblemFormatError(f"--values: cannot parse {text!r}") from None


def _with_multiplicity(prob, j: int, vertex: str, m: int):
    sets = list(prob.vortex_sets)
    mult = dict(sets[j].multiplicity)
    mult[vertex] = m
    sets[j] = VortexSet(mult)
    return replace(prob, vortex_sets=tuple(sets))


def cmd_sweep(args) -> int:
    G = load_graph(args.graph)
    prob = _require_problem(args)
    m = len(prob.vortex_sets)
    if not 1 <= args.equation <= m:
        raise ProblemFormatError(f"--equation must lie in 1..{m}")
    j = args.equation - 1
    vertex = args.vertex if args.vertex is not None else G.vertices[0]
    G.vertex_index(vertex)
    opts = replace(_options(args), enforce_threshold=False, record_trace=True)
    records = []
    for value in _parse_values(args.values):
        inst = _with_multiplicity(prob, j, vertex, value)
        rep = _check(G, inst)
        rec = {"value": value, "solvable": rep.solvable, "min_margin": rep.min_margin}
        rec["K" if rep.kind == "abelian" else "q"] = list(rep.margins)
        try:
            sol = diagnostics.solve(G, inst, opts, route="unconstrained")
            rec.update(status="converged", residual_inf=sol.residual_norm, iterations=sol.result.iterations)
        except DivergenceDetected as exc:
            rec.update(status="diverged", residual_inf=None, iterations=exc.result.iterations)
            if exc.diagnosis is not None:
                rec["diverged_component"] = exc.diagnosis.component + 1
        except BPSError as exc:
            rec.update(status=exc.code, residual_inf=None, iterations=None)
        records.append(rec)
    rows = [
        {k: r.get(k) for k in ("value", "solvable", "min_margin", "status", "residual_inf", "iterations")}
        for r in records
    ]
    _emit(args, {"equation": args.equation, "vertex": vertex, "records": records}, rows)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except BPSError as exc:
        print(f"bps: {exc}", file=sys.stderr)
        sys.stdout.write(json.dumps({"error": {"code": exc.code, "message": str(exc)}}) + "\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
