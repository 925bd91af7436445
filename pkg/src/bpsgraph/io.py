"""JSON readers and writers for graph, problem and solution files."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .abelian import AbelianProblem, AbelianSolution
from .errors import ProblemFormatError
from .graph_core import GraphData, build_graph
from .nonabelian import NonabelianProblem, NonabelianSolution
from .poisson import VortexSet


def _read_json(path) -> object:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _check_keys(obj, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ProblemFormatError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ProblemFormatError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ProblemFormatError(f"{where}: missing keys {sorted(missing)}")


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ProblemFormatError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def parse_graph(obj) -> GraphData:
    _check_keys(obj, {"vertices", "edges"}, {"vertices"}, "graph")
    if not isinstance(obj["vertices"], list) or not isinstance(obj.get("edges", []), list):
        raise ProblemFormatError("graph: 'vertices' and 'edges' must be lists")
    for k, vert in enumerate(obj["vertices"]):
        _check_keys(vert, {"id", "mu"}, {"id", "mu"}, f"graph.vertices[{k}]")
        _number(vert["mu"], f"graph.vertices[{k}].mu")
    for k, edge in enumerate(obj.get("edges", [])):
        _check_keys(edge, {"a", "b", "w"}, {"a", "b", "w"}, f"graph.edges[{k}]")
        _number(edge["w"], f"graph.edges[{k}].w")
    return build_graph(obj)


def load_graph(path) -> GraphData:
    return parse_graph(_read_json(path))


def _vortex_sets(obj, count: int, where: str) -> tuple[VortexSet, ...]:
    eqs = obj.get("equations")
    if not isinstance(eqs, list):
        raise ProblemFormatError(f"{where}: 'equations' must be a list")
    if len(eqs) != count:
        raise ProblemFormatError(f"{where}: declares {count} equations but lists {len(eqs)}")
    sets = []
    for k, eq in enumerate(eqs):
        _check_keys(eq, {"vortices"}, {"vortices"}, f"{where}.equations[{k}]")
        vort = eq["vortices"]
        if not isinstance(vort, dict):
            raise ProblemFormatError(f"{where}.equations[{k}].vortices must be an object")
        for vid, m in vort.items():
            if isinstance(m, bool) or not isinstance(m, int) or m < 0:
                raise ProblemFormatError(
                    f"{where}.equations[{k}].vortices[{vid!r}]: expected a nonnegative integer, got {m!r}"
                )
        sets.append(VortexSet(vort))
    return tuple(sets)


def _count(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < 1:
        raise ProblemFormatError(f"{where}: expected a positive integer, got {x!r}")
    return x


def parse_problem(obj) -> AbelianProblem | NonabelianProblem:
    if not isinstance(obj, dict) or "type" not in obj:
        raise ProblemFormatError("problem: expected an object with a 'type' key")
    kind = obj["type"]
    if kind == "abelian":
        _check_keys(obj, {"type", "l", "equations"}, {"type", "l", "equations"}, "problem")
        return AbelianProblem(_vortex_sets(obj, _count(obj["l"], "problem.l"), "problem"))
    if kind == "nonabelian":
        keys = {"type", "N", "e", "g", "v", "equations"}
        _check_keys(obj, keys, keys, "problem")
        N = _count(obj["N"], "problem.N")
        return NonabelianProblem(
            _number(obj["e"], "problem.e"),
            _number(obj["g"], "problem.g"),
            _number(obj["v"], "problem.v"),
            _vortex_sets(obj, N, "problem"),
        )
    raise ProblemFormatError(f"problem: unknown type {kind!r}")


def load_problem(path) -> AbelianProblem | NonabelianProblem:
    return parse_problem(_read_json(path))


def _per_equation(G: GraphData, arr) -> dict:
    return {str(j + 1): {v: float(x) for v, x in zip(G.vertices, row)} for j, row in enumerate(np.asarray(arr))}


def solution_to_dict(G: GraphData, prob, sol, report) -> dict:
    """Serialise a solution. Equation indices are 1-based strings."""
    out = {
        "problem": prob.to_dict(),
        "u": _per_equation(G, sol.u),
        "residual_inf": float(sol.residual_norm),
    }
    if isinstance(sol, AbelianSolution):
        out["K"] = [float(k) for k in report.margins]
        out["decomposition"] = {
            "u0": _per_equation(G, sol.u0),
            "v": _per_equation(G, sol.v),
            "q": _per_equation(G, sol.q),
        }
    elif isinstance(sol, NonabelianSolution):
        out["q"] = [float(x) for x in report.margins]
        out["route"] = sol.route
        out["decomposition"] = {
            "u0": _per_equation(G, sol.u0),
            "U": _per_equation(G, sol.U),
            "w": _per_equation(G, sol.w),
        }
    out["iterations"] = sol.result.iterations
    return out


def parse_solution_u(G: GraphData, prob, obj) -> np.ndarray:
    """Extract the ``(m, n)`` array of u values from a solution file object."""
    if not isinstance(obj, dict) or "u" not in obj:
        raise ProblemFormatError("solution: missing 'u'")
    m = prob.l if isinstance(prob, AbelianProblem) else prob.N
    table = obj["u"]
    if not isinstance(table, dict) or set(table) != {str(j + 1) for j in range(m)}:
        raise ProblemFormatError(f"solution.u: expected equation keys 1..{m}")
    u = np.empty((m, G.n))
    for j in range(m):
        row = table[str(j + 1)]
        if not isinstance(row, dict) or set(row) != set(G.vertices):
            raise ProblemFormatError(f"solution.u[{j + 1}]: vertex set differs from the graph")
        u[j] = [_number(row[v], f"solution.u[{j + 1}][{v!r}]") for v in G.vertices]
    return u
