"""Solver-independent verification of claimed solutions.

Every check here starts from ``(G, problem, u)`` alone: the backgrounds are
recomputed, the shifted unknowns are ``u - u⁰`` and the totals come from
their closed forms, never from solver state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import abelian as ab
from . import nonabelian as na
from .energy import SolverOptions
from .graph_core import GraphData, laplacian_spectrum, poincare_constant
from .poisson import background_field

QUADRATURE_RTOL = 1e-6
FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class VerificationReport:
    residual_inf: float
    quadrature_errors: tuple[float, ...]
    jensen_floor_gap: float
    passed: bool
    details: str
    tol: float
    worst_equation: int
    worst_vertex: str
    coordinate_error: float | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "residual_inf": self.residual_inf,
            "quadrature_errors": list(self.quadrature_errors),
            "jensen_floor_gap": self.jensen_floor_gap,
            "coordinate_error": self.coordinate_error,
            "worst_equation": self.worst_equation,
            "worst_vertex": self.worst_vertex,
            "details": self.details,
        }


def _u_array(sol, m: int, n: int) -> np.ndarray:
    u = getattr(sol, "u", sol)
    return np.asarray(u, dtype=float).reshape(m, n)


def _report(G, resid, quad, gap, tol, coord_err, label) -> VerificationReport:
    finite = np.where(np.isfinite(resid), np.abs(resid), np.inf)
    j, x = np.unravel_index(int(np.argmax(finite)), finite.shape)
    r = float(finite.max())
    quad = tuple(float(e) for e in quad)
    ok = r <= tol and all(e <= QUADRATURE_RTOL for e in quad) and gap >= -FLOOR_SLACK
    if coord_err is not None:
        ok = ok and coord_err <= 1e-10
    lines = [
        f"{label}: residual {r:.3e} (tol {tol:.1e}), worst at equation {j + 1}, vertex {G.vertices[x]!r}",
        "quadrature relative errors: " + ", ".join(f"{e:.2e}" for e in quad),
        f"energy minus Jensen floor: {gap:.6g}",
    ]
    if coord_err is not None:
        lines.append(f"coordinate consistency error: {coord_err:.2e}")
    return VerificationReport(
        residual_inf=r,
        quadrature_errors=quad,
        jensen_floor_gap=float(gap),
        passed=bool(ok),
        details="\n".join(lines),
        tol=tol,
        worst_equation=int(j) + 1,
        worst_vertex=G.vertices[x],
        coordinate_error=coord_err,
    )


def verify_abelian(G: GraphData, prob: ab.AbelianProblem, sol, tol: float = 1e-10) -> VerificationReport:
    """Check residual, ``∫ e^{u_j} dμ = K_j`` and the energy floor for a claimed solution.

    ``sol`` is an :class:`~bpsgraph.abelian.AbelianSolution` or an ``(l, n)``
    array of ``u`` values. If it carries transformed coordinates ``q``,
    ``v = B q`` is checked too.
    """
    l, n = prob.l, G.n
    u = _u_array(sol, l, n)
    u0 = np.array([background_field(G, vs) for vs in prob.vortex_sets])
    v = u - u0
    with np.errstate(over="ignore", invalid="ignore"):
        resid = ab.abelian_residual(G, prob, u0, v)
        integrals = np.exp(u) @ G.measure
    K = np.asarray(ab.check_solvable_abelian(G, prob).margins)
    quad = np.abs(integrals - K) / np.maximum(np.abs(K), 1e-300)

    B = ab.coupling_factor(l)
    q_rec = scipy.linalg.solve_triangular(B, v, lower=True)
    struct = ab.build_structure(G, prob)
    try:
        gap = ab.energy_I(G, prob, struct, q_rec) - ab.jensen_floor_I(G, struct)
    except ArithmeticError:
        gap = -np.inf

    coord_err = None
    q = getattr(sol, "q", None)
    if q is not None:
        v_claimed = getattr(sol, "v", v)
        coord_err = float(np.abs(np.asarray(v_claimed) - B @ np.asarray(q)).max())
    return _report(G, resid, quad, gap, tol, coord_err, "abelian")


def verify_nonabelian(G: GraphData, prob: na.NonabelianProblem, sol, tol: float = 1e-10) -> VerificationReport:
    """Non-Abelian analogue of :func:`verify_abelian`.

    The quadrature errors compare ``∫ e^{u_i} dμ`` with the closed-form
    ``q_i``; the triangular identities ``t_ii q_i + α_i Σ_{j>i} q_j = p_i``
    are reported in ``details``.
    """
    N, n = prob.N, G.n
    u = _u_array(sol, N, n)
    struct = na.build_structure_nonabelian(G, prob)
    u0 = np.array([background_field(G, vs) for vs in prob.vortex_sets])
    U = u - u0
    with np.errstate(over="ignore", invalid="ignore"):
        resid = na.nonabelian_residual(G, prob, u0, U)
        integrals = np.exp(u) @ G.measure
    q = na.closed_form_totals(G, prob)
    quad = np.abs(integrals - q) / np.maximum(np.abs(q), 1e-300)
    tri = np.abs(struct.T @ integrals - struct.p) / np.maximum(np.abs(struct.p), 1e-300)

    w_rec = struct.L @ U
    try:
        gap = na.energy_J(G, prob, struct, w_rec) - na.jensen_floor_J(G, struct)
    except ArithmeticError:
        gap = -np.inf

    coord_err = None
    w = getattr(sol, "w", None)
    if w is not None:
        U_claimed = getattr(sol, "U", U)
        coord_err = float(np.abs(np.asarray(U_claimed) - struct.T.T @ np.asarray(w)).max())
    rep = _report(G, resid, quad, gap, tol, coord_err, "nonabelian")
    extra = "triangular identity relative errors: " + ", ".join(f"{e:.2e}" for e in tri)
    return VerificationReport(**{**rep.__dict__, "details": rep.details + "\n" + extra})


def verify(G: GraphData, prob, sol, tol: float = 1e-10) -> VerificationReport:
    if isinstance(prob, ab.AbelianProblem):
        return verify_abelian(G, prob, sol, tol)
    return verify_nonabelian(G, prob, sol, tol)


def solve(G: GraphData, prob, opts: SolverOptions | None = None, start=None, route: str = "unconstrained"):
    """Dispatch to the solver matching ``prob``'s type."""
    if isinstance(prob, ab.AbelianProblem):
        return ab.solve_abelian(G, prob, opts, start)
    if route == "constrained":
        return na.solve_nonabelian_constrained(G, prob, opts)
    return na.solve_nonabelian(G, prob, opts, start)


def random_starts(G: GraphData, prob, k: int, seed) -> list[np.ndarray]:
    """``k`` starting points drawn uniformly from [-2, 2] per coordinate."""
    m = prob.l if isinstance(prob, ab.AbelianProblem) else prob.N
    rng = np.random.default_rng(seed)
    return [rng.uniform(-2.0, 2.0, size=(m, G.n)) for _ in range(k)]


def uniqueness_probe(
    G: GraphData,
    prob,
    k_starts: int = 10,
    seed=0,
    opts: SolverOptions | None = None,
) -> float:
    """Max pairwise ∞-distance between solutions reached from ``k_starts`` random starts."""
    opts = opts or SolverOptions(record_trace=False)
    sols = [solve(G, prob, opts, x0).u for x0 in random_starts(G, prob, k_starts, seed)]
    return max(
        (float(np.abs(a - b).max()) for a, b in itertools.combinations(sols, 2)),
        default=0.0,
    )


def spectrum_report(G: GraphData) -> dict:
    vals, _ = laplacian_spectrum(G)
    out = {"eigenvalues": [float(x) for x in vals], "volume": G.volume}
    out["poincare_constant"] = poincare_constant(G) if G.n >= 2 else None
    out["spectral_gap"] = float(vals[1]) if G.n >= 2 else None
    return out
