"""The l-component Abelian BPS system

    Δu_j = e^{u_j} + Σ_i e^{u_i} - (l+1) + 4π Σ_s δ_{p_{j,s}},   j = 1..l.

Writing ``u = u⁰ + v`` with mean-zero backgrounds ``u⁰`` gives the regular
system ``Δv = A E - Φ`` where ``A = I + 11ᵀ``, ``E_j = exp(u⁰_j + v_j)`` and
``Φ_j = l + 1 - 4π N_j / |V|``. With the explicit lower-triangular factor
``A = B Bᵀ`` and ``v = B q`` this becomes the Euler-Lagrange system
``Δq = Bᵀ E - B⁻¹Φ`` of a strictly convex energy.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .energy import (
    MARGIN_RTOL,
    ExpCoupledEnergy,
    SolverOptions,
    ThresholdReport,
    gradient_tolerance,
)
from .errors import DivergenceDetected, DomainMismatch, MaxIterations, NotSolvable, NumericalBreakdown
from .graph_core import GraphData, laplacian
from .optimizer import MinimizeOptions, MinimizerResult, detect_divergence, minimize
from .poisson import FOUR_PI, VortexSet, background_field

__all__ = [
    "AbelianProblem",
    "AbelianStructure",
    "AbelianSolution",
    "coupling_factor",
    "check_solvable_abelian",
    "build_structure",
    "energy_I",
    "grad_hess_I",
    "abelian_residual",
    "solve_abelian",
    "jensen_floor_I",
]


@dataclass(frozen=True)
class AbelianProblem:
    vortex_sets: tuple[VortexSet, ...]

    def __post_init__(self):
        sets = tuple(vs if isinstance(vs, VortexSet) else VortexSet(vs) for vs in self.vortex_sets)
        if len(sets) < 1:
            raise DomainMismatch("the Abelian system needs at least one equation")
        object.__setattr__(self, "vortex_sets", sets)

    @classmethod
    def from_multiplicities(cls, *multiplicities) -> "AbelianProblem":
        return cls(tuple(VortexSet(m) for m in multiplicities))

    @property
    def l(self) -> int:
        return len(self.vortex_sets)

    @property
    def totals(self) -> np.ndarray:
        return np.array([vs.total for vs in self.vortex_sets], dtype=float)

    def validate(self, G: GraphData) -> None:
        for vs in self.vortex_sets:
            vs.validate(G)

    def to_dict(self) -> dict:
        return {"type": "abelian", "l": self.l, "equations": [vs.to_dict() for vs in self.vortex_sets]}


@dataclass(frozen=True, eq=False)
class AbelianStructure:
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    g_vec: np.ndarray
    Phi: np.ndarray
    u0: np.ndarray

    @property
    def l(self) -> int:
        return self.A.shape[0]


@dataclass(eq=False)
class AbelianSolution:
    u: np.ndarray
    u0: np.ndarray
    v: np.ndarray
    q: np.ndarray
    residual_norm: float
    structure: AbelianStructure
    result: MinimizerResult


def coupling_factor(l: int) -> np.ndarray:
    """Lower-triangular B with ``B Bᵀ = I + 11ᵀ``, from its closed-form entries.

    With 1-based indices, ``b_ii = sqrt((i+1)/i)`` and
    ``b_ij = sqrt(1/(j(j+1)))`` below the diagonal.
    """
    B = np.zeros((l, l))
    for i in range(1, l + 1):
        B[i - 1, i - 1] = np.sqrt((i + 1) / i)
        for j in range(1, i):
            B[i - 1, j - 1] = np.sqrt(1.0 / (j * (j + 1)))
    return B


def _closed_form_K(volume: float, totals: np.ndarray) -> np.ndarray:
    l = totals.size
    K = volume - FOUR_PI * totals + FOUR_PI / (l + 1) * totals.sum()
    scale = volume + FOUR_PI * totals + FOUR_PI / (l + 1) * totals.sum()
    K[np.abs(K) <= MARGIN_RTOL * scale] = 0.0
    return K


def check_solvable_abelian(G: GraphData, prob: AbelianProblem) -> ThresholdReport:
    """Solvability of the Abelian system on ``G``.

    Integrating the shifted system gives ``∫ e^{u_j} dμ = K_j`` with
    ``K_j = |V| - 4πN_j + 4π/(l+1) Σ_i N_i``, so a solution exists exactly
    when every ``K_j > 0``. For l = 1 this is ``N_1 < 2|V|/(4π)``; for larger
    l the bound ``max_j N_j < (l+1)|V|/(4π)`` is necessary but weaker, and is
    reported separately as ``bound_satisfied``.
    """
    prob.validate(G)
    N = prob.totals
    K = _closed_form_K(G.volume, N)
    bound = (prob.l + 1) * G.volume / FOUR_PI - float(N.max())
    offending = tuple(int(j) for j in np.flatnonzero(K <= 0.0))
    return ThresholdReport(
        kind="abelian",
        margins=tuple(float(k) for k in K),
        solvable=not offending,
        offending=offending,
        bound_margin=float(bound),
        bound_satisfied=bound > MARGIN_RTOL * (prob.l + 1) * G.volume / FOUR_PI,
        volume=G.volume,
    )


def build_structure(G: GraphData, prob: AbelianProblem) -> AbelianStructure:
    prob.validate(G)
    l = prob.l
    A = np.ones((l, l)) + np.eye(l)
    B = coupling_factor(l)
    Phi = (l + 1) - FOUR_PI * prob.totals / G.volume
    g_vec = scipy.linalg.solve_triangular(B, Phi, lower=True)
    K = G.volume * scipy.linalg.solve_triangular(B.T, g_vec, lower=False)
    borderline = _closed_form_K(G.volume, prob.totals) == 0.0
    if borderline.any():
        # Tie Φ and g to an exact K_j = 0, so the energy has no roundoff-sized minimiser.
        K[borderline] = 0.0
        Phi = A @ K / G.volume
        g_vec = B.T @ K / G.volume
    u0 = np.array([background_field(G, vs) for vs in prob.vortex_sets])
    for arr in (A, B, Phi, g_vec, K, u0):
        arr.setflags(write=False)
    return AbelianStructure(A=A, B=B, K=K, g_vec=g_vec, Phi=Phi, u0=u0)


def _energy(G: GraphData, struct: AbelianStructure) -> ExpCoupledEnergy:
    return ExpCoupledEnergy(G=G, C=struct.B, u0=struct.u0, lin=-struct.g_vec)


def energy_I(G: GraphData, prob: AbelianProblem, struct: AbelianStructure, q) -> float:
    """Energy whose critical points solve ``Δq = Bᵀ E - g``.

    ``q`` is an ``(l, n)`` array (or its flattening). Raises
    :class:`~bpsgraph.errors.Overflow` if an exponent exceeds the cap.
    """
    return _energy(G, struct).value(q)


def grad_hess_I(G: GraphData, prob: AbelianProblem, struct: AbelianStructure, q):
    """Gradient (flattened, component-major) and dense Hessian of :func:`energy_I`.

    Coordinate ``(i, x)`` of the gradient is
    ``μ(x) (-Δq_i + (Bᵀ E)_i - g_i)(x)``.
    """
    en = _energy(G, struct)
    return en.gradient(q), en.hessian(q)


def abelian_residual(G: GraphData, prob: AbelianProblem, u0, v) -> np.ndarray:
    """Pointwise residual of the shifted system, shape ``(l, n)``.

    ``Δv_j - e^{u⁰_j+v_j} - Σ_i e^{u⁰_i+v_i} + (l+1) - 4πN_j/|V|``
    """
    u0 = np.asarray(u0, dtype=float).reshape(prob.l, G.n)
    v = np.asarray(v, dtype=float).reshape(prob.l, G.n)
    E = np.exp(u0 + v)
    lap = np.array([laplacian(G, vj) for vj in v])
    rhs = E + E.sum(axis=0) - (prob.l + 1) + (FOUR_PI * prob.totals / G.volume)[:, None]
    return lap - rhs


def jensen_floor_I(G: GraphData, struct: AbelianStructure) -> float:
    """Lower bound ``Σ_j K_j (1 + ln(c_j / K_j))`` of the energy, valid when all K_j > 0.

    ``c_j = |V| exp(mean of u⁰_j)``.
    """
    K = struct.K
    if np.any(K <= 0):
        return -np.inf
    c = G.volume * np.exp(struct.u0 @ G.measure / G.volume)
    return float(np.sum(K * (1.0 + np.log(c / K))))


def solve_abelian(
    G: GraphData,
    prob: AbelianProblem,
    opts: SolverOptions | None = None,
    q0=None,
) -> AbelianSolution:
    """Solve the Abelian system by minimising :func:`energy_I`.

    ``q0`` is the starting point in transformed coordinates (default zero,
    i.e. ``u = u⁰``). With ``opts.enforce_threshold`` (the default) the
    solvability check runs first; disabling it lets the divergence detector
    diagnose unsolvable instances.
    """
    opts = opts or SolverOptions()
    report = check_solvable_abelian(G, prob)
    if opts.enforce_threshold and not report.solvable:
        raise NotSolvable(
            f"K_j <= 0 for j in {[j + 1 for j in report.offending]}; no solution exists",
            report=report,
        )
    struct = build_structure(G, prob)
    en = _energy(G, struct)
    x0 = np.zeros(en.dimension) if q0 is None else np.asarray(q0, dtype=float).reshape(-1)
    mopts = MinimizeOptions(
        tol=gradient_tolerance(G, struct.B, opts.tol),
        max_iter=opts.max_iter,
        divergence_floor=opts.divergence_floor,
        check_oracle=opts.check_oracle,
        record_trace=opts.record_trace,
    )
    res = minimize(en.oracle(), x0, mopts)
    q = res.argmin.reshape(prob.l, G.n)
    return _assemble(G, prob, struct, q, res, opts, mopts, report)


def _assemble(G, prob, struct, q, res, opts, mopts, report) -> AbelianSolution:
    if res.status == "diverged":
        diag = detect_divergence(res.trace, mopts) if res.trace else None
        raise DivergenceDetected(
            "mean of a shifted component drifted below the divergence floor",
            report=report,
            diagnosis=diag,
            result=res,
        )
    v = struct.B @ q
    with np.errstate(over="ignore"):
        resid = float(np.abs(abelian_residual(G, prob, struct.u0, v)).max())
    if res.status == "max_iterations" and resid > opts.tol:
        raise MaxIterations(f"no convergence in {res.iterations} iterations", report=report, result=res)
    if resid > opts.tol:
        raise NumericalBreakdown(f"solver stopped ({res.status}) with residual {resid:.3e}")
    return AbelianSolution(
        u=struct.u0 + v,
        u0=struct.u0,
        v=v,
        q=q,
        residual_norm=resid,
        structure=struct,
        result=res,
    )


def permuted(prob: AbelianProblem, order: Sequence[int]) -> AbelianProblem:
    """Problem with its equations reordered."""
    return AbelianProblem(tuple(prob.vortex_sets[k] for k in order))
