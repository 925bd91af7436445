"""The non-Abelian BPS system

    Δu_i = Σ_j a_ij (e^{u_j} - v²) + 4π Σ_s δ_{p_{i,s}},   i = 1..N,

with the coupling matrix ``Â = a·11ᵀ + b·I``, ``a = (e²/2 - g²/(2N))/N`` and
``b = g²/(2N)``.

After ``u = u⁰ + U`` the system reads ``ΔU = Â G + F``. The explicit Cholesky
factor ``Â = TᵀT`` (T upper triangular) and ``w = L U`` with ``L = (Tᵀ)⁻¹``
turn it into ``Δw = T G + L F``, the Euler-Lagrange system of a strictly
convex energy J. Integration gives ``T q = -|V| L F`` for the totals
``q_i = ∫ e^{u_i} dμ``; the system is solvable exactly when all are positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .energy import MARGIN_RTOL, ExpCoupledEnergy, SolverOptions, ThresholdReport, gradient_tolerance
from .errors import (
    DegenerateParameters,
    DivergenceDetected,
    DomainMismatch,
    InvalidCouplings,
    MaxIterations,
    NotSolvable,
    NumericalBreakdown,
)
from .graph_core import GraphData, laplacian
from .optimizer import MinimizeOptions, MinimizerResult, ObjectiveOracle, detect_divergence, minimize
from .poisson import FOUR_PI, VortexSet, background_field

__all__ = [
    "NonabelianProblem",
    "NonabelianStructure",
    "NonabelianSolution",
    "coupling_matrix",
    "explicit_cholesky",
    "closed_form_inverse",
    "build_structure_nonabelian",
    "check_solvable_nonabelian",
    "energy_J",
    "grad_hess_J",
    "constraint_values",
    "nonabelian_residual",
    "jensen_floor_J",
    "solve_nonabelian",
    "solve_nonabelian_constrained",
]


@dataclass(frozen=True)
class NonabelianProblem:
    e: float
    g: float
    v: float
    vortex_sets: tuple[VortexSet, ...]

    def __post_init__(self):
        sets = tuple(vs if isinstance(vs, VortexSet) else VortexSet(vs) for vs in self.vortex_sets)
        if len(sets) < 1:
            raise DomainMismatch("the non-Abelian system needs N >= 1 equations")
        object.__setattr__(self, "vortex_sets", sets)
        for name in ("e", "g", "v"):
            x = float(getattr(self, name))
            if not math.isfinite(x):
                raise InvalidCouplings(f"{name} must be finite")
            object.__setattr__(self, name, x)

    @classmethod
    def from_multiplicities(cls, e, g, v, *multiplicities) -> "NonabelianProblem":
        return cls(e, g, v, tuple(VortexSet(m) for m in multiplicities))

    @property
    def N(self) -> int:
        return len(self.vortex_sets)

    @property
    def totals(self) -> np.ndarray:
        return np.array([vs.total for vs in self.vortex_sets], dtype=float)

    @property
    def n_total(self) -> int:
        return int(sum(vs.total for vs in self.vortex_sets))

    def validate(self, G: GraphData) -> None:
        for vs in self.vortex_sets:
            vs.validate(G)

    def to_dict(self) -> dict:
        return {
            "type": "nonabelian",
            "N": self.N,
            "e": self.e,
            "g": self.g,
            "v": self.v,
            "equations": [vs.to_dict() for vs in self.vortex_sets],
        }


@dataclass(frozen=True, eq=False)
class NonabelianStructure:
    a_scalar: float
    b_scalar: float
    A_hat: np.ndarray
    T: np.ndarray
    alpha: np.ndarray
    L: np.ndarray
    F: np.ndarray
    q: np.ndarray
    p: np.ndarray
    u0: np.ndarray
    cholesky_discrepancy: float

    @property
    def N(self) -> int:
        return self.A_hat.shape[0]

    @property
    def LF(self) -> np.ndarray:
        return self.L @ self.F


@dataclass(eq=False)
class NonabelianSolution:
    u: np.ndarray
    u0: np.ndarray
    U: np.ndarray
    w: np.ndarray
    residual_norm: float
    route: str
    structure: NonabelianStructure
    result: MinimizerResult


def _scalars(N: int, e: float, g: float) -> tuple[float, float]:
    if e == 0.0 or g == 0.0:
        raise DegenerateParameters("couplings e and g must be nonzero")
    # Only e² and g² enter.
    a = (e * e / 2.0 - g * g / (2.0 * N)) / N
    b = g * g / (2.0 * N)
    if N >= 2 and not a > MARGIN_RTOL * e * e / (2.0 * N):
        raise InvalidCouplings(
            f"need e²N > g² for N >= 2 (got e²N = {e * e * N:.6g}, g² = {g * g:.6g}); "
            "the explicit factorisation requires a > 0"
        )
    return a, b


def coupling_matrix(N: int, e: float, g: float) -> np.ndarray:
    a, b = _scalars(N, e, g)
    return a * np.ones((N, N)) + b * np.eye(N)


def explicit_cholesky(N: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangular T with ``TᵀT = a·11ᵀ + b·I`` by the pivot recursion.

    ``t_kk = sqrt(a + b - Σ_{i<k} α_i²)`` and every entry right of the
    diagonal in row k equals ``α_k = (a - Σ_{i<k} α_i²) / t_kk``.
    Returns ``(T, alpha)`` with ``alpha`` of length N - 1.
    """
    T = np.zeros((N, N))
    alpha = np.zeros(max(N - 1, 0))
    acc = 0.0
    for k in range(N):
        pivot = a + b - acc
        if not pivot > 0.0:
            raise InvalidCouplings(f"pivot {k + 1} is not positive ({pivot:.3g})")
        T[k, k] = math.sqrt(pivot)
        if k < N - 1:
            alpha[k] = (a - acc) / T[k, k]
            T[k, k + 1 :] = alpha[k]
            acc += alpha[k] ** 2
    return T, alpha


def closed_form_inverse(N: int, a: float, b: float) -> np.ndarray:
    """``(a·11ᵀ + b·I)⁻¹ = ((Na + b)I - a·11ᵀ) / (b(Na + b))``."""
    return ((N * a + b) * np.eye(N) - a * np.ones((N, N))) / (b * (N * a + b))


def _totals_scale(G: GraphData, prob: NonabelianProblem) -> np.ndarray:
    """Sum of the magnitudes of the terms in :func:`closed_form_totals`."""
    e2, g2, N = prob.e**2, prob.g**2, prob.N
    n_i = prob.totals
    return prob.v**2 * G.volume + 8.0 * np.pi * (1.0 / g2 + 1.0 / (N * e2)) * n_i.sum() + 8.0 * np.pi * N / g2 * n_i


def closed_form_totals(G: GraphData, prob: NonabelianProblem) -> np.ndarray:
    """``q_i = v²|V| + 8π(1/g² - 1/(Ne²)) n - 8πN n_i / g²``.

    Entries within roundoff of zero (relative to the size of the terms) are
    returned as exactly 0.
    """
    e2, g2, N = prob.e**2, prob.g**2, prob.N
    n_i = prob.totals
    q = prob.v**2 * G.volume + 8.0 * np.pi * (1.0 / g2 - 1.0 / (N * e2)) * n_i.sum() - 8.0 * np.pi * N / g2 * n_i
    q[np.abs(q) <= MARGIN_RTOL * _totals_scale(G, prob)] = 0.0
    return q


def build_structure_nonabelian(G: GraphData, prob: NonabelianProblem) -> NonabelianStructure:
    prob.validate(G)
    N = prob.N
    a, b = _scalars(N, prob.e, prob.g)
    A_hat = a * np.ones((N, N)) + b * np.eye(N)
    T, alpha = explicit_cholesky(N, a, b)
    generic = np.linalg.cholesky(A_hat).T
    discrepancy = float(np.abs(generic - T).max())
    if discrepancy > 1e-10 * max(1.0, float(np.abs(A_hat).max())):
        raise NumericalBreakdown(f"explicit Cholesky factor disagrees with LAPACK by {discrepancy:.2e}")
    L = scipy.linalg.solve_triangular(T.T, np.eye(N), lower=True)
    F = FOUR_PI * prob.totals / G.volume - prob.v**2 * A_hat.sum(axis=1)
    p = -G.volume * (L @ F)
    q = scipy.linalg.solve_triangular(T, p, lower=False)
    borderline = np.abs(q) <= MARGIN_RTOL * _totals_scale(G, prob)
    if borderline.any():
        # Make the energy's linear term agree with an exact zero total, so a
        # borderline instance diverges instead of settling on a roundoff-sized q.
        q[borderline] = 0.0
        p = T @ q
        F = -(T.T @ p) / G.volume
    u0 = np.array([background_field(G, vs) for vs in prob.vortex_sets])
    for arr in (A_hat, T, alpha, L, F, p, q, u0):
        arr.setflags(write=False)
    return NonabelianStructure(
        a_scalar=a,
        b_scalar=b,
        A_hat=A_hat,
        T=T,
        alpha=alpha,
        L=L,
        F=F,
        q=q,
        p=p,
        u0=u0,
        cholesky_discrepancy=discrepancy,
    )


def check_solvable_nonabelian(G: GraphData, prob: NonabelianProblem) -> ThresholdReport:
    """Solvable iff every ``q_i > 0``, i.e.

    ``n_i < g²v²|V|/(8πN) + (1 - (g/e)²/N) n / N``  for all i.
    """
    prob.validate(G)
    _scalars(prob.N, prob.e, prob.g)
    q = closed_form_totals(G, prob)
    n = prob.n_total
    bound = (
        prob.g**2 * prob.v**2 * G.volume / (8.0 * np.pi * prob.N)
        + (1.0 - (prob.g / prob.e) ** 2 / prob.N) * n / prob.N
    )
    bound_margin = float(bound - prob.totals.max())
    offending = tuple(int(i) for i in np.flatnonzero(q <= 0.0))
    return ThresholdReport(
        kind="nonabelian",
        margins=tuple(float(x) for x in q),
        solvable=not offending,
        offending=offending,
        bound_margin=bound_margin,
        bound_satisfied=bound_margin > MARGIN_RTOL * max(1.0, abs(bound)),
        volume=G.volume,
    )


def _energy(G: GraphData, struct: NonabelianStructure) -> ExpCoupledEnergy:
    return ExpCoupledEnergy(G=G, C=struct.T.T, u0=struct.u0, lin=struct.LF)


def energy_J(G: GraphData, prob: NonabelianProblem, struct: NonabelianStructure, w) -> float:
    return _energy(G, struct).value(w)


def grad_hess_J(G: GraphData, prob: NonabelianProblem, struct: NonabelianStructure, w):
    en = _energy(G, struct)
    return en.gradient(w), en.hessian(w)


def constraint_values(G: GraphData, prob: NonabelianProblem, struct: NonabelianStructure, w) -> np.ndarray:
    """``I_i(w) = ∫ exp(u⁰_i + (Tᵀw)_i) dμ`` for every i."""
    en = _energy(G, struct)
    return en.exponentials(w) @ G.measure


def nonabelian_residual(G: GraphData, prob: NonabelianProblem, u0, U) -> np.ndarray:
    """``ΔU_i - Σ_j a_ij (e^{u⁰_j+U_j} - v²) - 4πn_i/|V|``, shape ``(N, n)``."""
    N = prob.N
    u0 = np.asarray(u0, dtype=float).reshape(N, G.n)
    U = np.asarray(U, dtype=float).reshape(N, G.n)
    A_hat = coupling_matrix(N, prob.e, prob.g)
    lap = np.array([laplacian(G, Ui) for Ui in U])
    rhs = A_hat @ (np.exp(u0 + U) - prob.v**2) + (FOUR_PI * prob.totals / G.volume)[:, None]
    return lap - rhs


def jensen_floor_J(G: GraphData, struct: NonabelianStructure) -> float:
    """``Σ_i q_i (1 + ln(σ_i / q_i))`` with ``σ_i = |V| exp(mean of u⁰_i)``."""
    q = struct.q
    if np.any(q <= 0):
        return -np.inf
    sigma = G.volume * np.exp(struct.u0 @ G.measure / G.volume)
    return float(np.sum(q * (1.0 + np.log(sigma / q))))


def _multipliers(struct: NonabelianStructure, totals, rhs=None) -> np.ndarray:
    """Back-substitute ``σ_i t_ii q_i + α_i Σ_{j>i} σ_j q_j = rhs_i`` for σ."""
    N = struct.N
    totals = np.asarray(totals, dtype=float)
    rhs = np.zeros(N) if rhs is None else np.asarray(rhs, dtype=float)
    sigma = np.zeros(N)
    for i in range(N - 1, -1, -1):
        tail = struct.alpha[i] * float(sigma[i + 1 :] @ totals[i + 1 :]) if i < N - 1 else 0.0
        sigma[i] = (rhs[i] - tail) / (struct.T[i, i] * totals[i])
    return sigma


def _prepare(G, prob, opts):
    opts = opts or SolverOptions()
    report = check_solvable_nonabelian(G, prob)
    if opts.enforce_threshold and not report.solvable:
        raise NotSolvable(
            f"q_i <= 0 for i in {[i + 1 for i in report.offending]}; no solution exists",
            report=report,
        )
    return opts, report, build_structure_nonabelian(G, prob)


def _finish(G, prob, struct, w, res, opts, mopts, report, route) -> NonabelianSolution:
    if res.status == "diverged":
        diag = detect_divergence(res.trace, mopts) if res.trace else None
        raise DivergenceDetected(
            "mean of a shifted component drifted below the divergence floor",
            report=report,
            diagnosis=diag,
            result=res,
        )
    U = struct.T.T @ w
    with np.errstate(over="ignore"):
        resid = float(np.abs(nonabelian_residual(G, prob, struct.u0, U)).max())
    if res.status == "max_iterations" and resid > opts.tol:
        raise MaxIterations(f"no convergence in {res.iterations} iterations", report=report, result=res)
    if resid > opts.tol:
        raise NumericalBreakdown(f"solver stopped ({res.status}) with residual {resid:.3e}")
    return NonabelianSolution(
        u=struct.u0 + U,
        u0=struct.u0,
        U=U,
        w=w,
        residual_norm=resid,
        route=route,
        structure=struct,
        result=res,
    )


def solve_nonabelian(
    G: GraphData,
    prob: NonabelianProblem,
    opts: SolverOptions | None = None,
    w0=None,
) -> NonabelianSolution:
    """Solve by unconstrained minimisation of J over all of ``w``."""
    opts, report, struct = _prepare(G, prob, opts)
    en = _energy(G, struct)
    x0 = np.zeros(en.dimension) if w0 is None else np.asarray(w0, dtype=float).reshape(-1)
    mopts = MinimizeOptions(
        tol=gradient_tolerance(G, en.C, opts.tol),
        max_iter=opts.max_iter,
        divergence_floor=opts.divergence_floor,
        check_oracle=opts.check_oracle,
        record_trace=opts.record_trace,
    )
    res = minimize(en.oracle(), x0, mopts)
    w = res.argmin.reshape(prob.N, G.n)
    return _finish(G, prob, struct, w, res, opts, mopts, report, "unconstrained")


class _ReducedEnergy:
    """J restricted to the constraint set, as a function of the mean-zero part.

    On ``{I_i(w) = q_i}`` the means are determined by the deviations through
    ``w̄ = L (log q - log I(ŵ))``, and J reduces (up to a constant) to

        R(ŵ) = ½ Σ_i ∫ Γ(ŵ_i, ŵ_i) dμ + Σ_i q_i log I_i(ŵ).

    ``ŵ_i = Q z_i`` where the columns of Q are an orthonormal basis of the
    μ-mean-zero functions.
    """

    def __init__(self, G: GraphData, struct: NonabelianStructure):
        self.G = G
        self.struct = struct
        self.C = struct.T.T
        self.q = np.asarray(struct.q)
        self.S = _energy(G, struct).S
        self.Q = scipy.linalg.null_space(G.measure[None, :])
        self.logmu = np.log(G.measure)
        self.N, self.n = struct.N, G.n

    @property
    def dimension(self) -> int:
        return self.N * self.Q.shape[1]

    def deviations(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float).reshape(self.N, -1) @ self.Q.T

    def _log_terms(self, w_hat):
        z = self.struct.u0 + self.C @ w_hat + self.logmu
        logI = logsumexp(z, axis=1)
        pi = np.exp(z - logI[:, None])  # μ e^{...} / I, rows sum to 1
        return logI, pi

    def log_constraints(self, z) -> np.ndarray:
        return self._log_terms(self.deviations(z))[0]

    def value(self, z) -> float:
        w_hat = self.deviations(z)
        logI, _ = self._log_terms(w_hat)
        return 0.5 * float(np.einsum("ix,xy,iy->", w_hat, self.S, w_hat)) + float(self.q @ logI)

    def _full_gradient(self, w_hat):
        _, pi = self._log_terms(w_hat)
        return w_hat @ self.S + self.C.T @ (self.q[:, None] * pi), pi

    def gradient(self, z) -> np.ndarray:
        g, _ = self._full_gradient(self.deviations(z))
        return (g @ self.Q).reshape(-1)

    def hessian(self, z) -> np.ndarray:
        w_hat = self.deviations(z)
        _, pi = self._log_terms(w_hat)
        N, n = self.N, self.n
        cov = np.einsum("ix,xy->ixy", pi, np.eye(n)) - np.einsum("ix,iy->ixy", pi, pi)
        H = np.einsum("i,ik,im,ixy->kxmy", self.q, self.C, self.C, cov)
        for k in range(N):
            H[k, :, k, :] += self.S
        Q = self.Q
        Hz = np.einsum("xa,kxmy,yb->kamb", Q, H, Q)
        d = Q.shape[1]
        return Hz.reshape(N * d, N * d)

    def recover(self, z) -> np.ndarray:
        """Full ``w = ŵ + w̄`` with the means fixed by the constraints."""
        w_hat = self.deviations(z)
        logI, _ = self._log_terms(w_hat)
        w_bar = self.struct.L @ (np.log(self.q) - logI)
        return w_hat + w_bar[:, None]

    def oracle(self) -> ObjectiveOracle:
        return ObjectiveOracle(
            value=self.value,
            gradient=self.gradient,
            hessian=self.hessian,
            dimension=self.dimension,
            monitor=lambda z: np.empty(0),
        )


def solve_nonabelian_constrained(
    G: GraphData,
    prob: NonabelianProblem,
    opts: SolverOptions | None = None,
) -> NonabelianSolution:
    """Solve by minimising J subject to ``I_i(w) = q_i`` for all i.

    Only the mean-zero deviations are optimised; the means are recovered in
    closed form. The Lagrange multipliers of this problem vanish, so the
    constrained minimiser solves the same Euler-Lagrange system as the
    unconstrained route. Requires all ``q_i > 0`` regardless of
    ``opts.enforce_threshold``, since the logarithms are undefined otherwise.
    """
    opts, report, struct = _prepare(G, prob, opts)
    if not report.solvable:
        raise NotSolvable("constrained route needs every q_i > 0", report=report)
    red = _ReducedEnergy(G, struct)
    mopts = MinimizeOptions(
        tol=0.1 * gradient_tolerance(G, red.C, opts.tol),
        max_iter=opts.max_iter,
        divergence_floor=opts.divergence_floor,
        check_oracle=opts.check_oracle,
        record_trace=opts.record_trace,
    )
    res = minimize(red.oracle(), np.zeros(red.dimension), mopts)
    w = red.recover(res.argmin)
    return _finish(G, prob, struct, w, res, opts, mopts, report, "constrained")
