"""Damped Newton minimisation for smooth strictly convex objectives.

The engine is shared by the two vortex solvers. Besides the plain minimiser it
watches a set of *monitored coordinates* (the solvers pass the means of the
shifted unknowns). When the energy has no minimiser, for instance because an
integral constraint forces a non-positive total, those means drift to -∞ and
the run is reported as ``diverged`` instead of exhausting its iteration
budget.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NumericalBreakdown, OracleInconsistent, Overflow

# Relative size of the roundoff in f. Energies close to the solvability
# threshold are sums of large cancelling terms, so this sits well above eps.
VALUE_NOISE_RTOL = 1e-12


@dataclass(frozen=True)
class ObjectiveOracle:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    dimension: int
    monitor: Callable[[np.ndarray], np.ndarray] | None = None

    def monitored(self, x: np.ndarray) -> np.ndarray:
        if self.monitor is None:
            return np.asarray(x, dtype=float)
        return np.asarray(self.monitor(x), dtype=float)


@dataclass(frozen=True)
class MinimizeOptions:
    tol: float = 1e-10
    max_iter: int = 200
    step_tol: float = 1e-6
    divergence_floor: float = -50.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    check_oracle: bool = False
    record_trace: bool = True


class TraceEntry(NamedTuple):
    value: float
    grad_norm: float
    monitor: tuple[float, ...] = ()
    step_norm: float = 0.0


@dataclass
class MinimizerResult:
    argmin: np.ndarray
    value: float
    iterations: int
    status: str  # converged | diverged | max_iterations | stalled
    grad_norm: float
    trace: list[TraceEntry] = field(default_factory=list)
    newton_steps: int = 0
    gradient_steps: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"


@dataclass(frozen=True)
class Diagnosis:
    diverged: bool
    component: int | None = None
    iteration: int | None = None
    monitor_value: float | None = None

    def to_dict(self) -> dict:
        return {
            "diverged": self.diverged,
            "component": self.component,
            "iteration": self.iteration,
            "monitor_value": self.monitor_value,
        }


def check_oracle(
    oracle: ObjectiveOracle,
    x: np.ndarray,
    rtol: float = 1e-5,
    sym_tol: float = 1e-10,
    step: float = 1e-5,
) -> tuple[float, float]:
    """Compare the analytic gradient with central differences at ``x``.

    Returns ``(gradient_error, hessian_asymmetry)``, both relative to
    ``max(1, ‖·‖∞)``, and raises :class:`OracleInconsistent` above tolerance.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(oracle.gradient(x))
    fd = np.empty_like(g)
    for k in range(x.size):
        h = step * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd[k] = (oracle.value(xp) - oracle.value(xm)) / (2.0 * h)
    grad_err = float(np.abs(fd - g).max(initial=0.0) / max(1.0, np.abs(g).max(initial=0.0)))
    H = np.asarray(oracle.hessian(x))
    asym = float(np.abs(H - H.T).max(initial=0.0) / max(1.0, np.abs(H).max(initial=0.0)))
    if grad_err > rtol:
        raise OracleInconsistent(f"gradient differs from finite differences by {grad_err:.2e}")
    if asym > sym_tol:
        raise OracleInconsistent(f"hessian asymmetric by {asym:.2e}")
    return grad_err, asym


def _direction(oracle: ObjectiveOracle, x: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, bool]:
    """Newton direction, or steepest descent when the Hessian solve fails."""
    try:
        factor = scipy.linalg.cho_factor(np.asarray(oracle.hessian(x), dtype=float))
        s = -scipy.linalg.cho_solve(factor, g)
        if np.all(np.isfinite(s)) and (float(g @ s) < 0.0 or not np.any(g)):
            return s, True
    except (np.linalg.LinAlgError, ValueError):
        pass
    return -g, False


def _safe_value(oracle: ObjectiveOracle, x: np.ndarray) -> float:
    try:
        f = float(oracle.value(x))
    except Overflow:
        return math.inf
    return f if math.isfinite(f) else math.inf


def minimize(
    oracle: ObjectiveOracle,
    x0: Sequence[float] | np.ndarray,
    opts: MinimizeOptions | None = None,
) -> MinimizerResult:
    """Minimise ``oracle.value`` from ``x0`` by damped Newton with Armijo backtracking.

    Newton directions come from a Cholesky solve of the Hessian; if that fails
    the step falls back to steepest descent. Convergence needs both
    ``‖∇f‖∞ ≤ tol`` and a Newton step below ``step_tol``: on a flat tail with
    no minimiser (``f = e^x``) the gradient vanishes but the Newton step does
    not, so such runs continue until the monitored means cross
    ``divergence_floor``.

    Near the minimiser the predicted decrease can drop below the resolution of
    ``f`` itself (taken as ``VALUE_NOISE_RTOL`` relative); in that regime a
    step is accepted when it does not raise ``f`` beyond that and strictly
    lowers the gradient norm.
    """
    opts = opts or MinimizeOptions()
    x = np.array(x0, dtype=float)
    if x.shape != (oracle.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({oracle.dimension},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    if opts.check_oracle and oracle.dimension:
        check_oracle(oracle, x)

    f = float(oracle.value(x))
    g = np.asarray(oracle.gradient(x), dtype=float)
    gnorm = float(np.abs(g).max(initial=0.0))
    trace: list[TraceEntry] = []
    n_newton = n_grad = 0
    status = "max_iterations"
    it = 0
    while True:
        s, newton = _direction(oracle, x, g)
        snorm = float(np.abs(s).max(initial=0.0))
        mon = oracle.monitored(x)
        if opts.record_trace:
            trace.append(TraceEntry(f, gnorm, tuple(mon.tolist()), snorm))
        if gnorm <= opts.tol and snorm <= opts.step_tol:
            status = "converged"
            break
        if mon.size and float(mon.min()) < opts.divergence_floor:
            status = "diverged"
            break
        if it >= opts.max_iter:
            break
        it += 1
        slope = float(g @ s)

        t = 1.0
        accepted = False
        noise = VALUE_NOISE_RTOL * max(1.0, abs(f))
        for _ in range(opts.max_backtracks):
            x_new = x + t * s
            f_new = _safe_value(oracle, x_new)
            if f_new <= f + opts.armijo_c * t * slope:
                accepted = True
            elif f_new <= f + noise and -opts.armijo_c * t * slope <= noise:
                g_try = np.asarray(oracle.gradient(x_new), dtype=float)
                accepted = float(np.abs(g_try).max()) < gnorm
            if accepted:
                break
            t *= opts.backtrack
        if not accepted:
            status = "stalled"
            break

        if newton:
            n_newton += 1
        else:
            n_grad += 1
        x, f = x_new, f_new
        g = np.asarray(oracle.gradient(x), dtype=float)
        gnorm = float(np.abs(g).max(initial=0.0))
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise NumericalBreakdown(f"non-finite objective or gradient at iteration {it}")

    return MinimizerResult(
        argmin=x,
        value=f,
        iterations=it,
        status=status,
        grad_norm=gnorm,
        trace=trace,
        newton_steps=n_newton,
        gradient_steps=n_grad,
    )


def detect_divergence(trace: Sequence[TraceEntry], opts: MinimizeOptions | None = None) -> Diagnosis:
    """Find the first trace entry whose monitored mean fell below the floor.

    Entries that already meet the convergence test are skipped, so a run
    sitting at a converged point is never flagged.
    """
    opts = opts or MinimizeOptions()
    if len(trace) == 0:
        raise ValueError("empty trace")
    for k, entry in enumerate(trace):
        mon = np.asarray(entry.monitor, dtype=float)
        if mon.size == 0 or (entry.grad_norm <= opts.tol and entry.step_norm <= opts.step_tol):
            continue
        j = int(np.argmin(mon))
        if mon[j] < opts.divergence_floor:
            return Diagnosis(True, component=j, iteration=k, monitor_value=float(mon[j]))
    return Diagnosis(False)
