"""Shared pieces of the two vortex solvers.

Both energies have the form

    E(y) = ∫ ½ Σ_i Γ(y_i, y_i) + Σ_j exp(u⁰_j + (C y)_j) + Σ_i λ_i y_i  dμ

with a lower-triangular coupling matrix ``C`` (``B`` for the Abelian system,
``Tᵀ`` for the non-Abelian one) and constant coefficients ``λ``.
:class:`ExpCoupledEnergy` evaluates it together with its gradient and Hessian
over the flattened coordinates ``y.reshape(-1)`` (component-major).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatch, Overflow
from .graph_core import GraphData, stiffness_matrix
from .optimizer import ObjectiveOracle

EXP_CAP = 700.0
# Totals within this relative distance of zero count as zero: borderline
# instances built from irrational couplings (e = √2) land there by roundoff.
MARGIN_RTOL = 1e-12


def guarded_exp(z: np.ndarray) -> np.ndarray:
    """``exp(z)`` that refuses exponents above :data:`EXP_CAP`."""
    zmax = float(np.max(z, initial=-np.inf))
    if zmax > EXP_CAP or np.isnan(zmax):
        raise Overflow(f"exponent {zmax:.4g} exceeds cap {EXP_CAP}")
    return np.exp(z)


@dataclass(frozen=True)
class ThresholdReport:
    """Solvability margins of one problem instance.

    ``margins`` holds the K_j (Abelian) or q_i (non-Abelian) totals; the
    instance is solvable exactly when all are positive. ``bound_margin`` is
    the margin of the closed-form bound on the largest vortex count, and
    ``bound_satisfied`` its verdict.
    """

    kind: str
    margins: tuple[float, ...]
    solvable: bool
    offending: tuple[int, ...]
    bound_margin: float
    bound_satisfied: bool
    volume: float

    @property
    def min_margin(self) -> float:
        return min(self.margins)

    def to_dict(self) -> dict:
        key = "K" if self.kind == "abelian" else "q"
        return {
            "type": self.kind,
            "solvable": self.solvable,
            key: list(self.margins),
            "offending": list(self.offending),
            "bound_margin": self.bound_margin,
            "bound_satisfied": self.bound_satisfied,
            "volume": self.volume,
        }


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 200
    divergence_floor: float = -50.0
    enforce_threshold: bool = True
    check_oracle: bool = False
    record_trace: bool = True


@dataclass(frozen=True, eq=False)
class ExpCoupledEnergy:
    G: GraphData
    C: np.ndarray
    u0: np.ndarray  # shape (m, n)
    lin: np.ndarray  # shape (m,)
    S: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "S", stiffness_matrix(self.G))

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def dimension(self) -> int:
        return self.m * self.G.n

    def _shape(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.size != self.dimension:
            raise DomainMismatch(f"expected {self.m} functions on {self.G.n} vertices, got {y.shape}")
        return y.reshape(self.m, self.G.n)

    def exponentials(self, y) -> np.ndarray:
        y = self._shape(y)
        return guarded_exp(self.u0 + self.C @ y)

    def value(self, y) -> float:
        y = self._shape(y)
        mu = self.G.measure
        dirichlet = 0.5 * float(np.einsum("ix,xy,iy->", y, self.S, y))
        expo = float((self.exponentials(y) @ mu).sum())
        linear = float(self.lin @ (y @ mu))
        return dirichlet + expo + linear

    def gradient(self, y) -> np.ndarray:
        y = self._shape(y)
        mu = self.G.measure
        E = self.exponentials(y)
        g = y @ self.S + mu * (self.C.T @ E) + np.outer(self.lin, mu)
        return g.reshape(-1)

    def hessian(self, y) -> np.ndarray:
        y = self._shape(y)
        m, n = self.m, self.G.n
        E = self.exponentials(y) * self.G.measure
        H = np.zeros((m, n, m, n))
        idx = np.arange(n)
        block = np.einsum("ji,jk,jx->xik", self.C, self.C, E)
        H[:, idx, :, idx] = block
        for i in range(m):
            H[i, :, i, :] += self.S
        return H.reshape(m * n, m * n)

    def mean_coordinates(self, y) -> np.ndarray:
        """Means of the shifted unknowns ``C y``."""
        y = self._shape(y)
        return self.C @ (y @ self.G.measure) / self.G.volume

    def oracle(self) -> ObjectiveOracle:
        return ObjectiveOracle(
            value=self.value,
            gradient=self.gradient,
            hessian=self.hessian,
            dimension=self.dimension,
            monitor=self.mean_coordinates,
        )


def gradient_tolerance(G: GraphData, C: np.ndarray, tol: float) -> float:
    """Gradient tolerance that implies a shifted-system residual below ``tol``.

    The residual is ``C · gradient / μ`` componentwise, so dividing by
    ``‖C‖∞ / min μ`` (with a factor-2 safety margin) is sufficient.
    """
    return 0.5 * tol * float(G.measure.min()) / max(1.0, float(np.abs(C).sum(axis=1).max()))
