"""Background Poisson problems that absorb the Dirac sources.

The vortex data enter both systems as ``4π Σ_s δ_{p_s}``; subtracting the
solution ``u⁰`` of

    Δu⁰ = 4π Σ_s δ_{p_s} - 4π N / |V|

leaves a regular unknown. ``u⁰`` is unique up to an additive constant, and
here the representative with ``∫ u⁰ dμ = 0`` is always returned.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
import scipy.linalg

from .errors import DomainMismatch, NonZeroMean, SingularSolve, UnknownVertex
from .graph_core import GraphData, as_function, integrate, laplacian, stiffness_matrix

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class VortexSet:
    """Vortex multiplicities for one equation.

    ``multiplicity`` maps vertex id to a nonnegative integer count; a vertex
    with count m carries m coincident vortex points.
    """

    multiplicity: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, m in dict(self.multiplicity).items():
            if isinstance(m, bool) or int(m) != m or m < 0:
                raise DomainMismatch(f"multiplicity at {k!r} must be a nonnegative integer, got {m!r}")
            if int(m):
                clean[str(k)] = int(m)
        object.__setattr__(self, "multiplicity", MappingProxyType(dict(sorted(clean.items()))))

    @property
    def total(self) -> int:
        return sum(self.multiplicity.values())

    def validate(self, G: GraphData) -> None:
        for vid in self.multiplicity:
            if vid not in G.index:
                raise UnknownVertex(f"vortex at undeclared vertex {vid!r}")

    def counts(self, G: GraphData) -> np.ndarray:
        """Multiplicities as a vector over ``G``'s vertex order."""
        self.validate(G)
        c = np.zeros(G.n)
        for vid, m in self.multiplicity.items():
            c[G.index[vid]] = m
        return c

    def to_dict(self) -> dict:
        return {"vortices": dict(self.multiplicity)}


def dirac_function(G: GraphData, p) -> np.ndarray:
    """δ_p with unit integral: 1/μ(p) at ``p``, zero elsewhere."""
    k = G.vertex_index(p)
    d = np.zeros(G.n)
    d[k] = 1.0 / G.measure[k]
    return d


def background_rhs(G: GraphData, vs: VortexSet) -> np.ndarray:
    """``4π Σ_s δ_{p_s} - 4π·total/|V|``."""
    if not isinstance(vs, VortexSet):
        raise DomainMismatch("expected a VortexSet")
    return FOUR_PI * vs.counts(G) / G.measure - FOUR_PI * vs.total / G.volume


def solve_poisson(G: GraphData, f) -> np.ndarray:
    """Mean-zero solution of Δu = f.

    The stiffness matrix ``S = -diag(μ) Δ`` has the constants as its kernel.
    Adding the rank-one term ``β μ μᵀ`` makes it positive definite without
    changing the mean-zero solution, so one Cholesky solve suffices.
    """
    f = as_function(G, f)
    scale = max(1.0, float(np.abs(f).max(initial=0.0)))
    total = integrate(G, f)
    if abs(total) > 1e-9 * scale * max(1.0, G.volume):
        raise NonZeroMean(f"∫ f dμ = {total:.3e}; Δu = f needs a mean-zero right-hand side")

    mu = G.measure
    S = stiffness_matrix(G)
    beta = max(1.0, float(np.trace(S))) / (G.n * float(mu @ mu))
    try:
        factor = scipy.linalg.cho_factor(S + beta * np.outer(mu, mu))
        u = scipy.linalg.cho_solve(factor, -(mu * f))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSolve(f"Poisson solve failed: {exc}") from exc
    u -= integrate(G, u) / G.volume
    if not np.all(np.isfinite(u)):
        raise SingularSolve("Poisson solve produced non-finite values")

    # One step of iterative refinement keeps the residual at roundoff level for
    # strongly varying measures.
    r = f - laplacian(G, u)
    r -= integrate(G, r) / G.volume
    if np.abs(r).max() > 1e-13 * scale:
        du = scipy.linalg.cho_solve(factor, -(mu * r))
        u += du - integrate(G, du) / G.volume
    return u


def background_field(G: GraphData, vs: VortexSet) -> np.ndarray:
    return solve_poisson(G, background_rhs(G, vs))
