"""Connected finite weighted measured graphs and their discrete calculus.

Vertex functions are plain 1-d float arrays indexed by the graph's vertex
order (declaration order). Operators here follow the usual conventions

    (Δu)(x)     = 1/μ(x) Σ_{y~x} w_xy (u(y) - u(x))
    Γ(u, v)(x)  = 1/(2μ(x)) Σ_{y~x} w_xy (u(y) - u(x)) (v(y) - v(x))
    ∫ f dμ      = Σ_x μ(x) f(x)
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    Disconnected,
    DomainMismatch,
    DuplicateVertex,
    GraphError,
    NonPositiveMeasure,
    NonPositiveWeight,
    SelfLoop,
    SingleVertex,
    UnknownVertex,
)

__all__ = [
    "GraphData",
    "build_graph",
    "complete_graph",
    "path_graph",
    "as_function",
    "to_mapping",
    "laplacian",
    "laplacian_matrix",
    "stiffness_matrix",
    "gradient_form",
    "grad_norm",
    "integrate",
    "mean",
    "laplacian_spectrum",
    "poincare_constant",
    "poincare_eigenfunction",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GraphData:
    """Validated connected graph with vertex measure and symmetric weights.

    Use :func:`build_graph` rather than the constructor; it performs the
    validation. ``weights`` maps index pairs ``(i, j)`` with ``i < j`` to the
    merged edge weight.
    """

    vertices: tuple[str, ...]
    measure: np.ndarray
    weights: Mapping[tuple[int, int], float]
    adjacency: np.ndarray = field(repr=False)
    index: Mapping[str, int] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def volume(self) -> float:
        return float(self.measure.sum())

    def vertex_index(self, vertex) -> int:
        try:
            return self.index[str(vertex)]
        except KeyError:
            raise UnknownVertex(f"unknown vertex {vertex!r}") from None

    def edges(self):
        """Yield ``(vertex_a, vertex_b, weight)`` for every merged edge."""
        for (i, j), w in self.weights.items():
            yield self.vertices[i], self.vertices[j], w

    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": v, "mu": float(m)} for v, m in zip(self.vertices, self.measure)],
            "edges": [{"a": a, "b": b, "w": float(w)} for a, b, w in self.edges()],
        }


def _positive_finite(value, what: str, exc: type[GraphError]) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise exc(f"{what} is not a number: {value!r}") from None
    if isinstance(value, bool) or not math.isfinite(x) or x <= 0.0:
        raise exc(f"{what} must be finite and > 0, got {value!r}")
    return x


def build_graph(data: Mapping) -> GraphData:
    """Build a :class:`GraphData` from a graph description.

    ``data`` has the shape of the graph file::

        {"vertices": [{"id": "x", "mu": 1.0}, ...],
         "edges": [{"a": "x", "b": "y", "w": 1.0}, ...]}

    ``mu`` defaults to 1 and ``w`` defaults to 1 when omitted. Repeated edges
    are merged by summing their weights.
    """
    raw_vertices = data.get("vertices") or []
    if len(raw_vertices) == 0:
        raise GraphError("graph needs at least one vertex")

    ids: list[str] = []
    mus: list[float] = []
    index: dict[str, int] = {}
    for entry in raw_vertices:
        if isinstance(entry, Mapping):
            vid, mu = entry.get("id"), entry.get("mu", 1.0)
        else:
            vid, mu = entry, 1.0
        if vid is None:
            raise GraphError("vertex entry without id")
        vid = str(vid)
        if vid in index:
            raise DuplicateVertex(f"vertex {vid!r} declared twice")
        index[vid] = len(ids)
        ids.append(vid)
        mus.append(_positive_finite(mu, f"measure of {vid!r}", NonPositiveMeasure))

    weights: dict[tuple[int, int], float] = {}
    for entry in data.get("edges") or []:
        if isinstance(entry, Mapping):
            a, b, w = entry.get("a"), entry.get("b"), entry.get("w", 1.0)
        else:
            a, b, *rest = entry
            w = rest[0] if rest else 1.0
        for end in (a, b):
            if str(end) not in index:
                raise UnknownVertex(f"edge references undeclared vertex {end!r}")
        i, j = index[str(a)], index[str(b)]
        if i == j:
            raise SelfLoop(f"self-loop at {a!r}")
        w = _positive_finite(w, f"weight of edge {a!r}-{b!r}", NonPositiveWeight)
        key = (min(i, j), max(i, j))
        weights[key] = weights.get(key, 0.0) + w

    n = len(ids)
    adjacency = np.zeros((n, n))
    for (i, j), w in weights.items():
        adjacency[i, j] = adjacency[j, i] = w

    seen = {0}
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in np.flatnonzero(adjacency[x]):
            if int(y) not in seen:
                seen.add(int(y))
                queue.append(int(y))
    if len(seen) != n:
        missing = [ids[k] for k in range(n) if k not in seen]
        raise Disconnected(f"vertices unreachable from {ids[0]!r}: {missing}")

    return GraphData(
        vertices=tuple(ids),
        measure=_frozen(mus),
        weights=dict(sorted(weights.items())),
        adjacency=_frozen(adjacency),
        index=index,
    )


def path_graph(n: int, measure=1.0, weight=1.0) -> GraphData:
    """Path on vertices ``"0" .. "n-1"`` with uniform measure and weight."""
    return build_graph(
        {
            "vertices": [{"id": str(k), "mu": measure} for k in range(n)],
            "edges": [{"a": str(k), "b": str(k + 1), "w": weight} for k in range(n - 1)],
        }
    )


def complete_graph(n: int, measure=1.0, weight=1.0) -> GraphData:
    return build_graph(
        {
            "vertices": [{"id": str(k), "mu": measure} for k in range(n)],
            "edges": [
                {"a": str(i), "b": str(j), "w": weight} for i in range(n) for j in range(i + 1, n)
            ],
        }
    )


def as_function(G: GraphData, u) -> np.ndarray:
    """Coerce ``u`` to a vertex function on ``G``.

    Accepts an array-like of length ``G.n`` or a mapping that covers every
    vertex id exactly.
    """
    if isinstance(u, Mapping):
        keys = {str(k) for k in u}
        if keys != set(G.vertices):
            raise DomainMismatch(
                f"function domain {sorted(keys)} differs from vertex set {sorted(G.vertices)}"
            )
        by_id = {str(k): v for k, v in u.items()}
        return np.array([float(by_id[v]) for v in G.vertices])
    arr = np.asarray(u, dtype=float)
    if arr.shape != (G.n,):
        raise DomainMismatch(f"expected a function on {G.n} vertices, got shape {arr.shape}")
    return arr


def to_mapping(G: GraphData, u) -> dict[str, float]:
    return {v: float(x) for v, x in zip(G.vertices, as_function(G, u))}


def stiffness_matrix(G: GraphData) -> np.ndarray:
    """Symmetric PSD matrix S with ``u @ S @ u == ∫ Γ(u, u) dμ``; ``S = -diag(μ) Δ``."""
    return np.diag(G.adjacency.sum(axis=1)) - G.adjacency


def laplacian_matrix(G: GraphData) -> np.ndarray:
    return -stiffness_matrix(G) / G.measure[:, None]


def laplacian(G: GraphData, u) -> np.ndarray:
    u = as_function(G, u)
    return (G.adjacency * (u[None, :] - u[:, None])).sum(axis=1) / G.measure


def gradient_form(G: GraphData, u, v) -> np.ndarray:
    u = as_function(G, u)
    v = as_function(G, v)
    du = u[None, :] - u[:, None]
    dv = v[None, :] - v[:, None]
    return (G.adjacency * (du * dv)).sum(axis=1) / (2.0 * G.measure)


def grad_norm(G: GraphData, u) -> np.ndarray:
    # Clip roundoff; Γ(u, u) is a sum of nonnegative terms.
    return np.sqrt(np.maximum(gradient_form(G, u, u), 0.0))


def integrate(G: GraphData, f) -> float:
    return float(G.measure @ as_function(G, f))


def mean(G: GraphData, f) -> float:
    return integrate(G, f) / G.volume


def laplacian_spectrum(G: GraphData) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of -Δ, self-adjoint in the μ-weighted inner product.

    Returns ascending eigenvalues and eigenvectors normalised so that
    ``∫ φ_k φ_m dμ = δ_km``. The first eigenvalue is 0 (constants).
    """
    vals, vecs = scipy.linalg.eigh(stiffness_matrix(G), np.diag(G.measure))
    vals[0] = 0.0 if abs(vals[0]) < 1e-12 * max(1.0, abs(vals[-1])) else vals[0]
    return vals, vecs


def poincare_constant(G: GraphData) -> float:
    """Smallest C with ∫u² dμ ≤ C ∫|∇u|² dμ for all mean-zero u.

    Equals 1/λ₁, λ₁ the spectral gap of -Δ.
    """
    if G.n < 2:
        raise SingleVertex("the Poincaré inequality is vacuous on a single vertex")
    vals, _ = laplacian_spectrum(G)
    return 1.0 / vals[1]


def poincare_eigenfunction(G: GraphData) -> np.ndarray:
    """Mean-zero function attaining equality in the Poincaré inequality."""
    if G.n < 2:
        raise SingleVertex("the Poincaré inequality is vacuous on a single vertex")
    _, vecs = laplacian_spectrum(G)
    return vecs[:, 1].copy()
