"""Seeded random instances for property tests and experiment scripts."""

from __future__ import annotations

import numpy as np

from .abelian import AbelianProblem, check_solvable_abelian
from .graph_core import GraphData, build_graph
from .nonabelian import NonabelianProblem, check_solvable_nonabelian
from .poisson import VortexSet


def random_graph(
    rng: np.random.Generator,
    n: int | None = None,
    max_n: int = 12,
    mu_range=(0.5, 2.0),
    w_range=(0.5, 2.0),
    extra_edge_prob: float = 0.3,
) -> GraphData:
    """Connected graph: random spanning tree plus independent extra edges."""
    n = int(rng.integers(1, max_n + 1)) if n is None else n
    verts = [{"id": f"x{k}", "mu": float(rng.uniform(*mu_range))} for k in range(n)]
    order = rng.permutation(n)
    edges = []
    for k in range(1, n):
        parent = order[int(rng.integers(0, k))]
        edges.append((order[k], parent))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_edge_prob:
                edges.append((i, j))
    return build_graph(
        {
            "vertices": verts,
            "edges": [{"a": f"x{a}", "b": f"x{b}", "w": float(rng.uniform(*w_range))} for a, b in edges],
        }
    )


def _scatter(rng: np.random.Generator, G: GraphData, total: int) -> VortexSet:
    mult: dict[str, int] = {}
    for _ in range(total):
        vid = G.vertices[int(rng.integers(0, G.n))]
        mult[vid] = mult.get(vid, 0) + 1
    return VortexSet(mult)


def random_abelian(rng: np.random.Generator, G: GraphData, l: int | None = None, max_l: int = 4,
                   solvable: bool = True, max_tries: int = 1000) -> AbelianProblem:
    """Random Abelian problem on ``G``; with ``solvable`` the totals satisfy K_j > 0."""
    l = int(rng.integers(1, max_l + 1)) if l is None else l
    cap = max(1, int(np.ceil((l + 1) * G.volume / (4 * np.pi))))
    for _ in range(max_tries):
        totals = rng.integers(0, cap + 1, size=l)
        prob = AbelianProblem(tuple(_scatter(rng, G, int(t)) for t in totals))
        if check_solvable_abelian(G, prob).solvable == solvable:
            return prob
    raise RuntimeError("could not draw an instance with the requested solvability")


def random_nonabelian(rng: np.random.Generator, G: GraphData, N: int | None = None, max_N: int = 4,
                      solvable: bool = True, max_tries: int = 1000) -> NonabelianProblem:
    """Random non-Abelian problem with e ∈ [1, 3], g² < e²N, v ∈ [0.5, 1.5]."""
    N = int(rng.integers(1, max_N + 1)) if N is None else N
    for _ in range(max_tries):
        e = float(rng.uniform(1.0, 3.0))
        g = float(rng.uniform(0.3, 0.95)) * e * np.sqrt(N)
        v = float(rng.uniform(0.5, 1.5))
        cap = max(1, int(np.ceil(g * g * v * v * G.volume / (8 * np.pi * N))) + 1)
        totals = rng.integers(0, cap + 1, size=N)
        prob = NonabelianProblem(e, g, v, tuple(_scatter(rng, G, int(t)) for t in totals))
        if check_solvable_nonabelian(G, prob).solvable == solvable:
            return prob
    raise RuntimeError("could not draw an instance with the requested solvability")


def instance_stream(kind: str, count: int, seed: int, max_n: int = 12):
    """Yield ``count`` solvable ``(G, problem)`` pairs of the given kind."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        G = random_graph(rng, n=int(rng.integers(2, max_n + 1)), mu_range=(0.5, 4.0))
        if kind == "abelian":
            yield G, random_abelian(rng, G)
        else:
            yield G, random_nonabelian(rng, G)
