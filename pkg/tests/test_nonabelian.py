import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpsgraph import graph_core as gc
from bpsgraph import nonabelian as na
from bpsgraph.energy import SolverOptions
from bpsgraph.errors import DegenerateParameters, DivergenceDetected, InvalidCouplings, NotSolvable
from bpsgraph.instances import random_graph, random_nonabelian
from bpsgraph.optimizer import check_oracle

SQ2 = math.sqrt(2.0)


def instance(seed, n=None, N=None):
    rng = np.random.default_rng(seed)
    G = random_graph(rng, n=n or int(rng.integers(2, 9)), mu_range=(0.5, 4.0))
    return G, random_nonabelian(rng, G, N=N)


def valid_couplings(N):
    return st.tuples(st.floats(0.2, 5.0), st.floats(0.05, 0.99)).map(
        lambda t: (t[0], t[1] * t[0] * math.sqrt(N))
    )


class TestStructure:
    def test_two_component_example(self):
        a, b = na._scalars(2, 2.0, 2.0)
        assert (a, b) == (0.5, 1.0)
        T, alpha = na.explicit_cholesky(2, a, b)
        expected = np.array([[math.sqrt(1.5), 0.5 / math.sqrt(1.5)], [0.0, math.sqrt(4.0 / 3.0)]])
        np.testing.assert_allclose(T, expected, rtol=1e-15)
        np.testing.assert_allclose(alpha, [0.5 / math.sqrt(1.5)], rtol=1e-15)
        np.testing.assert_allclose(na.closed_form_inverse(2, a, b), [[0.75, -0.25], [-0.25, 0.75]], rtol=1e-15)

    def test_single_component(self):
        a, b = na._scalars(1, SQ2, SQ2)
        assert a == pytest.approx(0.0, abs=1e-16) and b == pytest.approx(1.0, rel=1e-15)
        T, alpha = na.explicit_cholesky(1, a, b)
        np.testing.assert_allclose(T, [[1.0]], rtol=1e-15)
        assert alpha.size == 0

    @settings(max_examples=60)
    @given(st.integers(1, 6).flatmap(lambda N: st.tuples(st.just(N), valid_couplings(N))))
    def test_factorisation_and_inverse(self, args):
        N, (e, g) = args
        A = na.coupling_matrix(N, e, g)
        a, b = na._scalars(N, e, g)
        T, _ = na.explicit_cholesky(N, a, b)
        assert np.abs(T.T @ T - A).max() <= 1e-12 * max(1.0, np.abs(A).max())
        np.testing.assert_allclose(na.closed_form_inverse(N, a, b), np.linalg.inv(A), rtol=1e-10, atol=1e-10)
        eig = np.linalg.eigvalsh(A)
        np.testing.assert_allclose(eig[-1], N * a + b, rtol=1e-12)
        np.testing.assert_allclose(eig[:-1], b, rtol=1e-10)

    def test_invalid_couplings(self):
        with pytest.raises(InvalidCouplings):
            na.coupling_matrix(2, 1.0, 2.0)  # e²N = 2 < g² = 4
        with pytest.raises(InvalidCouplings):
            na.coupling_matrix(3, 1.0, math.sqrt(3.0))  # a = 0
        with pytest.raises(DegenerateParameters):
            na.coupling_matrix(2, 0.0, 1.0)
        with pytest.raises(DegenerateParameters):
            na.coupling_matrix(1, 1.0, 0.0)


class TestThreshold:
    @pytest.mark.parametrize("n1, q1", [(1, 12 * math.pi), (2, 8 * math.pi), (3, 4 * math.pi), (4, 0.0)])
    def test_single_vertex_sweep(self, point16pi, n1, q1):
        prob = na.NonabelianProblem.from_multiplicities(SQ2, SQ2, 1.0, {"p": n1})
        rep = na.check_solvable_nonabelian(point16pi, prob)
        assert rep.margins[0] == pytest.approx(q1, abs=1e-10)
        assert rep.solvable == (n1 < 4)

    @settings(max_examples=40)
    @given(st.integers(0, 2**32 - 1))
    def test_closed_form_matches_triangular_solve(self, seed):
        G, prob = instance(seed)
        struct = na.build_structure_nonabelian(G, prob)
        q = na.closed_form_totals(G, prob)
        np.testing.assert_allclose(struct.q, q, rtol=1e-10, atol=1e-10)
        # Independently: q = -|V| Â⁻¹ F
        np.testing.assert_allclose(q, -G.volume * np.linalg.solve(struct.A_hat, struct.F), rtol=1e-10, atol=1e-10)

    def test_bound_matches_totals(self):
        G, prob = instance(4, N=3)
        rep = na.check_solvable_nonabelian(G, prob)
        # The bound and q_i > 0 are the same condition written differently.
        assert rep.bound_satisfied == rep.solvable


class TestEnergy:
    @settings(max_examples=20)
    @given(st.integers(0, 2**32 - 1))
    def test_gradient_matches_finite_differences(self, seed):
        G, prob = instance(seed, n=5)
        struct = na.build_structure_nonabelian(G, prob)
        oracle = na._energy(G, struct).oracle()
        x = np.random.default_rng(seed).uniform(-1, 1, size=oracle.dimension)
        err, asym = check_oracle(oracle, x)
        assert err <= 1e-5 and asym <= 1e-10
        _, H = na.grad_hess_J(G, prob, struct, x)
        assert np.linalg.eigvalsh(H).min() > 0

    @settings(max_examples=15)
    @given(st.integers(0, 2**32 - 1))
    def test_reduced_energy_oracle(self, seed):
        G, prob = instance(seed, n=5)
        red = na._ReducedEnergy(G, na.build_structure_nonabelian(G, prob))
        z = np.random.default_rng(seed).uniform(-1, 1, size=red.dimension)
        err, asym = check_oracle(red.oracle(), z)
        assert err <= 1e-5 and asym <= 1e-10

    def test_recovered_point_meets_constraints(self):
        G, prob = instance(5, N=2)
        struct = na.build_structure_nonabelian(G, prob)
        red = na._ReducedEnergy(G, struct)
        z = np.random.default_rng(0).uniform(-1, 1, size=red.dimension)
        w = red.recover(z)
        np.testing.assert_allclose(na.constraint_values(G, prob, struct, w), struct.q, rtol=1e-12)

    @settings(max_examples=15)
    @given(st.integers(0, 2**32 - 1))
    def test_jensen_floor_below_iterates(self, seed):
        G, prob = instance(seed)
        struct = na.build_structure_nonabelian(G, prob)
        floor = na.jensen_floor_J(G, struct)
        sol = na.solve_nonabelian(G, prob)
        for entry in sol.result.trace:
            assert entry.value >= floor - 1e-9 * max(1.0, abs(floor))


class TestSolve:
    def test_single_vertex_closed_form(self, point16pi):
        prob = na.NonabelianProblem.from_multiplicities(SQ2, SQ2, 1.0, {"p": 1})
        for route in (na.solve_nonabelian, na.solve_nonabelian_constrained):
            sol = route(point16pi, prob)
            assert abs(sol.u[0, 0] - math.log(0.75)) <= 1e-10
            assert abs(16 * math.pi * math.exp(sol.u[0, 0]) - 12 * math.pi) <= 1e-10

    @pytest.mark.parametrize("counts", [(1, 0), (2, 1, 0), (1, 1, 1, 1)])
    def test_single_vertex_multi_component(self, counts):
        mu, e, v = 60.0, 2.0, 1.2
        N = len(counts)
        g = 0.8 * e * math.sqrt(N)
        G = gc.build_graph({"vertices": [{"id": "p", "mu": mu}]})
        prob = na.NonabelianProblem(e, g, v, tuple({"p": c} if c else {} for c in counts))
        A = na.coupling_matrix(N, e, g)
        E = v * v - np.linalg.solve(A, 4 * math.pi * np.array(counts, dtype=float) / mu)
        assert np.all(E > 0)
        sol = na.solve_nonabelian(G, prob)
        np.testing.assert_allclose(sol.u[:, 0], np.log(E), atol=1e-10)

    def test_vacuum(self):
        G = gc.path_graph(5)
        prob = na.NonabelianProblem(2.0, 1.5, 0.7, ({}, {}, {}))
        sol = na.solve_nonabelian(G, prob)
        np.testing.assert_allclose(sol.u, 2 * math.log(0.7), atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_routes_agree(self, seed):
        G, prob = instance(seed)
        a = na.solve_nonabelian(G, prob)
        b = na.solve_nonabelian_constrained(G, prob)
        assert np.abs(a.u - b.u).max() <= 1e-8
        assert b.route == "constrained"

    def test_multipliers_vanish(self):
        G, prob = instance(9, N=3)
        sol = na.solve_nonabelian(G, prob)
        struct = sol.structure
        integrals = np.exp(sol.u) @ G.measure
        # At the unconstrained minimiser the Euler-Lagrange residual is zero,
        # so the back-substituted multipliers are zero too.
        rhs = struct.T @ integrals - struct.p
        np.testing.assert_allclose(na._multipliers(struct, integrals, rhs), 0.0, atol=1e-8)

    def test_multiplier_back_substitution(self):
        G, prob = instance(2, N=3)
        struct = na.build_structure_nonabelian(G, prob)
        sigma = np.array([0.3, -1.0, 2.0])
        totals = np.array([1.0, 2.0, 3.0])
        rhs = struct.T @ (sigma * totals)
        np.testing.assert_allclose(na._multipliers(struct, totals, rhs), sigma, rtol=1e-12)

    def test_unsolvable(self, point16pi):
        prob = na.NonabelianProblem.from_multiplicities(SQ2, SQ2, 1.0, {"p": 4})
        with pytest.raises(NotSolvable):
            na.solve_nonabelian(point16pi, prob)
        with pytest.raises(NotSolvable):
            na.solve_nonabelian_constrained(point16pi, prob, SolverOptions(enforce_threshold=False))
        with pytest.raises(DivergenceDetected):
            na.solve_nonabelian(point16pi, prob, SolverOptions(enforce_threshold=False))

    def test_coordinates_consistent(self):
        G, prob = instance(3, N=3)
        sol = na.solve_nonabelian(G, prob)
        np.testing.assert_allclose(sol.U, sol.structure.T.T @ sol.w, atol=1e-14)
