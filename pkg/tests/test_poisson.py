import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpsgraph import graph_core as gc
from bpsgraph.errors import NonZeroMean, UnknownVertex
from bpsgraph.poisson import VortexSet, background_field, background_rhs, dirac_function, solve_poisson

from conftest import graphs


def lstsq_poisson(G, f):
    """Independent route: least squares on the Laplacian matrix, then re-centre."""
    u, *_ = np.linalg.lstsq(gc.laplacian_matrix(G), f, rcond=None)
    return u - gc.mean(G, u)


@st.composite
def graphs_with_vortices(draw):
    G = draw(graphs())
    counts = draw(st.lists(st.integers(0, 3), min_size=G.n, max_size=G.n))
    return G, VortexSet({v: c for v, c in zip(G.vertices, counts)})


def test_dirac_single_vertex(point4pi):
    np.testing.assert_allclose(dirac_function(point4pi, "p"), [1 / (4 * math.pi)], rtol=1e-15)


def test_dirac_p2(p2):
    np.testing.assert_array_equal(dirac_function(p2, "x"), [1.0, 0.0])
    with pytest.raises(UnknownVertex):
        dirac_function(p2, "z")


@given(graphs(), st.data())
def test_dirac_unit_mass(G, data):
    p = data.draw(st.sampled_from(G.vertices))
    assert gc.integrate(G, dirac_function(G, p)) == pytest.approx(1.0, rel=1e-14)


def test_background_rhs_p2(p2):
    np.testing.assert_allclose(background_rhs(p2, VortexSet({"x": 1})), [2 * math.pi, -2 * math.pi], rtol=1e-15)
    np.testing.assert_array_equal(background_rhs(p2, VortexSet()), [0.0, 0.0])


def test_vortex_set_multiplicity():
    vs = VortexSet({"a": 2, "b": 0, "c": 1})
    assert vs.total == 3
    assert dict(vs.multiplicity) == {"a": 2, "c": 1}
    with pytest.raises(ValueError):
        VortexSet({"a": -1})
    with pytest.raises(ValueError):
        VortexSet({"a": 1.5})


@given(graphs_with_vortices())
def test_background_rhs_integrates_to_zero(data):
    G, vs = data
    f = background_rhs(G, vs)
    assert abs(gc.integrate(G, f)) <= 1e-12 * max(1.0, 4 * math.pi * vs.total)


def test_solve_poisson_p2(p2):
    np.testing.assert_allclose(solve_poisson(p2, [1.0, -1.0]), [-0.5, 0.5], atol=1e-15)
    np.testing.assert_array_equal(solve_poisson(p2, [0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(NonZeroMean):
        solve_poisson(p2, [1.0, 1.0])


@settings(max_examples=60)
@given(graphs_with_vortices())
def test_background_round_trip(data):
    G, vs = data
    f = background_rhs(G, vs)
    u = background_field(G, vs)
    scale = max(1.0, float(np.abs(f).max()))
    assert np.abs(gc.laplacian(G, u) - f).max() <= 1e-10 * scale
    assert abs(gc.integrate(G, u)) <= 1e-10 * G.volume * max(1.0, np.abs(u).max())
    np.testing.assert_allclose(u, lstsq_poisson(G, f), atol=1e-8 * max(1.0, np.abs(u).max()))


@given(graphs_with_vortices(), st.floats(-100, 100))
def test_shift_by_constant(data, c):
    G, vs = data
    u = background_field(G, vs)
    f = background_rhs(G, vs)
    assert np.abs(gc.laplacian(G, u + c) - f).max() <= 1e-9 * max(1.0, np.abs(f).max(), abs(c))
