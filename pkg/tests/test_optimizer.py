import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpsgraph.errors import OracleInconsistent
from bpsgraph.optimizer import (
    MinimizeOptions,
    ObjectiveOracle,
    TraceEntry,
    check_oracle,
    detect_divergence,
    minimize,
)


def exp_minus_x():
    return ObjectiveOracle(
        value=lambda x: float(np.exp(x[0]) - x[0]),
        gradient=lambda x: np.array([np.exp(x[0]) - 1.0]),
        hessian=lambda x: np.array([[np.exp(x[0])]]),
        dimension=1,
    )


def quadratic(M, b):
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    return ObjectiveOracle(
        value=lambda x: 0.5 * float(x @ M @ x) - float(b @ x),
        gradient=lambda x: M @ x - b,
        hessian=lambda x: M,
        dimension=b.size,
    )


def test_exp_minus_x():
    res = minimize(exp_minus_x(), [3.0])
    assert res.converged
    assert abs(res.argmin[0]) <= 1e-10
    assert res.value == pytest.approx(1.0, abs=1e-14)


def test_quadratic_one_newton_step():
    res = minimize(quadratic(np.eye(3), np.zeros(3)), [1.0, -2.0, 0.5])
    assert res.converged
    assert res.iterations == 1
    np.testing.assert_array_equal(res.argmin, np.zeros(3))


def test_flat_tail_is_diverged():
    # e^x has no minimiser: the gradient vanishes while x runs off to -∞.
    oracle = ObjectiveOracle(
        value=lambda x: float(np.exp(x[0])),
        gradient=lambda x: np.exp(x),
        hessian=lambda x: np.diag(np.exp(x)),
        dimension=1,
    )
    res = minimize(oracle, [0.0])
    assert res.status == "diverged"
    assert res.argmin[0] < -50
    diag = detect_divergence(res.trace)
    assert diag.diverged and diag.component == 0
    assert diag.monitor_value < -50


def test_max_iterations_status():
    res = minimize(exp_minus_x(), [3.0], MinimizeOptions(max_iter=1))
    assert res.status == "max_iterations"
    assert res.iterations == 1


def test_zero_dimension():
    oracle = ObjectiveOracle(lambda x: 0.0, lambda x: np.zeros(0), lambda x: np.zeros((0, 0)), 0)
    res = minimize(oracle, np.zeros(0))
    assert res.converged and res.iterations == 0


def test_bad_start_rejected():
    with pytest.raises(ValueError):
        minimize(exp_minus_x(), [0.0, 1.0])
    with pytest.raises(ValueError):
        minimize(exp_minus_x(), [math.nan])


def test_indefinite_hessian_falls_back_to_gradient():
    # A deliberately wrong (negative) Hessian forces steepest-descent steps.
    base = exp_minus_x()
    oracle = ObjectiveOracle(base.value, base.gradient, lambda x: -np.eye(1), 1)
    res = minimize(oracle, [2.0], MinimizeOptions(tol=1e-8, max_iter=500))
    assert res.newton_steps == 0 and res.gradient_steps > 0
    assert abs(res.argmin[0]) < 1e-6


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_trace_nonincreasing(dim, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(dim, dim))
    M = M @ M.T + 0.5 * np.eye(dim)
    c = rng.normal(size=dim)

    def value(x):
        return 0.5 * float(x @ M @ x) + float(np.exp(x).sum()) + float(c @ x)

    oracle = ObjectiveOracle(value, lambda x: M @ x + np.exp(x) + c, lambda x: M + np.diag(np.exp(x)), dim)
    res = minimize(oracle, rng.uniform(-3, 3, size=dim))
    assert res.converged
    vals = [t.value for t in res.trace]
    for a, b in zip(vals, vals[1:]):
        assert b <= a + 1e-12 * max(1.0, abs(a))  # VALUE_NOISE_RTOL


def test_deterministic():
    a = minimize(exp_minus_x(), [3.0])
    b = minimize(exp_minus_x(), [3.0])
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.argmin, b.argmin)


def test_check_oracle_accepts_consistent():
    err, asym = check_oracle(exp_minus_x(), np.array([0.7]))
    assert err < 1e-6 and asym == 0.0


def test_check_oracle_rejects_wrong_gradient():
    base = exp_minus_x()
    bad = ObjectiveOracle(base.value, lambda x: 2.0 * base.gradient(x) + 1.0, base.hessian, 1)
    with pytest.raises(OracleInconsistent):
        check_oracle(bad, np.array([0.3]))
    with pytest.raises(OracleInconsistent):
        minimize(bad, [0.3], MinimizeOptions(check_oracle=True))


def test_check_oracle_rejects_asymmetric_hessian():
    oracle = quadratic(np.eye(2), np.zeros(2))
    bad = ObjectiveOracle(oracle.value, oracle.gradient, lambda x: np.array([[1.0, 0.1], [0.0, 1.0]]), 2)
    with pytest.raises(OracleInconsistent):
        check_oracle(bad, np.zeros(2))


def test_constant_trace_not_diverged():
    trace = [TraceEntry(1.0, 0.5, (-3.0, 2.0), 1.0)] * 20
    assert not detect_divergence(trace).diverged


def test_converged_entries_skipped():
    trace = [TraceEntry(1.0, 0.0, (-80.0,), 0.0)]
    assert not detect_divergence(trace).diverged
    with pytest.raises(ValueError):
        detect_divergence([])
