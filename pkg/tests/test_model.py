import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparse_feedback import (AssumptionError, Compensator, DimensionError, LtiSystem, SolutionPair,
                             SynthesisSpec, basis_vector, kron, numerical_rank, rank_condition,
                             reachability_matrix, shift_matrix, zoh_discretize)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("N,expected", [
    (1, [[0.0]]),
    (2, [[0, 0], [1, 0]]),
    (3, [[0, 0, 0], [1, 0, 0], [0, 1, 0]]),
])
def test_shift_matrix_small(N, expected):
    np.testing.assert_array_equal(shift_matrix(N), expected)


@pytest.mark.parametrize("N", [1, 2, 5, 17, 64])
def test_shift_matrix_nilpotent_of_index_n(N):
    P = shift_matrix(N)
    assert not np.any(np.linalg.matrix_power(P, N))
    if N > 1:
        assert np.any(np.linalg.matrix_power(P, N - 1))


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_shift_matrix_rejects_bad_size(bad):
    with pytest.raises(DimensionError):
        shift_matrix(bad)


def test_kron_small_example():
    np.testing.assert_array_equal(kron([[1, 2]], np.eye(2)), [[1, 0, 2, 0], [0, 1, 0, 2]])


@settings(max_examples=40, deadline=None)
@given(arrays(float, (2, 2), elements=finite), arrays(float, (3, 3), elements=finite),
       arrays(float, (2, 2), elements=finite), arrays(float, (3, 3), elements=finite))
def test_kron_mixed_product(A, B, C, D):
    lhs = kron(A, B) @ kron(C, D)
    rhs = kron(A @ C, B @ D)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


@settings(max_examples=40, deadline=None)
@given(arrays(float, (2, 3), elements=finite), arrays(float, (3, 4), elements=finite),
       arrays(float, (4, 2), elements=finite))
def test_kron_vec_identity(A, X, B):
    vec = lambda M: M.ravel(order="F")
    lhs = kron(B.T, A) @ vec(X)
    assert np.allclose(lhs, vec(A @ X @ B), atol=1e-10 * (1 + np.abs(lhs).max()))


def test_kron_transpose():
    A = np.arange(6.0).reshape(2, 3)
    B = np.arange(4.0).reshape(2, 2)
    np.testing.assert_array_equal(kron(A, B).T, kron(A.T, B.T))


def test_basis_vector_is_zero_based():
    np.testing.assert_array_equal(basis_vector(1, 3), [0, 1, 0])
    with pytest.raises(DimensionError):
        basis_vector(3, 3)


def test_zoh_hyperbolic_closed_form():
    dt = 0.2
    A, B = zoh_discretize([[0, 1], [1, 0]], [[0], [1]], dt)
    c, s = np.cosh(dt), np.sinh(dt)
    np.testing.assert_allclose(A, [[c, s], [s, c]], atol=1e-12)
    np.testing.assert_allclose(B, [[c - 1], [s]], atol=1e-12)
    np.testing.assert_allclose(A, [[1.02007, 0.20134], [0.20134, 1.02007]], atol=1e-5)


def test_zoh_zero_dynamics_is_integrator():
    A, B = zoh_discretize(np.zeros((2, 2)), np.eye(2), 0.5)
    np.testing.assert_array_equal(A, np.eye(2))
    np.testing.assert_allclose(B, 0.5 * np.eye(2), atol=1e-15)


def test_zoh_matches_eigendecomposition(rng):
    for _ in range(5):
        lam = rng.uniform(-2, 1, 3)
        V = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        Ac = V @ np.diag(lam) @ np.linalg.inv(V)
        Bc = rng.normal(size=(3, 2))
        dt = 0.3
        A, B = zoh_discretize(Ac, Bc, dt)
        Vi = np.linalg.inv(V)
        np.testing.assert_allclose(A, V @ np.diag(np.exp(lam * dt)) @ Vi, atol=1e-10)
        # integral of exp(Ac s) ds = V diag((e^{lam dt} - 1) / lam) V^-1
        np.testing.assert_allclose(B, V @ np.diag(np.expm1(lam * dt) / lam) @ Vi @ Bc, atol=1e-10)


@pytest.mark.parametrize("dt", [0.0, -0.1, np.inf])
def test_zoh_rejects_bad_period(dt):
    with pytest.raises(ValueError):
        zoh_discretize(np.eye(2), np.ones((2, 1)), dt)


def test_reachability_double_integrator():
    sys = LtiSystem([[1, 1], [0, 1]], [[0], [1]])
    Phi, r = reachability_matrix(sys, 2)
    np.testing.assert_array_equal(Phi, [[1, 0], [1, 1]])
    assert r == 2
    assert reachability_matrix(sys, 1)[1] == 1


def test_reachability_rank_is_coordinate_invariant(rng):
    A = rng.normal(size=(4, 4))
    B = rng.normal(size=(4, 1))
    T = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    Ti = np.linalg.inv(T)
    for N in range(1, 6):
        r1 = reachability_matrix(LtiSystem(A, B), N)[1]
        r2 = reachability_matrix(LtiSystem(T @ A @ Ti, T @ B), N)[1]
        assert r1 == r2 == min(N, 4)


def test_reachability_uncontrollable_mode():
    sys = LtiSystem(np.diag([1.0, 2.0]), [[1], [0]])
    assert reachability_matrix(sys, 5)[1] == 1


def test_numerical_rank_tolerance():
    assert numerical_rank(np.diag([1.0, 1e-20])) == 1
    assert numerical_rank(np.zeros((3, 2))) == 0
    assert numerical_rank(np.eye(3)) == 3


def test_rank_condition_cases():
    sys = LtiSystem([[0.5]], [[1]], [[1]], [[0]])
    assert rank_condition(sys) == (True, 2)
    ok, r = rank_condition(LtiSystem([[0.5]], [[1]], [[0]], [[0]]))
    assert not ok and r == 1
    # integrator pole at 1 without a direct path: still full rank
    assert rank_condition(LtiSystem([[1.0]], [[1]], [[1]]))[0]


def test_rank_condition_assumptions():
    with pytest.raises(AssumptionError):
        rank_condition(LtiSystem(np.eye(2), [[1], [0]]))  # p = 2, m = 1
    with pytest.raises(AssumptionError):
        rank_condition(LtiSystem([[0.5]], [[1]], [[1]], [[1]]))


def test_system_defaults_and_validation():
    sys = LtiSystem([[1, 0.1], [0, 1]], [0, 1])
    assert (sys.n, sys.m, sys.p) == (2, 1, 2)
    np.testing.assert_array_equal(sys.C, np.eye(2))
    np.testing.assert_array_equal(sys.D, np.zeros((2, 1)))
    with pytest.raises(ValueError):
        sys.A[0, 0] = 3.0
    with pytest.raises(DimensionError):
        LtiSystem(np.ones((2, 3)), np.ones((2, 1)))
    with pytest.raises(DimensionError):
        LtiSystem(np.eye(2), np.ones((3, 1)))
    with pytest.raises(DimensionError):
        LtiSystem(np.eye(1), np.ones((1, 2)))
    with pytest.raises(ValueError):
        LtiSystem([[np.nan]], [[1]])


def test_system_copies_inputs():
    A = np.eye(2)
    sys = LtiSystem(A, np.ones((2, 1)))
    A[0, 0] = 7
    assert sys.A[0, 0] == 1


def test_spec_bounds_normalisation():
    assert SynthesisSpec(N=3, s=[None, np.inf]).s is None
    spec = SynthesisSpec(N=3, s=[1.0, None])
    np.testing.assert_array_equal(spec.s, [1.0, np.inf])
    assert spec.bounded
    with pytest.raises(ValueError):
        SynthesisSpec(N=3, s=[0.0])
    with pytest.raises(DimensionError):
        SynthesisSpec(N=0)
    with pytest.raises(ValueError):
        SynthesisSpec(N=2, variant="fancy")
    with pytest.raises(DimensionError):
        SynthesisSpec(N=2, s=[1.0]).check_against(LtiSystem(np.eye(2), np.ones((2, 1))))


def test_solution_pair_blocks():
    X = np.arange(8.0).reshape(2, 4)
    pair = SolutionPair(X=X, U=np.ones((1, 4)))
    assert (pair.n, pair.m, pair.N) == (2, 1, 2)
    np.testing.assert_array_equal(pair.X_t(1), X[:, 2:])
    with pytest.raises(DimensionError):
        SolutionPair(X=np.ones((2, 3)), U=np.ones((1, 3)))


def test_compensator_handles_empty_state():
    comp = Compensator(F=np.zeros((0, 0)), G=np.zeros((0, 1)), H=np.zeros((1, 0)), K=[[-2.0]])
    assert comp.nz == 0
    np.testing.assert_array_equal(comp.gain_matrix(), [[-2.0]])
