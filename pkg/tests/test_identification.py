import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import two_variable_truth
from svarmsh.errors import SingularMatrixError
from svarmsh.identification import (
    NO_HETEROSKEDASTICITY,
    brute_force_alternatives,
    check_identification,
    givens_rotation,
    verify_decomposition,
)
from svarmsh.model import implied_covariances


def sigmas_for(A0, lambdas):
    inv = np.linalg.inv(A0)
    return [(inv * lam) @ inv.T for lam in lambdas]


def test_distinct_ratios_are_unique():
    rep = check_identification(np.array([[1.0, 1.0], [2.0, 3.0]]))
    assert rep.row_unique == (True, True) and rep.globally_unique
    assert rep.verdicts() == ["unique", "unique"]


def test_proportional_variances_not_established():
    rep = check_identification(np.array([[1.0, 2.0, 0.5], [3.0, 6.0, 1.5]]))
    assert rep.row_unique == (False, False, False)
    assert not rep.globally_unique
    assert set(rep.colliding_pairs) == {(0, 1), (0, 2), (1, 2)}
    assert rep.verdicts()[0] == "not established"


def test_one_homoskedastic_shock_still_unique():
    rep = check_identification(np.array([[1.0, 1.0], [1.0, 5.0]]))
    assert rep.globally_unique


def test_single_state_has_structured_reason():
    rep = check_identification(np.array([[1.0, 2.0]]))
    assert rep.reason == NO_HETEROSKEDASTICITY
    assert rep.row_unique == (False, False)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_permutation_equivariance_and_scale_invariance(seed):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0.5, 3.0, size=(3, 4))
    lam[1, 2] = lam[0, 2] * 2.0
    lam[1, 3] = lam[0, 3] * 2.0
    lam[2, 2] = lam[0, 2] * 0.5
    lam[2, 3] = lam[0, 3] * 0.5
    base = check_identification(lam)
    perm = rng.permutation(4)
    permuted = check_identification(lam[:, perm])
    assert permuted.row_unique == tuple(base.row_unique[k] for k in perm)
    scaled = check_identification(lam * rng.uniform(0.1, 10.0))
    assert scaled.row_unique == base.row_unique


def test_verify_decomposition_round_trip_and_sensitivity():
    params = two_variable_truth()
    sig = implied_covariances(params)
    assert verify_decomposition(params.A0, params.lambdas, sig)
    bad = params.A0.copy()
    bad[0, 1] *= 1.1
    assert not verify_decomposition(bad, params.lambdas, sig, tol=1e-6)


def test_verify_decomposition_preconditions():
    params = two_variable_truth()
    sig = implied_covariances(params)
    with pytest.raises(ValueError):
        verify_decomposition(params.A0, params.lambdas, [sig[0], sig[1] + np.array([[0, 1e-3], [0, 0]])])
    with pytest.raises(SingularMatrixError):
        verify_decomposition(np.ones((2, 2)), params.lambdas, sig)


def test_givens_rotation_is_orthogonal():
    Q = givens_rotation(np.array([0.3, -1.2, 2.0]), 3)
    assert np.allclose(Q.T @ Q, np.eye(3))
    assert np.linalg.det(Q) == pytest.approx(1.0)


def test_identified_point_has_single_solution():
    params = two_variable_truth()
    sig = implied_covariances(params)
    omega = params.omega.T
    found = brute_force_alternatives(sig, omega=omega, rng=np.random.default_rng(0))
    assert len(found) == 1
    assert np.allclose(found[0], params.A0, atol=1e-6)
    assert np.allclose(found.lambdas[0], params.lambdas, rtol=1e-6)


def test_proportional_point_has_many_solutions():
    A0 = np.array([[1.0, 0.5], [-0.3, 1.0]])
    lam = np.array([[1.0, 2.0], [3.0, 6.0]])
    found = brute_force_alternatives(sigmas_for(A0, lam), omega=np.array([[3.0], [3.0]]), rng=np.random.default_rng(1))
    assert len(found) > 1
    for sol, l in zip(found.solutions, found.lambdas):
        assert verify_decomposition(sol, l, sigmas_for(A0, lam), tol=1e-5)


def test_partial_identification_row_three_invariant():
    A0 = np.array([[1.0, 0.4, -0.2], [0.3, 1.0, 0.5], [-0.6, 0.2, 1.0]])
    lam = np.array([[1.0, 2.0, 1.5], [3.0, 6.0, 12.0]])
    report = check_identification(lam)
    assert report.row_unique == (False, False, True)
    found = brute_force_alternatives(sigmas_for(A0, lam), omega=(lam[1] / lam[0])[:, None], n_starts=48,
                                     rng=np.random.default_rng(2))
    assert len(found) > 1
    for sol in found:
        assert np.allclose(sol[2], A0[2], atol=1e-5)
    assert max(np.abs(sol[:2] - A0[:2]).max() for sol in found) > 1e-2


def test_non_convergence_is_reported_not_fatal():
    found = brute_force_alternatives(sigmas_for(np.eye(2), np.array([[1.0, 1.0], [2.0, 3.0]])), n_starts=4,
                                     rng=np.random.default_rng(3))
    assert len(found.converged) == 4
    assert len(found.objective) == 4
