import numpy as np
import pytest

from cqe.equation import CaseTag, classify, is_solution, parameterize, residual
from cqe.errors import InputError, InvalidParams, PositiveSlack, RNotPositiveDefinite
from cqe.hamilton_jacobi import (
    AffineSystem,
    CostWeights,
    control_gram,
    example_system,
    exp_drift_value_gradient,
    get_system,
    hjbe_parameterize,
    hje_to_cqe,
    hji_to_cqe,
    optimal_control,
)


@pytest.fixture(scope="module")
def drift():
    return example_system()


def test_example_evaluators(drift):
    sys, cost = drift
    np.testing.assert_array_equal(sys.drift([0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(sys.drift([1.0, 1.0]), [1.0, -np.e + 0.5])
    np.testing.assert_allclose(sys.input_matrix([0.0, 0.0]), [[0.0], [1.0]])
    assert get_system("exp-drift-2d")[0].n == 2
    with pytest.raises(InputError):
        get_system("nope")


def test_nonzero_drift_at_origin_rejected():
    with pytest.raises(InputError):
        AffineSystem(1, 1, lambda x: x + 1.0, lambda x: np.eye(1))


@pytest.mark.parametrize("x1", [-1.7, -0.2, 0.9, 1.5])
def test_in_range_state(drift, x1):
    sys, cost = drift
    p = hje_to_cqe(sys, cost, [x1, 0.0])
    case = classify(p)
    assert case.tag is CaseTag.IN_RANGE
    g = control_gram(sys, cost, [x1, 0.0])
    f = sys.drift([x1, 0.0])
    quantity = f @ np.linalg.pinv(g) @ f + cost.state_cost(np.array([x1, 0.0]))
    np.testing.assert_allclose(quantity, 2 * x1**2, rtol=1e-12)
    np.testing.assert_allclose(2 * case.discriminant, quantity, rtol=1e-12)


@pytest.mark.parametrize("x", [[0.5, 1.0], [-1.0, -0.3], [2.0, 0.01]])
def test_out_of_range_state(drift, x):
    sys, cost = drift
    assert classify(hje_to_cqe(sys, cost, x)).tag is CaseTag.OUT_OF_RANGE


def test_square_invertible_input_is_boundary():
    sys = AffineSystem(2, 2, lambda x: np.zeros(2), lambda x: np.array([[1.0, 2.0], [0.0, 1.0]]))
    cost = CostWeights(L=lambda x: 0.0, R=lambda x: np.eye(2))
    p = hje_to_cqe(sys, cost, [0.3, -0.4])
    case = classify(p)
    assert case.tag is CaseTag.FULL_RANK and case.boundary
    np.testing.assert_allclose(parameterize(p).center, 0.0)


def test_known_gradient_solves_hje(drift):
    sys, cost = drift
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform(-2, 2, 2)
        p = hje_to_cqe(sys, cost, x)
        assert is_solution(p, exp_drift_value_gradient(x))


def test_hji_slack(drift):
    sys, cost = drift
    x = np.array([0.8, 0.0])
    base = hje_to_cqe(sys, cost, x)
    same = hji_to_cqe(sys, cost, x, 0.0)
    assert same.c == base.c
    slack = hji_to_cqe(sys, cost, x, -(x[0] ** 2))
    np.testing.assert_allclose(2 * classify(slack).discriminant, 4 * x[0] ** 2, rtol=1e-12)
    with pytest.raises(PositiveSlack):
        hji_to_cqe(sys, cost, x, 0.1)


def test_hji_monotone_for_full_rank():
    sys = AffineSystem(2, 2, lambda x: np.array([x[1], -x[0]]), lambda x: np.eye(2))
    cost = CostWeights(L=lambda x: -5.0, R=lambda x: np.eye(2))
    x = np.array([0.3, 0.2])
    tags = [classify(hji_to_cqe(sys, cost, x, y)).solvable for y in (0.0, -1.0, -2.0, -10.0, -1e3)]
    # once solvable, more negative slack stays solvable
    assert tags == sorted(tags)
    assert tags[-1]


def test_optimal_control(drift):
    sys, cost = drift
    x = np.array([1.0, 2.0])
    np.testing.assert_allclose(optimal_control(exp_drift_value_gradient(x), sys, cost, x), [-2.0])
    np.testing.assert_allclose(optimal_control(np.zeros(2), sys, cost, x), [0.0])
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(-2, 2, 2)
        vx = rng.standard_normal(2)
        expected = -np.linalg.inv([[2.0]]) @ sys.input_matrix(x).T @ vx
        np.testing.assert_allclose(optimal_control(vx, sys, cost, x), expected, rtol=1e-12)
        np.testing.assert_allclose(optimal_control(exp_drift_value_gradient(x), sys, cost, x), [-x[1]], atol=1e-12)


def test_control_weight_must_be_positive_definite(drift):
    sys, _ = drift
    bad = CostWeights(L=lambda x: 0.0, R=lambda x: np.array([[-1.0]]))
    with pytest.raises(RNotPositiveDefinite):
        hje_to_cqe(sys, bad, [0.0, 0.0])
    with pytest.raises(RNotPositiveDefinite):
        optimal_control([1.0, 0.0], sys, bad, [0.0, 0.0])


# -- finite horizon -------------------------------------------------------


def test_hjbe_rank_deficient_example(drift):
    sys, cost = drift
    s = hjbe_parameterize(sys, cost, [0.0, 1.0])
    assert not s.full_rank and s.rank == 1
    rng = np.random.default_rng(2)
    tau, phi = s.sample(rng, size=100)
    v = s.evaluate(tau, phi)
    assert np.all(s.residual(v) <= 1e-8 * s.residual_scale(v))


def test_hjbe_full_rank_time_slot():
    sys = AffineSystem(2, 2, lambda x: np.array([x[1], np.sin(x[0])]), lambda x: np.eye(2))
    cost = CostWeights(L=lambda x: x @ x, R=lambda x: np.diag([1.0, 2.0]))
    x = np.array([0.4, -0.6])
    s = hjbe_parameterize(sys, cost, x)
    assert s.full_rank and s.phi_basis.shape == (1, 0)
    tau = np.array([0.3, 0.1])
    v = s.evaluate(tau)
    np.testing.assert_allclose(v, np.append(tau, s.level(tau)))
    assert s.residual(v) <= 1e-12


def test_hjbe_zero_data():
    sys = AffineSystem(2, 1, lambda x: np.zeros(2), lambda x: np.array([[1.0], [0.0]]))
    cost = CostWeights(L=lambda x: 0.0, R=lambda x: np.eye(1))
    s = hjbe_parameterize(sys, cost, [1.0, 1.0])
    v = s.evaluate(np.zeros(2), np.zeros(2))
    np.testing.assert_array_equal(v, 0.0)
    assert s.residual(v) == 0.0


def test_hjbe_matches_generic_route(drift):
    sys, cost = drift
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-2, 2, 2)
        s = hjbe_parameterize(sys, cost, x)
        generic = parameterize(s.to_cqe())
        assert generic.tag is CaseTag.OUT_OF_RANGE
        tau, phi = s.sample(rng, size=50)
        ours = s.evaluate(tau, phi)
        theirs = generic.evaluate(s.generic_params(tau, phi))
        np.testing.assert_allclose(ours, theirs, atol=1e-10)
        assert np.all(residual(s.to_cqe(), ours) <= 1e-8 * s.residual_scale(ours))


def test_hjbe_rejects_bad_params(drift):
    sys, cost = drift
    s = hjbe_parameterize(sys, cost, [0.5, 0.5])
    with pytest.raises(InvalidParams):
        s.evaluate([1.0, 0.0])  # outside R(B R^-1 B^T)
    with pytest.raises(InvalidParams):
        s.evaluate([0.0, 1.0], phi_prime=[1.0, 0.0])
    with pytest.raises(InvalidParams):
        s.evaluate([0.0, 1.0], w1=[0.0, 5.0])
