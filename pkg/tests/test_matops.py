import pytest
from matops import *  # noqa

import numpy as np


def random_stable(rng, n, rho):
    A = rng.standard_normal((n, n))
    return A * (rho / spectral_radius(A))


def random_psd(rng, n):
    X = rng.standard_normal((n, n))
    return X @ X.T + 0.1 * np.eye(n)


def test_spectral_radius():
    assert spectral_radius([[0.5, 1], [0, -0.8]]) == pytest.approx(0.8)
    assert is_stable([[0.5]])
    assert not is_stable([[1.0]])
    assert not is_stable([[0.95]], margin=0.1)
    with pytest.raises(InstabilityError):
        require_stable([[1.0, 1.0], [0.0, 1.0]])


def test_scalar_lyapunov():
    assert solve_discrete_lyapunov([[0.5]], [[0.75]])[0, 0] == pytest.approx(1.0)
    # X = Q / (1 - a^2)
    X = solve_discrete_lyapunov([[0.9]], [[1.0]])
    assert X[0, 0] == pytest.approx(1 / 0.19)


def test_lyapunov_zero_rhs():
    assert np.array_equal(solve_discrete_lyapunov(np.diag([0.3, 0.6]), np.zeros((2, 2))),
                          np.zeros((2, 2)))


@pytest.mark.parametrize('seed', range(10))
def test_lyapunov_residuals(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 4
    A = random_stable(rng, n, 0.5 + 0.045 * seed)
    Q = random_psd(rng, n)
    X = solve_discrete_lyapunov(A, Q)
    assert is_symmetric(X)
    assert is_positive_semidefinite(X)
    assert lyapunov_residual(A, X, Q) <= 1e-10 * max(1, frobenius(Q))
    M = solve_dual_lyapunov(A, Q)
    assert dual_lyapunov_residual(A, M, Q) <= 1e-10 * max(1, frobenius(Q))


@pytest.mark.parametrize('seed', range(20))
def test_trace_pairing(seed):
    # Trace(W X) = Trace(Q M) when X = A X A' + Q and M = A' M A + W
    rng = np.random.default_rng(100 + seed)
    n = 2 + seed % 5
    A = random_stable(rng, n, 0.9)
    Q, W = random_psd(rng, n), random_psd(rng, n)
    X = solve_discrete_lyapunov(A, Q)
    M = solve_dual_lyapunov(A, W)
    lhs, rhs = np.trace(W @ X), np.trace(Q @ M)
    assert abs(lhs - rhs) <= 1e-9 * abs(lhs)


@pytest.mark.parametrize('seed', range(100))
def test_trace_pairing_nonsymmetric(seed):
    # Trace(B Y) = Trace(Q' M) when Y = A Y A' + Q and M = A' M A + B'
    rng = np.random.default_rng(500 + seed)
    n = 1 + seed % 6
    A = random_stable(rng, n, rng.uniform(0.1, 0.95))
    Q, B = random_psd(rng, n), rng.standard_normal((n, n))
    Y = solve_discrete_lyapunov(A, Q)
    M = solve_dual_lyapunov(A, B.T)
    lhs, rhs = np.trace(B @ Y), np.trace(Q.T @ M)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, frobenius(B) * frobenius(Y))


def series(A, Q, transpose=False):
    "Sum of A^i Q A'^i (A'^i Q A^i with transpose) until the terms vanish."
    A = np.asarray(A, float)
    if transpose:
        A = A.T
    total, term = np.zeros_like(Q), np.array(Q, float)
    while frobenius(term) > 1e-16 * max(1.0, frobenius(total)):
        total = total + term
        term = A @ term @ A.T
    return total


def test_lyapunov_matches_series():
    A = np.array([[0.9, 0.0], [0.02, 0.8]])
    Q = np.diag([0.5, 0.7])
    assert np.allclose(solve_discrete_lyapunov(A, Q), series(A, Q), rtol=1e-10, atol=0)
    assert np.allclose(solve_discrete_lyapunov(np.zeros((2, 2)), Q), Q)
    W = np.array([[1.0, 0.3], [0.3, 2.0]])
    assert np.allclose(solve_dual_lyapunov(A, W), series(A, W, transpose=True),
                       rtol=1e-10, atol=0)
    assert solve_dual_lyapunov([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3)


def test_dual_lyapunov_uses_tolerances(caplog):
    rng = np.random.default_rng(7)
    A, W = random_stable(rng, 4, 0.9), rng.standard_normal((4, 4))
    with caplog.at_level('WARNING', logger='matops'):
        solve_dual_lyapunov(A, W)
    assert 'residual' not in caplog.text
    with caplog.at_level('WARNING', logger='matops'):
        solve_dual_lyapunov(A, W, SolverTolerances(residual_tol=1e-300))
    assert 'dual Lyapunov residual' in caplog.text
    with pytest.raises(ValidationError):
        solve_dual_lyapunov(A, W, SolverTolerances(residual_tol=-1.0))


def test_lyapunov_rejects_bad_input():
    with pytest.raises(InstabilityError):
        solve_discrete_lyapunov([[1.0]], [[1.0]])
    with pytest.raises(ValidationError):
        solve_discrete_lyapunov(np.eye(2) * 0.5, [[1, 2], [0, 1]])
    with pytest.raises(DimensionError):
        solve_discrete_lyapunov(np.eye(2) * 0.5, np.eye(3))


def test_dual_lyapunov_nonsymmetric_rhs():
    A = np.array([[0.5, 0.1], [0.0, 0.3]])
    W = np.array([[1.0, 2.0], [0.0, 1.0]])
    M = solve_dual_lyapunov(A, W)
    assert dual_lyapunov_residual(A, M, W) <= 1e-12


def test_filter_riccati_at_zero_is_zero():
    X = solve_filter_riccati(np.eye(2) * 0.5, np.eye(2), np.eye(2), np.eye(2), 0)
    assert np.array_equal(X, np.zeros((2, 2)))


def test_filter_riccati_scalar():
    # X = a^2 X - a^2 X^2 / (X + 1 + lam r) + lam q, solved as a quadratic
    a, q, r, lam = 0.9, 0.5, 0.5, 2.0
    X = solve_filter_riccati([[a]], [[1.0]], [[q]], [[r]], lam)[0, 0]
    v = 1 + lam * r
    # X (X + v) = a^2 X v + lam q (X + v)
    b, c = v - a * a * v - lam * q, -lam * q * v
    expected = (-b + np.sqrt(b * b - 4 * c)) / 2
    assert X == pytest.approx(expected, rel=1e-10)


def test_filter_riccati_unstable_plant():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    C = np.array([[1.0, 0.0]])
    X = solve_filter_riccati(A, C, 0.1 * np.eye(2), [[0.1]], 0.5)
    assert filter_riccati_residual(A, C, 0.1 * np.eye(2), [[0.1]], 0.5, X) <= 1e-10
    assert is_positive_semidefinite(X)


def test_filter_riccati_validation():
    with pytest.raises(ValidationError):
        solve_filter_riccati([[0.5]], [[1]], [[1]], [[0.0]], 1.0)
    with pytest.raises(ValidationError):
        solve_filter_riccati([[0.5]], [[1]], [[1]], [[1]], -1.0)
    with pytest.raises(DimensionError):
        solve_filter_riccati([[0.5]], [[1, 0]], [[1]], [[1]], 1.0)


def test_filter_riccati_iteration_limit():
    with pytest.raises(ConvergenceError):
        solve_filter_riccati([[0.99]], [[1]], [[1]], [[1]], 1.0,
                             SolverTolerances(residual_tol=1e-14, max_iterations=2))


def test_kalman_riccati():
    A = np.array([[0.9, 0], [0.02, 0.8]])
    C = np.array([[0.5, -0.8], [0, 0.7]])
    Q, R = np.diag([0.5, 0.7]), np.array([[0.5, 0.1], [0.1, 0.8]])
    Sigma = solve_kalman_riccati(A, C, Q, R)
    rhs = A @ Sigma @ A.T - A @ Sigma @ C.T @ np.linalg.solve(C @ Sigma @ C.T + R, C @ Sigma @ A.T) + Q
    assert frobenius(Sigma - rhs) <= 1e-10


def test_lqr_double_integrator():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    B = np.array([[0.0], [1.0]])
    X, L = solve_lqr_riccati(A, B, np.diag([1.0, 0.1]), [[0.01]])
    assert lqr_riccati_residual(A, B, np.diag([1.0, 0.1]), [[0.01]], X) <= 1e-10
    assert is_stable(A - B @ L)


def test_kalman_riccati_validation():
    A, C = np.eye(2) * 0.5, np.array([[1.0, 0.0]])
    Q, R = np.eye(2), np.array([[1.0]])
    with pytest.raises(DimensionError) as e:
        solve_kalman_riccati(A, [[1.0, 0.0, 0.0]], Q, R)
    assert e.value.field == 'C'
    with pytest.raises(DimensionError) as e:
        solve_kalman_riccati(A, C, np.eye(3), R)
    assert e.value.field == 'Q'
    with pytest.raises(DimensionError) as e:
        solve_kalman_riccati(A, C, Q, np.eye(2))
    assert e.value.field == 'R'
    with pytest.raises(ValidationError) as e:
        solve_kalman_riccati(A, C, -Q, R)
    assert e.value.field == 'Q'
    with pytest.raises(ValidationError):
        solve_kalman_riccati(A, C, Q, [[0.0]])


def test_lqr_scalar_root():
    # x = 1 + a^2 x - a^2 b^2 x^2 / (b^2 x + wu), i.e. x^2 - x/4 - 1 = 0 here
    X, L = solve_lqr_riccati([[0.5]], [[1.0]], [[1.0]], [[1.0]])
    x = (0.25 + np.sqrt(0.0625 + 4)) / 2
    assert X[0, 0] == pytest.approx(x, rel=1e-10)
    assert L[0, 0] == pytest.approx(0.5 * x / (x + 1), rel=1e-10)
    X, L = solve_lqr_riccati(np.zeros((2, 2)), [[1.0], [0.5]], np.diag([1.0, 2.0]), [[0.1]])
    assert np.allclose(X, np.diag([1.0, 2.0]))
    assert np.allclose(L, 0)


def test_lqr_vehicle_weights():
    from closedloop import vehicle_preset, vehicle_Wx, vehicle_Wu
    plant = vehicle_preset()
    X, L = solve_lqr_riccati(plant.A, plant.B, vehicle_Wx, vehicle_Wu)
    residual = lqr_riccati_residual(plant.A, plant.B, vehicle_Wx, vehicle_Wu, X)
    assert residual <= 1e-10 * max(1.0, frobenius(vehicle_Wx))
    assert is_stable(plant.A - plant.B @ L)


def test_tolerances():
    assert default_tolerances.residual_tol == 1e-12
    assert SolverTolerances(max_iterations=5).residual_tol == 1e-12
    with pytest.raises(ValidationError):
        check_tolerances(SolverTolerances(residual_tol=0))
