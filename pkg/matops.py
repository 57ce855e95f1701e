"""Dense linear algebra for steady-state filter and regulator design.

Discrete Lyapunov equations are solved directly, by writing
X = A X A' + Q as the linear system (I - A (x) A) vec(X) = vec(Q).
Riccati equations are solved by iterating the associated covariance
(or cost-to-go) recursion until two successive iterates agree.  Everything
here is a pure function of its arguments."""

from utils import (
    ValidationError, DimensionError, InstabilityError, ConvergenceError,
    as_matrix, require_square, require_shape, symmetrize, frobenius,
    is_symmetric, is_positive_definite, is_positive_semidefinite
)

from collections import namedtuple
import logging

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

SolverTolerances = namedtuple('SolverTolerances', 'residual_tol, max_iterations')
SolverTolerances.__new__.__defaults__ = (1e-12, 10000)

default_tolerances = SolverTolerances()


def check_tolerances(tol):
    "Return tol if it is a sensible SolverTolerances, else raise ValidationError."
    tol = tol or default_tolerances
    if not tol.residual_tol > 0:
        raise ValidationError('residual_tol must be positive', 'residual_tol')
    if int(tol.max_iterations) < 1:
        raise ValidationError('max_iterations must be at least 1', 'max_iterations')
    return tol

# ______________________________________________________________________________
# Spectra


def spectral_radius(A):
    "The largest eigenvalue modulus of the square matrix A."
    A = require_square(as_matrix(A, 'A'), 'A')
    return float(np.max(np.abs(scipy.linalg.eigvals(A))))


def is_stable(A, margin=0.0):
    "Is rho(A) < 1 - margin?"
    return spectral_radius(A) < 1.0 - margin


def require_stable(A, name='A', margin=0.0):
    rho = spectral_radius(A)
    if not rho < 1.0 - margin:
        raise InstabilityError('{} is not stable: spectral radius {:.12g}'.format(name, rho))
    return rho

# ______________________________________________________________________________
# Lyapunov equations


def _vectorized_solve(A, Q):
    "Solve X = A X A' + Q for X (any square Q) by vectorization."
    n = A.shape[0]
    lhs = np.eye(n * n) - np.kron(A, A)
    return scipy.linalg.solve(lhs, Q.reshape(n * n)).reshape(n, n)


def solve_discrete_lyapunov(A, Q, tol=None):
    """Return the symmetric X with X = A X A' + Q.  A must be stable and Q
    symmetric; X is positive semidefinite whenever Q is.
    >>> solve_discrete_lyapunov([[0.5]], [[0.75]])
    array([[1.]])
    """
    tol = check_tolerances(tol)
    A = require_square(as_matrix(A, 'A'), 'A')
    Q = require_shape(as_matrix(Q, 'Q'), A.shape, 'Q')
    if not is_symmetric(Q):
        raise ValidationError('Q must be symmetric', 'Q')
    require_stable(A)
    X = symmetrize(_vectorized_solve(A, symmetrize(Q)))
    residual = lyapunov_residual(A, X, Q)
    if residual > tol.residual_tol * max(1.0, frobenius(Q)) * 1e3:
        logger.warning('Lyapunov residual %.3g is large for n=%d', residual, A.shape[0])
    return X


def solve_dual_lyapunov(A, W, tol=None):
    """Return M with M = A' M A + W.  W need not be symmetric; when it is,
    so is M (and M is PSD when W is)."""
    tol = check_tolerances(tol)
    A = require_square(as_matrix(A, 'A'), 'A')
    W = require_shape(as_matrix(W, 'W'), A.shape, 'W')
    require_stable(A)
    M = _vectorized_solve(A.T, W)
    if is_symmetric(W):
        M = symmetrize(M)
    residual = dual_lyapunov_residual(A, M, W)
    if residual > tol.residual_tol * max(1.0, frobenius(W)) * 1e3:
        logger.warning('dual Lyapunov residual %.3g is large for n=%d', residual, A.shape[0])
    return M


def lyapunov_residual(A, X, Q):
    "Frobenius norm of X - A X A' - Q."
    A, X, Q = np.asarray(A, float), np.asarray(X, float), np.asarray(Q, float)
    return frobenius(X - A @ X @ A.T - Q)


def dual_lyapunov_residual(A, M, W):
    "Frobenius norm of M - A' M A - W."
    A, M, W = np.asarray(A, float), np.asarray(M, float), np.asarray(W, float)
    return frobenius(M - A.T @ M @ A - W)

# ______________________________________________________________________________
# Riccati equations


def _require_pd(R, name):
    if not is_positive_definite(R):
        raise ValidationError('{} must be symmetric positive definite'.format(name), name)


def _filter_data(A, C, Q, R):
    "A, C, Q, R as matrices of matching shapes, with Q >= 0 and R > 0."
    A = require_square(as_matrix(A, 'A'), 'A')
    n = A.shape[0]
    C = as_matrix(C, 'C')
    if C.shape[1] != n:
        raise DimensionError('C must have {} columns, got shape {}'.format(n, C.shape), 'C')
    Q = require_shape(as_matrix(Q, 'Q'), (n, n), 'Q')
    R = require_shape(as_matrix(R, 'R'), (C.shape[0], C.shape[0]), 'R')
    if not is_positive_semidefinite(Q):
        raise ValidationError('Q must be symmetric positive semidefinite', 'Q')
    _require_pd(R, 'R')
    return A, C, Q, R


def _prediction_riccati(A, C, Q, V, tol, scale, what):
    """Iterate X <- A X A' - A X C'(C X C' + V)^-1 C X A' + Q from X = Q until
    two iterates differ by at most residual_tol * scale."""
    X = symmetrize(Q)
    threshold = tol.residual_tol * scale
    for iteration in range(1, int(tol.max_iterations) + 1):
        XC = X @ C.T
        gain = scipy.linalg.solve(C @ XC + V, XC.T, assume_a='pos').T
        X_next = symmetrize(A @ (X - gain @ XC.T) @ A.T + Q)
        step = frobenius(X_next - X)
        X = X_next
        if step <= threshold:
            logger.debug('%s converged in %d iterations (step %.3g)', what, iteration, step)
            return X
    raise ConvergenceError('{} did not converge in {} iterations (last step {:.3g})'
                           .format(what, tol.max_iterations, step))


def solve_filter_riccati(A, C, Q, R, lam, tol=None):
    """Return X >= 0 with
        X = A X A' - A X C'(C X C' + I + lam R)^-1 C X A' + lam Q.
    For lam = 0 this is the zero matrix."""
    tol = check_tolerances(tol)
    A, C, Q, R = _filter_data(A, C, Q, R)
    n, m = A.shape[0], C.shape[0]
    if not lam >= 0:
        raise ValidationError('lambda must be nonnegative, got {}'.format(lam), 'lambda')
    if lam == 0:
        return np.zeros((n, n))
    scale = max(1.0, lam * frobenius(Q))
    return _prediction_riccati(A, C, lam * Q, np.eye(m) + lam * R, tol, scale,
                               'filter Riccati (lambda={:.6g})'.format(lam))


def filter_riccati_residual(A, C, Q, R, lam, X):
    A, C, Q, R, X = [np.asarray(M, float) for M in (A, C, Q, R, X)]
    V = C @ X @ C.T + np.eye(C.shape[0]) + lam * R
    rhs = A @ X @ A.T - A @ X @ C.T @ np.linalg.solve(V, C @ X @ A.T) + lam * Q
    return frobenius(X - rhs)


def solve_kalman_riccati(A, C, Q, R, tol=None):
    """Return the prediction error covariance Sigma of the steady-state Kalman
    filter: Sigma = A Sigma A' - A Sigma C'(C Sigma C' + R)^-1 C Sigma A' + Q."""
    tol = check_tolerances(tol)
    A, C, Q, R = _filter_data(A, C, Q, R)
    return _prediction_riccati(A, C, Q, R, tol, max(1.0, frobenius(Q)), 'Kalman Riccati')


def solve_lqr_riccati(A, B, Wx, Wu, tol=None):
    """Return (X, L) where X >= 0 solves
        X = A'XA - A'XB(B'XB + Wu)^-1 B'XA + Wx
    and L = (B'XB + Wu)^-1 B'XA is the regulator gain (u = -L x)."""
    tol = check_tolerances(tol)
    A = require_square(as_matrix(A, 'A'), 'A')
    n = A.shape[0]
    B = as_matrix(B, 'B')
    if B.shape[0] != n:
        raise DimensionError('B must have {} rows, got shape {}'.format(n, B.shape), 'B')
    p = B.shape[1]
    Wx = require_shape(as_matrix(Wx, 'Wx'), (n, n), 'Wx')
    Wu = require_shape(as_matrix(Wu, 'Wu'), (p, p), 'Wu')
    _require_pd(Wx, 'Wx')
    _require_pd(Wu, 'Wu')
    X = symmetrize(Wx)
    threshold = tol.residual_tol * max(1.0, frobenius(Wx))
    for iteration in range(1, int(tol.max_iterations) + 1):
        L = scipy.linalg.solve(B.T @ X @ B + Wu, B.T @ X @ A, assume_a='pos')
        X_next = symmetrize(A.T @ X @ A - A.T @ X @ B @ L + Wx)
        step = frobenius(X_next - X)
        X = X_next
        if step <= threshold:
            logger.debug('LQR Riccati converged in %d iterations (step %.3g)', iteration, step)
            L = scipy.linalg.solve(B.T @ X @ B + Wu, B.T @ X @ A, assume_a='pos')
            require_stable(A - B @ L, 'A - BL')
            return X, L
    raise ConvergenceError('LQR Riccati did not converge in {} iterations (last step {:.3g})'
                           .format(tol.max_iterations, step))


def lqr_riccati_residual(A, B, Wx, Wu, X):
    A, B, Wx, Wu, X = [np.asarray(M, float) for M in (A, B, Wx, Wu, X)]
    G = B.T @ X @ B + Wu
    rhs = A.T @ X @ A - A.T @ X @ B @ np.linalg.solve(G, B.T @ X @ A) + Wx
    return frobenius(X - rhs)
