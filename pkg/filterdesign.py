"""Linear filters on the accuracy/robustness frontier.

A SystemModel is the linear plant x(t+1) = A x(t) + w(t), y(t) = C x(t) + v(t)
with w ~ N(0, Q), v ~ N(0, R), x(0) ~ N(0, Sigma0).  A constant-gain filter

    xhat(t+1) = A xhat(t) + K [y(t+1) - C A xhat(t)]

has a steady-state error covariance P(K); its accuracy is performance(K) =
Trace P(K) and its robustness is measured by sensitivity(K) = Trace dP/dR.
The Kalman gain minimizes the first, the zero gain the second, and the gains
K*(lam) built from a lam-weighted Riccati equation trace out every optimal
compromise between them: for each accuracy bound delta there is one lam
whose gain has the least sensitivity among all gains with performance <= delta.
"""

from utils import (
    ValidationError, DimensionError, InstabilityError, InfeasibleTargetError,
    as_matrix, require_square, require_shape, symmetrize, is_symmetric,
    is_positive_definite, is_positive_semidefinite, parallel_map
)
from matops import (
    spectral_radius, solve_discrete_lyapunov, solve_dual_lyapunov,
    solve_filter_riccati, solve_kalman_riccati
)

from collections import namedtuple
import logging
import math

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

infinity = float('inf')

stability_margin = 1e-9
lambda_cap = 1e9

# ______________________________________________________________________________


class SystemModel:

    """The plant and noise statistics (A, C, Q, R, Sigma0).  Q and Sigma0 must
    be positive semidefinite, R positive definite.  A may be unstable (e.g. a
    double integrator); quantities that need rho(A) < 1, such as the
    performance of the zero gain, check for it when asked."""

    def __init__(self, A, C, Q, R, Sigma0=None, name=''):
        A = require_square(as_matrix(A, 'A'), 'A')
        n = A.shape[0]
        C = as_matrix(C, 'C')
        if C.shape[1] != n:
            raise DimensionError('C must have {} columns, got shape {}'.format(n, C.shape), 'C')
        m = C.shape[0]
        Q = require_shape(as_matrix(Q, 'Q'), (n, n), 'Q')
        R = require_shape(as_matrix(R, 'R'), (m, m), 'R')
        Sigma0 = np.zeros((n, n)) if Sigma0 is None else as_matrix(Sigma0, 'Sigma0')
        require_shape(Sigma0, (n, n), 'Sigma0')
        if not is_positive_semidefinite(Q):
            raise ValidationError('Q must be symmetric positive semidefinite', 'Q')
        if not is_positive_definite(R):
            raise ValidationError('R must be symmetric positive definite', 'R')
        if not is_positive_semidefinite(Sigma0):
            raise ValidationError('Sigma0 must be symmetric positive semidefinite', 'Sigma0')
        self.A, self.C = A, C
        self.Q, self.R, self.Sigma0 = symmetrize(Q), symmetrize(R), symmetrize(Sigma0)
        self.n, self.m = n, m
        self.name = name

    @property
    def is_stable(self):
        return spectral_radius(self.A) < 1

    def with_noise(self, Q=None, R=None):
        "A copy of this system with the noise covariances replaced."
        return SystemModel(self.A, self.C,
                           self.Q if Q is None else Q,
                           self.R if R is None else R,
                           self.Sigma0, self.name)

    def __repr__(self):
        return '<SystemModel{}: n={}, m={}>'.format(' ' + self.name if self.name else '',
                                                    self.n, self.m)


class FilterGain:

    """A gain K for which the error dynamics A_K = A - K C A are stable.  The
    spectral radius of A_K is recorded as the stability certificate; gains
    within stability_margin of the unit circle are rejected."""

    def __init__(self, K, sys):
        K = require_shape(as_matrix(K, 'K'), (sys.n, sys.m), 'K')
        rho = spectral_radius(sys.A - K @ sys.C @ sys.A)
        if not rho < 1 - stability_margin:
            raise InstabilityError('gain is not stabilizing: rho(A - KCA) = {:.12g}'.format(rho))
        self.K = K
        self.closed_loop_spectral_radius = rho

    def A_K(self, sys):
        return sys.A - self.K @ sys.C @ sys.A

    def B_K(self, sys):
        return np.eye(sys.n) - self.K @ sys.C

    def __repr__(self):
        return '<FilterGain rho={:.6g}: {}>'.format(self.closed_loop_spectral_radius,
                                                    self.K.tolist())


def as_gain(sys, K):
    "Accept either a FilterGain or a plain matrix, certified against sys."
    if isinstance(K, FilterGain):
        require_shape(K.K, (sys.n, sys.m), 'K')
        return K
    return FilterGain(K, sys)


GradientBundle = namedtuple('GradientBundle', 'P, S, M, dP_dR, dP_dK, dS_dK')

TradeoffPoint = namedtuple('TradeoffPoint', 'delta, lam, gain, performance, sensitivity, at_cap')

# ______________________________________________________________________________
# Accuracy and sensitivity of a given gain


def error_covariance(sys, K):
    "P(K) = A_K P A_K' + B_K Q B_K' + K R K'."
    K = as_gain(sys, K)
    B_K = K.B_K(sys)
    rhs = B_K @ sys.Q @ B_K.T + K.K @ sys.R @ K.K.T
    return solve_discrete_lyapunov(K.A_K(sys), symmetrize(rhs))


def performance(sys, K):
    "Trace of the steady-state error covariance; lower is more accurate."
    return float(np.trace(error_covariance(sys, K)))


def sensitivity_matrix(sys, K):
    "S(K) = A_K S A_K' + K K'."
    K = as_gain(sys, K)
    return solve_discrete_lyapunov(K.A_K(sys), K.K @ K.K.T)


def sensitivity(sys, K):
    "Trace of dP/dR, i.e. Trace S(K); lower is more robust."
    return float(np.trace(sensitivity_matrix(sys, K)))


def gradient_bundle(sys, K):
    """P, S, the dual solution M = A_K' M A_K + I, and the gradients
        dP/dR = K' M K
        dP/dK = 2 M (K R - A_K P A' C' - B_K Q C')
        dS/dK = 2 M (K - A_K S A' C')."""
    K = as_gain(sys, K)
    A, C = sys.A, sys.C
    A_K, B_K, G = K.A_K(sys), K.B_K(sys), K.K
    P = error_covariance(sys, K)
    S = sensitivity_matrix(sys, K)
    M = solve_dual_lyapunov(A_K, np.eye(sys.n))
    dP_dR = symmetrize(G.T @ M @ G)
    dP_dK = 2 * M @ (G @ sys.R - A_K @ P @ A.T @ C.T - B_K @ sys.Q @ C.T)
    dS_dK = 2 * M @ (G - A_K @ S @ A.T @ C.T)
    return GradientBundle(P, S, M, dP_dR, dP_dK, dS_dK)


def stationarity_residual(sys, K, lam):
    "Frobenius norm of dS/dK + lam dP/dK; zero at the optimal gain K*(lam)."
    g = gradient_bundle(sys, K)
    return float(np.linalg.norm(g.dS_dK + lam * g.dP_dK, 'fro'))


def worst_case_performance(sys, K, gamma):
    "performance(K) + gamma * sensitivity(K)."
    if not gamma >= 0:
        raise ValidationError('gamma must be nonnegative, got {}'.format(gamma), 'gamma')
    return performance(sys, K) + gamma * sensitivity(sys, K)


def nonnominal_performance(sys, K, R_actual):
    "Performance of a gain designed for sys when the true measurement covariance is R_actual."
    return performance(sys.with_noise(R=R_actual), as_gain(sys, K).K)


def relative_degradation(sys, K, R_actual):
    "(P_actual - P_nominal) / P_nominal for the gain K."
    p_nom = performance(sys, K)
    return (nonnominal_performance(sys, K, R_actual) - p_nom) / p_nom

# ______________________________________________________________________________
# Special gains


def kalman_gain(sys, tol=None):
    """The steady-state Kalman gain Sigma C'(C Sigma C' + R)^-1, where Sigma is
    the prediction error covariance."""
    Sigma = solve_kalman_riccati(sys.A, sys.C, sys.Q, sys.R, tol)
    SC = Sigma @ sys.C.T
    K = scipy.linalg.solve(sys.C @ SC + sys.R, SC.T, assume_a='pos').T
    return FilterGain(K, sys)


def zero_gain(sys):
    "The gain that ignores every measurement; stabilizing only for stable A."
    return FilterGain(np.zeros((sys.n, sys.m)), sys)


def optimal_gain(sys, lam, tol=None):
    """K*(lam) = X C'(C X C' + I + lam R)^-1, with X from the lam-weighted
    filter Riccati equation.  It minimizes sensitivity + lam * performance;
    K*(0) = 0 and K*(lam) tends to the Kalman gain as lam grows."""
    if not lam >= 0:
        raise ValidationError('lambda must be nonnegative, got {}'.format(lam), 'lambda')
    X = solve_filter_riccati(sys.A, sys.C, sys.Q, sys.R, lam, tol)
    XC = X @ sys.C.T
    V = sys.C @ XC + np.eye(sys.m) + lam * sys.R
    K = scipy.linalg.solve(V, XC.T, assume_a='pos').T
    return FilterGain(K, sys)


def robust_gain(sys, gamma, tol=None):
    "The gain minimizing worst_case_performance for a given gamma: K*(1/gamma)."
    if not gamma > 0:
        raise ValidationError('gamma must be positive, got {}'.format(gamma), 'gamma')
    return optimal_gain(sys, 1.0 / gamma, tol)


def optimal_performance(sys, lam, tol=None):
    "performance(K*(lam)), with the zero gain's performance (possibly infinite) at lam = 0."
    if lam == 0 and not sys.is_stable:
        return infinity
    return performance(sys, optimal_gain(sys, lam, tol))


def performance_curve(sys, lambdas, tol=None):
    "[optimal_performance(sys, lam) for lam in lambdas]; strictly decreasing in lam."
    return parallel_map(lambda lam: optimal_performance(sys, lam, tol), lambdas)


def performance_bounds(sys, tol=None):
    """(performance of the Kalman gain, performance of the zero gain).  The
    second is infinite when A is unstable."""
    p_kf = performance(sys, kalman_gain(sys, tol))
    p_zero = performance(sys, zero_gain(sys)) if sys.is_stable else infinity
    return p_kf, p_zero

# ______________________________________________________________________________
# The frontier


def _point(sys, delta, lam, gain, at_cap=False):
    return TradeoffPoint(delta, lam, gain, performance(sys, gain), sensitivity(sys, gain), at_cap)


def solve_lambda_for_delta(sys, delta, tol=None, rel_tol=1e-8):
    """Find the multiplier lam with performance(K*(lam)) = delta, and return
    the TradeoffPoint there.  delta must lie in [performance of the Kalman
    gain, performance of the zero gain]; delta at the upper end gives lam = 0,
    delta at the lower end gives the Kalman gain with lam = lambda_cap."""
    p_kf, p_zero = performance_bounds(sys, tol)
    slack = rel_tol * max(1.0, abs(delta))
    if not (p_kf - slack <= delta <= p_zero + slack):
        raise InfeasibleTargetError('delta = {:.12g} is outside [{:.12g}, {:.12g}]'
                                    .format(delta, p_kf, p_zero))
    if sys.is_stable and abs(delta - p_zero) <= slack:
        return _point(sys, delta, 0.0, zero_gain(sys))

    def p_star(lam):
        return optimal_performance(sys, lam, tol)

    # Bracket: p_star(lo) > delta >= p_star(hi), growing hi by doubling.
    lam_hi = 1.0
    p_hi = p_star(lam_hi)
    while p_hi > delta + slack:
        if lam_hi >= lambda_cap:
            logger.info('delta %.12g needs lambda beyond the cap; returning the Kalman gain', delta)
            return _point(sys, delta, lambda_cap, kalman_gain(sys, tol), at_cap=True)
        lam_hi = min(2 * lam_hi, lambda_cap)
        p_hi = p_star(lam_hi)
    if abs(p_hi - delta) <= slack:
        return _point(sys, delta, lam_hi, optimal_gain(sys, lam_hi, tol))

    lam_lo = lam_hi / 2
    p_lo = p_star(lam_lo)
    while p_lo < delta - slack:
        lam_hi, p_hi = lam_lo, p_lo
        lam_lo = lam_lo / 2
        if lam_lo < 1e-300:
            return _point(sys, delta, lam_hi, optimal_gain(sys, lam_hi, tol))
        p_lo = p_star(lam_lo)
    if abs(p_lo - delta) <= slack:
        return _point(sys, delta, lam_lo, optimal_gain(sys, lam_lo, tol))

    # Bisection on log lam.
    for iteration in range(200):
        lam_mid = math.sqrt(lam_lo * lam_hi)
        p_mid = p_star(lam_mid)
        if abs(p_mid - delta) <= slack or lam_mid in (lam_lo, lam_hi):
            break
        if p_mid > delta:
            lam_lo = lam_mid
        else:
            lam_hi = lam_mid
    logger.debug('delta %.12g: lambda %.12g after %d bisection steps', delta, lam_mid, iteration + 1)
    return _point(sys, delta, lam_mid, optimal_gain(sys, lam_mid, tol))


def uniform_delta_grid(sys, steps=25, tol=None):
    "steps equally spaced accuracy bounds from the Kalman to the zero-gain performance."
    p_kf, p_zero = performance_bounds(sys, tol)
    if math.isinf(p_zero):
        raise InstabilityError('the zero gain has unbounded error for an unstable A; '
                               'give the delta grid explicitly')
    return list(np.linspace(p_kf, p_zero, steps))


def tradeoff_curve(sys, delta_grid, tol=None):
    """The optimal trade-off point for every delta in a strictly increasing
    grid.  Sensitivities come out strictly decreasing."""
    delta_grid = [float(d) for d in delta_grid]
    if any(b <= a for a, b in zip(delta_grid, delta_grid[1:])):
        raise ValidationError('delta grid must be strictly increasing', 'delta_grid')
    return parallel_map(lambda delta: solve_lambda_for_delta(sys, delta, tol), delta_grid)


def dominated_points(points):
    "Indices of points whose (performance, sensitivity) is dominated by another point."
    dominated = []
    for i, p in enumerate(points):
        for j, q in enumerate(points):
            if i != j and (q.performance <= p.performance and q.sensitivity <= p.sensitivity
                           and (q.performance < p.performance or q.sensitivity < p.sensitivity)):
                dominated.append(i)
                break
    return dominated

# ______________________________________________________________________________

# A two-state example with a stable, lower-triangular A.

example1 = SystemModel(A=[[0.9, 0], [0.02, 0.8]],
                       C=[[0.5, -0.8], [0, 0.7]],
                       Q=[[0.5, 0], [0, 0.7]],
                       R=[[0.5, 0.1], [0.1, 0.8]],
                       Sigma0=np.eye(2),
                       name='example1')

__doc__ += """
>>> p_kf, p_zero = performance_bounds(example1)
>>> p_kf < p_zero
True
>>> sensitivity(example1, zero_gain(example1))
0.0
"""
