"""Output-feedback tracking control with a constant-gain filter.

A PlantWithInput is x(t+1) = A x(t) + B u(t) + w(t), y(t) = C x(t) + v(t).
Given a reference (x_d, u_d) that the plant can follow exactly, the controller

    u(t)      = u_d(t) - L x_c(t)
    x_c(t+1)  = (I - K C)(A - B L) x_c(t) + K [y(t+1) - C x_d(t+1)]

keeps an estimate x_c of the tracking error x - x_d.  In the coordinates
z = (x - x_d, x_c) the loop is the linear system

    z(t+1) = AA z(t) + Bw w(t) + Bv v(t+1)

and its steady-state cost Trace(WW Sigma_z), with WW = blockdiag(Wx, L' Wu L),
is the infinite-horizon LQG cost.  Its sensitivity to the measurement noise
covariance plays the same role for the loop that sensitivity() plays for the
filter alone; closed_loop_tradeoff() computes the frontier between the two.
"""

from utils import (
    ValidationError, DimensionError, InstabilityError, InfeasibleTargetError,
    as_matrix, as_vector, require_shape, symmetrize, is_positive_definite,
    matrix_sqrt, parallel_map
)
from matops import spectral_radius, solve_discrete_lyapunov, solve_dual_lyapunov, solve_lqr_riccati
from filterdesign import (
    SystemModel, FilterGain, kalman_gain, optimal_gain, stability_margin, infinity
)
from montecarlo import NoiseModel, make_rng, mean_and_stderr

from collections import namedtuple
import logging
import math

import numpy as np
import scipy.linalg
import scipy.optimize

logger = logging.getLogger(__name__)

# ______________________________________________________________________________
# Plants


class PlantWithInput:

    """A controlled plant (A, B, C) with noise statistics (Q, R, Sigma0) and
    sampling time Ts.  (A, B) should be stabilizable and (A, C) detectable;
    lqr_gain and kalman_gain fail with an ArithmeticError when they are not."""

    def __init__(self, A, B, C, Q, R, Sigma0=None, Ts=1.0, name=''):
        system = SystemModel(A, C, Q, R, Sigma0, name)
        B = as_matrix(B, 'B')
        if B.shape[0] != system.n:
            raise DimensionError('B must have {} rows, got shape {}'.format(system.n, B.shape), 'B')
        if not Ts > 0:
            raise ValidationError('sampling time must be positive, got {}'.format(Ts), 'Ts')
        self.A, self.B, self.C = system.A, B, system.C
        self.Q, self.R, self.Sigma0 = system.Q, system.R, system.Sigma0
        self.n, self.m, self.p = system.n, system.m, B.shape[1]
        self.Ts = float(Ts)
        self.name = name
        self._system = system

    def system(self):
        "The estimation problem (A, C, Q, R, Sigma0) of this plant."
        return self._system

    def with_noise(self, Q=None, R=None):
        return PlantWithInput(self.A, self.B, self.C,
                              self.Q if Q is None else Q,
                              self.R if R is None else R,
                              self.Sigma0, self.Ts, self.name)

    def __repr__(self):
        return '<PlantWithInput{}: n={}, m={}, p={}, Ts={}>'.format(
            ' ' + self.name if self.name else '', self.n, self.m, self.p, self.Ts)


def vehicle_preset(Ts=1.0):
    """A vehicle moving in the plane, state (x, vx, y, vy), driven by its two
    accelerations and observed through its position only."""
    if not Ts > 0:
        raise ValidationError('sampling time must be positive, got {}'.format(Ts), 'Ts')
    axis_A = np.array([[1.0, Ts], [0.0, 1.0]])
    axis_B = np.array([[0.0], [Ts]])
    axis_C = np.array([[1.0, 0.0]])
    return PlantWithInput(A=scipy.linalg.block_diag(axis_A, axis_A),
                          B=scipy.linalg.block_diag(axis_B, axis_B),
                          C=scipy.linalg.block_diag(axis_C, axis_C),
                          Q=0.1 * np.eye(4),
                          R=0.1 * np.eye(2),
                          Sigma0=0.1 * np.eye(4),
                          Ts=Ts,
                          name='vehicle')


vehicle_Wx = np.diag([100, 1e-3, 100, 1e-3])
vehicle_Wu = 1e-3 * np.eye(2)
vehicle_lambda_robust = 0.307
vehicle_R_adverse = 2.5 * np.eye(2)

# ______________________________________________________________________________
# The closed loop


def _augment(A, B, C, K, L, Wx, Wu):
    n = A.shape[0]
    KC, BL = K @ C, B @ L
    AA = np.block([[A, -BL], [KC @ A, A - BL - KC @ A]])
    Bw = np.vstack([np.eye(n), KC])
    Bv = np.vstack([np.zeros((n, K.shape[1])), K])
    WW = scipy.linalg.block_diag(Wx, L.T @ Wu @ L)
    return AA, Bw, Bv, WW


class ClosedLoopConfig:

    """A plant, a filter gain K, a controller gain L, cost weights Wx and Wu,
    and optionally a reference given as (x_d, u_d) pairs.  The augmented loop
    must be stable; its spectral radius is kept as spectral_radius."""

    def __init__(self, plant, K, L, Wx, Wu, reference=None):
        n, m, p = plant.n, plant.m, plant.p
        K = K.K if isinstance(K, FilterGain) else as_matrix(K, 'K')
        self.plant = plant
        self.K = require_shape(K, (n, m), 'K')
        self.L = require_shape(as_matrix(L, 'L'), (p, n), 'L')
        self.Wx = require_shape(as_matrix(Wx, 'Wx'), (n, n), 'Wx')
        self.Wu = require_shape(as_matrix(Wu, 'Wu'), (p, p), 'Wu')
        for W, name in ((self.Wx, 'Wx'), (self.Wu, 'Wu')):
            if not is_positive_definite(W):
                raise ValidationError('{} must be symmetric positive definite'.format(name), name)
        self.x_d, self.u_d = (None, None) if reference is None else self._check_reference(reference)
        self.AA, self.Bw, self.Bv, self.WW = _augment(plant.A, plant.B, plant.C, self.K, self.L,
                                                      self.Wx, self.Wu)
        self.spectral_radius = spectral_radius(self.AA)
        if not self.spectral_radius < 1 - stability_margin:
            raise InstabilityError('closed loop is not stable: spectral radius {:.12g}'
                                   .format(self.spectral_radius))

    def _check_reference(self, reference):
        if len(reference) < 1:
            raise ValidationError('reference is empty', 'reference')
        x_d = np.array([as_vector(x, 'reference[{}].x_d'.format(t))
                        for t, (x, _) in enumerate(reference)])
        u_d = np.array([as_vector(u, 'reference[{}].u_d'.format(t))
                        for t, (_, u) in enumerate(reference)])
        if x_d.shape[1] != self.plant.n or u_d.shape[1] != self.plant.p:
            raise DimensionError('reference states must have length {} and inputs length {}'
                                 .format(self.plant.n, self.plant.p), 'reference')
        return x_d, u_d

    @property
    def reference_length(self):
        return 0 if self.x_d is None else len(self.x_d)

    def __repr__(self):
        return '<ClosedLoopConfig {} rho={:.6g}>'.format(self.plant, self.spectral_radius)


def augmented_closed_loop(cfg):
    "(AA, Bw, Bv, WW) for the loop in the coordinates z = (x - x_d, x_c)."
    return cfg.AA, cfg.Bw, cfg.Bv, cfg.WW


def lqr_gain(plant, Wx, Wu):
    "The infinite-horizon LQR gain L for u = -L x."
    return solve_lqr_riccati(plant.A, plant.B, Wx, Wu)[1]


def lqg_config(plant, Wx, Wu, K=None, L=None, reference=None):
    "A ClosedLoopConfig using the Kalman and LQR gains unless others are given."
    if K is None:
        K = kalman_gain(plant.system())
    if L is None:
        L = lqr_gain(plant, Wx, Wu)
    return ClosedLoopConfig(plant, K, L, Wx, Wu, reference)


def state_covariance(cfg, R=None):
    "Steady-state covariance of z, with R the actual measurement covariance."
    R = cfg.plant.R if R is None else require_shape(as_matrix(R, 'R'), cfg.plant.R.shape, 'R')
    rhs = cfg.Bw @ cfg.plant.Q @ cfg.Bw.T + cfg.Bv @ R @ cfg.Bv.T
    return solve_discrete_lyapunov(cfg.AA, symmetrize(rhs))


def closed_loop_cost(cfg):
    "J = Trace(WW Sigma_z), the average stage cost in steady state."
    return float(np.trace(cfg.WW @ state_covariance(cfg)))


def cost_gradient_R(cfg):
    "dJ/dR = Bv' MM Bv, where MM = AA' MM AA + WW."
    MM = solve_dual_lyapunov(cfg.AA, cfg.WW)
    return symmetrize(cfg.Bv.T @ MM @ cfg.Bv)


def cost_sensitivity(cfg):
    "Trace of dJ/dR."
    return float(np.trace(cost_gradient_R(cfg)))


def steady_state_tracking_mse(cfg, R_actual=None):
    "Mean squared error of the measured coordinates, C (x - x_d), in steady state."
    n, C = cfg.plant.n, cfg.plant.C
    Sigma = state_covariance(cfg, R_actual)[:n, :n]
    return float(np.trace(C @ Sigma @ C.T))

# ______________________________________________________________________________
# References


default_course = [(0, 0), (20, 0), (24, 4), (24, 20), (20, 24), (0, 24), (-4, 20), (-4, 4), (0, 0)]


def _position_indices(plant):
    "State indices of the measured positions, and of the velocities that follow them."
    positions = []
    for row in plant.C:
        nonzero = np.flatnonzero(row)
        if len(nonzero) != 1 or row[nonzero[0]] != 1:
            raise ValidationError('each row of C must pick out a single position coordinate', 'C')
        positions.append(int(nonzero[0]))
    velocities = [i + 1 for i in positions]
    if any(i >= plant.n or i in positions for i in velocities):
        raise ValidationError('every position coordinate must be followed by its velocity', 'C')
    return positions, velocities


def reference_from_waypoints(plant, waypoints, steps_per_segment=10):
    """Visit the waypoints in order at constant velocity, taking
    steps_per_segment samples per leg, and come to rest at the last one.
    Returns [(x_d(t), u_d(t))]; x_d(t+1) = A x_d(t) + B u_d(t) holds at every
    step (the last pair has u_d = 0)."""
    waypoints = [as_vector(w, 'waypoints[{}]'.format(i)) for i, w in enumerate(waypoints)]
    if len(waypoints) < 2:
        raise ValidationError('need at least two waypoints', 'waypoints')
    if any(len(w) != plant.m for w in waypoints):
        raise DimensionError('waypoints must have {} coordinates'.format(plant.m), 'waypoints')
    steps = int(steps_per_segment)
    if steps < 1:
        raise ValidationError('steps_per_segment must be at least 1', 'steps_per_segment')
    positions, velocities = _position_indices(plant)
    states = []
    for start, end in zip(waypoints, waypoints[1:]):
        velocity = (end - start) / (steps * plant.Ts)
        for j in range(steps):
            x = np.zeros(plant.n)
            x[positions] = start + j * plant.Ts * velocity
            x[velocities] = velocity
            states.append(x)
    x = np.zeros(plant.n)
    x[positions] = waypoints[-1]
    states.append(x)

    reference = []
    scale = max(1.0, max(np.max(np.abs(x)) for x in states))
    for t, (x, x_next) in enumerate(zip(states, states[1:])):
        target = x_next - plant.A @ x
        u, *_ = np.linalg.lstsq(plant.B, target, rcond=None)
        if np.max(np.abs(plant.B @ u - target)) > 1e-9 * scale:
            raise ValidationError('waypoint spacing cannot be followed by the plant at step {}'
                                  .format(t), 'waypoints')
        reference.append((x, u))
    reference.append((states[-1], np.zeros(plant.p)))
    return reference


def course_reference(plant, horizon, waypoints=default_course, steps_per_segment=10):
    "A reference long enough for horizon steps, going round a closed course as often as needed."
    waypoints = list(waypoints)
    lap = (len(waypoints) - 1) * steps_per_segment
    laps = max(1, math.ceil(int(horizon) / lap))
    looped = waypoints + waypoints[1:] * (laps - 1)
    return reference_from_waypoints(plant, looped, steps_per_segment)

# ______________________________________________________________________________
# Simulation


TrackingResult = namedtuple('TrackingResult', 'states, controller_states, inputs, rmse, stage_cost')


def tracking_simulate(cfg, w_model, v_model, T, seed, run_index=0, burn_in=0):
    """Run the loop for T steps from x(0) = x_d(0) + N(0, Sigma0), x_c(0) = 0.
    Each step advances the plant, measures y(t+1), then updates the controller.
    rmse is the root mean squared C (x - x_d) and stage_cost the average of
    (x - x_d)' Wx (x - x_d) + (u - u_d)' Wu (u - u_d), both over t >= burn_in.
    Without a reference the loop regulates to the origin."""
    plant = cfg.plant
    T, burn_in = int(T), int(burn_in)
    if T < 1 or not 0 <= burn_in < T:
        raise ValidationError('need T >= 1 and 0 <= burn_in < T', 'horizon')
    for model, dim, name in ((w_model, plant.n, 'w_model'), (v_model, plant.m, 'v_model')):
        if not isinstance(model, NoiseModel) or model.dim != dim:
            raise DimensionError('{} must be a NoiseModel of dimension {}'.format(name, dim), name)
    if cfg.x_d is None:
        x_d, u_d = np.zeros((T + 1, plant.n)), np.zeros((T + 1, plant.p))
    elif cfg.reference_length < T + 1:
        raise ValidationError('reference has {} points, need {}'.format(cfg.reference_length, T + 1),
                              'reference')
    else:
        x_d, u_d = cfg.x_d, cfg.u_d

    rng = make_rng(seed, run_index)
    x0 = x_d[0] + matrix_sqrt(plant.Sigma0) @ rng.standard_normal(plant.n)
    w = w_model.sample(rng, T)
    v = v_model.sample(rng, T)

    A, B, C, K, L = plant.A, plant.B, plant.C, cfg.K, cfg.L
    F = (np.eye(plant.n) - K @ C) @ (A - B @ L)
    states = np.empty((T + 1, plant.n))
    controller_states = np.empty((T + 1, plant.n))
    inputs = np.empty((T, plant.p))
    x, xc = x0, np.zeros(plant.n)
    states[0], controller_states[0] = x, xc
    for t in range(T):
        u = u_d[t] - L @ xc
        x = A @ x + B @ u + w[t]
        y = C @ x + v[t]
        xc = F @ xc + K @ (y - C @ x_d[t + 1])
        inputs[t] = u
        states[t + 1], controller_states[t + 1] = x, xc

    errors = states - x_d[:T + 1]
    position_errors = errors[burn_in:] @ C.T
    rmse = math.sqrt(np.mean(np.sum(position_errors ** 2, axis=1)))
    du = inputs[burn_in:] - u_d[burn_in:T]
    e = errors[burn_in:T]
    stage_cost = float(np.mean(np.einsum('ti,ij,tj->t', e, cfg.Wx, e)
                               + np.einsum('ti,ij,tj->t', du, cfg.Wu, du)))
    return TrackingResult(states, controller_states, inputs, rmse, stage_cost)


RmseRow = namedtuple('RmseRow', 'scale, rmse_kalman, rmse_robust, stderr_kalman, stderr_robust')


def rmse_sweep(cfg_kalman, cfg_robust, scales, w_model, v_model, T, seeds, burn_in=0):
    """Tracking RMSE of two controllers when the measurement noise is v_model
    scaled by each factor in scales.  Both controllers and all scales share
    the same seeds, so they see the same underlying noise draws."""
    rows = []
    for scale in scales:
        v_actual = v_model.scaled(scale)

        def both(seed):
            return (tracking_simulate(cfg_kalman, w_model, v_actual, T, seed, burn_in=burn_in).rmse,
                    tracking_simulate(cfg_robust, w_model, v_actual, T, seed, burn_in=burn_in).rmse)

        results = parallel_map(both, seeds)
        mean_k, se_k = mean_and_stderr([r[0] for r in results])
        mean_r, se_r = mean_and_stderr([r[1] for r in results])
        rows.append(RmseRow(float(scale), mean_k, mean_r, se_k, se_r))
        logger.info('scale %.6g: rmse kalman %.6g, robust %.6g', scale, mean_k, mean_r)
    return rows


def sign_changes(values):
    "How many times the sign of values changes, ignoring exact zeros."
    signs = [np.sign(v) for v in values if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def crossing_scale(rows):
    """The scale where rmse_kalman - rmse_robust first changes sign, found by
    linear interpolation between grid points; None if it never does."""
    for a, b in zip(rows, rows[1:]):
        da, db = a.rmse_kalman - a.rmse_robust, b.rmse_kalman - b.rmse_robust
        if da == 0:
            return a.scale
        if da * db < 0:
            return a.scale + (b.scale - a.scale) * da / (da - db)
    return None

# ______________________________________________________________________________
# The closed-loop frontier


ClosedLoopTradeoffPoint = namedtuple('ClosedLoopTradeoffPoint',
                                     'delta, mode, mu, K, L, cost, sensitivity, certified')

modes = ('optimize-both', 'fix-L-lqr', 'fix-K-kalman')

mu_floor, mu_cap = 1e-9, 1e9
fd_step = 1e-6
unstable_penalty = 1e8


def _central_gradient(f, theta, f0):
    """Entrywise central differences; one-sided next to an unstable
    neighbour, where f is infinite."""
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = fd_step
        fp, fm = f(theta + e), f(theta - e)
        if math.isfinite(fp) and math.isfinite(fm):
            g[i] = (fp - fm) / (2 * fd_step)
        elif math.isfinite(fm):
            g[i] = (f0 - fm) / fd_step
        elif math.isfinite(fp):
            g[i] = (fp - f0) / fd_step
    return g


def _local_minimum(f, theta, gtol=1e-6, max_iterations=500):
    """scipy's BFGS on f with finite-difference gradients.  f is infinite at
    destabilizing points; the line search sees unstable_penalty there instead,
    so it never accepts one.  A line search that stalls with the gradient
    already near gtol still counts as converged."""
    f0 = f(theta)
    if not math.isfinite(f0):
        return scipy.optimize.OptimizeResult(x=theta, fun=infinity, success=False)
    scale = max(1.0, abs(f0))

    def penalized(x):
        value = f(x)
        return value if math.isfinite(value) else unstable_penalty * scale

    def gradient(x):
        fx = f(x)
        if not math.isfinite(fx):
            return np.zeros_like(x)
        return _central_gradient(f, x, fx)

    res = scipy.optimize.minimize(penalized, np.asarray(theta, dtype=float), method='BFGS',
                                  jac=gradient,
                                  options={'gtol': gtol * scale, 'maxiter': max_iterations})
    if not res.success and res.status == 2 and math.isfinite(f(res.x)):
        res.success = bool(np.max(np.abs(res.jac)) <= 10 * gtol * scale)
    return res


class _Scalarization:

    """S_J + mu J as a function of the free gains of one mode, packed into a
    flat vector theta."""

    def __init__(self, plant, Wx, Wu, mode):
        if mode not in modes:
            raise ValidationError('unknown mode {!r}; expected one of {}'.format(mode, modes), 'mode')
        self.plant, self.Wx, self.Wu, self.mode = plant, Wx, Wu, mode
        self.system = plant.system()
        self.K_kalman = kalman_gain(self.system).K
        self.L_lqr = lqr_gain(plant, Wx, Wu)

    def unpack(self, theta):
        n, m, p = self.plant.n, self.plant.m, self.plant.p
        if self.mode == 'optimize-both':
            return theta[:n * m].reshape(n, m), theta[n * m:].reshape(p, n)
        elif self.mode == 'fix-L-lqr':
            return theta.reshape(n, m), self.L_lqr
        else:
            return self.K_kalman, theta.reshape(p, n)

    def pack(self, K, L):
        if self.mode == 'optimize-both':
            return np.concatenate([K.ravel(), L.ravel()])
        elif self.mode == 'fix-L-lqr':
            return K.ravel().copy()
        else:
            return L.ravel().copy()

    def evaluate(self, theta):
        "(S_J, J), or (inf, inf) when the loop is unstable."
        K, L = self.unpack(theta)
        plant = self.plant
        AA, Bw, Bv, WW = _augment(plant.A, plant.B, plant.C, K, L, self.Wx, self.Wu)
        if not np.all(np.isfinite(AA)) or spectral_radius(AA) >= 1 - stability_margin:
            return infinity, infinity
        MM = solve_dual_lyapunov(AA, WW)
        S = float(np.trace(Bv.T @ MM @ Bv))
        J = float(np.trace(MM @ (Bw @ plant.Q @ Bw.T + Bv @ plant.R @ Bv.T)))
        return S, J

    def objective(self, mu):
        def f(theta):
            S, J = self.evaluate(theta)
            return S + mu * J
        return f

    def analytic_starts(self, mu):
        """[the Riccati-based gains for this multiplier], optimal when L is the
        LQR gain; empty when the Riccati iteration fails for this mu."""
        if self.mode == 'fix-K-kalman':
            return [self.pack(self.K_kalman, self.L_lqr)]
        try:
            K = optimal_gain(self.system, mu).K
        except ArithmeticError as e:
            logger.debug('no analytic start at mu %.6g: %s', mu, e)
            return []
        return [self.pack(K, self.L_lqr)]


Solution = namedtuple('Solution', 'mu, theta, sensitivity, cost, converged')


def _best(problem, mu, starts):
    "Minimize from every start; keep the lowest value, earlier starts winning ties."
    f = problem.objective(mu)
    results = parallel_map(lambda theta: _local_minimum(f, theta), starts)
    best = None
    for r in results:
        if best is None or r.fun < best.fun - 1e-12 * max(1.0, abs(best.fun)):
            best = r
    S, J = problem.evaluate(best.x)
    return Solution(mu, best.x, S, J, bool(best.success))


def _perturbed_starts(problem, theta, count, rng):
    "count random stabilizing perturbations of theta."
    starts = []
    scale = 0.1 * max(1.0, np.max(np.abs(theta)))
    while len(starts) < count:
        size = scale
        for attempt in range(20):
            trial = theta + size * rng.standard_normal(len(theta))
            if math.isfinite(problem.evaluate(trial)[1]):
                starts.append(trial)
                break
            size *= 0.5
        else:
            starts.append(theta.copy())
    return starts


def closed_loop_tradeoff(plant, Wx, Wu, delta_grid, mode='optimize-both', starts=5, seed=0):
    """For each cost bound delta, the gains with the least cost sensitivity
    among those with closed_loop_cost <= delta.  mode says which gains are
    free: both, only K (L fixed to the LQR gain) or only L (K fixed to the
    Kalman gain).  Each point minimizes S_J + mu J, with mu bisected (on a log
    scale, warm-started) until J = delta; the final mu is re-solved from
    starts starting points (the warm start, the Riccati-based gains and random
    perturbations) and the best is kept.  Points whose optimizer stagnated or
    whose cost misses delta by more than 1e-4 (relative) have certified False."""
    problem = _Scalarization(plant, np.asarray(Wx, float), np.asarray(Wu, float), mode)
    if int(starts) < 1:
        raise ValidationError('need at least one start', 'starts')
    theta_min = problem.pack(problem.K_kalman, problem.L_lqr)
    J_min = problem.evaluate(theta_min)[1]
    points = []
    warm, mu = theta_min, 1.0
    for index, delta in enumerate(delta_grid):
        delta = float(delta)
        slack = 1e-9 * max(1.0, abs(delta))
        if delta < J_min - slack:
            raise InfeasibleTargetError('cost bound {:.12g} is below the LQG cost {:.12g}'
                                        .format(delta, J_min))

        def solve(mu):
            return _best(problem, mu, [warm] + problem.analytic_starts(mu))

        if delta <= J_min + slack:
            S, J = problem.evaluate(theta_min)
            sol = Solution(mu_cap, theta_min, S, J, True)
        else:
            sol = _bisect_multiplier(solve, delta, mu)
            starts_list = [sol.theta] + problem.analytic_starts(sol.mu)
            starts_list += _perturbed_starts(problem, sol.theta, int(starts) - len(starts_list),
                                             make_rng(seed, index))
            sol = _best(problem, sol.mu, starts_list[:int(starts)])
        warm, mu = sol.theta, sol.mu
        K, L = problem.unpack(sol.theta)
        certified = sol.converged and (abs(sol.cost - delta) <= 1e-4 * max(1.0, abs(delta))
                                       or (sol.mu <= mu_floor and sol.cost <= delta))
        if not certified:
            logger.warning('%s: point at delta %.6g not certified (cost %.6g, converged %s)',
                           mode, delta, sol.cost, sol.converged)
        points.append(ClosedLoopTradeoffPoint(delta, mode, sol.mu, np.array(K), np.array(L),
                                              sol.cost, sol.sensitivity, certified))
    return points


def _bisect_multiplier(solve, delta, mu):
    """The solution at the multiplier mu where its cost equals delta.  Cost
    decreases as mu grows."""
    tol = 1e-6 * max(1.0, abs(delta))
    sol = solve(mu)
    if abs(sol.cost - delta) <= tol:
        return sol
    if sol.cost > delta:
        lo = sol
        while True:
            mu = min(10 * mu, mu_cap)
            hi = solve(mu)
            if hi.cost <= delta or mu >= mu_cap:
                break
            lo = hi
        if hi.cost > delta:
            return hi
    else:
        hi = sol
        while True:
            mu = max(mu / 10, mu_floor)
            lo = solve(mu)
            if lo.cost > delta or mu <= mu_floor:
                break
            hi = lo
        if lo.cost <= delta:
            return lo
    for iteration in range(60):
        mid = solve(math.sqrt(lo.mu * hi.mu))
        if abs(mid.cost - delta) <= tol:
            logger.debug('delta %.6g: mu %.6g after %d bisection steps', delta, mid.mu, iteration + 1)
            return mid
        if mid.cost > delta:
            lo = mid
        else:
            hi = mid
        if hi.mu / lo.mu < 1 + 1e-12:
            break
    return hi


def mode_agreement(curves):
    """Largest relative difference in sensitivity between any two curves
    computed on the same delta grid.  Differences above 5% are logged."""
    curves = list(curves.items()) if isinstance(curves, dict) else list(curves)
    worst = 0.0
    for i, (mode_a, a) in enumerate(curves):
        for mode_b, b in curves[i + 1:]:
            for pa, pb in zip(a, b):
                scale = max(abs(pa.sensitivity), abs(pb.sensitivity), 1e-9)
                deviation = abs(pa.sensitivity - pb.sensitivity) / scale
                if deviation > 0.05:
                    logger.warning('modes %s and %s differ by %.1f%% at delta %.6g',
                                   mode_a, mode_b, 100 * deviation, pa.delta)
                worst = max(worst, deviation)
    return worst
