"""Monte Carlo simulation of a plant and a constant-gain filter.

Noise can be Gaussian, a Gaussian mixture, or resampled from an empirical
table; for a linear filter only the second moment of the noise matters for
the steady-state error covariance, which the simulations here let you check.
Random streams come from numpy's counter-based Philox generator, one
independent stream per (seed, run index), so runs can be spread over threads
in any order and still give the same numbers."""

from utils import (
    ValidationError, DimensionError, as_matrix, as_vector, symmetrize,
    is_positive_semidefinite, matrix_sqrt, parallel_map
)
from filterdesign import as_gain, solve_lambda_for_delta

from collections import namedtuple
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

default_burn_in = 1000
min_samples = 1000

# ______________________________________________________________________________
# Random streams


def make_rng(seed, run_index=0):
    "A Philox-based Generator for the stream (seed, run_index)."
    seed, run_index = int(seed), int(run_index)
    if not 0 <= seed < 2 ** 64:
        raise ValidationError('seed must be an unsigned 64-bit integer, got {}'.format(seed), 'seed')
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, run_index])))


def trial_seeds(master_seed, count):
    "count 64-bit seeds derived deterministically from master_seed."
    if int(master_seed) < 0:
        raise ValidationError('seed must be nonnegative', 'seed')
    state = np.random.SeedSequence(int(master_seed)).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]

# ______________________________________________________________________________
# Noise models


class NoiseModel:

    """A noise distribution we can sample from.  kind is one of
        'gaussian'   zero-mean normal with covariance cov
        'mixture'    components is a list of (weight, mean, cov)
        'empirical'  samples is a table, one sample vector per row, drawn
                     uniformly with replacement
    second_moment is E[v v'], computed once at construction."""

    kinds = ('gaussian', 'mixture', 'empirical')

    def __init__(self, kind, cov=None, components=None, samples=None):
        if kind not in self.kinds:
            raise ValidationError('unknown noise kind {!r}'.format(kind), 'kind')
        self.kind = kind
        if kind == 'gaussian':
            cov = as_matrix(cov, 'cov')
            if not is_positive_semidefinite(cov):
                raise ValidationError('noise covariance must be symmetric PSD', 'cov')
            self.cov = symmetrize(cov)
            self.factor = matrix_sqrt(self.cov)
            self.dim = cov.shape[0]
            self.mean = np.zeros(self.dim)
            self.second_moment = self.cov
        elif kind == 'mixture':
            self.components = self._check_components(components)
            self.dim = len(self.components[0][1])
            self.weights = np.array([w for (w, _, _) in self.components])
            self.factors = [matrix_sqrt(c) for (_, _, c) in self.components]
            self.mean = sum(w * mu for (w, mu, _) in self.components)
            self.second_moment = symmetrize(sum(w * (c + np.outer(mu, mu))
                                                for (w, mu, c) in self.components))
        else:
            samples = as_matrix(samples, 'samples')
            self.samples = samples
            self.dim = samples.shape[1]
            self.mean = samples.mean(axis=0)
            self.second_moment = symmetrize(samples.T @ samples / samples.shape[0])

    @staticmethod
    def _check_components(components):
        if not components:
            raise ValidationError('a mixture needs at least one component', 'components')
        checked = []
        for i, (weight, mean, cov) in enumerate(components):
            field = 'components[{}]'.format(i)
            mean = as_vector(mean, field + '.mean')
            cov = as_matrix(cov, field + '.cov')
            if cov.shape != (len(mean), len(mean)):
                raise DimensionError('covariance does not match mean', field + '.cov')
            if not is_positive_semidefinite(cov):
                raise ValidationError('covariance must be symmetric PSD', field + '.cov')
            if not weight > 0:
                raise ValidationError('weights must be positive', field + '.weight')
            checked.append((float(weight), mean, symmetrize(cov)))
        if len({len(mu) for (_, mu, _) in checked}) != 1:
            raise DimensionError('mixture components differ in dimension', 'components')
        total = sum(w for (w, _, _) in checked)
        if abs(total - 1) > 1e-12:
            raise ValidationError('mixture weights sum to {!r}, not 1'.format(total), 'components')
        return checked

    @classmethod
    def gaussian(cls, cov):
        return cls('gaussian', cov=cov)

    @classmethod
    def mixture(cls, components):
        return cls('mixture', components=components)

    @classmethod
    def empirical(cls, samples):
        return cls('empirical', samples=samples)

    @classmethod
    def from_csv(cls, path):
        "An empirical model from a CSV file with one sample vector per row."
        try:
            samples = np.loadtxt(path, delimiter=',', ndmin=2, comments='#')
        except ValueError as e:
            raise ValidationError('cannot read noise table {}: {}'.format(path, e), str(path))
        if samples.size == 0:
            raise ValidationError('noise table {} is empty'.format(path), str(path))
        return cls.empirical(samples)

    def sample(self, rng, size):
        "Return a (size, dim) array of draws."
        if self.kind == 'gaussian':
            return rng.standard_normal((size, self.dim)) @ self.factor.T
        elif self.kind == 'mixture':
            which = rng.choice(len(self.components), size=size, p=self.weights)
            z = rng.standard_normal((size, self.dim))
            out = np.empty((size, self.dim))
            for k, (_, mu, _) in enumerate(self.components):
                rows = which == k
                out[rows] = mu + z[rows] @ self.factors[k].T
            return out
        else:
            return self.samples[rng.integers(0, len(self.samples), size=size)]

    def scaled(self, factor):
        """The same model with its second moment multiplied by factor.  Draws
        from the same stream are the old draws times sqrt(factor)."""
        if not factor > 0:
            raise ValidationError('scale factor must be positive', 'scale')
        root = math.sqrt(factor)
        if self.kind == 'gaussian':
            return NoiseModel.gaussian(factor * self.cov)
        elif self.kind == 'mixture':
            return NoiseModel.mixture([(w, root * mu, factor * c)
                                       for (w, mu, c) in self.components])
        else:
            return NoiseModel.empirical(root * self.samples)

    def __repr__(self):
        return '<NoiseModel {} dim={}>'.format(self.kind, self.dim)

# ______________________________________________________________________________
# Filter simulation


class SimulationRun:

    """One simulated trajectory: states x(t), estimates xhat(t) and errors
    e(t) = x(t) - xhat(t) for t = 0..T (T + 1 rows each).  Statistics skip
    the first burn_in rows."""

    def __init__(self, seed, horizon, states, estimates, burn_in):
        self.seed = seed
        self.horizon = horizon
        self.states = states
        self.estimates = estimates
        self.error_samples = states - estimates
        self.burn_in = burn_in

    def __repr__(self):
        return '<SimulationRun seed={} T={} burn_in={}>'.format(self.seed, self.horizon,
                                                                self.burn_in)


def _check_noise(model, dim, name):
    if not isinstance(model, NoiseModel):
        raise ValidationError('{} must be a NoiseModel'.format(name), name)
    if model.dim != dim:
        raise DimensionError('{} has dimension {}, expected {}'.format(name, model.dim, dim), name)


def simulate_filter(sys, K, w_model, v_model, T, seed, burn_in=default_burn_in, run_index=0):
    """Simulate x(t+1) = A x(t) + w(t), y(t) = C x(t) + v(t) and the filter
    xhat(t+1) = A xhat(t) + K [y(t+1) - C A xhat(t)], with x(0) ~ N(0, Sigma0)
    and xhat(0) = 0.  The same (inputs, seed, run_index) give the same run."""
    K = as_gain(sys, K)
    _check_noise(w_model, sys.n, 'w_model')
    _check_noise(v_model, sys.m, 'v_model')
    T, burn_in = int(T), int(burn_in)
    if burn_in < 0 or T < burn_in + 1:
        raise ValidationError('need T >= burn_in + 1, got T={}, burn_in={}'.format(T, burn_in),
                              'horizon')
    rng = make_rng(seed, run_index)
    x0 = matrix_sqrt(sys.Sigma0) @ rng.standard_normal(sys.n)
    w = w_model.sample(rng, T)
    v = v_model.sample(rng, T)
    A, C, G = sys.A, sys.C, K.K
    A_K = K.A_K(sys)
    states = np.empty((T + 1, sys.n))
    estimates = np.empty((T + 1, sys.n))
    x, xhat = x0, np.zeros(sys.n)
    states[0], estimates[0] = x, xhat
    for t in range(T):
        x = A @ x + w[t]
        y = C @ x + v[t]
        xhat = A_K @ xhat + G @ y
        states[t + 1], estimates[t + 1] = x, xhat
    return SimulationRun(seed, T, states, estimates, burn_in)


def sample_covariance(samples):
    "Mean-removed sample covariance of the rows of samples, divisor N - 1."
    samples = np.asarray(samples, dtype=float)
    return np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))


def empirical_performance(run):
    "Trace of the sample covariance of the post-burn-in estimation errors."
    errors = run.error_samples[run.burn_in:]
    if len(errors) < min_samples:
        raise ValidationError('need at least {} samples after burn-in, have {}'
                              .format(min_samples, len(errors)), 'horizon')
    return float(np.trace(sample_covariance(errors)))


def empirical_sensitivity(p_nom, p_adv):
    "Relative degradation (p_adv - p_nom) / p_nom."
    if not p_nom > 0:
        raise ValidationError('nominal performance must be positive, got {}'.format(p_nom),
                              'p_nom')
    return (p_adv - p_nom) / p_nom


def mean_and_stderr(values):
    "Sample mean and its standard error."
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return float(values.mean()), float('nan')
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def performance_trials(sys, K, w_model, v_model, T, seeds, burn_in=default_burn_in):
    "empirical_performance of one run per seed, in seed order."
    K = as_gain(sys, K)
    return parallel_map(lambda seed: empirical_performance(
        simulate_filter(sys, K, w_model, v_model, T, seed, burn_in)), seeds)

# ______________________________________________________________________________
# Estimator sweep


SweepRecord = namedtuple('SweepRecord', 'delta, lam, p_nom, p_adv, sensitivity')


def estimator_sweep(sys, delta_grid, v_nominal, v_adverse, T, seeds, w_model=None,
                    burn_in=default_burn_in):
    """Design one estimator per delta for the measurement covariance implied by
    v_nominal, then measure each in nominal and adverse noise.  Every estimator
    sees the same seeds, and each seed feeds both the nominal and the adverse
    run, so differences between rows are not swamped by sampling noise."""
    design = sys.with_noise(R=v_nominal.second_moment)
    w_model = w_model or NoiseModel.gaussian(sys.Q)
    records = []
    for delta in delta_grid:
        point = solve_lambda_for_delta(design, delta)
        p_nom = np.mean(performance_trials(design, point.gain, w_model, v_nominal, T, seeds,
                                           burn_in))
        p_adv = np.mean(performance_trials(design, point.gain, w_model, v_adverse, T, seeds,
                                           burn_in))
        records.append(SweepRecord(float(delta), point.lam, float(p_nom), float(p_adv),
                                   empirical_sensitivity(p_nom, p_adv)))
        logger.info('delta %.6g: lambda %.6g, nominal %.6g, adverse %.6g',
                    delta, point.lam, p_nom, p_adv)
    return records


def count_inversions(values):
    "Number of adjacent pairs in values that fail to decrease."
    return sum(1 for a, b in zip(values, values[1:]) if b >= a)
