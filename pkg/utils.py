"""Provides some utilities widely used by other modules"""

import logging
import os

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

# ______________________________________________________________________________
# Errors


class ValidationError(ValueError):

    """An input that does not make sense: wrong shape, not symmetric, not
    positive definite, unknown key.  If the input came from a config file,
    field holds the path to it, e.g. 'system.A[1]'."""

    def __init__(self, message, field=None):
        ValueError.__init__(self, message)
        self.field = field


class DimensionError(ValidationError):
    "Matrices whose shapes do not fit together."


class InstabilityError(ArithmeticError):
    "A matrix that must have spectral radius below one does not."


class ConvergenceError(ArithmeticError):
    "An iterative solver ran out of iterations."


class InfeasibleTargetError(ValueError):
    "An accuracy target outside the range a linear filter can reach."

# ______________________________________________________________________________
# Matrices


def as_matrix(X, name='matrix'):
    """Coerce X to a 2-d float array; scalars become 1x1.
    Raises ValidationError on ragged input or non-finite entries."""
    try:
        X = np.array(X, dtype=float, ndmin=2)
    except (TypeError, ValueError):
        raise ValidationError('{} is not a numeric matrix'.format(name), name)
    if X.ndim != 2:
        raise DimensionError('{} must be 2-dimensional, got shape {}'.format(name, X.shape), name)
    if X.size == 0:
        raise DimensionError('{} is empty'.format(name), name)
    if not np.all(np.isfinite(X)):
        raise ValidationError('{} has non-finite entries'.format(name), name)
    return X


def as_vector(x, name='vector'):
    "Coerce x to a 1-d float array."
    x = np.array(x, dtype=float, ndmin=1)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValidationError('{} must be a finite vector'.format(name), name)
    return x


def require_square(X, name='matrix'):
    if X.shape[0] != X.shape[1]:
        raise DimensionError('{} must be square, got shape {}'.format(name, X.shape), name)
    return X


def require_shape(X, shape, name='matrix'):
    if X.shape != tuple(shape):
        raise DimensionError('{} must have shape {}, got {}'.format(name, tuple(shape), X.shape),
                             name)
    return X


def symmetrize(X):
    "Return (X + X')/2."
    return 0.5 * (X + X.T)


def frobenius(X):
    return float(np.linalg.norm(X, 'fro'))


def is_symmetric(X, tol=1e-10):
    "Is X symmetric to within tol, relative to its largest entry?"
    X = np.asarray(X)
    if X.shape[0] != X.shape[1]:
        return False
    return np.max(np.abs(X - X.T)) <= tol * max(1.0, np.max(np.abs(X)))


def is_positive_definite(X, tol=1e-12):
    """Is the symmetric matrix X positive definite?  Decided by Cholesky: every
    pivot must exceed tol relative to the largest diagonal entry."""
    X = np.asarray(X, dtype=float)
    if not is_symmetric(X):
        return False
    try:
        F = scipy.linalg.cholesky(X, lower=True)
    except np.linalg.LinAlgError:
        return False
    scale = np.max(np.abs(np.diag(X)))
    return scale > 0 and np.min(np.diag(F)) ** 2 > tol * scale


def is_positive_semidefinite(X, tol=1e-10):
    "Is X symmetric with no eigenvalue below -tol (relative to its size)?"
    X = np.asarray(X, dtype=float)
    if not is_symmetric(X):
        return False
    shift = tol * max(1.0, np.max(np.abs(X)))
    try:
        scipy.linalg.cholesky(X + shift * np.eye(X.shape[0]), lower=True)
    except np.linalg.LinAlgError:
        return False
    return True


def matrix_sqrt(X):
    """A factor F with F F' = X for a symmetric PSD X.  Cholesky when X is
    positive definite, an eigendecomposition otherwise (e.g. X = 0)."""
    try:
        return scipy.linalg.cholesky(X, lower=True)
    except np.linalg.LinAlgError:
        w, V = scipy.linalg.eigh(symmetrize(X))
        return V * np.sqrt(np.clip(w, 0, None))

# ______________________________________________________________________________
# Parallel work


def thread_count():
    "Number of workers allowed by PARETO_FILTER_THREADS (default 1)."
    value = os.environ.get('PARETO_FILTER_THREADS', '1')
    try:
        n = int(value)
    except ValueError:
        raise ValidationError('PARETO_FILTER_THREADS must be an integer, got {!r}'.format(value),
                              'PARETO_FILTER_THREADS')
    if n < 1:
        raise ValidationError('PARETO_FILTER_THREADS must be at least 1', 'PARETO_FILTER_THREADS')
    return n


def parallel_map(fn, items):
    """Return [fn(item) for item in items], possibly computed by several
    threads.  The result is always in the order of items."""
    items = list(items)
    n_jobs = min(thread_count(), len(items))
    if n_jobs <= 1:
        return [fn(item) for item in items]
    logger.debug('parallel_map: %d items on %d threads', len(items), n_jobs)
    return Parallel(n_jobs=n_jobs, prefer='threads')(delayed(fn)(item) for item in items)

# ______________________________________________________________________________
# Display


def isnumber(x):
    "Is x a number?"
    return hasattr(x, '__int__')


def print_table(table, header=None, sep='   ', numfmt='{:.6g}'):
    """Print a list of lists as a table, so that columns line up nicely.
    header, if specified, will be printed as the first row.
    numfmt is the format for all numbers; you might want e.g. '{:6.2f}'."""
    justs = ['rjust' if isnumber(x) else 'ljust' for x in table[0]]

    table = [[numfmt.format(x) if isnumber(x) else str(x) for x in row]
             for row in table]
    if header:
        table.insert(0, [str(h) for h in header])

    sizes = [max(map(len, column)) for column in zip(*table)]

    for row in table:
        print(sep.join(getattr(x, j)(size) for (j, size, x) in zip(justs, sizes, row)))
