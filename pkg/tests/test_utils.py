import pytest
from utils import *  # noqa


def test_error_hierarchy():
    assert issubclass(DimensionError, ValidationError)
    assert issubclass(ValidationError, ValueError)
    assert issubclass(InfeasibleTargetError, ValueError)
    assert issubclass(InstabilityError, ArithmeticError)
    assert issubclass(ConvergenceError, ArithmeticError)
    assert ValidationError('bad', 'system.A[1]').field == 'system.A[1]'


def test_as_matrix():
    assert as_matrix(2).shape == (1, 1)
    assert as_matrix([[1, 2], [3, 4]]).dtype == np.float64
    with pytest.raises(ValidationError):
        as_matrix([[1, 2], [3]])
    with pytest.raises(ValidationError):
        as_matrix([[1, float('nan')]])
    with pytest.raises(DimensionError):
        as_matrix(np.zeros((2, 2, 2)))


def test_require_shape():
    X = np.eye(2)
    assert require_square(X) is X
    with pytest.raises(DimensionError):
        require_square(np.zeros((2, 3)))
    with pytest.raises(DimensionError) as e:
        require_shape(X, (3, 3), 'Q')
    assert e.value.field == 'Q'


def test_symmetric_and_definite():
    assert is_symmetric([[1, 2], [2, 1]])
    assert not is_symmetric([[1, 2], [0, 1]])
    assert is_positive_definite(np.eye(3))
    assert is_positive_definite(1e-12 * np.eye(2))
    assert not is_positive_definite([[1, 0], [0, 0]])
    assert not is_positive_definite([[1, 2], [2, 1]])
    assert is_positive_semidefinite([[1, 0], [0, 0]])
    assert is_positive_semidefinite(np.zeros((2, 2)))
    assert not is_positive_semidefinite([[1, 0], [0, -1]])


def test_matrix_sqrt():
    X = np.array([[2.0, 0.5], [0.5, 1.0]])
    F = matrix_sqrt(X)
    assert np.allclose(F @ F.T, X)
    S = np.diag([1.0, 0.0])
    F = matrix_sqrt(S)
    assert np.allclose(F @ F.T, S)


def test_thread_count(monkeypatch):
    monkeypatch.delenv('PARETO_FILTER_THREADS', raising=False)
    assert thread_count() == 1
    monkeypatch.setenv('PARETO_FILTER_THREADS', '3')
    assert thread_count() == 3
    monkeypatch.setenv('PARETO_FILTER_THREADS', 'many')
    with pytest.raises(ValidationError):
        thread_count()


def test_parallel_map_keeps_order(monkeypatch):
    monkeypatch.setenv('PARETO_FILTER_THREADS', '4')
    assert parallel_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    monkeypatch.setenv('PARETO_FILTER_THREADS', '1')
    assert parallel_map(lambda x: -x, [3, 1, 2]) == [-3, -1, -2]


def test_print_table(capsys):
    print_table([['a', 1.5], ['bb', 20]], header=['name', 'value'])
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ['name', 'value']
    assert out[1].split() == ['a', '1.5']
    assert out[2].split() == ['bb', '20']
