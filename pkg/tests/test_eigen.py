import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from eqselect import eigen
from eqselect.dynamics import jacobian_replicator
from eqselect.eigen import EigenSystem, eig, eigencycles, max_pairing_error, rotation_eigenvector
from eqselect.game import NASH_1, NASH_2, paper_game

S3 = np.sqrt(3) / 3


def test_spectrum_nash_1():
    es = eig(jacobian_replicator(paper_game, NASH_1))
    expected = [-1 / 3 + S3 * 1j, -1 / 3 - S3 * 1j, -2 / 3, -1, -2]
    np.testing.assert_allclose(es.eigenvalues, expected, atol=1e-9)


def test_spectrum_nash_2():
    es = eig(jacobian_replicator(paper_game, NASH_2))
    np.testing.assert_allclose(es.eigenvalues, [0, -0.5, -0.5, -1.5, -1.5], atol=1e-9)
    assert np.abs(es.eigenvalues.imag).max() < 1e-12


def test_ordering_and_normalization():
    es = eig(jacobian_replicator(paper_game, NASH_1))
    np.testing.assert_allclose(np.linalg.norm(es.right_vectors, axis=0), 1.0)
    for v in es.right_vectors.T:
        k = np.argmax(np.abs(v))
        assert abs(v[k].imag) < 1e-12 and v[k].real > 0


@pytest.mark.parametrize("x, payoff", [(NASH_1, 2 / 3), (NASH_2, 1 / 2)])
def test_payoff_eigenvalue(x, payoff):
    assert eigen.payoff_eigen_check(jacobian_replicator(paper_game, x), x, payoff)


def test_rotation_matrix():
    es = eig([[0, -1], [1, 0]])
    np.testing.assert_allclose(sorted(es.eigenvalues.imag), [-1, 1], atol=1e-12)


def test_jordan_block_and_zero():
    np.testing.assert_allclose(eig([[2, 1], [0, 2]]).eigenvalues, [2, 2], atol=1e-7)
    np.testing.assert_array_equal(eig(np.zeros((3, 3))).eigenvalues, 0)


def test_size_limit():
    with pytest.raises(ValueError):
        eig(np.eye(21))
    with pytest.raises(ValueError):
        eig(np.ones((2, 3)))


def test_json_roundtrip():
    es = eig(jacobian_replicator(paper_game, NASH_1))
    data = json.loads(es.dumps())
    assert set(data) == {"eigenvalues", "vectors"}
    back = EigenSystem.from_json(data)
    np.testing.assert_allclose(back.eigenvalues, es.eigenvalues)
    np.testing.assert_allclose(back.right_vectors, es.right_vectors)


def test_eigencycles_at_nash_1():
    es = eig(jacobian_replicator(paper_game, NASH_1))
    cyc = eigencycles(rotation_eigenvector(es))
    assert len(cyc) == 10
    # rotation lives in strategies 1-3 only
    assert cyc[(0, 1)] == pytest.approx(1 / (2 * np.sqrt(3)), abs=1e-9)
    assert cyc[(0, 2)] == pytest.approx(-1 / (2 * np.sqrt(3)), abs=1e-9)
    assert cyc[(1, 2)] == pytest.approx(1 / (2 * np.sqrt(3)), abs=1e-9)
    for (m, n), v in cyc.items():
        if n >= 3:
            assert abs(v) < 1e-12


def test_eigencycles_sign_follows_rotation():
    # x' = J x with J the counter-clockwise rotation; the Im<0 eigenvector
    # must report a positive cycle in the (1,2) plane
    es = eig([[0, -1], [1, 0]])
    assert eigencycles(rotation_eigenvector(es))[(0, 1)] > 0


def test_real_vector_has_no_cycles():
    assert all(v == 0 for v in eigencycles(np.array([1.0, 2.0, 3.0])).values())


def test_no_complex_eigenvalue():
    with pytest.raises(ValueError):
        rotation_eigenvector(eig(np.diag([1.0, 2.0])))


def test_pairing_error():
    assert max_pairing_error([1j, -1j, 2], [2, -1j, 1j]) == 0
    assert max_pairing_error([1, 2], [1]) == np.inf


@given(arrays(float, st.tuples(st.integers(2, 6)).map(lambda t: (t[0], t[0])),
              elements=st.floats(-5, 5)))
def test_residuals_small(J):
    es = eig(J)
    assert es.residuals(J).max() <= 1e-8 * max(1.0, np.abs(J).max())
    assert np.abs(np.sum(es.eigenvalues) - np.trace(J)) < 1e-8 * max(1.0, np.abs(J).max()) * len(J)
