import numpy as np
import pytest

from gemselect.errors import DegenerateGeometryError, NumericError
from gemselect.geometry import AffinityMatrix, AffinitySpec, pairwise_affinity


def test_linear_kernel_basics():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    aff = pairwise_affinity(X, AffinitySpec("kernel", "linear"))
    assert aff.tag == "gram"
    assert aff.matrix[0, 1] == 0.0
    assert aff.matrix[0, 0] == 1.0


def test_euclidean_3_4_5():
    X = np.array([[0.0, 0.0], [3.0, 4.0]])
    aff = pairwise_affinity(X, AffinitySpec("metric", "euclidean"))
    assert aff.tag == "distance"
    assert aff.matrix[0, 1] == pytest.approx(5.0)
    assert aff.matrix[0, 0] == 0.0


def test_active_subset_equals_column_slice():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 5))
    spec = AffinitySpec("metric", "euclidean", active=(0, 2))
    full = pairwise_affinity(X, spec).matrix
    sliced = pairwise_affinity(X[:, [0, 2]], AffinitySpec("metric", "euclidean")).matrix
    np.testing.assert_array_equal(full, sliced)


def test_symmetry_and_diagonal_properties():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(2, 64))
        d = int(rng.integers(1, 32))
        X = rng.standard_normal((n, d)) * rng.uniform(0.1, 10)
        gram = pairwise_affinity(X, AffinitySpec("kernel", "linear")).matrix
        dist = pairwise_affinity(X, AffinitySpec("metric", "euclidean")).matrix
        np.testing.assert_allclose(gram, gram.T, atol=1e-10)
        np.testing.assert_allclose(dist, dist.T, atol=1e-10)
        assert np.all(np.diag(dist) == 0.0)
        assert np.all(dist >= 0.0)


def test_gram_psd_small_instances():
    rng = np.random.default_rng(2)
    for _ in range(20):
        X = rng.standard_normal((int(rng.integers(2, 32)), int(rng.integers(1, 8))))
        G = pairwise_affinity(X, AffinitySpec("kernel", "linear")).matrix
        eigs = np.linalg.eigvalsh(G)
        assert eigs.min() >= -1e-8 * np.trace(G)


def test_monotone_restriction_never_increases_distance():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 6))
    full = pairwise_affinity(X, AffinitySpec("metric", "euclidean")).matrix
    sub = pairwise_affinity(X, AffinitySpec("metric", "euclidean", active=(0, 1, 3, 4))).matrix
    assert np.all(sub <= full + 1e-12)


def test_empty_active_set_rejected():
    X = np.zeros((3, 2))
    with pytest.raises(DegenerateGeometryError):
        pairwise_affinity(X, AffinitySpec("kernel", "linear", active=()))


def test_nonfinite_input_rejected():
    X = np.array([[1.0, np.nan]])
    with pytest.raises(NumericError):
        pairwise_affinity(X, AffinitySpec("kernel", "linear"))


def test_duplicate_active_indices_rejected():
    with pytest.raises(ValueError):
        AffinitySpec("kernel", "linear", active=(1, 1))


def test_submatrix_subsets_samples():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((10, 3))
    aff = pairwise_affinity(X, AffinitySpec("kernel", "linear"))
    sub = aff.submatrix([1, 4, 7])
    np.testing.assert_array_equal(sub.matrix, aff.matrix[np.ix_([1, 4, 7], [1, 4, 7])])
    assert isinstance(sub, AffinityMatrix)
