import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sidal import kernels
from sidal.kernels import KernelError, KernelSpec

STATIONARY = ["se", "matern52", "matern32"]


def test_se_identity_and_unit_distance():
    k = KernelSpec("se", (1.0,))
    assert kernels.evaluate(k, [0.3], [0.3]) == 1.0
    assert kernels.evaluate(k, [0.0], [1.0]) == pytest.approx(0.6065306597126334, abs=1e-14)


def test_matern52_closed_form():
    k = KernelSpec("matern52", (0.5,))
    r = 0.3 / 0.5
    s = np.sqrt(5) * r
    expected = (1 + s + s**2 / 3) * np.exp(-s)
    assert kernels.evaluate(k, [0.1], [0.4]) == pytest.approx(expected, rel=1e-13)


def test_tanimoto_hand_count():
    k = KernelSpec("tanimoto")
    a = np.array([1, 1, 0, 0], dtype=bool)
    b = np.array([1, 0, 1, 0], dtype=bool)
    assert kernels.evaluate(k, a, b) == pytest.approx(1 / 3)


def test_tanimoto_zero_vectors_are_identical():
    k = KernelSpec("tanimoto", output_scale=0.5)
    z = np.zeros(8, dtype=bool)
    assert kernels.evaluate(k, z, z) == 0.5


def test_tanimoto_rejects_real_inputs():
    with pytest.raises(KernelError):
        kernels.cross(KernelSpec("tanimoto"), np.array([[0.3, 0.7]]), np.array([[1.0, 0.0]]))


@pytest.mark.parametrize("bad", [(0.0,), (-1.0,), (1.0, -2.0)])
def test_nonpositive_lengthscale(bad):
    with pytest.raises(KernelError):
        KernelSpec("se", bad)


@pytest.mark.parametrize("scale", [0.0, 1.5])
def test_output_scale_range(scale):
    with pytest.raises(KernelError):
        KernelSpec("se", (1.0,), scale)


def test_dimension_mismatch():
    k = KernelSpec("se", (1.0, 2.0))
    with pytest.raises(KernelError):
        kernels.cross(k, np.zeros((2, 3)), np.zeros((2, 3)))


def test_gram_single_and_duplicate_points():
    k = KernelSpec("matern52", (0.2,), 0.7)
    assert kernels.gram(k, [[0.4]]).tolist() == [[0.7]]
    G = kernels.gram(k, [[0.4], [0.4]])
    np.testing.assert_array_equal(G, np.full((2, 2), 0.7))
    assert np.linalg.matrix_rank(G) == 1


@pytest.mark.parametrize("family", STATIONARY)
def test_symmetry_and_cauchy_schwarz_random_pairs(family, rng):
    k = KernelSpec(family, (0.3, 0.8), 0.9)
    X1 = rng.uniform(size=(1000, 2))
    X2 = rng.uniform(size=(1000, 2))
    k12 = np.array([kernels.evaluate(k, a, b) for a, b in zip(X1[:50], X2[:50])])
    k21 = np.array([kernels.evaluate(k, b, a) for a, b in zip(X1[:50], X2[:50])])
    np.testing.assert_array_equal(k12, k21)
    full = np.diag(kernels.cross(k, X1, X2))
    full_t = np.diag(kernels.cross(k, X2, X1))
    np.testing.assert_allclose(full, full_t, atol=1e-15)
    assert np.all(full**2 <= 0.9 * 0.9 + 1e-15)


def test_tanimoto_symmetry_random_pairs(rng):
    k = KernelSpec("tanimoto")
    A = rng.uniform(size=(1000, 64)) < 0.1
    B = rng.uniform(size=(1000, 64)) < 0.1
    np.testing.assert_array_equal(
        np.diag(kernels.cross(k, A, B)), np.diag(kernels.cross(k, B, A))
    )
    assert np.all(np.diag(kernels.cross(k, A, B)) <= 1.0)


@pytest.mark.parametrize("family", STATIONARY + ["tanimoto"])
def test_gram_psd_random_sets(family, rng):
    k = KernelSpec(family, (0.25, 0.25))
    for n in (5, 20):
        X = rng.uniform(size=(n, 2)) if family != "tanimoto" else rng.uniform(size=(n, 32)) < 0.3
        G = kernels.gram(k, X)
        assert np.linalg.eigvalsh(G).min() >= -1e-10
        np.testing.assert_array_equal(np.diag(G), np.full(n, k.output_scale))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.sampled_from(STATIONARY),
)
def test_bounded_by_output_scale(x, x2, family):
    k = KernelSpec(family, (0.7, 1.3), 0.8)
    v = kernels.evaluate(k, np.array(x), np.array(x2))
    assert abs(v) <= 0.8 + 1e-15
    assert v == pytest.approx(kernels.evaluate(k, np.array(x2), np.array(x)), abs=1e-15)
