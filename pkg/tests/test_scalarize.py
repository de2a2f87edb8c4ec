import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from svhpsl.scalarize import (
    chebyshev, chebyshev_batch, chebyshev_grad, ideal_point, sample_preferences, simplex_grid,
    update_ideal,
)

vec2 = st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2)
pref2 = st.floats(1e-3, 1 - 1e-3).map(lambda t: [t, 1.0 - t])


@pytest.mark.parametrize("m", [2, 3])
def test_dirichlet_marginals(m):
    R = sample_preferences(100_000, m, np.random.default_rng(0))
    np.testing.assert_allclose(R.mean(axis=0), 1.0 / m, atol=0.01)
    assert np.all(R >= 1e-6 * 0.99)
    np.testing.assert_allclose(R.sum(axis=1), 1.0, atol=1e-12)


def test_preferences_deterministic():
    a = sample_preferences(50, 2, np.random.default_rng(7))
    b = sample_preferences(50, 2, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_simplex_grid():
    R = simplex_grid(100)
    assert R.shape == (100, 2)
    np.testing.assert_allclose(np.diff(R[1:-1, 0]), 1.0 / 99, atol=1e-6)
    np.testing.assert_array_equal(simplex_grid(1), [[0.5, 0.5]])
    assert simplex_grid(4, 3).shape == (10, 3)


def test_chebyshev_examples():
    assert chebyshev([0.2, 0.6], [0.5, 0.5], [0, 0]) == pytest.approx((0.3, 1))
    value, idx = chebyshev([0.4, 0.4], [0.5, 0.5], [0, 0])
    assert value == pytest.approx(0.2) and idx == 0
    value, idx = chebyshev([0.7, 3.0], [1.0, 1e-12], [0.2, 0.0])
    assert idx == 0 and value == pytest.approx(0.5)


def test_ideal_point_examples():
    z = ideal_point([[1, 2], [2, 1]])
    np.testing.assert_allclose(z, [0.9, 0.9])
    z = update_ideal(z, [[0.5, 3]])
    np.testing.assert_allclose(z, [0.4, 0.9])
    np.testing.assert_array_equal(update_ideal(z, [[5, 5]]), z)


@given(vec2, pref2, vec2)
def test_chebyshev_non_negative(f, r, z):
    value, _ = chebyshev(f, r, z)
    assert value >= 0.0
    if np.any(np.subtract(f, z) != 0.0):
        assert value > 0.0


@given(vec2, pref2, vec2, st.floats(0.01, 100))
def test_chebyshev_scales_with_preference(f, r, z, c):
    v, i = chebyshev(f, r, z)
    vc, ic = chebyshev(f, np.multiply(r, c), z)
    assert vc == pytest.approx(c * v, rel=1e-12, abs=1e-300)
    terms = np.multiply(r, np.abs(np.subtract(f, z)))
    assume(abs(terms[0] - terms[1]) > 1e-9 * max(1.0, terms.max()))
    assert ic == i


@given(vec2, pref2, st.integers(0, 1), st.floats(0, 3))
def test_chebyshev_monotone_above_ideal(f, r, k, bump):
    z = np.minimum(f, 0.0) - 0.1
    g = np.array(f, float)
    g[k] += bump
    assert chebyshev(g, r, z)[0] >= chebyshev(f, r, z)[0]


def test_batch_matches_scalar_and_grad_is_branch_only():
    rng = np.random.default_rng(3)
    F = rng.normal(size=(20, 3))
    R = sample_preferences(20, 3, rng)
    z = F.min(axis=0) - 0.1
    g, idx = chebyshev_batch(F, R, z)
    G = chebyshev_grad(F, R, z)
    for k in range(20):
        assert (g[k], idx[k]) == chebyshev(F[k], R[k], z)
        expected = np.zeros(3)
        expected[idx[k]] = R[k, idx[k]]
        np.testing.assert_array_equal(G[k], expected)


def test_grad_sign_below_ideal():
    G = chebyshev_grad([[-1.0, 0.0]], [[0.9, 0.1]], [0.0, 0.0])
    np.testing.assert_array_equal(G, [[-0.9, 0.0]])
