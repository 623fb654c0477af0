import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dualgrad import penalties as pen
from dualgrad.operators import trapezoid_weights, weighted_norm

GRID = np.linspace(-30.0, 30.0, 600_001)  # spacing 1e-4
finite = st.floats(-20, 20, allow_nan=False)
vectors = arrays(np.float64, st.integers(1, 30), elements=finite)


def argmin_on_grid(r, xi, grid=GRID):
    """Brute-force minimizer of r(x) - xi * x over a fine 1-D grid."""
    return grid[np.argmin(r(grid) - xi * grid)]


# --- quadratic and nonnegative ----------------------------------------------

def test_quadratic_identity():
    np.testing.assert_array_equal(pen.quadratic_map(np.zeros(3)), np.zeros(3))
    np.testing.assert_array_equal(pen.quadratic_map(np.array([1.0, -2.0])), [1.0, -2.0])
    p = pen.quadratic()
    assert p.c0 == 0.5 and p.lipschitz == 1.0


def test_quadratic_returns_copy():
    xi = np.array([1.0, 2.0])
    out = pen.quadratic_map(xi)
    out[0] = 5.0
    assert xi[0] == 1.0


def test_nonneg_projection():
    np.testing.assert_array_equal(pen.nonneg_quadratic_map(np.array([-1.0, 2.0])), [0.0, 2.0])


@given(arrays(np.float64, 10, elements=st.floats(0, 50)))
def test_nonneg_fixed_points(xi):
    np.testing.assert_array_equal(pen.nonneg_quadratic_map(xi), xi)


@pytest.mark.parametrize("xi", [-3.2, -0.1, 0.0, 0.7, 4.25])
def test_nonneg_grid_search(xi):
    r = lambda x: np.where(x >= 0, 0.5 * x * x, np.inf)
    assert pen.nonneg_quadratic_map(np.array([xi]))[0] == pytest.approx(argmin_on_grid(r, xi), abs=2e-4)


# --- entropy -------------------------------------------------------------------

def test_entropy_uniform_density():
    w = trapezoid_weights(400)
    np.testing.assert_allclose(pen.entropy_simplex_map(np.zeros(401), w), np.ones(401), rtol=1e-14)
    np.testing.assert_allclose(pen.entropy_simplex_map(np.full(401, 7.3), w), np.ones(401), rtol=1e-14)


def test_entropy_concentrates_mass():
    w = np.array([0.5, 0.5])
    x = pen.entropy_simplex_map(np.array([800.0, -800.0]), w)
    assert x[0] == pytest.approx(2.0, rel=1e-12)
    assert 0.0 <= x[1] < 1e-300
    assert np.dot(w, x) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200)
@given(vectors)
def test_entropy_is_a_density(xi):
    w = trapezoid_weights(max(xi.size - 1, 1))[: xi.size]
    w = w / w.sum()
    x = pen.entropy_simplex_map(xi, w)
    assert np.all(x > 0)
    assert abs(np.dot(w, x) - 1.0) <= 1e-12


def test_entropy_no_overflow():
    w = trapezoid_weights(3)
    x = pen.entropy_simplex_map(np.array([1e4, 1e4 - 1, 0.0, -1e4]), w)
    assert np.all(np.isfinite(x))


def test_entropy_two_point_grid_search():
    # minimize sum w x log x - sum w xi x over densities x on two points
    w = np.array([0.3, 0.7])
    xi = np.array([1.2, -0.4])
    x1 = np.linspace(1e-6, 1 / w[0] - 1e-6, 400_001)
    x2 = (1.0 - w[0] * x1) / w[1]
    obj = w[0] * (x1 * np.log(x1) - xi[0] * x1) + w[1] * (x2 * np.log(x2) - xi[1] * x2)
    k = np.argmin(obj)
    np.testing.assert_allclose(pen.entropy_simplex_map(xi, w), [x1[k], x2[k]], atol=1e-4)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_entropy_lipschitz_l1_against_sup(seed):
    # strong convexity of the entropy holds in L1, so the dual bound uses the sup norm
    rng = np.random.default_rng(seed)
    w = trapezoid_weights(20)
    xi, eta = rng.normal(0, rng.uniform(0.1, 5), (2, 21))
    p = pen.entropy(w)
    lhs = np.dot(w, np.abs(p(xi) - p(eta)))
    assert lhs <= p.lipschitz * np.max(np.abs(xi - eta)) * (1 + 1e-12)


# --- elastic net ------------------------------------------------------------

def test_elastic_net_values():
    assert not pen.elastic_net_map(np.array([0.3, -1.0, 1.0, 0.0]), 5.0).any()
    assert pen.elastic_net_map(np.array([-3.0]), 2.0)[0] == -4.0


@pytest.mark.parametrize("xi,beta", [(-3.0, 2.0), (0.5, 2.0), (1.7, 10.0), (-1.2, 0.5), (2.5, 3.0)])
def test_elastic_net_grid_search(xi, beta):
    r = lambda x: np.abs(x) + x * x / (2 * beta)
    assert pen.elastic_net_map(np.array([xi]), beta)[0] == pytest.approx(argmin_on_grid(r, xi), abs=2e-4)


@given(vectors, st.floats(0.01, 500))
def test_elastic_net_odd(xi, beta):
    np.testing.assert_array_equal(pen.elastic_net_map(-xi, beta), -pen.elastic_net_map(xi, beta))


@pytest.mark.parametrize("beta", [0.0, -1.0])
def test_elastic_net_rejects_beta(beta):
    with pytest.raises(ValueError):
        pen.elastic_net_map(np.ones(2), beta)
    with pytest.raises(ValueError):
        pen.elastic_net(beta)


# --- split total variation ---------------------------------------------------

def test_tv_zero():
    x, z = pen.tv_product_map(np.zeros(3), np.zeros(2), 4.0)
    assert not x.any() and not z.any()


def test_tv_matches_sign_formula():
    # xi_z = -mu; the closed form in terms of mu is -beta sign(mu) max(|mu| - 1, 0)
    mu = np.array([2.0, -3.5, 0.4, 1.0])
    for beta in (1.0, 7.0):
        _, z = pen.tv_product_map(np.zeros(1), -mu, beta)
        np.testing.assert_array_equal(z, -beta * np.sign(mu) * np.maximum(np.abs(mu) - 1, 0))
    _, z = pen.tv_product_map(np.zeros(1), np.array([-2.0]), 1.0)
    assert z[0] == -1.0


def test_tv_scaling():
    x, _ = pen.tv_product_map(np.array([1.0, -1.0]), np.zeros(1), 100.0)
    np.testing.assert_array_equal(x, [100.0, -100.0])


def test_tv_penalty_splits_vector():
    p = pen.tv(2.0, 3)
    out = p(np.array([1.0, 2.0, 3.0, 0.5, -4.0]))
    np.testing.assert_array_equal(out, [2.0, 4.0, 6.0, 0.0, -6.0])
    assert p.c0 == 0.25


def test_tv_grid_search():
    beta = 3.0
    rx = lambda x: x * x / (2 * beta)
    rz = lambda z: np.abs(z) + z * z / (2 * beta)
    xi_x, xi_z = np.array([0.4, -1.3]), np.array([2.2, -0.6])
    x, z = pen.tv_product_map(xi_x, xi_z, beta)
    np.testing.assert_allclose(x, [argmin_on_grid(rx, v) for v in xi_x], atol=2e-4)
    np.testing.assert_allclose(z, [argmin_on_grid(rz, v) for v in xi_z], atol=2e-4)


# --- shared properties ---------------------------------------------------------

SEPARABLE = [pen.quadratic(), pen.nonneg(), pen.elastic_net(0.7), pen.elastic_net(300.0), pen.tv(5.0, 4)]


@pytest.mark.parametrize("p", SEPARABLE, ids=lambda p: p.name)
def test_lipschitz_bound(p):
    rng = np.random.default_rng(11)
    w = rng.uniform(0.1, 1.0, 9)
    for _ in range(100):
        xi, eta = rng.normal(0, 3, (2, 9))
        assert weighted_norm(p(xi) - p(eta), w) <= p.lipschitz * weighted_norm(xi - eta, w) * (1 + 1e-12)


def test_penalty_requires_positive_c0():
    with pytest.raises(ValueError):
        pen.DualPenalty("bad", 0.0, pen.quadratic_map)


@pytest.mark.parametrize("text,expect", [
    ("quadratic", ("quadratic", None)),
    ("nonneg", ("nonneg", None)),
    (" entropy ", ("entropy", None)),
    ("elastic_net(300)", ("elastic_net", 300.0)),
    ("tv( 100 )", ("tv", 100.0)),
])
def test_parse_penalty(text, expect):
    assert pen.parse_penalty(text) == expect


@pytest.mark.parametrize("text", ["tv", "nonneg(2)", "lasso(1)", "elastic_net(-1)", "tv(abc)", ""])
def test_parse_penalty_rejects(text):
    with pytest.raises(ValueError):
        pen.parse_penalty(text)
