import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualgrad import operators as ops
from dualgrad import penalties as pen
from dualgrad.sampling import MeasurementEnsemble, NoiseModel, ensemble_from_samples, generate_ensemble
from dualgrad.solver import (
    APriori,
    Discrepancy,
    IterationError,
    SolverConfig,
    StepSizeWarning,
    apriori_index,
    check_step,
    default_step,
    dual_step,
    first_crossing,
    iterate,
    landweber,
    run,
    tau_n,
)


def single(y, w):
    return MeasurementEnsemble(np.asarray(y, float), np.zeros(len(y)), 1, np.asarray(w, float))


@pytest.fixture(scope="module")
def toy():
    """Random 20-dim system with unit weights."""
    rng = np.random.default_rng(20)
    M = rng.standard_normal((20, 20)) / math.sqrt(20)
    w = np.ones(20)
    return M, ops.LinearMap.from_matrix(M, w, w), rng.standard_normal(20)


# --- single step ---------------------------------------------------------------

def test_first_step_from_zero(toy):
    M, A, y = toy
    x, lam, r = dual_step(np.zeros(20), A, pen.quadratic(), y, 0.3)
    assert not x.any()
    np.testing.assert_allclose(lam, 0.3 * y)
    assert r == pytest.approx(np.linalg.norm(y))


def test_nonfinite_step_raises(toy):
    _, A, y = toy
    with pytest.raises(IterationError):
        dual_step(np.full(20, np.inf), A, pen.quadratic(), y, 0.3)


def test_iterate_indexing(toy):
    _, A, y = toy
    states = iterate(A, pen.nonneg(), y, 0.5)
    s0, s1 = next(states), next(states)
    assert (s0.t, s1.t) == (0, 1)
    assert not s0.lam.any()
    x, lam1, r0 = dual_step(np.zeros(20), A, pen.nonneg(), y, 0.5)
    np.testing.assert_array_equal(s1.lam, lam1)
    assert s0.residual == r0


# --- Landweber equivalence ----------------------------------------------------

def test_quadratic_penalty_is_landweber(toy):
    M, A, y = toy
    step = 1.0 / np.linalg.norm(M, 2) ** 2
    res = run(A, pen.quadratic(), single(y, np.ones(20)), APriori(100), SolverConfig(step))
    x = np.zeros(20)
    for _ in range(100):
        x = x - step * M.T @ (M @ x - y)
    assert np.max(np.abs(res.x - x)) <= 1e-12
    lw = landweber(A, single(y, np.ones(20)), APriori(100), SolverConfig(step))
    assert np.max(np.abs(lw.x - x)) <= 1e-12


def test_landweber_equivalence_weighted():
    g = ops.Grid1D(60)
    A = ops.build_integral_operator(ops.kernel_ex1, g)
    y = A.apply(np.sin(3 * g.nodes)) + 0.01 * np.cos(40 * g.nodes)
    step = 1.5 / ops.estimate_norm(A) ** 2
    ens = single(y, g.weights)
    dual = run(A, pen.quadratic(), ens, APriori(100), SolverConfig(step))
    lw = landweber(A, ens, APriori(100), SolverConfig(step))
    np.testing.assert_allclose(dual.x, lw.x, rtol=0, atol=1e-12 * np.max(np.abs(lw.x)))


def test_exact_data_residual_decreases():
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    M = Q @ np.diag(np.linspace(1, 2, 8)) @ Q.T
    A = ops.LinearMap.from_matrix(M, np.ones(8), np.ones(8))
    y = M @ rng.standard_normal(8)
    cfg = SolverConfig(0.2, record_residuals=True)
    res = run(A, pen.quadratic(), single(y, np.ones(8)), APriori(200), cfg)
    assert res.residuals[-1] < 1e-10 * res.residuals[0]
    # monotone until rounding takes over
    r = [v for v in res.residuals if v > 1e-13]
    assert all(b <= a for a, b in zip(r, r[1:]))


# --- a priori rule -----------------------------------------------------------

@pytest.mark.parametrize("t", [0, 1, 7])
def test_apriori_exact_count(toy, t):
    _, A, y = toy
    res = run(A, pen.nonneg(), single(y, np.ones(20)), APriori(t), SolverConfig(0.5))
    assert res.iterations == t and res.stop_cause == "a_priori"


def test_apriori_state_sufficiency(toy):
    # t steps then one more from the returned multiplier equals t + 1 steps
    _, A, y = toy
    p, step = pen.nonneg(), 0.5
    a = run(A, p, single(y, np.ones(20)), APriori(30), SolverConfig(step))
    b = run(A, p, single(y, np.ones(20)), APriori(31), SolverConfig(step))
    _, lam_next, _ = dual_step(a.lam, A, p, y, step)
    np.testing.assert_array_equal(lam_next, b.lam)
    state = next(iterate(A, p, y, step, lam0=lam_next))
    np.testing.assert_array_equal(state.x, b.x)


def test_apriori_max_iters(toy):
    _, A, y = toy
    res = run(A, pen.nonneg(), single(y, np.ones(20)), APriori(50), SolverConfig(0.5, max_iters=10))
    assert res.iterations == 10 and res.stop_cause == "max_iters"


@pytest.mark.parametrize("n,sigma,q,c,expect", [
    (100, 1.0, 1.0, 1.0, 10),
    (100, 1.0, 1.0, 2.0, 20),
    (1000, 0.2, 1.0, 1.0, round(math.sqrt(1000 / 0.04))),
    (1, 100.0, 1.0, 1.0, 1),
])
def test_apriori_index(n, sigma, q, c, expect):
    assert apriori_index(n, sigma, q, c) == expect


def test_apriori_index_small_q_limit():
    # (2 - q)/2 -> 1 as q -> 0
    a = apriori_index(100, 1.0, 1e-9)
    b = apriori_index(200, 1.0, 1e-9)
    assert (a, b) == (100, 200)


@pytest.mark.parametrize("kw", [dict(n=0), dict(sigma=0.0), dict(q=0.0), dict(q=1.5), dict(c_scale=0.0)])
def test_apriori_index_domain(kw):
    args = dict(n=10, sigma=1.0, q=1.0, c_scale=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        apriori_index(**args)


def test_apriori_rejects_negative():
    with pytest.raises(ValueError):
        APriori(-1)


# --- discrepancy rule ----------------------------------------------------------

def test_first_crossing_example():
    assert first_crossing([5, 3, 1, 0.5], 2, 1000) == (2, "discrepancy")


def test_first_crossing_emergency():
    assert first_crossing(iter([1.0] * 50), 0.0, 30) == (30, "emergency")


def test_first_crossing_at_cap_counts():
    assert first_crossing([3, 3, 3, 1], 2, 3) == (3, "discrepancy")


def test_first_crossing_short_sequence():
    with pytest.raises(ValueError):
        first_crossing([3, 3], 1, 10)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=40), st.floats(0, 10), st.integers(0, 60))
def test_first_crossing_property(res, threshold, cap):
    seq = res + [100.0] * (cap + 1)
    t, cause = first_crossing(iter(seq), threshold, cap)
    assert t <= cap
    assert all(r > threshold for r in seq[:t])
    if cause == "discrepancy":
        assert seq[t] <= threshold
    else:
        assert t == cap and all(r > threshold for r in seq[: cap + 1])


def test_first_crossing_is_lazy():
    consumed = []

    def gen():
        for t in range(1000):
            consumed.append(t)
            yield 10.0 - t

    assert first_crossing(gen(), 5.0, 100) == (5, "discrepancy")
    assert consumed[-1] == 5


@pytest.mark.parametrize("beta0,n,cap", [(10, 10, 100), (2.5, 7, 18), (0.1, 30, 3), (200, 10**3, 200_000)])
def test_emergency_cap(beta0, n, cap):
    assert Discrepancy(beta0).cap(n) == cap == math.ceil(beta0 * n - 1e-9)


def test_tau_values():
    assert tau_n(10**5, 1.1) == 1.1
    assert abs(math.log(math.log(math.log(1e5)))) == pytest.approx(0.893, abs=1e-3)
    assert tau_n(10**100, 1.1) == pytest.approx(1.694, abs=1e-3)
    # n = 3: ln 3 > 1, ln ln 3 = 0.094, |ln 0.094| = 2.36
    assert tau_n(3, 1.1) == pytest.approx(abs(math.log(math.log(math.log(3)))))


@given(st.integers(2, 10**12), st.floats(1.0001, 5))
def test_tau_at_least_tau0(n, tau0):
    assert tau_n(n, tau0) >= tau0


def test_tau_other_base():
    assert tau_n(10**100, 1.1, log=math.log10) == 1.1


@pytest.mark.parametrize("n,tau0", [(1, 1.1), (10, 1.0)])
def test_tau_domain(n, tau0):
    with pytest.raises(ValueError):
        tau_n(n, tau0)


@pytest.mark.parametrize("kw", [dict(beta0=0.0), dict(tau0=1.0)])
def test_discrepancy_validation(kw):
    with pytest.raises(ValueError):
        Discrepancy(**kw)


@pytest.fixture(scope="module")
def ex1_small():
    g = ops.Grid1D(100)
    A = ops.build_integral_operator(ops.kernel_ex1, g)
    s = g.nodes
    x = np.where((s >= 0.2) & (s <= 0.7), 20 * s * (s - 0.2) * (0.7 - s), 0.0)
    return g, A, A.apply(x), 0.9 * 2 / ops.estimate_norm(A) ** 2


def test_discrepancy_run_first_crossing(ex1_small):
    g, A, y, step = ex1_small
    ens = generate_ensemble(y, g.weights, NoiseModel(0.2), 100, seed=3)
    rule = Discrepancy(10, 1.1)
    res = run(A, pen.nonneg(), ens, rule, SolverConfig(step, record_residuals=True))
    assert res.stop_cause == "discrepancy"
    assert res.threshold == pytest.approx(1.1 * ens.sample_std / 10)
    assert res.residual <= res.threshold
    assert len(res.residuals) == res.iterations + 1
    assert all(r > res.threshold for r in res.residuals[:-1])


def test_identical_samples_force_emergency(ex1_small):
    g, A, y, step = ex1_small
    ens = ensemble_from_samples([y + 0.05] * 3, g.weights)
    res = run(A, pen.nonneg(), ens, Discrepancy(2.0), SolverConfig(step))
    assert (res.iterations, res.stop_cause) == (6, "emergency")


def test_discrepancy_needs_two_samples(ex1_small):
    g, A, y, step = ex1_small
    with pytest.raises(ValueError):
        run(A, pen.nonneg(), single(y, g.weights), Discrepancy(), SolverConfig(step))


def test_discrepancy_max_iters(ex1_small):
    g, A, y, step = ex1_small
    ens = ensemble_from_samples([y + 0.05] * 3, g.weights)
    res = run(A, pen.nonneg(), ens, Discrepancy(10.0), SolverConfig(step, max_iters=4))
    assert (res.iterations, res.stop_cause) == (4, "max_iters")


def test_sample_order_does_not_matter(ex1_small):
    g, A, y, step = ex1_small
    samples = generate_ensemble(y, g.weights, NoiseModel(0.2), 20, seed=5, keep_samples=True).samples
    cfg = SolverConfig(step)
    a = run(A, pen.nonneg(), ensemble_from_samples(samples, g.weights), Discrepancy(), cfg)
    b = run(A, pen.nonneg(), ensemble_from_samples(samples[::-1], g.weights), Discrepancy(), cfg)
    assert a.iterations == b.iterations
    np.testing.assert_allclose(a.x, b.x, atol=1e-12)


def test_callback_sees_every_state(ex1_small):
    g, A, y, step = ex1_small
    seen = []
    run(A, pen.nonneg(), single(y, g.weights), APriori(12), SolverConfig(step), callback=lambda s: seen.append(s.t))
    assert seen == list(range(13))


def test_divergent_step_reports_failure(ex1_small):
    g, A, y, step = ex1_small
    with pytest.raises(IterationError):
        run(A, pen.quadratic(), single(y, g.weights), APriori(5000), SolverConfig(step * 5))


def test_tv_residual_uses_data_block():
    g = ops.Grid1D(20)
    A = ops.build_integral_operator(ops.kernel_ex1, g)
    B = ops.stack_constraint(A, ops.discrete_gradient(g))
    y = A.apply(np.ones(21))
    x, lam, r = dual_step(np.zeros(B.range_size), B, pen.tv(10.0, 21), B.embed_data(y), 0.01)
    assert r == pytest.approx(ops.weighted_norm(y, g.weights))


# --- step sizes ---------------------------------------------------------------

def test_default_steps():
    assert default_step("nonneg", 2.0) == 0.5
    assert default_step("entropy", 2.0) == 0.5
    assert default_step("elastic_net", 2.0, beta=10) == 0.05
    assert default_step("tv", 2.0, beta=100) == pytest.approx(2 / (100 * 8))
    with pytest.raises(ValueError):
        default_step("nope", 1.0)
    with pytest.raises(ValueError):
        default_step("nonneg", 0.0)


def test_step_warning():
    with pytest.warns(StepSizeWarning):
        assert not check_step(2.0, 0.5, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_step(1.9, 0.5, 1.0)


@pytest.mark.parametrize("step", [0.0, -1.0, np.inf, np.nan])
def test_config_rejects_step(step):
    with pytest.raises(ValueError):
        SolverConfig(step)
