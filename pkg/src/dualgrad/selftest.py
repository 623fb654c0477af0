"""Oracle checks that exercise every building block against an independent reference.

Each check returns ``(error, tolerance, detail)`` and passes when
``error <= tolerance``.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import fracdiff
from . import operators as ops
from . import penalties as pen
from .sampling import MeasurementEnsemble, NoiseModel, generate_ensemble
from .solver import APriori, Discrepancy, SolverConfig, first_crossing, landweber, run, tau_n

__all__ = ["CHECKS", "CheckResult", "run_checks"]


def _adjoint_gap(op, seed):
    """Relative gap ``|<Ax, y> - <x, A*y>| / (|Ax| |y| + |x| |A*y|)`` for random x, y."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.domain_size)
    y = rng.standard_normal(op.range_size)
    Ax, Aty = op.apply(x), op.adjoint(y)
    lhs = ops.weighted_inner(Ax, y, op.range_weights)
    rhs = ops.weighted_inner(x, Aty, op.domain_weights)
    scale = op.range_norm(Ax) * op.range_norm(y) + op.domain_norm(x) * op.domain_norm(Aty)
    return abs(lhs - rhs) / scale


def _adjoint_check(build):
    def check():
        op = build()
        gap = max(_adjoint_gap(op, seed) for seed in range(3))
        return gap, 1e-10, f"{op.name}: relative gap {gap:.2e}"
    return check


def _tv_stack():
    grid = ops.Grid1D(400)
    A = ops.build_integral_operator(ops.kernel_ex1, grid, name="green")
    return ops.stack_constraint(A, ops.discrete_gradient(grid))


def dst_roundtrip():
    err = 0.0
    rng = np.random.default_rng(0)
    for N in (4, 16, 64):
        v = rng.standard_normal((N - 1, N - 1))
        err = max(err, float(np.max(np.abs(fracdiff.idst2(fracdiff.dst2(v)) - v))))
    return err, 1e-10, f"max |idst2(dst2(v)) - v| = {err:.2e} for N in 4, 16, 64"


def mittag_exp():
    z = np.linspace(-10.0, 1.0, 50)
    err = float(np.max(np.abs(fracdiff.mittag_leffler(1.0, z) - np.exp(z))))
    return err, 1e-8, f"max |E_1(z) - exp(z)| = {err:.2e}"


def mittag_erfc():
    x = np.concatenate(([1.0], np.linspace(0.1, 30.0, 40)))
    # E_{1/2}(-x) = exp(x^2) erfc(x)
    err = float(np.max(np.abs(fracdiff.mittag_leffler(0.5, -x) - special.erfcx(x))))
    return err, 1e-8, f"max |E_1/2(-x) - erfcx(x)| = {err:.2e}"


def mittag_zero():
    vals = [fracdiff.mittag_leffler(a, 0.0) for a in (0.1, 0.3, 0.5, 0.8, 1.0)]
    err = max(abs(v - 1.0) for v in vals)
    return err, 0.0, "E_alpha(0) = 1 exactly" if err == 0 else f"E_alpha(0) off by {err:.2e}"


def mittag_series():
    # power series against the integral representation, two unrelated algorithms
    err = 0.0
    for a in (0.3, 0.5, 0.8):
        for x in np.linspace(0.25, 2.0, 8):
            err = max(err, abs(fracdiff._series(a, -x) - fracdiff._integral(a, x)))
    return err, 1e-10, f"series vs integral on [-2, -0.25]: {err:.2e}"


def landweber_equivalence():
    rng = np.random.default_rng(20)
    M = rng.standard_normal((20, 20)) / math.sqrt(20)
    w = np.ones(20)
    A = ops.LinearMap.from_matrix(M, w, w, name="random20")
    y = rng.standard_normal(20)
    step = 1.0 / np.linalg.norm(M, 2) ** 2
    ens = _single(y, w)
    cfg = SolverConfig(step)
    dual = run(A, pen.quadratic(), ens, APriori(100), cfg)
    direct = np.zeros(20)
    for _ in range(100):
        direct = direct - step * M.T @ (M @ direct - y)
    err = float(np.max(np.abs(dual.x - direct)))
    lw = landweber(A, ens, APriori(100), cfg)
    err = max(err, float(np.max(np.abs(lw.x - direct))))
    return err, 1e-12, f"max |x_dual - x_landweber| after 100 steps = {err:.2e}"


def _single(y, w):
    return MeasurementEnsemble(np.asarray(y, dtype=float), np.zeros(len(y)), 1, w)


def variance_identity():
    sigma, n, trials = 0.2, 100, 1000
    grid = ops.Grid1D(50)
    y = np.sin(np.pi * grid.nodes)
    noise = NoiseModel(sigma)
    sq = []
    for k in range(trials):
        ens = generate_ensemble(y, grid.weights, noise, n, seed=np.random.SeedSequence([5, k]))
        sq.append(ops.weighted_norm(ens.mean - y, grid.weights) ** 2)
    target = sigma**2 / n
    rel = abs(np.mean(sq) - target) / target
    big = generate_ensemble(y, grid.weights, noise, 10**5, seed=6)
    rel_s = abs(big.sample_std - sigma) / sigma
    return max(rel / 0.15, rel_s / 0.02), 1.0, (
        f"E|ybar - y|^2 off by {100 * rel:.1f}% (limit 15%), s_n off by {100 * rel_s:.2f}% (limit 2%)"
    )


def tau_values():
    a = tau_n(10**5, 1.1)
    b = tau_n(10**100, 1.1)
    err = max(abs(a - 1.1) / 1e-12, abs(b - 1.694) / 1e-3)
    return err, 1.0, f"tau(1e5) = {a:.6f}, tau(1e100) = {b:.6f}"


def stopping_contracts():
    rule = Discrepancy(beta0=2.5, tau0=1.1)
    res = [5.0, 4.0, 0.9, 0.1, 0.05]
    t, cause = first_crossing(iter(res), 1.0, 100)
    bad = (t, cause) != (2, "discrepancy")
    cap = rule.cap(7)
    t, cause = first_crossing(iter([1.0] * 100), 0.5, cap)
    bad = bad or (t, cause) != (18, "emergency") or cap != 18
    return float(bad), 0.0, f"first crossing at 2, emergency cap ceil(2.5*7) = {cap}"


CHECKS = {
    "adjoint.ex1": _adjoint_check(
        lambda: ops.build_integral_operator(ops.kernel_ex1, ops.Grid1D(400), name="green")),
    "adjoint.gaussian": _adjoint_check(
        lambda: ops.build_integral_operator(ops.kernel_gaussian, ops.Grid1D(400), name="gaussian")),
    "adjoint.gradient": _adjoint_check(lambda: ops.discrete_gradient(ops.Grid1D(400))),
    "adjoint.tv": _adjoint_check(_tv_stack),
    "adjoint.fracdiff": _adjoint_check(
        lambda: fracdiff.build_fracdiff_operator(fracdiff.FracDiffSpec(64, 0.5, 0.1))),
    "dst.roundtrip": dst_roundtrip,
    "mittag.exp": mittag_exp,
    "mittag.erfc": mittag_erfc,
    "mittag.zero": mittag_zero,
    "mittag.series": mittag_series,
    "landweber.equivalence": landweber_equivalence,
    "sampling.variance": variance_identity,
    "stopping.tau": tau_values,
    "stopping.contracts": stopping_contracts,
}


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def run_checks(pattern=None, inject_fault=False):
    """Run every check whose name contains ``pattern``.

    ``inject_fault`` inflates each measured error past its tolerance, which
    lets callers exercise the failure path.
    """
    results = []
    for name, check in CHECKS.items():
        if pattern and pattern not in name:
            continue
        start = time.perf_counter()
        try:
            err, tol, detail = check()
        except Exception as exc:  # a crashing check is a failed check
            err, tol, detail = math.inf, 0.0, f"raised {type(exc).__name__}: {exc}"
        if inject_fault:
            err, detail = tol + 1.0, detail + " [injected fault]"
        ok = bool(err <= tol)
        results.append(CheckResult(name, ok, detail, time.perf_counter() - start))
    return results
