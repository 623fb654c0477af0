"""Monte-Carlo reproductions of the four benchmark problems.

``ex1``  nonnegative reconstruction, Green's-function kernel, with the plain
         Landweber iteration as a paired comparator
``ex2``  probability-density reconstruction with the entropic map, Gaussian kernel
``ex3``  sparse initial data of a 2-D time-fractional diffusion problem
``ex4``  piecewise-constant reconstruction with split total variation

Every simulation draws its ensemble from ``SeedSequence([seed, n, sim])``, so
results do not depend on the number of workers or on which other sample
sizes are run.
"""

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import operators as ops
from . import penalties as pen
from .fracdiff import FracDiffSpec, build_fracdiff_operator
from .sampling import NoiseModel, generate_ensemble
from .solver import (
    APriori,
    Discrepancy,
    SolverConfig,
    apriori_index,
    check_step,
    default_step,
    landweber,
    run,
)

__all__ = [
    "ExperimentSpec",
    "Problem",
    "BoxStats",
    "MethodSummary",
    "ExperimentReport",
    "BUILTIN",
    "builtin_spec",
    "exact_solution",
    "exact_data",
    "build_problem",
    "relative_error",
    "aggregate",
    "simulate",
    "run_experiment",
]

log = logging.getLogger(__name__)

PROBLEMS = ("ex1", "ex2", "ex3", "ex4")


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything that determines an experiment, including its seed.

    ``problem`` selects forward operator and exact solution; it defaults to
    ``id`` for the built-in experiments and must be given for ``custom``.
    """

    id: str = "custom"
    problem: Optional[str] = None
    m: int = 400
    N: int = 64
    alpha: float = 0.5
    T: float = 0.1
    penalty: str = "nonneg"
    sigma: Optional[float] = 0.2
    sigma_rel: Optional[float] = None
    rule: str = "discrepancy"
    beta0: float = 10.0
    tau0: float = 1.1
    q: float = 1.0
    c_scale: float = 1.0
    n_list: tuple = (10, 100, 1000, 10**4, 10**5)
    n_sims: int = 200
    seed: int = 0
    error_norm: str = "L2"
    landweber: bool = False
    step_factor: float = 0.9
    strict_theory: bool = False
    max_iters: int = 10**6
    sampler: str = "direct"

    def __post_init__(self):
        if self.id not in PROBLEMS + ("custom",):
            raise ValueError(f"unknown experiment id {self.id!r}")
        if self.problem is None:
            if self.id == "custom":
                raise ValueError("custom experiments need a base problem (ex1..ex4)")
            object.__setattr__(self, "problem", self.id)
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if not self.n_list:
            raise ValueError("n_list must not be empty")
        if any(n < 1 for n in self.n_list) or list(self.n_list) != sorted(set(self.n_list)):
            raise ValueError(f"n_list must be positive and strictly ascending, got {self.n_list}")
        if self.n_sims < 1:
            raise ValueError(f"n_sims must be >= 1, got {self.n_sims}")
        if self.m < 1 or self.N < 2:
            raise ValueError("grid sizes must satisfy m >= 1 and N >= 2")
        if (self.sigma is None) == (self.sigma_rel is None):
            raise ValueError("give exactly one of sigma and sigma_rel")
        if (self.sigma if self.sigma is not None else self.sigma_rel) < 0:
            raise ValueError("noise level must be nonnegative")
        if self.rule not in ("discrepancy", "apriori"):
            raise ValueError(f"rule must be 'discrepancy' or 'apriori', got {self.rule!r}")
        if self.rule == "discrepancy":
            Discrepancy(self.beta0, self.tau0)
            if min(self.n_list) < 2:
                raise ValueError("the discrepancy rule needs n >= 2")
        elif not (0 < self.q <= 1 and self.c_scale > 0):
            raise ValueError("a priori rule needs 0 < q <= 1 and c_scale > 0")
        if self.error_norm not in ("L1", "L2"):
            raise ValueError(f"error_norm must be L1 or L2, got {self.error_norm!r}")
        if not self.step_factor > 0:
            raise ValueError("step_factor must be positive")
        if self.strict_theory and not self.step_factor < 1:
            raise ValueError("strict theory mode needs step_factor < 1")
        if self.sampler not in ("direct", "sufficient"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        pen.parse_penalty(self.penalty)
        if self.landweber and self.problem == "ex3":
            raise ValueError("the Landweber comparator is only defined on 1-D problems")

    @property
    def noise(self):
        if self.sigma_rel is not None:
            return NoiseModel(self.sigma_rel, relative=True)
        return NoiseModel(self.sigma)

    def problem_key(self):
        """Fields that determine the discretized problem (used for caching)."""
        return (self.problem, self.m, self.N, self.alpha, self.T, self.penalty,
                self.step_factor, self.strict_theory)


BUILTIN = {
    "ex1": dict(penalty="nonneg", sigma=0.2, beta0=10.0, landweber=True),
    "ex2": dict(penalty="entropy", sigma=0.4, beta0=10.0, error_norm="L1"),
    "ex3": dict(penalty="elastic_net(300)", sigma=None, sigma_rel=0.2, beta0=50.0,
                n_list=(10, 100, 1000, 10**4)),
    "ex4": dict(penalty="tv(100)", sigma=0.2, beta0=200.0),
}


def builtin_spec(exp_id, **overrides):
    """Spec of a built-in experiment with all reported constants; keywords override."""
    if exp_id not in BUILTIN:
        raise ValueError(f"no built-in experiment {exp_id!r}; choose from {sorted(BUILTIN)}")
    fields = dict(BUILTIN[exp_id], id=exp_id)
    fields.update(overrides)
    return ExperimentSpec(**fields)


# --- exact solutions -------------------------------------------------------

def _ex1_solution(s):
    return np.where((s >= 0.2) & (s <= 0.7), 20.0 * s * (s - 0.2) * (0.7 - s), 0.0)


def _ex2_profile(s):
    return np.exp(-((s - 0.3) ** 2) / 0.01) + 3.0 * np.exp(-((s - 0.7) ** 2) / 0.005)


def _ex4_solution(s):
    x = np.zeros_like(s)
    x[(s >= 0.15) & (s < 0.35)] = 1.0
    x[(s >= 0.35) & (s < 0.55)] = 0.4
    x[(s >= 0.7) & (s < 0.85)] = 0.8
    return x


def _ex3_solution(N):
    """Three compact cosine bumps on the interior grid; over 90% of entries are zero."""
    k = np.arange(1, N) / N
    X, Y = np.meshgrid(k, k, indexing="ij")
    f = np.zeros_like(X)
    for cx, cy, r, height in ((0.3, 0.3, 0.1, 100.0), (0.7, 0.4, 0.08, 80.0), (0.45, 0.75, 0.09, 60.0)):
        d = np.hypot(X - cx, Y - cy) / r
        f += np.where(d < 1.0, height * 0.5 * (1.0 + np.cos(np.pi * d)), 0.0)
    return f


def exact_solution(problem, m=400, N=64):
    """Exact solution on the grid of ``problem``; 2-D fields are returned flattened."""
    if problem == "ex3":
        return _ex3_solution(N).ravel()
    grid = ops.Grid1D(m)
    s = grid.nodes
    if problem == "ex1":
        return _ex1_solution(s)
    if problem == "ex2":
        p = _ex2_profile(s)
        # normalized so that the trapezoid integral is one
        return p / np.dot(grid.weights, p)
    if problem == "ex4":
        return _ex4_solution(s)
    raise ValueError(f"unknown problem {problem!r}")


def _forward(problem, m=400, N=64, alpha=0.5, T=0.1):
    if problem == "ex3":
        return build_fracdiff_operator(FracDiffSpec(N, alpha, T))
    grid = ops.Grid1D(m)
    if problem == "ex2":
        return ops.build_integral_operator(ops.kernel_gaussian, grid, name="gaussian")
    if problem in ("ex1", "ex4"):
        return ops.build_integral_operator(ops.kernel_ex1, grid, name="green")
    raise ValueError(f"unknown problem {problem!r}")


def exact_data(problem, m=400, N=64, alpha=0.5, T=0.1):
    """Exact data ``A x_true`` computed with the discretized operator."""
    A = _forward(problem, m, N, alpha, T)
    return A.apply(exact_solution(problem, m, N))


# --- problem assembly ------------------------------------------------------

@dataclass
class Problem:
    """A discretized problem ready for the solver."""

    spec: ExperimentSpec
    A: ops.LinearMap
    op: ops.LinearMap
    penalty: pen.DualPenalty
    x_true: np.ndarray
    y_exact: np.ndarray
    step: float
    op_norm: float
    method: str
    shape: tuple = None

    @property
    def weights(self):
        return self.A.domain_weights

    @property
    def data_weights(self):
        return self.A.range_weights

    def primal(self, v):
        """Reconstruction ``x`` from a solver iterate (drops the TV split variable)."""
        return v[: self.A.domain_size]


def _method_name(penalty_name):
    return {
        "nonneg": "dgm-NN",
        "quadratic": "dgm-quadratic",
        "entropy": "dgm-entropy",
        "elastic_net": "dgm-L1",
        "tv": "dgm-TV",
    }[penalty_name]


def build_problem(spec):
    """Operator, penalty, exact pair and step size for ``spec``."""
    A = _forward(spec.problem, spec.m, spec.N, spec.alpha, spec.T)
    x_true = exact_solution(spec.problem, spec.m, spec.N)
    y_exact = A.apply(x_true)
    name, beta = pen.parse_penalty(spec.penalty)
    op = A
    if name == "quadratic":
        penalty = pen.quadratic()
    elif name == "nonneg":
        penalty = pen.nonneg()
    elif name == "entropy":
        penalty = pen.entropy(A.domain_weights)
    elif name == "elastic_net":
        penalty = pen.elastic_net(beta)
    else:
        if spec.problem == "ex3":
            raise ValueError("the TV penalty needs a 1-D problem")
        op = ops.stack_constraint(A, ops.discrete_gradient(ops.Grid1D(spec.m)))
        penalty = pen.tv(beta, A.domain_size)

    op_norm = ops.estimate_norm(A)
    if spec.strict_theory:
        # theorem regime: step < 2 c0 / |op|^2 for the operator actually iterated
        full_norm = op_norm if op is A else ops.estimate_norm(op)
        step = spec.step_factor * 2.0 * penalty.c0 / full_norm**2
    else:
        step = spec.step_factor * default_step(name, op_norm, beta)
        if op is A:
            check_step(step, penalty.c0, op_norm)
    shape = (spec.N - 1, spec.N - 1) if spec.problem == "ex3" else None
    return Problem(spec, A, op, penalty, x_true, y_exact, step, op_norm, _method_name(name), shape)


@functools.lru_cache(maxsize=8)
def _cached_problem(spec):
    return build_problem(spec)


# --- statistics ------------------------------------------------------------

def relative_error(x_rec, x_ref, weights, mode="L2"):
    """``|x_rec - x_ref| / |x_ref|`` in the weighted L2 or L1 norm."""
    d = np.asarray(x_rec, dtype=float) - x_ref
    if mode == "L2":
        num, den = np.dot(weights, d * d), np.dot(weights, x_ref * x_ref)
        num, den = math.sqrt(num), math.sqrt(den)
    elif mode == "L1":
        num, den = np.dot(weights, np.abs(d)), np.dot(weights, np.abs(x_ref))
    else:
        raise ValueError(f"mode must be 'L2' or 'L1', got {mode!r}")
    if den == 0:
        raise ZeroDivisionError("reference has zero norm")
    return float(num / den)


@dataclass(frozen=True)
class BoxStats:
    """Five-number summary with 1.5 IQR whiskers (linear-interpolation quantiles)."""

    min: float
    q1: float
    median: float
    q3: float
    max: float
    whisker_low: float
    whisker_high: float
    outliers: tuple


def aggregate(errors):
    """Root-mean-square of ``errors`` and their boxplot statistics."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("cannot aggregate an empty error list")
    rms = float(np.sqrt(np.mean(e * e)))
    q1, med, q3 = (float(v) for v in np.percentile(e, [25, 50, 75]))
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = e[(e >= lo) & (e <= hi)]
    outliers = tuple(float(v) for v in np.sort(e[(e < lo) | (e > hi)]))
    box = BoxStats(float(e.min()), q1, med, q3, float(e.max()),
                   float(inside.min()), float(inside.max()), outliers)
    return rms, box


# --- simulation --------------------------------------------------------------

@dataclass
class SimResult:
    n: int
    sim: int
    methods: dict
    failure: Optional[str] = None


@dataclass
class MethodOutcome:
    error: float
    iterations: int
    stop_cause: str
    x: np.ndarray = field(repr=False)
    iterate_min: float
    mass_defect: float

    @property
    def zero_fraction(self):
        return float(np.mean(self.x == 0.0))


def _rule(spec, n, sigma):
    if spec.rule == "apriori":
        return APriori(apriori_index(n, sigma, spec.q, spec.c_scale))
    return Discrepancy(spec.beta0, spec.tau0)


def simulate(spec, n, sim, problem=None):
    """One Monte-Carlo simulation: a fresh ensemble of size ``n`` and every method on it."""
    problem = problem or _cached_problem(spec)
    seed = np.random.SeedSequence([spec.seed, n, sim])
    ens = generate_ensemble(problem.y_exact, problem.data_weights, spec.noise, n,
                            seed=seed, method=spec.sampler)
    sigma = ens.sigma if ens.sigma > 0 else 1.0
    rule = _rule(spec, n, sigma)
    cfg = SolverConfig(problem.step, max_iters=spec.max_iters)
    w = problem.weights
    solvers = [(problem.method, lambda cb: run(problem.op, problem.penalty, ens, rule, cfg, cb))]
    if spec.landweber:
        solvers.append(("Landweber", lambda cb: landweber(problem.A, ens, rule, cfg, cb)))

    out = {}
    for name, solve in solvers:
        track = {"min": math.inf, "mass": 0.0}

        def monitor(state):
            x = problem.primal(state.x)
            track["min"] = min(track["min"], float(x.min()))
            track["mass"] = max(track["mass"], abs(float(np.dot(w, x)) - 1.0))

        try:
            res = solve(monitor)
        except (ArithmeticError, ValueError) as exc:
            return SimResult(n, sim, out, failure=f"{name}: {exc}")
        x = problem.primal(res.x)
        err = relative_error(x, problem.x_true, w, spec.error_norm)
        out[name] = MethodOutcome(err, res.iterations, res.stop_cause, x, track["min"], track["mass"])
    return SimResult(n, sim, out)


def _simulate_task(args):
    spec, n, sim = args
    return simulate(spec, n, sim)


@dataclass
class MethodSummary:
    method: str
    n: int
    errors: np.ndarray
    iterations: np.ndarray
    stop_causes: list
    rms_error: float
    box: Optional[BoxStats]
    mean_iterations: float
    emergency_stops: int
    failures: int
    mean_x: np.ndarray
    zero_fraction: float
    iterate_min: float
    mass_defect: float


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    methods: list
    summaries: dict
    x_true: np.ndarray
    y_exact: np.ndarray
    noisy_samples: dict
    step: float
    op_norm: float
    shape: Optional[tuple] = None

    def summary(self, n, method=None):
        return self.summaries[(n, method or self.methods[0])]

    def rms(self, method=None):
        return [self.summary(n, method).rms_error for n in self.spec.n_list]

    @property
    def failures(self):
        return sum(s.failures for s in self.summaries.values())


def _summarize(method, n, outcomes, failures):
    errors = np.array([o.error for o in outcomes])
    iterations = np.array([o.iterations for o in outcomes], dtype=int)
    causes = [o.stop_cause for o in outcomes]
    if outcomes:
        rms, box = aggregate(errors)
        mean_x = np.mean([o.x for o in outcomes], axis=0)
        zero = float(np.mean([o.zero_fraction for o in outcomes]))
        it_min = min(o.iterate_min for o in outcomes)
        mass = max(o.mass_defect for o in outcomes)
        mean_it = float(iterations.mean())
    else:
        rms, box, mean_x, zero, it_min, mass, mean_it = math.nan, None, None, math.nan, math.nan, math.nan, math.nan
    return MethodSummary(method, n, errors, iterations, causes, rms, box, mean_it,
                         causes.count("emergency"), failures, mean_x, zero, it_min, mass)


def run_experiment(spec, jobs=1):
    """Run ``spec.n_sims`` simulations for every ``n`` in ``spec.n_list``.

    Results are reduced in ``(n, sim)`` order whatever the worker count, so
    equal specs give identical reports. A failed simulation is counted per
    method and left out of the statistics; it does not abort the batch.
    """
    problem = build_problem(spec)
    methods = [problem.method] + (["Landweber"] if spec.landweber else [])
    tasks = [(spec, n, sim) for n in spec.n_list for sim in range(spec.n_sims)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [simulate(spec, n, sim, problem) for spec, n, sim in tasks]

    summaries = {}
    noisy = {}
    for n in spec.n_list:
        batch = [r for r in results if r.n == n]
        for method in methods:
            ok = [r.methods[method] for r in batch if method in r.methods]
            summaries[(n, method)] = _summarize(method, n, ok, len(batch) - len(ok))
            s = summaries[(n, method)]
            log.info("n=%d %s: rms=%.4e iters=%.1f emergency=%d", n, method,
                     s.rms_error, s.mean_iterations, s.emergency_stops)
        # one raw measurement for plotting, from its own stream
        one = generate_ensemble(problem.y_exact, problem.data_weights, spec.noise, 1,
                                seed=np.random.SeedSequence([spec.seed, n, 2**32 - 1]))
        noisy[n] = one.mean
    return ExperimentReport(spec, methods, summaries, problem.x_true, problem.y_exact,
                            noisy, problem.step, problem.op_norm, problem.shape)

