"""Dual gradient iteration with a priori and discrepancy-based stopping.

Starting from ``lam_0 = 0`` the iteration reads

    x_t       = grad R*(A* lam_t)
    lam_{t+1} = lam_t - step * (A x_t - ybar)

and the residual ``|A x_t - ybar|`` is measured on the data block of the
range before ``lam`` is updated.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "APriori",
    "Discrepancy",
    "IterationError",
    "SolverConfig",
    "SolverRun",
    "StepSizeWarning",
    "DualState",
    "dual_step",
    "iterate",
    "first_crossing",
    "tau_n",
    "apriori_index",
    "check_step",
    "default_step",
    "run",
    "landweber",
]


class IterationError(ArithmeticError):
    """Raised when an iterate or residual stops being finite."""


class StepSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class APriori:
    """Stop after exactly ``t_star`` steps."""

    t_star: int

    def __post_init__(self):
        if int(self.t_star) != self.t_star or self.t_star < 0:
            raise ValueError(f"t_star must be a nonnegative integer, got {self.t_star}")


@dataclass(frozen=True)
class Discrepancy:
    """Stop at the first ``t <= ceil(beta0 n)`` with ``residual <= tau_n s_n / sqrt(n)``."""

    beta0: float = 10.0
    tau0: float = 1.1

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError(f"beta0 must be positive, got {self.beta0}")
        if not self.tau0 > 1:
            raise ValueError(f"tau0 must exceed 1, got {self.tau0}")

    def cap(self, n):
        # tolerate representation error in beta0 * n before taking the ceiling
        return int(math.ceil(self.beta0 * n - 1e-9))

    def threshold(self, n, s_n):
        return tau_n(n, self.tau0) * s_n / math.sqrt(n)


@dataclass
class SolverConfig:
    step: float
    max_iters: int = 10**6
    record_residuals: bool = False

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"step size must be positive and finite, got {self.step}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass
class SolverRun:
    x: np.ndarray
    lam: np.ndarray
    iterations: int
    stop_cause: str
    residual: float
    threshold: Optional[float] = None
    residuals: Optional[list] = field(default=None, repr=False)


@dataclass
class DualState:
    t: int
    x: np.ndarray
    lam: np.ndarray
    residual: float


def _data_norm(op, r):
    sl = op.data_slice
    rs = r[sl]
    return math.sqrt(np.dot(op.range_weights[sl] * rs, rs))


def dual_step(lam, op, penalty, rhs, step):
    """One step: returns ``(x, lam_next, residual)``.

    ``rhs`` is the full right-hand side in the range of ``op`` (see
    ``LinearMap.embed_data``); the residual is taken on the data block.
    """
    x = penalty(op.adjoint(lam))
    r = op.apply(x) - rhs
    residual = _data_norm(op, r)
    if not math.isfinite(residual):
        raise IterationError("non-finite residual; the step size is probably too large")
    return x, lam - step * r, residual


def iterate(op, penalty, rhs, step, lam0=None):
    """Yield ``DualState(t, x_t, lam_t, residual_t)`` for ``t = 0, 1, ...``."""
    lam = np.zeros(op.range_size) if lam0 is None else np.array(lam0, dtype=float)
    t = 0
    while True:
        x, lam_next, residual = dual_step(lam, op, penalty, rhs, step)
        yield DualState(t, x, lam, residual)
        lam = lam_next
        t += 1


def first_crossing(residuals, threshold, cap):
    """Index of the first residual ``<= threshold`` among indices ``0..cap``.

    Returns ``(t, "discrepancy")``, or ``(cap, "emergency")`` when no index
    qualifies. Consumes ``residuals`` lazily.
    """
    t = -1
    for t, r in enumerate(residuals):
        if r <= threshold:
            return t, "discrepancy"
        if t >= cap:
            break
    if t < cap:
        raise ValueError("residual sequence ended before the emergency cap")
    return cap, "emergency"


def tau_n(n, tau0=1.1, log=math.log):
    """``max(tau0, |log|log|log n|||)``; natural logarithm unless ``log`` is given."""
    if n < 2:
        raise ValueError(f"tau_n needs n >= 2, got {n}")
    if not tau0 > 1:
        raise ValueError(f"tau0 must exceed 1, got {tau0}")
    inner = abs(log(n))
    inner = abs(log(inner))
    if inner == 0.0:
        return float(tau0)
    return max(float(tau0), abs(log(inner)))


def apriori_index(n, sigma, q=1.0, c_scale=1.0):
    """Stopping index ``round(c_scale * (n / sigma^2)^((2 - q)/2))``, at least 1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if not c_scale > 0:
        raise ValueError(f"c_scale must be positive, got {c_scale}")
    return max(1, int(round(c_scale * (n / sigma**2) ** ((2.0 - q) / 2.0))))


def default_step(penalty_name, op_norm, beta=None):
    """Step sizes used in the reported experiments.

    ``2/|A|^2`` for the quadratic, nonnegative and entropy penalties,
    ``2/(beta |A|^2)`` for the elastic net and ``2/(beta (|A|^2 + 4))`` for
    split total variation (``|D|^2 <= 4``).
    """
    if op_norm <= 0:
        raise ValueError("operator norm must be positive")
    a2 = op_norm**2
    if penalty_name in ("quadratic", "nonneg", "entropy"):
        return 2.0 / a2
    if penalty_name == "elastic_net":
        return 2.0 / (beta * a2)
    if penalty_name == "tv":
        return 2.0 / (beta * (a2 + 4.0))
    raise ValueError(f"no default step for penalty {penalty_name!r}")


def check_step(step, c0, op_norm):
    """Warn when ``step >= 4 c0 / |A|^2``, i.e. outside the descent regime.

    Returns True when the step is strictly inside.
    """
    bound = 4.0 * c0 / op_norm**2
    if step >= bound * (1 - 1e-12):
        warnings.warn(
            f"step size {step:.6g} is not below 4*c0/|A|^2 = {bound:.6g}",
            StepSizeWarning,
            stacklevel=2,
        )
        return False
    return True


def _drive(states, ensemble, rule, cfg, callback):
    """Advance ``states`` until ``rule`` stops; returns ``(state, cause, threshold, history)``."""
    history = [] if cfg.record_residuals else None
    last = [None]

    def residuals():
        for state in states:
            last[0] = state
            if callback is not None:
                callback(state)
            if history is not None:
                history.append(state.residual)
            yield state.residual

    if isinstance(rule, APriori):
        target = min(rule.t_star, cfg.max_iters)
        for t, _ in enumerate(residuals()):
            if t >= target:
                break
        cause = "a_priori" if target == rule.t_star else "max_iters"
        return last[0], cause, None, history
    if not isinstance(rule, Discrepancy):
        raise TypeError(f"unknown stopping rule {rule!r}")
    if ensemble.n < 2:
        raise ValueError("the discrepancy rule needs n >= 2 to estimate the noise level")
    threshold = rule.threshold(ensemble.n, ensemble.sample_std)
    cap = rule.cap(ensemble.n)
    _, cause = first_crossing(residuals(), threshold, min(cap, cfg.max_iters))
    if cause == "emergency" and cap > cfg.max_iters:
        cause = "max_iters"
    return last[0], cause, threshold, history


def run(op, penalty, ensemble, rule, cfg, callback=None):
    """Run the dual gradient method on the averaged data of ``ensemble``.

    Parameters
    ----------
    op : LinearMap
        Forward operator (a ``ProductMap`` for the split TV model).
    penalty : DualPenalty
    ensemble : MeasurementEnsemble
    rule : APriori or Discrepancy
    cfg : SolverConfig
    callback : callable, optional
        Called with every ``DualState`` that is computed.

    Returns
    -------
    SolverRun
    """
    rhs = op.embed_data(ensemble.mean)
    states = iterate(op, penalty, rhs, cfg.step)
    state, cause, threshold, history = _drive(states, ensemble, rule, cfg, callback)
    if not np.all(np.isfinite(state.x)):
        raise IterationError(f"non-finite iterate at t={state.t}")
    return SolverRun(state.x, state.lam, state.t, cause, state.residual, threshold, history)


def _landweber_states(op, rhs, step):
    x = np.zeros(op.domain_size)
    t = 0
    while True:
        r = op.apply(x) - rhs
        residual = _data_norm(op, r)
        if not math.isfinite(residual):
            raise IterationError("non-finite residual in Landweber iteration")
        yield DualState(t, x, None, residual)
        x = x - step * op.adjoint(r)
        t += 1


def landweber(op, ensemble, rule, cfg, callback=None):
    """Classical Landweber ``x_{t+1} = x_t - step A*(A x_t - ybar)`` from ``x_0 = 0``.

    Same stopping rules and return type as ``run``; ``lam`` is left empty.
    """
    rhs = op.embed_data(ensemble.mean)
    states = _landweber_states(op, rhs, cfg.step)
    state, cause, threshold, history = _drive(states, ensemble, rule, cfg, callback)
    return SolverRun(state.x, np.empty(0), state.t, cause, state.residual, threshold, history)
