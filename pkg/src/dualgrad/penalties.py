"""Strongly convex penalties, represented by their dual-to-primal maps.

The dual gradient iteration only needs ``x = grad R*(xi)``, the unique
minimizer of ``R(x) - <xi, x>``, together with the strong-convexity modulus
``c0`` of ``R``. All maps below are closed-form and act componentwise except
for the entropy map, which normalizes with the ambient quadrature weights.
"""

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DualPenalty",
    "quadratic_map",
    "nonneg_quadratic_map",
    "entropy_simplex_map",
    "elastic_net_map",
    "tv_product_map",
    "quadratic",
    "nonneg",
    "entropy",
    "elastic_net",
    "tv",
    "parse_penalty",
]


@dataclass(frozen=True)
class DualPenalty:
    """A penalty ``R`` known through ``grad R*`` and its modulus ``c0``."""

    name: str
    c0: float
    grad_conj: Callable[[np.ndarray], np.ndarray]
    beta: float = None

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"strong convexity constant must be positive, got {self.c0}")

    def __call__(self, xi):
        return self.grad_conj(xi)

    @property
    def lipschitz(self):
        """Lipschitz constant ``1 / (2 c0)`` of ``grad R*``."""
        return 1.0 / (2.0 * self.c0)


def _check_beta(beta):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def quadratic_map(xi):
    """``R(x) = |x|^2 / 2``: the identity."""
    return np.array(xi, dtype=float, copy=True)


def nonneg_quadratic_map(xi):
    """``R(x) = |x|^2 / 2`` restricted to ``x >= 0``: projection onto the orthant."""
    return np.maximum(xi, 0.0)


def entropy_simplex_map(xi, weights):
    """Negative entropy on discrete densities: ``x = e^xi / sum(w e^xi)``.

    The max-shift keeps the exponentials in range; the result is strictly
    positive and integrates to one against ``weights``.
    """
    xi = np.asarray(xi, dtype=float)
    e = np.exp(xi - xi.max())
    return e / np.dot(weights, e)


def elastic_net_map(xi, beta):
    """``R(x) = |x|_1 + |x|^2 / (2 beta)``: ``beta * sign(xi) * max(|xi| - 1, 0)``."""
    _check_beta(beta)
    xi = np.asarray(xi, dtype=float)
    return beta * np.sign(xi) * np.maximum(np.abs(xi) - 1.0, 0.0)


def tv_product_map(xi_x, xi_z, beta):
    """Split total variation ``|z|_1 + |z|^2/(2 beta) + |x|^2/(2 beta)``.

    ``(xi_x, xi_z)`` is the image ``B*(lam, mu)`` of the product map, so
    ``xi_z = -mu``. Returns ``(beta * xi_x, elastic_net_map(xi_z, beta))``.
    """
    _check_beta(beta)
    return beta * np.asarray(xi_x, dtype=float), elastic_net_map(xi_z, beta)


def quadratic():
    return DualPenalty("quadratic", 0.5, quadratic_map)


def nonneg():
    return DualPenalty("nonneg", 0.5, nonneg_quadratic_map)


def entropy(weights):
    weights = np.asarray(weights, dtype=float)
    return DualPenalty("entropy", 0.5, lambda xi: entropy_simplex_map(xi, weights))


def elastic_net(beta):
    _check_beta(beta)
    return DualPenalty(f"elastic_net({beta:g})", 1.0 / (2.0 * beta),
                       lambda xi: elastic_net_map(xi, beta), beta=beta)


def tv(beta, x_size):
    """Penalty on concatenated ``(x, z)`` vectors whose first ``x_size`` entries are ``x``."""
    _check_beta(beta)

    def grad_conj(xi):
        x, z = tv_product_map(xi[:x_size], xi[x_size:], beta)
        return np.concatenate((x, z))

    # separable sum of two 1/(2 beta)-convex parts
    return DualPenalty(f"tv({beta:g})", 1.0 / (2.0 * beta), grad_conj, beta=beta)


_PENALTY_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_penalty(text):
    """Split ``"elastic_net(300)"`` into ``("elastic_net", 300.0)``.

    Penalties without a parameter return ``None`` in the second slot.
    """
    m = _PENALTY_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse penalty {text!r}")
    name, arg = m.group(1), m.group(2)
    if name in ("quadratic", "nonneg", "entropy"):
        if arg:
            raise ValueError(f"penalty {name!r} takes no parameter")
        return name, None
    if name in ("elastic_net", "tv"):
        if not arg:
            raise ValueError(f"penalty {name!r} needs beta, e.g. {name}(100)")
        beta = float(arg)
        _check_beta(beta)
        return name, beta
    raise ValueError(f"unknown penalty {name!r}")
