"""Forward map of the 2-D time-fractional diffusion initial-value problem.

The Dirichlet five-point Laplacian on the unit square is diagonalized by the
discrete sine transform, so the solution at time ``T`` of the semi-discrete
Caputo equation is ``S^-1 W_T S f`` where ``W_T`` multiplies each sine mode by
the Mittag-Leffler decay factor ``E_alpha(-mu_pq T^alpha)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .operators import LinearMap

__all__ = [
    "FracDiffSpec",
    "FracDiffOperator",
    "mittag_leffler",
    "laplacian_eigenvalue",
    "laplacian_eigenvalues",
    "sine_matrix",
    "dst2",
    "idst2",
    "build_fracdiff_operator",
]

# On the negative axis the largest series term is about exp(|z|^(1/alpha)), so
# the alternating sum loses that many digits; the series is used only while
# |z|^(1/alpha) stays below this bound.
SERIES_PEAK = 8.0
_TINY = 1e-17


@dataclass(frozen=True)
class FracDiffSpec:
    """Grid parameter ``N`` (``h = 1/N``), fractional order and observation time."""

    N: int = 64
    alpha: float = 0.5
    T: float = 0.1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.T >= 0.0:
            raise ValueError(f"T must be nonnegative, got {self.T}")

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def shape(self):
        return (self.N - 1, self.N - 1)


def _series(alpha, z):
    # log|term_k| is concave in k, so once terms are tiny and shrinking the
    # remaining tail is negligible
    terms = []
    logz = math.log(abs(z))
    negative = z < 0
    prev = math.inf
    for k in range(20000):
        mag = math.exp(k * logz - special.gammaln(alpha * k + 1.0))
        terms.append(-mag if (negative and k % 2) else mag)
        if mag < _TINY and mag < prev:
            return math.fsum(terms)
        prev = mag
    raise ArithmeticError(f"Mittag-Leffler series did not converge at z={z}")


def _asymptotic(alpha, x):
    """``E_alpha(-x)`` for large ``x > 0``; ``None`` when not accurate enough."""
    terms = []
    prev = math.inf
    for k in range(1, 400):
        coef = special.rgamma(1.0 - alpha * k)
        if coef == 0.0:
            continue
        term = coef * (-x) ** (-k)
        mag = abs(term)
        if mag > prev:
            return None
        terms.append(term)
        prev = mag
        if mag < 1e-16:
            return -math.fsum(terms)
    return None


def _integral(alpha, x):
    """``E_alpha(-x)`` from its spectral representation on ``u in [0, inf)``.

    With ``t = x^(1/alpha)``:
    ``E = sin(a pi)/(a pi) * int_0^inf exp(-t u^(1/a)) / (u^2 + 2u cos(a pi) + 1) du``.
    """
    t = x ** (1.0 / alpha)
    c = math.cos(alpha * math.pi)

    def f(u):
        return math.exp(-t * u ** (1.0 / alpha)) / (u * u + 2.0 * u * c + 1.0)

    # beyond u0 the exponential factor is below e^-40
    u0 = (40.0 / t) ** alpha
    head, _ = integrate.quad(f, 0.0, u0, epsabs=1e-15, epsrel=1e-13, limit=400)
    tail, _ = integrate.quad(f, u0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=400)
    return math.sin(alpha * math.pi) / (alpha * math.pi) * (head + tail)


def _ml_scalar(alpha, z):
    if z == 0.0:
        return 1.0
    if alpha == 1.0:
        return math.exp(z)
    if z > 0.0 or (-z) ** (1.0 / alpha) <= SERIES_PEAK:
        return _series(alpha, z)
    x = -z
    value = _asymptotic(alpha, x)
    if value is None:
        value = _integral(alpha, x)
    return value


def mittag_leffler(alpha, z):
    """Mittag-Leffler function ``E_alpha(z) = sum_k z^k / Gamma(alpha k + 1)``.

    Real arguments only, ``0 < alpha <= 1``. Accepts scalars or arrays;
    repeated argument values are evaluated once.
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("Mittag-Leffler argument must be finite")
    if z.ndim == 0:
        return _ml_scalar(alpha, float(z))
    uniq, inverse = np.unique(z, return_inverse=True)
    vals = np.array([_ml_scalar(alpha, float(v)) for v in uniq])
    return vals[inverse].reshape(z.shape)


def laplacian_eigenvalue(p, q, N):
    """Eigenvalue ``(4 - 2cos(p h pi) - 2cos(q h pi)) / h^2`` of the five-point Dirichlet Laplacian."""
    if not (1 <= p <= N - 1 and 1 <= q <= N - 1):
        raise IndexError(f"mode ({p}, {q}) outside 1..{N - 1}")
    h = 1.0 / N
    return (4.0 - 2.0 * math.cos(p * h * math.pi) - 2.0 * math.cos(q * h * math.pi)) / h**2


def laplacian_eigenvalues(N):
    """All eigenvalues as an ``(N-1, N-1)`` array indexed by ``(p-1, q-1)``."""
    h = 1.0 / N
    c = 2.0 - 2.0 * np.cos(np.arange(1, N) * h * np.pi)
    return (c[:, None] + c[None, :]) / h**2


def sine_matrix(N):
    """Symmetric matrix ``sin(i p h pi)``, ``i, p = 1..N-1``; its square is ``(N/2) I``."""
    k = np.arange(1, N)
    return np.sin(np.outer(k, k) * np.pi / N)


def _check_square(v):
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"expected a square interior field, got shape {v.shape}")
    return v


def dst2(v, sine=None):
    """Forward transform ``(S v)_pq = 4 h^2 sum_ij v_ij sin(i p h pi) sin(j q h pi)``."""
    v = _check_square(v)
    N = v.shape[0] + 1
    phi = sine_matrix(N) if sine is None else sine
    return (4.0 / N**2) * (phi @ v @ phi)


def idst2(w, sine=None):
    """Inverse transform ``(S^-1 w)_ij = sum_pq w_pq sin(i p h pi) sin(j q h pi)``."""
    w = _check_square(w)
    N = w.shape[0] + 1
    phi = sine_matrix(N) if sine is None else sine
    return phi @ w @ phi


class FracDiffOperator(LinearMap):
    """``f -> S^-1 W_T S f`` acting on row-major flattened interior fields.

    Self-adjoint with respect to the uniform weights ``h^2`` per node.
    """

    def __init__(self, spec):
        self.spec = spec
        N = spec.N
        self.shape = spec.shape
        self.sine = sine_matrix(N)
        mu = laplacian_eigenvalues(N)
        self.eigenvalues = mu
        self.factors = mittag_leffler(spec.alpha, -mu * spec.T**spec.alpha)
        # S^-1 W S f = c * phi (W * (phi f phi)) phi, c = 4 h^2
        scale = 4.0 / N**2
        phi, factors, shape = self.sine, self.factors, self.shape

        def apply(f):
            F = f.reshape(shape)
            return (scale * (phi @ (factors * (phi @ F @ phi)) @ phi)).ravel()

        weights = np.full(shape[0] * shape[1], spec.h**2)
        super().__init__(apply, apply, weights, weights, name=f"fracdiff(N={N})")


def build_fracdiff_operator(spec):
    return FracDiffOperator(spec)
