"""Discretized linear operators with quadrature-weighted inner products.

Vectors are plain 1-D numpy arrays. Every map carries the quadrature weights
of its domain and range, and its adjoint is taken with respect to the
weighted inner products ``<u, v> = sum(w * u * v)`` so that discrete norms
approximate L2 norms.
"""

import numpy as np

__all__ = [
    "Grid1D",
    "LinearMap",
    "ProductMap",
    "trapezoid_weights",
    "weighted_inner",
    "weighted_norm",
    "build_integral_operator",
    "kernel_ex1",
    "kernel_gaussian",
    "discrete_gradient",
    "identity_map",
    "stack_constraint",
    "estimate_norm",
]


def trapezoid_weights(m):
    """Composite trapezoidal weights ``h * (1/2, 1, ..., 1, 1/2)`` on ``m`` subintervals."""
    if m < 1:
        raise ValueError(f"subinterval count must be positive, got {m}")
    w = np.full(m + 1, 1.0 / m)
    w[0] = w[-1] = 0.5 / m
    return w


def weighted_inner(u, v, weights):
    return float(np.dot(weights * u, v))


def weighted_norm(u, weights):
    return float(np.sqrt(np.dot(weights * u, u)))


class Grid1D:
    """Uniform grid on [0, 1] with ``m`` subintervals and ``m + 1`` nodes."""

    def __init__(self, m):
        m = int(m)
        if m < 1:
            raise ValueError(f"subinterval count must be positive, got {m}")
        self.m = m
        self.h = 1.0 / m
        self.nodes = np.linspace(0.0, 1.0, m + 1)
        self.weights = trapezoid_weights(m)

    @property
    def size(self):
        return self.m + 1

    def __repr__(self):
        return f"Grid1D(m={self.m})"


class LinearMap:
    """A linear operator between weighted Euclidean spaces.

    Parameters
    ----------
    apply, adjoint : callable
        Forward and adjoint actions on 1-D arrays. The adjoint must be the
        adjoint with respect to the weighted inner products.
    domain_weights, range_weights : array
        Quadrature weights of the domain and range.
    name : str, optional
        Label used in diagnostics.
    matrix : array, optional
        Dense representation of ``apply`` when one exists.
    """

    def __init__(self, apply, adjoint, domain_weights, range_weights, name="", matrix=None):
        self._apply = apply
        self._adjoint = adjoint
        self.domain_weights = np.asarray(domain_weights, dtype=float)
        self.range_weights = np.asarray(range_weights, dtype=float)
        self.name = name
        self.matrix = matrix

    @classmethod
    def from_matrix(cls, matrix, domain_weights, range_weights, name=""):
        """Wrap a dense matrix; the weighted adjoint is ``W_d^-1 M^T W_r``."""
        matrix = np.asarray(matrix, dtype=float)
        domain_weights = np.asarray(domain_weights, dtype=float)
        range_weights = np.asarray(range_weights, dtype=float)
        if matrix.shape != (range_weights.size, domain_weights.size):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match weights "
                f"({range_weights.size}, {domain_weights.size})"
            )
        adjoint_matrix = (matrix * range_weights[:, None]).T / domain_weights[:, None]
        adjoint_matrix = np.ascontiguousarray(adjoint_matrix)
        return cls(
            matrix.dot,
            adjoint_matrix.dot,
            domain_weights,
            range_weights,
            name=name,
            matrix=matrix,
        )

    @property
    def domain_size(self):
        return self.domain_weights.size

    @property
    def range_size(self):
        return self.range_weights.size

    @property
    def data_slice(self):
        """Range block that carries measured data (the whole range here)."""
        return slice(0, self.range_size)

    def embed_data(self, y):
        """Right-hand side in the range for measured data ``y``."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.range_size,):
            raise ValueError(f"data of shape {y.shape}, expected ({self.range_size},)")
        return y

    def apply(self, x):
        return self._apply(x)

    def adjoint(self, y):
        return self._adjoint(y)

    __call__ = apply

    def domain_norm(self, x):
        return weighted_norm(x, self.domain_weights)

    def range_norm(self, y):
        return weighted_norm(y, self.range_weights)

    def __repr__(self):
        return f"LinearMap({self.name!r}, {self.domain_size} -> {self.range_size})"


class ProductMap(LinearMap):
    """The split operator ``B(x, z) = (A x, D x - z)`` on concatenated vectors.

    Domain vectors are ``concat(x, z)`` and range vectors ``concat(lam, mu)``.
    The adjoint is ``B*(lam, mu) = (A* lam + D* mu, -mu)``.
    """

    def __init__(self, A, D):
        if A.domain_size != D.domain_size or not np.array_equal(A.domain_weights, D.domain_weights):
            raise ValueError("A and D must share their domain")
        self.A = A
        self.D = D
        nx, nz, ny = A.domain_size, D.range_size, A.range_size

        def apply(v):
            x, z = v[:nx], v[nx:]
            return np.concatenate((A.apply(x), D.apply(x) - z))

        def adjoint(u):
            lam, mu = u[:ny], u[ny:]
            return np.concatenate((A.adjoint(lam) + D.adjoint(mu), -mu))

        super().__init__(
            apply,
            adjoint,
            np.concatenate((A.domain_weights, D.range_weights)),
            np.concatenate((A.range_weights, D.range_weights)),
            name=f"[{A.name}; {D.name} - I]",
        )

    @property
    def x_size(self):
        return self.A.domain_size

    @property
    def data_slice(self):
        return slice(0, self.A.range_size)

    def embed_data(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.A.range_size,):
            raise ValueError(f"data of shape {y.shape}, expected ({self.A.range_size},)")
        return np.concatenate((y, np.zeros(self.D.range_size)))

    def split_domain(self, v):
        return v[: self.x_size], v[self.x_size :]

    def split_range(self, u):
        ny = self.A.range_size
        return u[:ny], u[ny:]


def kernel_ex1(s, t):
    """Green's-function kernel ``40 s (1 - t)`` for ``s <= t``, ``40 t (1 - s)`` otherwise."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.where(s <= t, 40.0 * s * (1.0 - t), 40.0 * t * (1.0 - s))
    return out if out.ndim else float(out)


def kernel_gaussian(s, t):
    """Smooth kernel ``3 exp(-(s - t)^2 / 0.04)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = 3.0 * np.exp(-((s - t) ** 2) / 0.04)
    return out if out.ndim else float(out)


def build_integral_operator(kernel, grid, name="integral"):
    """Trapezoidal discretization of ``x -> int_0^1 k(., t) x(t) dt`` on ``grid``.

    ``kernel`` is called once with broadcast node arrays ``(s[:, None], t[None, :])``.
    """
    s = grid.nodes
    K = np.asarray(kernel(s[:, None], s[None, :]), dtype=float)
    K = np.broadcast_to(K, (s.size, s.size))
    if not np.all(np.isfinite(K)):
        bad = np.argwhere(~np.isfinite(K))[0]
        raise ValueError(f"kernel is not finite at (s, t) = ({s[bad[0]]}, {s[bad[1]]})")
    w = grid.weights
    return LinearMap.from_matrix(K * w[None, :], w, w, name=name)


def discrete_gradient(grid):
    """Unscaled forward differences ``(D x)_i = x_{i+1} - x_i``.

    The range has ``m`` entries with uniform weights ``h``; with these weights
    the operator norm does not exceed 2.
    """
    m = grid.m
    wx = grid.weights
    wz = np.full(m, grid.h)
    D = np.zeros((m, m + 1))
    idx = np.arange(m)
    D[idx, idx] = -1.0
    D[idx, idx + 1] = 1.0

    def apply(x):
        return x[1:] - x[:-1]

    def adjoint(mu):
        # W_x^-1 D^T W_z mu, with D^T v = -diff([0, v, 0])
        v = wz * mu
        out = np.empty(m + 1)
        out[0] = -v[0]
        out[1:-1] = v[:-1] - v[1:]
        out[-1] = v[-1]
        return out / wx

    return LinearMap(apply, adjoint, wx, wz, name="grad", matrix=D)


def identity_map(weights, name="identity"):
    weights = np.asarray(weights, dtype=float)
    return LinearMap(np.copy, np.copy, weights, weights, name=name, matrix=np.eye(weights.size))


def stack_constraint(A, D):
    """Product map ``(x, z) -> (A x, D x - z)`` for the split total-variation model."""
    return ProductMap(A, D)


def estimate_norm(op, max_iters=200, tol=1e-8, seed=0):
    """Operator norm by power iteration on ``A* A`` in the weighted norms.

    Returns 0 for the zero operator. The estimate after ``k`` iterations is
    the Rayleigh-type ratio ``|A x_k| / |x_k|``, which is nondecreasing in
    ``k`` for a fixed starting vector.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.domain_size)
    x /= op.domain_norm(x)
    estimate = 0.0
    for _ in range(max(int(max_iters), 1)):
        Ax = op.apply(x)
        new = op.range_norm(Ax)
        if new == 0.0:
            return 0.0
        converged = new - estimate <= tol * new
        estimate = max(estimate, new)
        if converged:
            break
        x = op.adjoint(Ax)
        nx = op.domain_norm(x)
        if nx == 0.0:
            break
        x /= nx
    return estimate
