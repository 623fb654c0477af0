"""Independent reference implementations shared by the test modules."""

import mpmath


def ml_oracle(alpha, z):
    """Mittag-Leffler power series in arbitrary precision, alpha taken as its exact decimal.

    The working precision covers the cancellation of the alternating terms,
    whose peak is about exp(|z|^(1/alpha)).
    """
    a = mpmath.mpf(str(alpha))
    peak = abs(z) ** (1.0 / alpha)
    with mpmath.workdps(int(30 + peak / 2.3)):
        z = mpmath.mpf(z)
        total, k = mpmath.mpf(0), 0
        while True:
            term = z**k * mpmath.rgamma(a * k + 1)
            total += term
            k += 1
            if k > 20 and abs(term) < mpmath.mpf(10) ** -30:
                return float(total)
