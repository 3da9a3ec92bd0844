"""Real matrix-variate gamma and beta functions and partition Pochhammer symbols.

All quantities live in log space; the operator constants are ratios of
``Gamma_p`` values that overflow quickly with ``p``.
"""

import math

import numpy as np
from scipy.special import gammaln

from .exceptions import DomainError

LOG_PI = math.log(math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_p(p):
    if int(p) != p or p < 1:
        raise ValueError(f"dimension must be a positive integer, got {p!r}")
    return int(p)


def log_gamma_p(p, alpha):
    r"""Log of the real matrix-variate gamma function.

    .. math::

        \Gamma_p(\alpha) = \pi^{p(p-1)/4} \prod_{j=0}^{p-1} \Gamma(\alpha - j/2)

    Raises :class:`DomainError` unless ``alpha > (p - 1) / 2``.
    """
    p = _check_p(p)
    alpha = float(alpha)
    if not alpha > 0.5 * (p - 1):
        raise DomainError(f"Gamma_{p}({alpha}) needs alpha > {(p - 1) / 2}")
    j = np.arange(p)
    return float(0.25 * p * (p - 1) * LOG_PI + np.sum(gammaln(alpha - 0.5 * j)))


def log_beta_p(p, alpha, beta):
    """``log B_p(alpha, beta) = log Gamma_p(alpha) + log Gamma_p(beta) - log Gamma_p(alpha + beta)``."""
    return log_gamma_p(p, alpha) + log_gamma_p(p, beta) - log_gamma_p(p, alpha + beta)


def log_gamma_ratio_p(p, num, den):
    """``log Gamma_p(num) - log Gamma_p(den)``."""
    return log_gamma_p(p, num) - log_gamma_p(p, den)


def rising_factorial(b, n):
    """Ordinary Pochhammer ``(b)_n = b (b + 1) ... (b + n - 1)``, ``(b)_0 = 1``."""
    n = int(n)
    if n < 0:
        raise ValueError("rising factorial order must be nonnegative")
    if n == 0:
        return 1.0
    if b > 0:
        return math.exp(math.lgamma(b + n) - math.lgamma(b))
    # explicit product keeps exact zeros and signs for nonpositive b
    out = 1.0
    for i in range(n):
        out *= b + i
    return out


def _parts(K):
    parts = getattr(K, "parts", K)
    return tuple(int(k) for k in parts)


def pochhammer_partition(a, K):
    """Generalized Pochhammer symbol ``(a)_K = prod_j (a - (j - 1)/2)_{k_j}``.

    May be zero or negative; ``(a)_() == 1``.
    """
    out = 1.0
    for j, k in enumerate(_parts(K)):
        out *= rising_factorial(a - 0.5 * j, k)
    return out


def signed_log_gamma_p_partition(p, alpha, K):
    """``(sign, log|Gamma_p(alpha, K)|)`` with ``Gamma_p(alpha, K) = Gamma_p(alpha) (alpha)_K``."""
    lg = log_gamma_p(p, alpha)
    poch = pochhammer_partition(alpha, K)
    if poch == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, poch), lg + math.log(abs(poch))


def log_gamma_p_partition(p, alpha, K):
    """``log Gamma_p(alpha, K)``; requires ``(alpha)_K > 0``."""
    sign, val = signed_log_gamma_p_partition(p, alpha, K)
    if sign <= 0:
        raise DomainError(f"({alpha})_K is not positive for K={_parts(K)}")
    return val


def log_stirling_gamma(z, gamma_shift=0.0):
    """Log of the first Stirling term ``sqrt(2 pi) z^(z + g - 1/2) e^(-z)``.

    Approximates ``log Gamma(z + g)`` for large ``z`` and bounded ``g``.
    """
    z = float(z)
    if not z > 0:
        raise DomainError("Stirling approximation needs z > 0")
    return LOG_SQRT_2PI + (z + gamma_shift - 0.5) * math.log(z) - z


def stirling_gamma(z, gamma_shift=0.0):
    return math.exp(log_stirling_gamma(z, gamma_shift))


def log_stirling_gamma_p(p, z, gamma_shift=0.0):
    """Stirling device applied factor by factor to ``Gamma_p(z + gamma_shift)``."""
    p = _check_p(p)
    return 0.25 * p * (p - 1) * LOG_PI + sum(
        log_stirling_gamma(z, gamma_shift - 0.5 * j) for j in range(p)
    )
