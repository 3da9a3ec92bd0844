"""Partitions, zonal polynomials and hypergeometric series of matrix argument.

Zonal polynomials ``C_K`` are stored in the monomial symmetric basis with
exact rational coefficients.  The unnormalized polynomials come from the
Laplace-Beltrami eigenvalue recurrence

    c[K, L] = sum_M ((l_i + t) - (l_j - t)) c[K, M] / (rho(K) - rho(L)),
    rho(K) = sum_i k_i (k_i - i),

where ``M`` runs over the partitions obtained from ``L`` by moving ``t`` units
from part ``j`` to an earlier part ``i``.  Scale factors are then fixed by
``sum_K C_K(Z) = (tr Z)^k``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import CapExceeded, ConstructionError, DomainError, PoleError
from .pdcore import as_pd, as_sym, batch_congruence, batch_sqrt, check_matrix_stack
from .sampling import EstimatorResult, mc_expectation, sample_type1_beta
from .special import (
    log_beta_p,
    log_gamma_p,
    pochhammer_partition,
    signed_log_gamma_p_partition,
)

KMAX_LIMIT = 60


class Partition(tuple):
    """Non-increasing tuple of positive integers."""

    def __new__(cls, parts=()):
        parts = tuple(int(k) for k in parts if int(k) != 0)
        if any(k < 0 for k in parts):
            raise ValueError("partition parts must be nonnegative")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"partition parts must be non-increasing: {parts}")
        return super().__new__(cls, parts)

    @property
    def parts(self):
        return tuple(self)

    @property
    def weight(self):
        return sum(self)

    def padded(self, p):
        if len(self) > p:
            raise ValueError(f"{self.label()} has more than {p} parts")
        return tuple(self) + (0,) * (p - len(self))

    def label(self):
        return "(" + ",".join(map(str, self)) + ")"

    def __repr__(self):
        return f"Partition({tuple(self)!r})"


def enumerate_partitions(k, max_parts=None):
    """Partitions of ``k`` with at most ``max_parts`` parts, reverse-lexicographic.

    >>> enumerate_partitions(3, 2)
    [Partition((3,)), Partition((2, 1))]
    """
    if k < 0:
        raise ValueError("weight must be nonnegative")
    if max_parts is None:
        max_parts = k

    out = []

    def rec(remaining, cap, prefix):
        if remaining == 0:
            out.append(Partition(prefix))
            return
        if len(prefix) == max_parts:
            return
        for part in range(min(remaining, cap), 0, -1):
            rec(remaining - part, part, prefix + (part,))

    rec(k, k, ())
    return out


def _rho(K):
    return sum(k * (k - i) for i, k in enumerate(K, start=1))


def _dominates(K, L):
    sk = sl = 0
    for i in range(max(len(K), len(L))):
        sk += K[i] if i < len(K) else 0
        sl += L[i] if i < len(L) else 0
        if sk < sl:
            return False
    return True


def _multinomial(L):
    out = math.factorial(sum(L))
    for part in L:
        out //= math.factorial(part)
    return out


def _zonal_coefficients(k, p):
    """Exact coefficient matrix for degree ``k``, partitions with at most ``p`` parts."""
    parts = enumerate_partitions(k, p)
    index = {L: i for i, L in enumerate(parts)}
    n = len(parts)
    raw = [[Fraction(0)] * n for _ in range(n)]
    for a, K in enumerate(parts):
        raw[a][a] = Fraction(1)
        rho_k = _rho(K)
        for b in range(a + 1, n):
            L = parts[b]
            if not _dominates(K, L):
                continue
            total = Fraction(0)
            ls = list(L)
            for i in range(len(ls)):
                for j in range(i + 1, len(ls)):
                    for t in range(1, ls[j] + 1):
                        mu = ls.copy()
                        mu[i] += t
                        mu[j] -= t
                        M = Partition(sorted(mu, reverse=True))
                        c = index.get(M)
                        if c is None or c < a or c >= b:
                            continue
                        total += (ls[i] + t - (ls[j] - t)) * raw[a][c]
            raw[a][b] = total / (rho_k - _rho(L))
    # scale factors from sum_K C_K = (tr Z)^k, solved top-down (triangular)
    scale = [Fraction(0)] * n
    for b, L in enumerate(parts):
        acc = sum((scale[a] * raw[a][b] for a in range(b)), Fraction(0))
        scale[b] = (_multinomial(L) - acc) / raw[b][b]
    return parts, [[scale[a] * raw[a][b] for b in range(n)] for a in range(n)]


def _exponent_vectors(L, p):
    return np.array(sorted(set(itertools.permutations(L.padded(p)))), dtype=float)


@dataclass(frozen=True)
class ZonalTable:
    """Zonal polynomial coefficients for every degree ``k <= kmax``.

    ``coefficients[k][a][b]`` is the coefficient of the monomial symmetric
    function ``M_{partitions[k][b]}`` in ``C_{partitions[k][a]}``.
    """

    kmax: int
    p: int
    partitions: tuple
    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "_float", tuple(np.array(c, dtype=float) for c in self.coefficients)
        )
        object.__setattr__(
            self,
            "_exponents",
            tuple(tuple(_exponent_vectors(L, self.p) for L in parts) for parts in self.partitions),
        )
        object.__setattr__(
            self,
            "_index",
            {L: (k, i) for k, parts in enumerate(self.partitions) for i, L in enumerate(parts)},
        )

    def index(self, K):
        K = Partition(K)
        if K.weight > self.kmax:
            raise CapExceeded(f"weight of {K.label()} exceeds kmax={self.kmax}")
        return self._index.get(K)

    def monomials(self, k, eigenvalues):
        """Monomial symmetric functions of degree ``k`` at ``eigenvalues`` (shape ``(..., p)``)."""
        x = np.asarray(eigenvalues, dtype=float)
        cols = []
        for expo in self._exponents[k]:
            cols.append(np.sum(np.prod(x[..., None, :] ** expo, axis=-1), axis=-1))
        return np.stack(cols, axis=-1)

    def degree_values(self, k, eigenvalues):
        """All ``C_K`` of weight ``k`` at ``eigenvalues``; last axis follows ``partitions[k]``."""
        return self.monomials(k, eigenvalues) @ self._float[k].T

    def rows(self):
        """Yield ``(partition, exponent vector, Fraction)`` for every nonzero coefficient."""
        for k in range(self.kmax + 1):
            for a, K in enumerate(self.partitions[k]):
                for b, L in enumerate(self.partitions[k]):
                    c = self.coefficients[k][a][b]
                    if c != 0:
                        yield K, L.padded(self.p), c


def _check_sum_identity(table, rng):
    for k in range(table.kmax + 1):
        for _ in range(3):
            x = rng.uniform(-1.0, 1.0, size=table.p)
            total = float(np.sum(table.degree_values(k, x)))
            target = float(np.sum(x)) ** k
            if abs(total - target) > 1e-9 * (1.0 + abs(target)):
                raise ConstructionError(
                    f"sum identity fails at k={k}: {total!r} vs {target!r}"
                )


@functools.lru_cache(maxsize=32)
def build_zonal_table(kmax, p):
    """Build (and cache) the zonal table for ``k <= kmax`` and ``p x p`` arguments."""
    kmax, p = int(kmax), int(p)
    if kmax < 0 or p < 1:
        raise ValueError("need kmax >= 0 and p >= 1")
    if kmax > KMAX_LIMIT:
        raise CapExceeded(f"kmax={kmax} exceeds the supported limit {KMAX_LIMIT}")
    parts, coefs = [], []
    for k in range(kmax + 1):
        P, C = _zonal_coefficients(k, p)
        parts.append(tuple(P))
        coefs.append(tuple(tuple(row) for row in C))
    table = ZonalTable(kmax, p, tuple(parts), tuple(coefs))
    _check_sum_identity(table, np.random.default_rng(12345))
    return table


def _eigvals(Z, p=None):
    if isinstance(Z, np.ndarray) and Z.ndim >= 2:
        return np.linalg.eigvalsh(0.5 * (Z + np.swapaxes(Z, -1, -2)))
    Z = as_sym(Z)
    return Z.eigenvalues


def zonal_eval(table, K, Z):
    """``C_K(Z)`` evaluated at the eigenvalues of the symmetric matrix ``Z``."""
    K = Partition(K)
    x = _eigvals(Z)
    if x.shape[-1] > table.p:
        raise ValueError(f"table built for p={table.p}, argument is {x.shape[-1]}x{x.shape[-1]}")
    if len(K) > x.shape[-1]:
        table.index(K)
        return 0.0 if x.ndim == 1 else np.zeros(x.shape[:-1])
    if x.shape[-1] < table.p:
        x = np.concatenate([x, np.zeros(x.shape[:-1] + (table.p - x.shape[-1],))], axis=-1)
    k, i = table.index(K)
    vals = table.degree_values(k, x)[..., i]
    return float(vals) if np.ndim(vals) == 0 else vals


@dataclass(frozen=True)
class SeriesResult:
    value: float
    last_term_magnitude: float
    kmax: int
    degree_sums: tuple = ()

    @property
    def relative_tail(self):
        return self.last_term_magnitude / abs(self.value) if self.value else math.inf


def series_coefficients(a, b, table):
    """``prod (a_i)_K / prod (b_j)_K / k!`` for each degree; list of arrays."""
    out = []
    for k in range(table.kmax + 1):
        row = []
        for K in table.partitions[k]:
            num = 1.0
            for ai in a:
                num *= pochhammer_partition(ai, K)
            den = 1.0
            for bj in b:
                d = pochhammer_partition(bj, K)
                if d == 0.0:
                    raise PoleError(f"({bj})_K vanishes at K={K.label()}")
                den *= d
            row.append(num / den / math.factorial(k))
        out.append(np.array(row))
    return out


def hypergeometric_eigen(a, b, eigenvalues, table):
    """Truncated ``rFs`` at a stack of eigenvalue vectors.

    Returns ``(values, degree_terms)`` with ``degree_terms[..., k]`` the degree-k
    contribution.
    """
    x = np.asarray(eigenvalues, dtype=float)
    if x.shape[-1] < table.p:
        x = np.concatenate([x, np.zeros(x.shape[:-1] + (table.p - x.shape[-1],))], axis=-1)
    coefs = series_coefficients(a, b, table)
    terms = np.stack(
        [table.degree_values(k, x) @ coefs[k] for k in range(table.kmax + 1)], axis=-1
    )
    return terms.sum(axis=-1), terms


def hypergeometric_matrix(a, b, Z, kmax=8, table=None):
    """Partial sum of ``rFs(a; b; Z)`` through degree ``kmax``.

    ``last_term_magnitude`` is the absolute degree-``kmax`` contribution, a
    convergence indicator rather than a bound.
    """
    Z = as_sym(Z)
    if table is None:
        table = build_zonal_table(kmax, Z.p)
    value, terms = hypergeometric_eigen(list(a), list(b), Z.eigenvalues, table)
    return SeriesResult(
        float(value), float(abs(terms[-1])), table.kmax, tuple(float(t) for t in terms)
    )


# -- integral identities -----------------------------------------------------

@dataclass(frozen=True)
class LemmaCheck:
    lhs: EstimatorResult
    rhs: float

    @property
    def discrepancy(self):
        """Standardized ``(lhs - rhs) / se``; 0 when both sides agree exactly."""
        diff = self.lhs.estimate - self.rhs
        if self.lhs.std_error == 0.0:
            return 0.0 if abs(diff) <= 1e-12 * (1.0 + abs(self.rhs)) else math.copysign(math.inf, diff)
        return diff / self.lhs.std_error

    def passed(self, z=3.0, floor=1e-10):
        return abs(self.lhs.estimate - self.rhs) <= max(z * self.lhs.std_error, floor)


def _zonal_ratio_constant(p, alpha, beta, K):
    sa, la = signed_log_gamma_p_partition(p, alpha, K)
    sb, lb = signed_log_gamma_p_partition(p, alpha + beta, K)
    return sa * sb * math.exp(la + log_gamma_p(p, beta) - lb)


def _beta_zonal_draw(p, alpha, beta, K, R, table):
    """Draw function returning ``C_K(R X R)`` for ``X`` ~ type-1 beta(alpha, beta)."""

    def draw(rng, m):
        X = sample_type1_beta(p, alpha, beta, rng, size=m)
        return np.atleast_1d(zonal_eval(table, K, batch_congruence(X, R)))

    return draw


def lemma41_check(table, alpha, beta, K, T, samples=100_000, seed=0, workers=1):
    """Monte Carlo check of the zonal type-1 beta integral.

    Left side: ``int_{O<X<I} |X|^{a-(p+1)/2} |I-X|^{b-(p+1)/2} C_K(TX) dX``,
    estimated as ``B_p(a, b) E[C_K(T^{1/2} X T^{1/2})]`` with X ~ type-1 beta.
    Right side: ``Gamma_p(a, K) Gamma_p(b) / Gamma_p(a + b, K) C_K(T)``.
    """
    T = as_pd(T)
    p = T.p
    K = Partition(K)
    if not (alpha > 0.5 * (p - 1) and beta > 0.5 * (p - 1)):
        raise DomainError("Lemma check needs alpha, beta > (p-1)/2")
    R = batch_sqrt(T.array)
    est = mc_expectation(
        _beta_zonal_draw(p, alpha, beta, K, R, table), samples, seed,
        workers=workers, label=f"lemma41 K={K.label()}",
    ).scaled(math.exp(log_beta_p(p, alpha, beta)))
    rhs = _zonal_ratio_constant(p, alpha, beta, K) * zonal_eval(table, K, T)
    return LemmaCheck(est, rhs)


def lemma42_check(table, alpha, K, A, Z, samples=100_000, seed=0, workers=1):
    """Monte Carlo check of ``int_{O<S<A} |S|^{a-(p+1)/2} C_K(ZS) dS``.

    Uses ``S = A^{1/2} Y A^{1/2}`` with ``Y`` ~ type-1 beta(alpha, (p+1)/2), so
    the left side is ``|A|^alpha B_p(alpha, (p+1)/2) E[C_K(Z S)]``.
    """
    A = as_pd(A)
    Z = as_sym(Z)
    p = A.p
    K = Partition(K)
    if not alpha > 0.5 * (p - 1):
        raise DomainError("Lemma check needs alpha > (p-1)/2")
    beta = 0.5 * (p + 1)
    ra = batch_sqrt(A.array)
    zs = Z.array

    def draw(rng, m):
        Y = sample_type1_beta(p, alpha, beta, rng, size=m)
        S = batch_congruence(Y, ra)
        # eigenvalues of ZS equal those of S^{1/2} Z S^{1/2}
        rs = batch_sqrt(S)
        return np.atleast_1d(zonal_eval(table, K, rs @ zs @ rs))

    logdet_a = float(np.sum(np.log(A.eigenvalues)))
    est = mc_expectation(draw, samples, seed, workers=workers, label=f"lemma42 K={K.label()}")
    est = est.scaled(math.exp(alpha * logdet_a + log_beta_p(p, alpha, beta)))
    za = ra @ zs @ ra
    rhs = _zonal_ratio_constant(p, alpha, beta, K) * math.exp(alpha * logdet_a) * zonal_eval(
        table, K, za
    )
    return LemmaCheck(est, rhs)
