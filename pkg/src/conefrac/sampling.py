"""Random matrices on the positive definite cone and the Monte Carlo engine.

Reproducibility contract: a Monte Carlo estimate is a function of
``(seed, stream, n, block_size)`` only.  The sample is cut into fixed-size
blocks, block ``b`` draws from its own Philox stream keyed by
``(seed, stream, b)``, and block statistics are merged in block order.  The
worker count changes scheduling, never the numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DomainError, EnvelopeError, NonfiniteIntegrand
from .pdcore import (
    PDMatrix,
    as_pd,
    batch_congruence,
    batch_inv,
    batch_invsqrt,
    batch_logdet,
    batch_sqrt,
)

DEFAULT_BLOCK_SIZE = 4096


@dataclass(frozen=True)
class RngStream:
    """Seed plus stream index; ``generator(block)`` is a deterministic Philox generator."""

    seed: int
    stream: int = 0

    def generator(self, block=0):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), int(block)))
        return np.random.Generator(np.random.Philox(ss))


def as_stream(rng):
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        raise ValueError("a seed is required; there is no entropy default")
    return RngStream(int(rng))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return as_stream(rng).generator()


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    std_error: float
    n: int
    seed: int | None = None
    label: str = ""

    def scaled(self, c):
        return replace(self, estimate=self.estimate * c, std_error=self.std_error * abs(c))

    def shifted(self, c):
        return replace(self, estimate=self.estimate + c)

    def z_score(self, target):
        if self.std_error == 0.0:
            return 0.0 if self.estimate == target else math.copysign(math.inf, self.estimate - target)
        return (self.estimate - target) / self.std_error

    def agrees(self, target, z=3.0, floor=1e-10):
        return abs(self.estimate - target) <= max(z * self.std_error, floor)

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n": self.n,
            "seed": self.seed,
            "label": self.label,
        }


def _block_stats(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise NonfiniteIntegrand("Monte Carlo draw produced non-finite values")
    mean = x.mean(axis=0)
    m2 = ((x - mean) ** 2).sum(axis=0)
    return x.shape[0], mean, m2


def _merge(a, b):
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), sa + sb + delta**2 * (na * nb / n)


def mc_moments(draw, n, rng, *, block_size=DEFAULT_BLOCK_SIZE, workers=1):
    """Blockwise mean and variance of ``draw(generator, m)`` over ``n`` draws.

    ``draw`` returns shape ``(m,)`` or ``(m, d)``.  Returns ``(mean, var, n)``
    with arrays of length ``d``.
    """
    n = int(n)
    if n < 2:
        raise ValueError("need at least two samples")
    stream = as_stream(rng)
    sizes = [min(block_size, n - start) for start in range(0, n, block_size)]

    def run(b):
        return _block_stats(draw(stream.generator(b), sizes[b]))

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            stats = list(ex.map(run, range(len(sizes))))
    else:
        stats = [run(b) for b in range(len(sizes))]
    acc = stats[0]
    for s in stats[1:]:
        acc = _merge(acc, s)
    total, mean, m2 = acc
    return mean, m2 / (total - 1), total


def mc_expectation(draw, n, rng, *, block_size=DEFAULT_BLOCK_SIZE, workers=1, label=""):
    """Mean and standard error of a scalar draw function as an :class:`EstimatorResult`."""
    mean, var, total = mc_moments(draw, n, rng, block_size=block_size, workers=workers)
    stream = as_stream(rng)
    return EstimatorResult(float(mean[0]), float(math.sqrt(var[0] / total)), total, stream.seed, label)


# -- samplers ----------------------------------------------------------------

def _scale_root(B, p):
    """``B^{-1/2}`` as an array, or a float when ``B`` is scalar."""
    if B is None:
        return 1.0
    if np.isscalar(B):
        if not B > 0:
            raise DomainError("scale must be positive")
        return 1.0 / math.sqrt(B)
    B = as_pd(B)
    if B.p != p:
        raise ValueError(f"scale is {B.p}x{B.p}, expected {p}x{p}")
    return batch_invsqrt(B.array)


def _finish(X, size):
    if size is None:
        return PDMatrix(X[0])
    return X


def bartlett_gamma(p, shape, rng, m):
    """Standard matrix-gamma draws (density prop. to ``|X|^{shape-(p+1)/2} e^{-tr X}``)."""
    j = np.arange(p)
    diag = np.sqrt(rng.standard_gamma(shape - 0.5 * j, size=(m, p)))
    L = np.zeros((m, p, p))
    L[:, j, j] = diag
    if p > 1:
        rows, cols = np.tril_indices(p, -1)
        L[:, rows, cols] = rng.standard_normal((m, rows.size)) * math.sqrt(0.5)
    return L @ np.swapaxes(L, 1, 2)


def sample_matrix_gamma(p, shape, B=None, rng=None, size=None):
    """Draws from the matrix gamma density ``|B|^g |X|^{g-(p+1)/2} e^{-tr(BX)} / Gamma_p(g)``.

    Bartlett construction: the squared diagonal of the lower factor is
    chi-square with ``2(g - (j-1)/2)`` degrees of freedom, the off-diagonal is
    normal; the result is conjugated by ``B^{-1/2}``.
    """
    if not shape > 0.5 * (p - 1):
        raise DomainError(f"matrix gamma shape must exceed {(p - 1) / 2}")
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    X = bartlett_gamma(p, shape, gen, m)
    r = _scale_root(B, p)
    X = X * r**2 if np.isscalar(r) else batch_congruence(X, r)
    return _finish(X, size)


def sample_type1_beta(p, a, b, rng=None, size=None):
    """Type-1 matrix beta via ``S^{-1/2} G1 S^{-1/2}`` with ``S = G1 + G2``."""
    if not (a > 0.5 * (p - 1) and b > 0.5 * (p - 1)):
        raise DomainError(f"type-1 beta parameters must exceed {(p - 1) / 2}")
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    G1 = bartlett_gamma(p, a, gen, m)
    G2 = bartlett_gamma(p, b, gen, m)
    if p == 1:
        X = G1 / (G1 + G2)
    else:
        X = batch_congruence(G1, batch_invsqrt(G1 + G2))
    return _finish(X, size)


def sample_type2_beta(p, a, b, rng=None, size=None):
    """Type-2 matrix beta via ``G2^{-1/2} G1 G2^{-1/2}``."""
    if not (a > 0.5 * (p - 1) and b > 0.5 * (p - 1)):
        raise DomainError(f"type-2 beta parameters must exceed {(p - 1) / 2}")
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    G1 = bartlett_gamma(p, a, gen, m)
    G2 = bartlett_gamma(p, b, gen, m)
    if p == 1:
        U = G1 / G2
    else:
        U = batch_congruence(G1, batch_invsqrt(G2))
    return _finish(U, size)


def sample_pathway(params, rng=None, size=None):
    """Pathway draws through the scaled type-1 beta representation.

    ``W`` ~ type-1 beta with the kind-specific shapes, then ``X = W / (a(1-q))``
    or ``X = (1-q)^{-1} A^{-1/2} W A^{-1/2}``.
    """
    p = params.p
    a1, b1 = params.beta_shapes()
    m = 1 if size is None else int(size)
    W = sample_type1_beta(p, a1, b1, rng, size=m)
    X = W / (1.0 - params.q)
    if params.is_matrix:
        X = batch_congruence(X, batch_invsqrt(params.scale.array))
    else:
        X = X / params.scale
    return _finish(X, size)


def sample_product(f1_sampler, f2_sampler, rng=None, size=None):
    """``U = X2^{1/2} X1 X2^{1/2}`` for independent draws from the two samplers.

    Samplers are callables ``(generator, m) -> (m, p, p)``.
    """
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    X1 = f1_sampler(gen, m)
    X2 = f2_sampler(gen, m)
    if X1.shape[-1] == 1:
        U = X1 * X2
    else:
        U = batch_congruence(X1, batch_sqrt(X2))
    return _finish(U, size)


def sample_ratio(f1_sampler, f2_sampler, rng=None, size=None):
    """``U = X2^{1/2} X1^{-1} X2^{1/2}`` for independent draws."""
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    X1 = f1_sampler(gen, m)
    X2 = f2_sampler(gen, m)
    if X1.shape[-1] == 1:
        U = X2 / X1
    else:
        U = batch_congruence(batch_inv(X1), batch_sqrt(X2))
    return _finish(U, size)


def det_moment(sampler, h, n, rng, *, workers=1, block_size=DEFAULT_BLOCK_SIZE, label=""):
    """Sample mean and standard error of ``|X|^h`` under ``sampler(generator, m)``."""

    def draw(gen, m):
        return np.exp(h * batch_logdet(sampler(gen, m)))

    return mc_expectation(
        draw, n, rng, workers=workers, block_size=block_size, label=label or f"E|X|^{h}"
    )


def sample_hyper_weighted_beta(density, rng=None, size=None, max_proposals=10_000_000):
    """Rejection sampler for the hypergeometric-weighted type-1 beta density.

    Proposals come from the plain type-1 beta; the envelope is 1.5 times the
    largest series weight seen on the probe set the density was built with.
    """
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    p = density.p
    a1, b1 = density.beta_shapes
    out = []
    have = 0
    used = 0
    batch = max(64, 2 * m)
    while have < m:
        if used >= max_proposals:
            raise EnvelopeError(f"accepted {have} of {m} after {used} proposals")
        X = sample_type1_beta(p, a1, b1, gen, size=batch)
        w = density.weight(X)
        accept = gen.uniform(size=batch) * density.envelope < w
        out.append(X[accept])
        have += int(accept.sum())
        used += batch
    return _finish(np.concatenate(out)[:m], size)
