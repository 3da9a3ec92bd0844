"""Catalog of matrix-variate densities on the positive definite cone.

Normalizing constants are always derived from the underlying beta or gamma
integral through the change of variables that maps a density onto a plain
type-1 beta or matrix gamma law; none are transcribed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sampling
from .exceptions import DomainError
from .pdcore import (
    PDMatrix,
    SymMatrix,
    as_pd,
    as_sym,
    batch_congruence,
    batch_spectral,
    batch_sqrt,
    check_matrix_stack,
)
from .special import log_beta_p, log_gamma_p

FIRST = "first"
SECOND = "second"


def _eig_stack(X, p):
    X = check_matrix_stack(X, p, require_pd=False)
    if p == 1:
        return X, X[:, :, 0]
    return X, np.linalg.eigvalsh(X)


def _power_term(c, w):
    """``c * sum(log w)`` on the open cone, ``-inf`` off it (also when ``c == 0``)."""
    out = np.full(w.shape[:-1], -np.inf)
    ok = np.all(w > 0, axis=-1)
    out[ok] = c * np.sum(np.log(w[ok]), axis=-1)
    return out


def _is_single(X, p):
    if isinstance(X, SymMatrix) or np.ndim(X) == 0:
        return True
    return np.ndim(X) == 2 and (p > 1 or np.shape(X) == (1, 1))


def _scalar_out(val, X, p):
    return float(val[0]) if _is_single(X, p) else val


class MatrixDensity:
    """A normalized density on ``p x p`` positive definite matrices.

    ``log_pdf`` accepts one matrix or a stack and returns ``-inf`` exactly
    where ``support`` is false.  ``log_m_transform(s)`` (when available) is the
    log of ``int |X|^{s-(p+1)/2} f(X) dX = E|X|^{s-(p+1)/2}``.
    """

    def __init__(self, p, kernel, label, params=None, log_m_transform=None, sampler=None,
                 rate=None):
        self.p = int(p)
        self._kernel = kernel
        self.label = label
        self.params = dict(params or {})
        self._log_m = log_m_transform
        self._sampler = sampler
        self.rate = rate

    def _log_pdf_stack(self, X):
        X, w = _eig_stack(X, self.p)
        out = self._kernel(X, w)
        out = np.where(np.isnan(out), -np.inf, out)
        return out

    def log_pdf(self, X):
        return _scalar_out(self._log_pdf_stack(X), X, self.p)

    def pdf(self, X):
        return np.exp(self.log_pdf(X))

    def pdf_stack(self, X):
        return np.exp(self._log_pdf_stack(X))

    def __call__(self, X):
        return self.pdf_stack(X)

    def support(self, X):
        val = np.isfinite(self._log_pdf_stack(X))
        return bool(val[0]) if _is_single(X, self.p) else val

    @property
    def has_m_transform(self):
        return self._log_m is not None

    def log_m_transform(self, s):
        if self._log_m is None:
            raise DomainError(f"{self.label} has no closed-form M-transform")
        return self._log_m(s)

    def m_transform(self, s):
        return math.exp(self.log_m_transform(s))

    @property
    def can_sample(self):
        return self._sampler is not None

    def sampler(self, gen, m):
        """Draw ``m`` matrices as an ``(m, p, p)`` array."""
        if self._sampler is None:
            raise NotImplementedError(f"no sampler for {self.label}")
        return self._sampler(gen, m)

    def rvs(self, size=None, rng=None):
        gen = sampling.as_generator(rng)
        X = self.sampler(gen, 1 if size is None else size)
        return PDMatrix(X[0]) if size is None else X

    def __repr__(self):
        return f"MatrixDensity({self.label}, p={self.p}, {self.params})"


def _check_shape(p, name, value, bound=None):
    bound = 0.5 * (p - 1) if bound is None else bound
    if not value > bound:
        raise DomainError(f"{name}={value} must exceed {bound} for p={p}")


def _beta_kernel(p, a, b):
    lc = -log_beta_p(p, a, b)
    ea, eb = a - 0.5 * (p + 1), b - 0.5 * (p + 1)

    def kernel(X, w):
        inside = np.all((w > 0) & (w < 1), axis=-1)
        out = np.full(w.shape[:-1], -np.inf)
        wi = w[inside]
        out[inside] = lc + ea * np.sum(np.log(wi), axis=-1) + eb * np.sum(np.log1p(-wi), axis=-1)
        return out

    return kernel


def type1_beta(p, a, b):
    """Type-1 matrix beta on ``O < X < I``."""
    _check_shape(p, "a", a)
    _check_shape(p, "b", b)
    h0 = 0.5 * (p + 1)

    def log_m(s):
        return log_beta_p(p, a + s - h0, b) - log_beta_p(p, a, b)

    return MatrixDensity(
        p, _beta_kernel(p, a, b), "type1_beta", {"a": a, "b": b}, log_m,
        lambda gen, m: sampling.sample_type1_beta(p, a, b, gen, size=m),
    )


def type2_beta(p, a, b):
    """Type-2 matrix beta, density prop. to ``|U|^{a-(p+1)/2} |I+U|^{-(a+b)}``."""
    _check_shape(p, "a", a)
    _check_shape(p, "b", b)
    h0 = 0.5 * (p + 1)
    lc = -log_beta_p(p, a, b)

    def kernel(X, w):
        out = np.full(w.shape[:-1], -np.inf)
        ok = np.all(w > 0, axis=-1)
        wi = w[ok]
        out[ok] = lc + (a - h0) * np.sum(np.log(wi), axis=-1) - (a + b) * np.sum(np.log1p(wi), axis=-1)
        return out

    def log_m(s):
        h = s - h0
        return log_beta_p(p, a + h, b - h) - log_beta_p(p, a, b)

    return MatrixDensity(
        p, kernel, "type2_beta", {"a": a, "b": b}, log_m,
        lambda gen, m: sampling.sample_type2_beta(p, a, b, gen, size=m),
    )


def matrix_gamma(p, shape, B=None):
    """``|B|^g |X|^{g-(p+1)/2} e^{-tr(BX)} / Gamma_p(g)``; ``B`` scalar or PD (default I)."""
    _check_shape(p, "shape", shape)
    h0 = 0.5 * (p + 1)
    if B is None:
        B = 1.0
    if np.isscalar(B):
        b = float(B)
        if not b > 0:
            raise DomainError("scale must be positive")
        Bm = b * np.eye(p)
        logdet_b = p * math.log(b)
        rate = b
        B_param = b
    else:
        Bp = as_pd(B)
        if Bp.p != p:
            raise ValueError("scale dimension mismatch")
        Bm = Bp.array
        logdet_b = float(np.sum(np.log(Bp.eigenvalues)))
        rate = float(Bp.eigenvalues[-1])
        B_param = Bp.to_dict()
    lc = shape * logdet_b - log_gamma_p(p, shape)

    def kernel(X, w):
        tr = np.einsum("ij,nji->n", Bm, X)
        return lc + _power_term(shape - h0, w) - tr

    def log_m(s):
        h = s - h0
        return log_gamma_p(p, shape + h) - log_gamma_p(p, shape) - h * logdet_b

    B_draw = B if np.isscalar(B) else PDMatrix(Bm)

    def draw(gen, m):
        return sampling.sample_matrix_gamma(p, shape, B_draw, gen, size=m)

    return MatrixDensity(
        p, kernel, "matrix_gamma", {"shape": shape, "B": B_param}, log_m, draw, rate=rate
    )


@dataclass(frozen=True)
class PathwayParams:
    """Pathway family parameters.

    ``kind="second"``: kernel ``|X|^gamma |I - a(1-q)X|^{eta/(1-q)}``.
    ``kind="first"``: kernel ``|X|^{gamma-(p+1)/2} |I - a(1-q)X|^{eta/(1-q)}``.
    ``scale`` is a positive scalar ``a`` or a PD matrix ``A`` (then the kernel
    uses ``I - (1-q) A^{1/2} X A^{1/2}``).
    """

    gamma: float
    eta: float
    q: float
    scale: object = 1.0
    kind: str = SECOND
    p: int = 1

    def __post_init__(self):
        if self.kind not in (FIRST, SECOND):
            raise ValueError(f"kind must be 'first' or 'second', got {self.kind!r}")
        if isinstance(self.scale, (SymMatrix, np.ndarray, list)):
            A = as_pd(self.scale)
            object.__setattr__(self, "scale", A)
            object.__setattr__(self, "p", A.p)
        else:
            if not float(self.scale) > 0:
                raise DomainError("pathway scale a must be positive")
            object.__setattr__(self, "scale", float(self.scale))
        if not self.q < 1:
            raise DomainError("pathway parameter q must be < 1")
        if not self.eta > 0:
            raise DomainError("eta must be positive")
        a1, b1 = self.beta_shapes()
        _check_shape(self.p, "gamma-derived shape", a1)
        _check_shape(self.p, "eta/(1-q)+(p+1)/2", b1)

    @property
    def is_matrix(self):
        return isinstance(self.scale, PDMatrix)

    @property
    def exponent(self):
        """``eta / (1 - q)``."""
        return self.eta / (1.0 - self.q)

    def beta_shapes(self):
        """Shapes of the type-1 beta law of the rescaled variable ``W``."""
        h0 = 0.5 * (self.p + 1)
        a1 = self.gamma + h0 if self.kind == SECOND else self.gamma
        return a1, self.exponent + h0

    def log_jacobian(self):
        """``log |dW/dX|`` for the rescaling onto the type-1 beta variable."""
        p = self.p
        d = 0.5 * p * (p + 1)
        if self.is_matrix:
            return d * math.log1p(-self.q) + 0.5 * (p + 1) * float(np.sum(np.log(self.scale.eigenvalues)))
        return d * math.log(self.scale * (1.0 - self.q))

    def to_w(self, X):
        """Map a stack of X to the type-1 beta variable W."""
        if self.is_matrix:
            return (1.0 - self.q) * batch_congruence(X, batch_sqrt(self.scale.array))
        return self.scale * (1.0 - self.q) * X

    def limit_rate(self):
        """``a eta`` (scalar) or ``eta A`` (matrix): the q -> 1 exponential rate."""
        if self.is_matrix:
            return PDMatrix(self.eta * self.scale.array)
        return self.scale * self.eta

    def to_dict(self):
        scale = self.scale.to_dict() if self.is_matrix else self.scale
        return {"gamma": self.gamma, "eta": self.eta, "q": self.q, "scale": scale,
                "kind": self.kind, "p": self.p}


def pathway_log_constant(params):
    """Log of the constant multiplying the pathway kernel, from the type-1 beta integral."""
    p = params.p
    h0 = 0.5 * (p + 1)
    a1, b1 = params.beta_shapes()
    if params.is_matrix:
        log_scale_det = p * math.log1p(-params.q) + float(np.sum(np.log(params.scale.eigenvalues)))
    else:
        log_scale_det = p * math.log(params.scale * (1.0 - params.q))
    return params.log_jacobian() + (a1 - h0) * log_scale_det - log_beta_p(p, a1, b1)


def pathway_density(params):
    """Pathway density; normalized through the scaled type-1 beta representation."""
    p = params.p
    a1, b1 = params.beta_shapes()
    beta_kernel = _beta_kernel(p, a1, b1)
    ljac = params.log_jacobian()

    def kernel(X, w):
        W = params.to_w(X)
        ww = w * params.scale * (1.0 - params.q) if not params.is_matrix else np.linalg.eigvalsh(W)
        return beta_kernel(W, ww) + ljac

    h0 = 0.5 * (p + 1)

    def log_m(s):
        # E|X|^h = E|W|^h / |dW/dX scale|^h
        h = s - h0
        shift = p * math.log(1.0 - params.q)
        if params.is_matrix:
            shift += float(np.sum(np.log(params.scale.eigenvalues)))
        else:
            shift += p * math.log(params.scale)
        return log_beta_p(p, a1 + h, b1) - log_beta_p(p, a1, b1) - h * shift

    rate = None
    if not params.is_matrix:
        rate = params.scale * params.eta
    return MatrixDensity(
        p, kernel, f"pathway_{params.kind}", params.to_dict(), log_m,
        lambda gen, m: sampling.sample_pathway(params, gen, size=m), rate=rate,
    )


def pathway_kernel(X, a, eta, q):
    """``|I - a(1-q)X|^{eta/(1-q)}`` (zero outside the support)."""
    w = np.linalg.eigvalsh(np.atleast_2d(as_sym(X).array if isinstance(X, SymMatrix) else X))
    t = 1.0 - a * (1.0 - q) * w
    if np.any(t <= 0):
        return 0.0
    return float(np.exp(eta / (1.0 - q) * np.sum(np.log(t))))


def pathway_limit_density(p, gamma, a_eta_product, kind=SECOND):
    """q -> 1 limit of the pathway family: a matrix gamma with rate ``a eta``.

    Second kind: shape ``gamma + (p+1)/2``; first kind: shape ``gamma``.
    A PD matrix ``a_eta_product`` stands for ``eta A``.
    """
    shape = gamma + 0.5 * (p + 1) if kind == SECOND else gamma
    d = matrix_gamma(p, shape, a_eta_product)
    d.label = f"pathway_{kind}_limit"
    d.params = {"gamma": gamma, "a_eta": d.params["B"], "kind": kind}
    return d


class HyperWeightedBeta(MatrixDensity):
    """Type-1 beta kernel weighted by a truncated ``rFs(a; b; A X)``.

    Density ``rFs(a; b; AX) |X|^zeta |I-X|^{alpha-(p+1)/2} / c_f`` on ``O < X < I``
    with ``c_f = B_p(zeta+(p+1)/2, alpha) r+1Fs+1(a, zeta+(p+1)/2; b, zeta+alpha+(p+1)/2; A)``
    obtained by integrating the series term by term.
    """

    def __init__(self, p, zeta, alpha, A, a_list, b_list, table=None, kmax=8, probes=1000):
        from .zonal import build_zonal_table, hypergeometric_eigen, hypergeometric_matrix

        h0 = 0.5 * (p + 1)
        _check_shape(p, "zeta+(p+1)/2", zeta + h0)
        _check_shape(p, "alpha", alpha)
        A = as_sym(np.zeros((p, p)) if A is None else A)
        if A.p != p:
            raise ValueError("weight matrix dimension mismatch")
        if np.any(A.eigenvalues < -1e-12):
            raise DomainError("weight matrix must be positive semidefinite")
        if table is None:
            table = build_zonal_table(kmax, p)
        self.table = table
        self.zeta, self.alpha = zeta, alpha
        self.a_list, self.b_list = list(a_list), list(b_list)
        self.A = A
        self.beta_shapes = (zeta + h0, alpha)
        self._ra = batch_spectral(A.array, lambda w: np.sqrt(np.clip(w, 0.0, None))) if np.any(A.array) else None
        self._hyp = hypergeometric_eigen
        self.normalizer = hypergeometric_matrix(
            self.a_list + [zeta + h0], self.b_list + [zeta + alpha + h0], A, table=table
        )
        if not self.normalizer.value > 0:
            raise DomainError("normalizing series is not positive")
        log_cf = log_beta_p(p, zeta + h0, alpha) + math.log(self.normalizer.value)
        self.log_normalizer = log_cf

        gen = np.random.default_rng(0)
        probe = sampling.sample_type1_beta(p, zeta + h0, alpha, gen, size=probes)
        probe = np.concatenate([probe, np.eye(p)[None]])
        w = self.weight(probe)
        if np.any(w < 0):
            raise DomainError("hypergeometric weight is negative on the support")
        self.envelope = 1.5 * float(np.max(w))

        def kernel(X, ev):
            inside = np.all((ev > 0) & (ev < 1), axis=-1)
            out = np.full(ev.shape[:-1], -np.inf)
            if np.any(inside):
                wt = self.weight(X[inside])
                with np.errstate(divide="ignore"):
                    out[inside] = (np.log(wt) - log_cf + zeta * np.sum(np.log(ev[inside]), axis=-1)
                                   + (alpha - h0) * np.sum(np.log1p(-ev[inside]), axis=-1))
            return out

        def log_m(s):
            res = hypergeometric_matrix(
                self.a_list + [zeta + s], self.b_list + [zeta + alpha + s], A, table=table
            )
            return log_beta_p(p, zeta + s, alpha) + math.log(res.value) - log_cf

        super().__init__(
            p, kernel, "hyper_weighted_beta",
            {"zeta": zeta, "alpha": alpha, "A": A.to_dict(), "a": self.a_list, "b": self.b_list,
             "kmax": table.kmax},
            log_m, lambda gen, m: sampling.sample_hyper_weighted_beta(self, gen, size=m),
        )

    def weight_terms(self, X):
        """Per-degree contributions of the truncated series at ``A X``; shape ``(n, kmax+1)``."""
        X = np.asarray(X, dtype=float)
        if self._ra is None:
            terms = np.zeros(X.shape[:-2] + (self.table.kmax + 1,))
            terms[..., 0] = 1.0
            return terms
        ev = np.linalg.eigvalsh(batch_congruence(X, self._ra))
        return self._hyp(self.a_list, self.b_list, ev, self.table)[1]

    def weight(self, X):
        return self.weight_terms(X).sum(axis=-1)


def hyper_weighted_beta(p, zeta, alpha, A, a_list, b_list, table=None, kmax=8):
    return HyperWeightedBeta(p, zeta, alpha, A, a_list, b_list, table=table, kmax=kmax)


class DetPower:
    """Test function ``X -> |X|^lam`` on stacks of matrices."""

    def __init__(self, lam):
        self.lam = float(lam)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        # quadrature can touch the boundary |X| = 0, where the limit is 0 or inf
        with np.errstate(divide="ignore"):
            return np.exp(self.lam * np.sum(np.log(np.linalg.eigvalsh(X)), axis=-1))

    def __repr__(self):
        return f"DetPower({self.lam})"


def det_power(lam):
    return DetPower(lam)


CATALOG = {
    "type1_beta": lambda d: type1_beta(d["p"], d["a"], d["b"]),
    "type2_beta": lambda d: type2_beta(d["p"], d["a"], d["b"]),
    "matrix_gamma": lambda d: matrix_gamma(d["p"], d["shape"], _scale_from(d.get("B"))),
    "pathway": lambda d: pathway_density(_pathway_from(d)),
    "pathway_limit": lambda d: pathway_limit_density(
        d["p"], d["gamma"], _scale_from(d["a_eta"]), d.get("kind", SECOND)
    ),
    "hyper_weighted_beta": lambda d: hyper_weighted_beta(
        d["p"], d["zeta"], d["alpha"], _scale_from(d.get("A"), pd=False), d.get("a", []),
        d.get("b", []), kmax=d.get("kmax", 8)
    ),
}


def _scale_from(value, pd=True):
    if value is None or np.isscalar(value):
        return value
    if isinstance(value, dict):
        m = SymMatrix.from_dict(value)
        return as_pd(m) if pd else m
    return as_pd(value) if pd else as_sym(value)


def _pathway_from(d):
    return PathwayParams(
        gamma=d["gamma"], eta=d["eta"], q=d["q"], scale=_scale_from(d.get("scale", 1.0)),
        kind=d.get("kind", SECOND), p=d.get("p", 1),
    )


def density_from_config(cfg):
    """Build a catalog density from ``{"density": label, ...params}``."""
    cfg = dict(cfg)
    label = cfg.pop("density", None)
    if label not in CATALOG:
        raise KeyError(f"unknown density {label!r}; known: {sorted(CATALOG)}")
    return CATALOG[label](cfg)
