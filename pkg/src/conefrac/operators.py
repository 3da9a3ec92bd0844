"""Fractional integral operators of positive definite matrix argument.

Each operator is evaluated at a point through an exact expectation: a change
of variables turns the cone integral into the mean of ``f`` under a type-1 or
type-2 matrix beta (or matrix gamma) law, times a ratio of ``Gamma_p``
values.  For ``p = 1`` every operator also has a quadrature path that
integrates the defining formula directly.

Kober, second kind:  ``|U|^z / G(a) int_{T>U} |T-U|^{a-(p+1)/2} |T|^{-z-a} f(T) dT``
    ``T = U^{1/2}(I+S)U^{1/2}``, S ~ type-2 beta(a, z), constant ``G(z)/G(a+z)``.
Kober, first kind:   ``|X|^{-z-a} / G(a) int_{V<X} |X-V|^{a-(p+1)/2} |V|^z f(V) dV``
    ``V = X^{1/2} Y X^{1/2}``, Y ~ type-1 beta(z+(p+1)/2, a), constant
    ``G(z+(p+1)/2)/G(z+a+(p+1)/2)``.
Here ``G`` is ``Gamma_p``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .densities import (
    FIRST,
    SECOND,
    HyperWeightedBeta,
    MatrixDensity,
    PathwayParams,
    pathway_density,
    pathway_limit_density,
    pathway_log_constant,
)
from .exceptions import DomainError, HeavyTailWarning, NonfiniteIntegrand
from .pdcore import (
    PDMatrix,
    as_pd,
    batch_congruence,
    batch_inv,
    batch_invsqrt,
    batch_logdet,
    batch_sqrt,
    batch_trace,
)
from .sampling import (
    EstimatorResult,
    mc_expectation,
    mc_moments,
    sample_matrix_gamma,
    sample_type1_beta,
    sample_type2_beta,
    as_stream,
)
from .special import log_beta_p, log_gamma_p

KINDS = ("kober2", "kober1", "weyl", "rl", "pathway2", "pathway1", "pathway2_limit",
         "pathway1_limit", "hyper2")

QUAD_OPTS = {"epsabs": 1e-13, "epsrel": 1e-11, "limit": 500}


@dataclass(frozen=True)
class OperatorEvaluation:
    """Result of evaluating an operator at one point.

    ``value`` is an :class:`EstimatorResult` for Monte Carlo paths and a float
    for the ``p = 1`` quadrature path.
    """

    value: object
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def estimate(self):
        return self.value.estimate if isinstance(self.value, EstimatorResult) else float(self.value)

    @property
    def std_error(self):
        return self.value.std_error if isinstance(self.value, EstimatorResult) else 0.0

    def to_dict(self):
        value = self.value.to_dict() if isinstance(self.value, EstimatorResult) else self.value
        return {"value": value, "method": self.method, "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class OperatorSpec:
    """Which operator to apply and with which parameters."""

    kind: str
    zeta: float = 0.0
    alpha: float = 1.0
    pathway: PathwayParams | None = None
    a_eta: object = None
    gamma: float | None = None
    a_list: tuple = ()
    b_list: tuple = ()
    A_h: object = None
    kmax: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; known: {KINDS}")


# -- helpers -----------------------------------------------------------------

def _integrand(f):
    """Wrap ``f`` as a function of an ``(m, p, p)`` stack returning ``(m,)``."""
    if isinstance(f, MatrixDensity):
        return f.pdf_stack

    def g(X):
        return np.asarray(f(X), dtype=float).reshape(X.shape[0])

    return g


def _scalar_integrand(f):
    g = _integrand(f)
    return lambda t: float(g(np.array([[[t]]]))[0])


def _check_alpha(p, alpha):
    if not alpha > 0.5 * (p - 1):
        raise DomainError(f"alpha={alpha} must exceed {(p - 1) / 2}")


def _point(U):
    return as_pd(U)


def _quad(fun, a, b, **kw):
    opts = dict(QUAD_OPTS)
    opts.update(kw)
    val, err = integrate.quad(fun, a, b, **opts)
    if not math.isfinite(val):
        raise NonfiniteIntegrand("quadrature returned a non-finite value")
    return val, err


def _quad_singular_right(fun, x, alpha):
    """``int_x^inf (t - x)^(alpha-1) fun(t) dt`` with the endpoint singularity weighted out."""
    v1, e1 = _quad(fun, x, 2.0 * x + 1.0, weight="alg", wvar=(alpha - 1.0, 0.0))
    v2, e2 = _quad(lambda t: (t - x) ** (alpha - 1.0) * fun(t), 2.0 * x + 1.0, np.inf)
    return v1 + v2, e1 + e2


def _mc(draw, n, rng, workers, log_const, label):
    return mc_expectation(draw, n, rng, workers=workers, label=label).scaled(math.exp(log_const))


def _require_p1(U, method):
    if U.p != 1:
        raise ValueError(f"method={method!r} is only available for p=1")


def _type2_draw(a2, b2, c, U, g):
    """Draw ``g(c U^{1/2}(I+S)U^{1/2})`` with S ~ type-2 beta(a2, b2)."""
    p = U.p
    R = batch_sqrt(U.array)
    eye = np.eye(p)

    def draw(gen, m):
        S = sample_type2_beta(p, a2, b2, gen, size=m)
        return g(c * batch_congruence(eye + S, R))

    return draw


def _type1_draw(a1, b1, c, X, g):
    """Draw ``g(c X^{1/2} Y X^{1/2})`` with Y ~ type-1 beta(a1, b1)."""
    R = batch_sqrt(X.array)

    def draw(gen, m):
        Y = sample_type1_beta(X.p, a1, b1, gen, size=m)
        return g(c * batch_congruence(Y, R))

    return draw


def _mixture_draw(f, kernel_density, U, kind):
    """Density of a product (``kind='product'``) or ratio at ``U`` as an expectation over V ~ f."""
    if not (isinstance(f, MatrixDensity) and f.can_sample):
        raise ValueError("the mixture route needs f to be a sampleable MatrixDensity")
    p = U.p
    h0 = 0.5 * (p + 1)
    u = U.array
    logdet_u = float(np.sum(np.log(U.eigenvalues)))
    u_inv = np.linalg.inv(u)

    def draw(gen, m):
        V = f.sampler(gen, m)
        logdet_v = batch_logdet(V)
        if kind == "product":
            X1 = batch_congruence(u, batch_invsqrt(V))
            return np.exp(kernel_density._log_pdf_stack(X1) - h0 * logdet_v)
        X1 = batch_congruence(u_inv, batch_sqrt(V))
        return np.exp(kernel_density._log_pdf_stack(X1) + h0 * logdet_v - (p + 1) * logdet_u)

    return draw


def _weight_warning(weights, label):
    w = np.abs(weights)
    total = w.sum()
    share = float(w.max() / total) if total > 0 else 1.0
    if share > 0.05:
        warnings.warn(f"{label}: one draw carries {share:.1%} of the total weight", HeavyTailWarning)
    return share


# -- Kober operators ---------------------------------------------------------

def kober2_apply(spec, f, U, n=100_000, rng=0, *, workers=1, method="mc"):
    """Kober operator of the second kind at ``U``.

    ``spec`` is an :class:`OperatorSpec` (or a ``(zeta, alpha)`` pair).
    ``method="quadrature"`` integrates the definition directly (p = 1 only).
    For ``zeta <= (p-1)/2`` the type-2 beta(alpha, zeta) law does not exist; a
    type-2 beta with a larger second shape is used with explicit weights.
    """
    zeta, alpha = _za(spec)
    U = _point(U)
    p = U.p
    _check_alpha(p, alpha)
    if not zeta > -1:
        raise DomainError("zeta must exceed -1")
    g = _integrand(f)
    if method == "quadrature":
        _require_p1(U, method)
        u = float(U.array[0, 0])
        fs = _scalar_integrand(f)
        val, err = _quad_singular_right(lambda t: t ** (-zeta - alpha) * fs(t), u, alpha)
        return OperatorEvaluation(u**zeta * val / math.gamma(alpha), "quadrature", {"abserr": err})
    if zeta > 0.5 * (p - 1):
        log_c = log_gamma_p(p, zeta) - log_gamma_p(p, alpha + zeta)
        est = _mc(_type2_draw(alpha, zeta, 1.0, U, g), n, rng, workers, log_c, "kober2")
        return OperatorEvaluation(est, "type2_beta", {})
    # fallback: S ~ type-2 beta(alpha, z1) with z1 > (p-1)/2 and weight |I+S|^{z1-zeta}
    z1 = 0.5 * (p - 1) + 0.5
    R = batch_sqrt(U.array)
    eye = np.eye(p)

    def draw(gen, m):
        S = sample_type2_beta(p, alpha, z1, gen, size=m)
        IS = eye + S
        return np.exp((z1 - zeta) * batch_logdet(IS)) * g(batch_congruence(IS, R))

    log_c = log_gamma_p(p, z1) - log_gamma_p(p, alpha + z1)
    mean, var, total = mc_moments(draw, n, rng, workers=workers)
    c = math.exp(log_c)
    est = EstimatorResult(float(mean[0]) * c, float(math.sqrt(var[0] / total)) * c, total,
                          as_stream(rng).seed, "kober2/weighted")
    cv = math.sqrt(var[0]) / abs(mean[0]) if mean[0] else math.inf
    if cv > 50:
        warnings.warn(f"kober2 weighted proposal has coefficient of variation {cv:.1f}",
                      HeavyTailWarning)
    return OperatorEvaluation(est, "type2_beta_weighted", {"weight_cv": cv, "proposal_zeta": z1})


def kober1_apply(spec, f, X, n=100_000, rng=0, *, workers=1, method="mc"):
    """Kober operator of the first kind at ``X``."""
    zeta, alpha = _za(spec)
    X = _point(X)
    p = X.p
    _check_alpha(p, alpha)
    if not zeta > -1:
        raise DomainError("zeta must exceed -1")
    h0 = 0.5 * (p + 1)
    if method == "quadrature":
        _require_p1(X, method)
        x = float(X.array[0, 0])
        fs = _scalar_integrand(f)
        val, err = _quad(fs, 0.0, x, weight="alg", wvar=(zeta, alpha - 1.0))
        return OperatorEvaluation(
            x ** (-zeta - alpha) * val / math.gamma(alpha), "quadrature", {"abserr": err}
        )
    log_c = log_gamma_p(p, zeta + h0) - log_gamma_p(p, zeta + alpha + h0)
    est = _mc(_type1_draw(zeta + h0, alpha, 1.0, X, _integrand(f)), n, rng, workers, log_c, "kober1")
    return OperatorEvaluation(est, "type1_beta", {})


def _za(spec):
    if isinstance(spec, OperatorSpec):
        return spec.zeta, spec.alpha
    zeta, alpha = spec
    return float(zeta), float(alpha)


def weyl_right_apply(alpha, f, X, n=100_000, rng=0, *, workers=1, method="mc",
                     proposal_scale=None):
    """Right-sided Weyl integral ``1/G(a) int_{T>X} |T-X|^{a-(p+1)/2} f(T) dT``.

    Monte Carlo: ``T = X + S`` with S ~ matrix gamma(alpha, b I); ``b`` defaults
    to ``f.rate`` for catalog densities, else 1.
    """
    X = _point(X)
    p = X.p
    _check_alpha(p, alpha)
    if method == "quadrature":
        _require_p1(X, method)
        x = float(X.array[0, 0])
        val, err = _quad_singular_right(_scalar_integrand(f), x, alpha)
        return OperatorEvaluation(val / math.gamma(alpha), "quadrature", {"abserr": err})
    b = proposal_scale
    if b is None:
        b = getattr(f, "rate", None) or 1.0
    g = _integrand(f)
    x = X.array

    def draw(gen, m):
        S = sample_matrix_gamma(p, alpha, b, gen, size=m)
        return np.exp(b * batch_trace(S) - alpha * p * math.log(b)) * g(x + S)

    est = mc_expectation(draw, n, rng, workers=workers, label="weyl")
    probe = draw(as_stream(rng).generator(10**6), min(n, 4096))
    share = _weight_warning(probe, "weyl")
    return OperatorEvaluation(est, "shifted_matrix_gamma", {"proposal_scale": b, "max_weight_share": share})


def rl_left_apply(alpha, f, X, n=100_000, rng=0, *, workers=1, method="mc"):
    """Left-sided Riemann-Liouville integral ``|X|^alpha I^{0,alpha} f(X)``."""
    X = _point(X)
    ev = kober1_apply((0.0, alpha), f, X, n, rng, workers=workers, method=method)
    c = math.exp(alpha * float(np.sum(np.log(X.eigenvalues))))
    value = ev.value.scaled(c) if isinstance(ev.value, EstimatorResult) else ev.value * c
    return OperatorEvaluation(value, ev.method, ev.diagnostics)


# -- pathway operators -------------------------------------------------------

def _pathway_constants(params):
    p = params.p
    h0 = 0.5 * (p + 1)
    e = params.exponent
    return p, h0, e


def pathway2_apply(params, f, U, n=100_000, rng=0, *, workers=1, method="auto"):
    """Pathway Kober operator of the second kind: ``Gamma_p(gamma+(p+1)/2) g(U)``.

    ``g`` is the density of ``X2^{1/2} X1 X2^{1/2}`` with X1 pathway (second
    kind) and X2 ~ f.  Methods: ``"substitution"`` (scalar ``a``, needs
    ``gamma > (p-1)/2``), ``"mixture"`` (needs a sampleable f; any scale),
    ``"quadrature"`` (p = 1).  ``diagnostics["kober_scaled"]`` divides by
    ``Gamma_p(gamma + eta/(1-q) + p + 1)``, which reproduces the plain Kober
    operator at ``a = 1, q = 0``.
    """
    if params.kind != SECOND:
        raise ValueError("pathway2_apply needs kind='second' parameters")
    U = _point(U)
    p, h0, e = _pathway_constants(params)
    if U.p != p:
        raise ValueError("dimension mismatch")
    method = _pick_method(method, params, f)
    lg_front = log_gamma_p(p, params.gamma + h0)
    lg_kober = log_gamma_p(p, params.gamma + e + p + 1)
    if method == "substitution":
        c = params.scale * (1.0 - params.q)
        log_c = (h0 * p * math.log(c) + log_gamma_p(p, params.gamma + e + p + 1)
                 + log_gamma_p(p, params.gamma) - log_gamma_p(p, params.gamma + e + h0))
        est = _mc(_type2_draw(e + h0, params.gamma, c, U, _integrand(f)), n, rng, workers, log_c,
                  "pathway2")
    elif method == "mixture":
        draw = _mixture_draw(f, pathway_density(params), U, "product")
        est = _mc(draw, n, rng, workers, lg_front, "pathway2/mixture")
    else:
        _require_p1(U, method)
        u = float(U.array[0, 0])
        c = params.scale * (1.0 - params.q)
        f1 = pathway_density(params)
        fs = _scalar_integrand(f)
        val, err = _quad(lambda v: f1.pdf(u / v) * fs(v) / v, c * u, np.inf)
        est = math.exp(lg_front) * val
        return OperatorEvaluation(est, "quadrature", {
            "abserr": err, "density_value": val, "kober_scaled": est * math.exp(-lg_kober)})
    diag = {
        "density_value": est.estimate * math.exp(-lg_front),
        "kober_scaled": est.estimate * math.exp(-lg_kober),
    }
    if params.is_matrix:
        diag.update(_matrix_scale_constants(params, p, h0, e))
    return OperatorEvaluation(est, method, diag)


def _matrix_scale_constants(params, p, h0, e):
    """Front constant of the ``|V^{1/2} A^{-1} V^{1/2} - (1-q) U|`` form, two ways.

    ``derived`` comes from the normalized density; ``closed_form`` is the
    explicit product of powers and gamma ratios.  They should agree.
    """
    logdet_a = float(np.sum(np.log(params.scale.eigenvalues)))
    g = params.gamma
    derived = log_gamma_p(p, g + h0) + pathway_log_constant(params) + e * logdet_a
    closed = ((p * g + p * h0) * math.log1p(-params.q) + (g + e + h0) * logdet_a
              + log_gamma_p(p, g + e + p + 1) - log_gamma_p(p, e + h0))
    return {"log_constant_derived": derived, "log_constant_closed_form": closed}


def pathway1_apply(params, f, U, n=100_000, rng=0, *, workers=1, method="auto"):
    """Pathway Kober operator of the first kind: ``Gamma_p(gamma) g_r(U)``.

    ``g_r`` is the density of ``X2^{1/2} X1^{-1} X2^{1/2}`` with X1 pathway
    (first kind).  ``diagnostics["kober_scaled"]`` divides by
    ``Gamma_p(gamma + eta/(1-q) + (p+1)/2)``, which reproduces the plain first
    kind operator at ``a = 1, q = 0``.
    """
    if params.kind != FIRST:
        raise ValueError("pathway1_apply needs kind='first' parameters")
    U = _point(U)
    p, h0, e = _pathway_constants(params)
    if U.p != p:
        raise ValueError("dimension mismatch")
    method = _pick_method(method, params, f)
    lg_front = log_gamma_p(p, params.gamma)
    lg_kober = log_gamma_p(p, params.gamma + e + h0)
    if method == "substitution":
        c = params.scale * (1.0 - params.q)
        log_c = (-h0 * p * math.log(c) + log_gamma_p(p, params.gamma + e + h0)
                 + log_gamma_p(p, params.gamma + h0) - log_gamma_p(p, params.gamma + e + p + 1))
        est = _mc(_type1_draw(params.gamma + h0, e + h0, 1.0 / c, U, _integrand(f)), n, rng,
                  workers, log_c, "pathway1")
    elif method == "mixture":
        draw = _mixture_draw(f, pathway_density(params), U, "ratio")
        est = _mc(draw, n, rng, workers, lg_front, "pathway1/mixture")
    else:
        _require_p1(U, method)
        u = float(U.array[0, 0])
        c = params.scale * (1.0 - params.q)
        f1 = pathway_density(params)
        fs = _scalar_integrand(f)
        val, err = _quad(lambda v: f1.pdf(v / u) * fs(v) * v / u**2, 0.0, u / c)
        est = math.exp(lg_front) * val
        return OperatorEvaluation(est, "quadrature", {
            "abserr": err, "density_value": val, "kober_scaled": est * math.exp(-lg_kober)})
    return OperatorEvaluation(est, method, {
        "density_value": est.estimate * math.exp(-lg_front),
        "kober_scaled": est.estimate * math.exp(-lg_kober),
    })


def _pick_method(method, params, f):
    if method != "auto":
        return method
    h0 = 0.5 * (params.p + 1)
    if params.is_matrix:
        return "mixture"
    if params.kind == SECOND and not params.gamma > 0.5 * (params.p - 1):
        return "mixture"
    if params.kind == FIRST and not params.gamma + h0 > 0.5 * (params.p - 1):
        return "mixture"
    return "substitution"


def _limit_scale(a_eta, p):
    if np.isscalar(a_eta):
        if not a_eta > 0:
            raise DomainError("a*eta must be positive")
        return float(a_eta), False
    return as_pd(a_eta), True


def pathway2_limit_apply(gamma, a_eta, f, U, n=100_000, rng=0, *, workers=1, method="auto"):
    """q -> 1 limit of :func:`pathway2_apply`.

    Scalar ``a_eta``: with ``R = V^{-1}`` the integral is a matrix gamma
    expectation, ``(a eta)^{p(p+1)/2} Gamma_p(gamma) E[f(R^{-1})]``,
    R ~ matrix gamma(gamma, a eta U).  A matrix ``a_eta`` (meaning ``eta A``)
    uses the mixture route.
    """
    U = _point(U)
    p = U.p
    h0 = 0.5 * (p + 1)
    rate, is_matrix = _limit_scale(a_eta, p)
    lg_front = log_gamma_p(p, gamma + h0)
    if method == "auto":
        method = "mixture" if is_matrix or not gamma > 0.5 * (p - 1) else "substitution"
    if method == "substitution":
        B = PDMatrix(rate * U.array)
        g = _integrand(f)

        def draw(gen, m):
            R = sample_matrix_gamma(p, gamma, B, gen, size=m)
            return g(batch_inv(R))

        log_c = h0 * p * math.log(rate) + log_gamma_p(p, gamma)
        est = _mc(draw, n, rng, workers, log_c, "pathway2_limit")
    elif method == "mixture":
        draw = _mixture_draw(f, pathway_limit_density(p, gamma, rate, SECOND), U, "product")
        est = _mc(draw, n, rng, workers, lg_front, "pathway2_limit/mixture")
    else:
        _require_p1(U, method)
        u = float(U.array[0, 0])
        f1 = pathway_limit_density(1, gamma, rate, SECOND)
        fs = _scalar_integrand(f)
        val, err = _quad(lambda v: f1.pdf(u / v) * fs(v) / v, 0.0, np.inf)
        est = math.exp(lg_front) * val
        return OperatorEvaluation(est, "quadrature", {"abserr": err, "density_value": val})
    return OperatorEvaluation(est, method, {"density_value": est.estimate * math.exp(-lg_front)})


def pathway1_limit_apply(gamma, a_eta, f, U, n=100_000, rng=0, *, workers=1, method="auto"):
    """q -> 1 limit of :func:`pathway1_apply`.

    Scalar ``a_eta``: ``(a eta)^{-p(p+1)/2} Gamma_p(gamma+(p+1)/2) E[f(V)]`` with
    V ~ matrix gamma(gamma + (p+1)/2, a eta U^{-1}).
    """
    U = _point(U)
    p = U.p
    h0 = 0.5 * (p + 1)
    rate, is_matrix = _limit_scale(a_eta, p)
    lg_front = log_gamma_p(p, gamma)
    if method == "auto":
        method = "mixture" if is_matrix else "substitution"
    if method == "substitution":
        B = PDMatrix(rate * np.linalg.inv(U.array))
        g = _integrand(f)

        def draw(gen, m):
            return g(sample_matrix_gamma(p, gamma + h0, B, gen, size=m))

        log_c = -h0 * p * math.log(rate) + log_gamma_p(p, gamma + h0)
        est = _mc(draw, n, rng, workers, log_c, "pathway1_limit")
    elif method == "mixture":
        draw = _mixture_draw(f, pathway_limit_density(p, gamma, rate, FIRST), U, "ratio")
        est = _mc(draw, n, rng, workers, lg_front, "pathway1_limit/mixture")
    else:
        _require_p1(U, method)
        u = float(U.array[0, 0])
        f1 = pathway_limit_density(1, gamma, rate, FIRST)
        fs = _scalar_integrand(f)
        val, err = _quad(lambda v: f1.pdf(v / u) * fs(v) * v / u**2, 0.0, np.inf)
        est = math.exp(lg_front) * val
        return OperatorEvaluation(est, "quadrature", {"abserr": err, "density_value": val})
    return OperatorEvaluation(est, method, {"density_value": est.estimate * math.exp(-lg_front)})


# -- hypergeometric (Saigo-type) operator ------------------------------------

def hyper2_apply(spec, f, U, n=100_000, rng=0, *, workers=1, table=None, method="mc"):
    """Density of ``X2^{1/2} X1 X2^{1/2}`` with X1 hypergeometric-weighted beta.

    Evaluated degree by degree: each degree ``k`` contributes the zonal-weighted
    expectation ``E[w_k(A X1) f(V)]`` over ``V = U^{1/2}(I+S)U^{1/2}``,
    S ~ type-2 beta(alpha, zeta).  ``diagnostics["tail"]`` is the relative size
    of the degree-``kmax`` contribution, ``diagnostics["kober_normalized"]``
    multiplies by ``Gamma_p(zeta+(p+1)/2)/Gamma_p(zeta+alpha+(p+1)/2)`` and
    equals the plain Kober value when ``A = 0``.
    """
    U = _point(U)
    p = U.p
    h0 = 0.5 * (p + 1)
    zeta, alpha = spec.zeta, spec.alpha
    _check_alpha(p, alpha)
    density = HyperWeightedBeta(p, zeta, alpha, spec.A_h, spec.a_list, spec.b_list,
                                table=table, kmax=spec.kmax)
    lg_norm = log_gamma_p(p, zeta + h0) - log_gamma_p(p, zeta + alpha + h0)
    if method == "quadrature":
        _require_p1(U, method)
        u = float(U.array[0, 0])
        fs = _scalar_integrand(f)
        val, err = _quad(lambda v: density.pdf(u / v) * fs(v) / v, u, np.inf)
        return OperatorEvaluation(val, "quadrature", {
            "abserr": err, "kober_normalized": val * math.exp(lg_norm),
            "normalizer_tail": density.normalizer.relative_tail})
    if not zeta > 0.5 * (p - 1):
        raise DomainError("the series route needs zeta > (p-1)/2")
    g = _integrand(f)
    R = batch_sqrt(U.array)
    u = U.array
    eye = np.eye(p)

    def draw(gen, m):
        S = sample_type2_beta(p, alpha, zeta, gen, size=m)
        V = batch_congruence(eye + S, R)
        fv = g(V)
        X1 = batch_congruence(u, batch_invsqrt(V))
        return density.weight_terms(X1) * fv[:, None]

    mean, var, total = mc_moments(draw, n, rng, workers=workers)
    log_c = log_beta_p(p, alpha, zeta) - density.log_normalizer
    c = math.exp(log_c)
    terms = mean * c
    value = float(mean.sum()) * c
    # per-draw totals are sums of columns; their variance needs the full draw
    se = _sum_se(draw, n, rng, workers) * c
    est = EstimatorResult(value, se, total, as_stream(rng).seed, "hyper2")
    tail = abs(terms[-1]) / abs(value) if value else math.inf
    return OperatorEvaluation(est, "series_type2_beta", {
        "degree_terms": [float(t) for t in terms],
        "tail": tail,
        "normalizer_tail": density.normalizer.relative_tail,
        "kober_normalized": value * math.exp(lg_norm),
    })


def _sum_se(draw, n, rng, workers):
    mean, var, total = mc_moments(lambda gen, m: draw(gen, m).sum(axis=1), n, rng, workers=workers)
    return float(math.sqrt(var[0] / total))


# -- dispatcher --------------------------------------------------------------

def apply_operator(spec, f, U, n=100_000, rng=0, *, workers=1, method=None):
    """Evaluate the operator described by ``spec`` at ``U``."""
    kw = {"workers": workers}
    if method is not None:
        kw["method"] = method
    kind = spec.kind
    if kind == "kober2":
        return kober2_apply(spec, f, U, n, rng, **kw)
    if kind == "kober1":
        return kober1_apply(spec, f, U, n, rng, **kw)
    if kind == "weyl":
        return weyl_right_apply(spec.alpha, f, U, n, rng, **kw)
    if kind == "rl":
        return rl_left_apply(spec.alpha, f, U, n, rng, **kw)
    if kind == "pathway2":
        return pathway2_apply(spec.pathway, f, U, n, rng, **kw)
    if kind == "pathway1":
        return pathway1_apply(spec.pathway, f, U, n, rng, **kw)
    if kind == "pathway2_limit":
        return pathway2_limit_apply(spec.gamma, spec.a_eta, f, U, n, rng, **kw)
    if kind == "pathway1_limit":
        return pathway1_limit_apply(spec.gamma, spec.a_eta, f, U, n, rng, **kw)
    return hyper2_apply(spec, f, U, n, rng, **kw)
