"""M-transforms of densities and of operator outputs, and theorem verifiers.

The M-transform of ``f`` at real ``s`` is ``int |X|^{s-(p+1)/2} f(X) dX``.  For an
operator output the integral is estimated by an outer importance sample of
points ``U`` with a nested inner Monte Carlo estimate of the operator at each
point.  The reported standard error is the spread of the outer terms, which
already carries the inner noise, so the outer and inner errors are never
added separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .densities import MatrixDensity, matrix_gamma, type1_beta, type2_beta
from .exceptions import DomainError
from .operators import (
    QUAD_OPTS,
    _integrand,
    kober1_apply,
    kober2_apply,
    rl_left_apply,
    weyl_right_apply,
)
from .pdcore import batch_congruence, batch_logdet, batch_sqrt, batch_trace
from .sampling import (
    EstimatorResult,
    det_moment,
    mc_expectation,
    sample_matrix_gamma,
    sample_product,
    sample_ratio,
    sample_type1_beta,
    sample_type2_beta,
)
from .special import log_gamma_p

DEFAULT_INNER = 16


@dataclass(frozen=True)
class MTransformQuery:
    """What to transform and how.

    ``method`` is ``"closed_form"``, ``"quadrature"`` (p = 1), ``"mc"`` or
    ``"auto"``.  Plain functions need a ``proposal`` density for ``"mc"``.
    """

    s: float
    f: object
    p: int | None = None
    method: str = "auto"
    n: int = 100_000
    seed: int = 0
    proposal: MatrixDensity | None = None


@dataclass(frozen=True)
class VerificationCase:
    params: dict
    lhs: float
    rhs: float
    se: float
    passed: bool
    method: str

    def to_dict(self):
        return {"params": self.params, "lhs": self.lhs, "rhs": self.rhs, "se": self.se,
                "pass": self.passed, "method": self.method}


@dataclass
class VerificationReport:
    suite: str
    cases: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.cases)

    def add(self, case):
        self.cases.append(case)
        return case

    def extend(self, other):
        self.cases.extend(other.cases)
        return self

    def to_dict(self):
        return {"suite": self.suite, "cases": [c.to_dict() for c in self.cases]}


def _dim(f, p):
    p = p if p is not None else getattr(f, "p", None)
    if p is None:
        raise ValueError("dimension p is required for plain functions")
    return int(p)


def _check(ok, msg):
    if not ok:
        raise DomainError(msg)


def make_case(params, lhs, rhs, method, z=3.0, floor=1e-10, tol=None):
    """Build a case; MC cases pass within ``z`` SE, quadrature cases within ``tol``."""
    if isinstance(lhs, EstimatorResult):
        se = lhs.std_error
        passed = abs(lhs.estimate - rhs) <= max(z * se, floor)
        lhs = lhs.estimate
    else:
        se = 0.0
        passed = abs(lhs - rhs) <= (tol if tol is not None else floor)
    return VerificationCase(params, float(lhs), float(rhs), float(se), bool(passed), method)


# -- M-transform of a function -----------------------------------------------

# the outer integrand of a nested quadrature is only accurate to about the inner
# tolerance, so asking the outer pass for the same tolerance just raises warnings
NESTED_OPTS = dict(QUAD_OPTS, epsabs=1e-11, epsrel=1e-9)


def _quad_halfline(fun, opts=QUAD_OPTS):
    v1, e1 = integrate.quad(fun, 0.0, 1.0, **opts)
    v2, e2 = integrate.quad(fun, 1.0, np.inf, **opts)
    return v1 + v2, e1 + e2


def m_transform(query):
    """Estimate ``int |X|^{s-(p+1)/2} f(X) dX``."""
    f, s = query.f, float(query.s)
    p = _dim(f, query.p)
    h = s - 0.5 * (p + 1)
    method = query.method
    is_density = isinstance(f, MatrixDensity)
    if method == "auto":
        if is_density and f.has_m_transform:
            method = "closed_form"
        elif p == 1:
            method = "quadrature"
        else:
            method = "mc"
    if method == "closed_form":
        if not (is_density and f.has_m_transform):
            raise DomainError("no closed-form M-transform for this input")
        return EstimatorResult(math.exp(f.log_m_transform(s)), 0.0, query.n, query.seed,
                               "closed_form")
    if method == "quadrature":
        if p != 1:
            raise ValueError("quadrature M-transform needs p=1")
        g = _integrand(f)
        val, _ = _quad_halfline(lambda x: x ** (s - 1.0) * g(np.array([[[x]]]))[0])
        return EstimatorResult(val, 0.0, query.n, query.seed, "quadrature")
    if is_density and f.can_sample and query.proposal is None:
        return det_moment(f.sampler, h, query.n, query.seed, label="mc")
    if query.proposal is None:
        raise ValueError("Monte Carlo M-transform of a plain function needs a proposal density")
    prop = query.proposal
    g = _integrand(f)

    def draw(gen, m):
        X = prop.sampler(gen, m)
        return np.exp(h * batch_logdet(X) - prop._log_pdf_stack(X)) * g(X)

    return mc_expectation(draw, query.n, query.seed, label="mc/importance")


# -- outer x inner estimators for operator outputs ---------------------------

def _repeat(U, k):
    return np.repeat(U, k, axis=0)


def _kober2_inner(zeta, alpha, g, U, gen, k):
    """Operator values at each row of the stack ``U`` from ``k`` inner draws each."""
    m, p, _ = U.shape
    S = sample_type2_beta(p, alpha, zeta, gen, size=m * k)
    T = batch_congruence(np.eye(p) + S, _repeat(batch_sqrt(U), k))
    c = math.exp(log_gamma_p(p, zeta) - log_gamma_p(p, alpha + zeta))
    return c * g(T).reshape(m, k).mean(axis=1)


def _kober1_inner(zeta, alpha, g, X, gen, k):
    m, p, _ = X.shape
    h0 = 0.5 * (p + 1)
    Y = sample_type1_beta(p, zeta + h0, alpha, gen, size=m * k)
    V = batch_congruence(Y, _repeat(batch_sqrt(X), k))
    c = math.exp(log_gamma_p(p, zeta + h0) - log_gamma_p(p, zeta + alpha + h0))
    return c * g(V).reshape(m, k).mean(axis=1)


def _balanced_inner(route_density, root_of, log_integrand, f, X, gen, k):
    """Operator values from a balanced two-proposal inner sample.

    Half the draws are ``R V0 R`` with V0 from ``route_density`` and ``R`` the
    root returned by ``root_of(X)``; half come from f itself.  The route
    alone degenerates into a rare-event estimate at one end of the cone (large
    X for the first kind, small U for the second); draws from f cover that
    end.  Weights use the balance heuristic.
    """
    m, p, _ = X.shape
    h0 = 0.5 * (p + 1)
    k1 = k // 2
    root = root_of(X)
    V1 = batch_congruence(route_density.sampler(gen, m * k1), _repeat(root, k1))
    V = np.concatenate([V1.reshape(m, k1, p, p), f.sampler(gen, m * (k - k1)).reshape(m, k - k1, p, p)],
                       axis=1).reshape(-1, p, p)
    Xr = _repeat(X, k)
    log_f = f._log_pdf_stack(V)
    inv_root = _repeat(np.linalg.inv(root), k)
    log_route = route_density._log_pdf_stack(batch_congruence(V, inv_root)) - 2 * h0 * batch_logdet(
        _repeat(root, k))
    log_mix = np.logaddexp(math.log(k1 / k) + log_route, math.log((k - k1) / k) + log_f)
    return np.exp(log_integrand(Xr, V) + log_f - log_mix).reshape(m, k).mean(axis=1)


def _kober1_inner_mis(zeta, alpha, f, X, gen, k):
    p = X.shape[1]
    h0 = 0.5 * (p + 1)
    lg = log_gamma_p(p, alpha)

    def log_integrand(Xr, V):
        ld_xv = batch_logdet(Xr - V)
        out = np.full(V.shape[0], -np.inf)
        ok = np.isfinite(ld_xv)
        out[ok] = (-(zeta + alpha) * batch_logdet(Xr[ok]) + (alpha - h0) * ld_xv[ok]
                   + zeta * batch_logdet(V[ok]) - lg)
        return out

    return _balanced_inner(type1_beta(p, zeta + h0, alpha), batch_sqrt, log_integrand, f, X, gen, k)


def _kober2_inner_mis(zeta, alpha, f, U, gen, k):
    p = U.shape[1]
    h0 = 0.5 * (p + 1)
    lg = log_gamma_p(p, alpha)
    eye = np.eye(p)

    def log_integrand(Ur, T):
        ld_tu = batch_logdet(T - Ur)
        out = np.full(T.shape[0], -np.inf)
        ok = np.isfinite(ld_tu)
        out[ok] = (zeta * batch_logdet(Ur[ok]) + (alpha - h0) * ld_tu[ok]
                   - (zeta + alpha) * batch_logdet(T[ok]) - lg)
        return out

    # T = U^{1/2}(I+S)U^{1/2}: route density is the type-2 beta shifted by I
    shifted = _ShiftedDensity(type2_beta(p, alpha, zeta), eye)
    return _balanced_inner(shifted, batch_sqrt, log_integrand, f, U, gen, k)


class _ShiftedDensity:
    """Law of ``I + S`` for S from ``base``."""

    def __init__(self, base, eye):
        self.base, self.eye = base, eye

    def sampler(self, gen, m):
        return self.eye + self.base.sampler(gen, m)

    def _log_pdf_stack(self, X):
        return self.base._log_pdf_stack(X - self.eye)


def _weyl_inner(alpha, g, X, gen, k, b):
    m, p, _ = X.shape
    S = sample_matrix_gamma(p, alpha, b, gen, size=m * k)
    w = np.exp(b * batch_trace(S) - alpha * p * math.log(b))
    return (w * g(_repeat(X, k) + S)).reshape(m, k).mean(axis=1)


def _outer(inner, proposal, h, n, seed, label, workers=1):
    def draw(gen, m):
        U = proposal.sampler(gen, m)
        logw = h * batch_logdet(U) - proposal._log_pdf_stack(U)
        return np.exp(logw) * inner(U, gen)

    return mc_expectation(draw, n, seed, workers=workers, label=label)


def _rate(f):
    r = getattr(f, "rate", None)
    return 1.0 if r is None else float(r)


def _shape_hint(f):
    """Small-argument exponent of ``f`` as a matrix gamma shape, when known."""
    if isinstance(f, MatrixDensity) and f.label == "matrix_gamma":
        return float(f.params["shape"])
    return None


def _quad_outer(fun, s):
    return _quad_halfline(lambda u: u ** (s - 1.0) * fun(u), NESTED_OPTS)[0]


# -- theorem verifiers -------------------------------------------------------

def verify_kober2_mtransform(zeta, alpha, f, s, n=20_000, seed=0, *, method="auto",
                             n_inner=DEFAULT_INNER, workers=1):
    """M-transform of the second kind Kober output vs ``Gamma_p(z+s)/Gamma_p(a+z+s) f*(s)``."""
    p = f.p
    _check(zeta + s > 0.5 * (p - 1), "need zeta + s > (p-1)/2")
    _check(alpha > 0.5 * (p - 1), "need alpha > (p-1)/2")
    rhs = math.exp(log_gamma_p(p, zeta + s) - log_gamma_p(p, alpha + zeta + s)
                   + f.log_m_transform(s))
    params = {"theorem": "kober2", "p": p, "zeta": zeta, "alpha": alpha, "s": s, "f": f.label}
    method = _auto(method, p)
    if method == "quadrature":
        lhs = _quad_outer(
            lambda u: kober2_apply((zeta, alpha), f, u, method="quadrature").estimate, s)
        return make_case(params, lhs, rhs, method, tol=1e-6 * max(1.0, abs(rhs)))
    _check(zeta > 0.5 * (p - 1), "the nested estimator needs zeta > (p-1)/2")
    # a single small eigenvalue decays more slowly than |U|^zeta, so the
    # proposal shape sits halfway between the boundary and zeta + s
    prop = matrix_gamma(p, 0.5 * (zeta + s + 0.5 * (p - 1)), 0.5 * _rate(f))
    lhs = _outer(_kober2_inner_for(zeta, alpha, f, n_inner), prop,
                 s - 0.5 * (p + 1), n, seed, "kober2_m", workers)
    return make_case(params, lhs, rhs, method)


def verify_kober1_mtransform(zeta, alpha, f, s, n=20_000, seed=0, *, method="auto",
                             n_inner=DEFAULT_INNER, workers=1):
    """M-transform of the first kind Kober output vs ``Gamma_p(z+(p+1)/2-s)/Gamma_p(a+z+(p+1)/2-s) f*(s)``."""
    p = f.p
    h0 = 0.5 * (p + 1)
    _check(s < zeta + 1, "need s < zeta + 1")
    _check(alpha > 0.5 * (p - 1), "need alpha > (p-1)/2")
    rhs = math.exp(log_gamma_p(p, zeta + h0 - s) - log_gamma_p(p, alpha + zeta + h0 - s)
                   + f.log_m_transform(s))
    params = {"theorem": "kober1", "p": p, "zeta": zeta, "alpha": alpha, "s": s, "f": f.label}
    method = _auto(method, p)
    if method == "quadrature":
        lhs = _quad_outer(
            lambda x: kober1_apply((zeta, alpha), f, x, method="quadrature").estimate, s)
        return make_case(params, lhs, rhs, method, tol=1e-6 * max(1.0, abs(rhs)))
    g = _integrand(f)
    prop = _kober1_proposal(p, f, s, zeta)
    lhs = _outer(_kober1_inner_for(zeta, alpha, f, n_inner), prop,
                 s - h0, n, seed, "kober1_m", workers)
    return make_case(params, lhs, rhs, method)


def _kober2_inner_for(zeta, alpha, f, k):
    if isinstance(f, MatrixDensity) and f.can_sample:
        return lambda U, gen: _kober2_inner_mis(zeta, alpha, f, U, gen, k)
    g = _integrand(f)
    return lambda U, gen: _kober2_inner(zeta, alpha, g, U, gen, k)


def _kober1_inner_for(zeta, alpha, f, k):
    if isinstance(f, MatrixDensity) and f.can_sample:
        return lambda X, gen: _kober1_inner_mis(zeta, alpha, f, X, gen, k)
    g = _integrand(f)
    return lambda X, gen: _kober1_inner(zeta, alpha, g, X, gen, k)


def _kober1_proposal(p, f, s, zeta):
    # near O the output behaves like f; the tail decays polynomially, so the
    # proposal tail is made heavier than the integrand's
    h0 = 0.5 * (p + 1)
    floor = 0.5 * (p - 1) + 0.25
    shape = _shape_hint(f)
    a = max(shape + s - h0 if shape is not None else s, floor)
    b = max(zeta + h0 - s, floor)
    return type2_beta(p, a, b)


def verify_weyl_mtransform(alpha, f, s, n=20_000, seed=0, *, method="auto",
                           n_inner=DEFAULT_INNER, workers=1):
    """M-transform of the Weyl integral of ``|T|^{-alpha} f(T)`` vs ``Gamma_p(s)/Gamma_p(a+s) f*(s)``."""
    p = f.p
    _check(s > 0.5 * (p - 1), "need s > (p-1)/2")
    _check(alpha > 0.5 * (p - 1), "need alpha > (p-1)/2")
    rhs = math.exp(log_gamma_p(p, s) - log_gamma_p(p, alpha + s) + f.log_m_transform(s))
    params = {"theorem": "weyl", "p": p, "alpha": alpha, "s": s, "f": f.label}
    g = _integrand(f)

    def damped(T):
        return np.exp(-alpha * batch_logdet(T)) * g(T)

    method = _auto(method, p)
    if method == "quadrature":
        lhs = _quad_outer(
            lambda x: weyl_right_apply(alpha, damped, x, method="quadrature").estimate, s)
        return make_case(params, lhs, rhs, method, tol=1e-6 * max(1.0, abs(rhs)))
    b = _rate(f)
    prop = matrix_gamma(p, s, 0.5 * b)
    lhs = _outer(lambda X, gen: _weyl_inner(alpha, damped, X, gen, n_inner, b), prop,
                 s - 0.5 * (p + 1), n, seed, "weyl_m", workers)
    return make_case(params, lhs, rhs, method)


def verify_rl_mtransform(alpha, f, s, n=20_000, seed=0, *, method="auto",
                         n_inner=DEFAULT_INNER, workers=1):
    """M-transform of ``|X|^{-alpha}`` times the Riemann-Liouville integral.

    Compared against ``Gamma_p((p+1)/2-s)/Gamma_p((p+1)/2+alpha-s) f*(s)``.
    """
    p = f.p
    h0 = 0.5 * (p + 1)
    _check(s < 1, "need s < 1")
    _check(alpha > 0.5 * (p - 1), "need alpha > (p-1)/2")
    rhs = math.exp(log_gamma_p(p, h0 - s) - log_gamma_p(p, h0 + alpha - s) + f.log_m_transform(s))
    params = {"theorem": "rl", "p": p, "alpha": alpha, "s": s, "f": f.label}
    method = _auto(method, p)
    if method == "quadrature":
        lhs = _quad_outer(
            lambda x: x ** (-alpha) * rl_left_apply(alpha, f, x, method="quadrature").estimate, s)
        return make_case(params, lhs, rhs, method, tol=1e-6 * max(1.0, abs(rhs)))
    g = _integrand(f)
    prop = _kober1_proposal(p, f, s, 0.0)

    # |X|^{-alpha} times the Riemann-Liouville integral is the zeta = 0 first kind operator
    lhs = _outer(_kober1_inner_for(0.0, alpha, f, n_inner), prop, s - h0, n,
                 seed, "rl_m", workers)
    return make_case(params, lhs, rhs, method)


def _auto(method, p):
    if method == "auto":
        return "quadrature" if p == 1 else "mc"
    if method == "quadrature" and p != 1:
        raise ValueError("quadrature needs p=1")
    return method


def product_mellin_rhs(p, zeta, alpha, f, s):
    """Closed-form ``E|U|^{s-(p+1)/2}`` for the product with X1 ~ type-1 beta(zeta+(p+1)/2, alpha)."""
    h0 = 0.5 * (p + 1)
    return math.exp(log_gamma_p(p, zeta + s) + log_gamma_p(p, zeta + alpha + h0)
                    - log_gamma_p(p, zeta + h0) - log_gamma_p(p, alpha + zeta + s)
                    + f.log_m_transform(s))


def ratio_mellin_rhs(p, zeta, alpha, f, s):
    """Closed-form ``E|U|^{s-(p+1)/2}`` for the ratio with X1 ~ type-1 beta(zeta, alpha)."""
    h0 = 0.5 * (p + 1)
    return math.exp(log_gamma_p(p, zeta + h0 - s) + log_gamma_p(p, zeta + alpha)
                    - log_gamma_p(p, zeta) - log_gamma_p(p, zeta + alpha + h0 - s)
                    + f.log_m_transform(s))


def verify_mellin_convolution(zeta, alpha, f, s_list, n=1_000_000, seed=0, *,
                              construction="product", workers=1):
    """Empirical determinant moments of the product (or ratio) vs the factorized closed form."""
    p = f.p
    h0 = 0.5 * (p + 1)
    report = VerificationReport(f"mellin_{construction}")
    if construction == "product":
        x1 = type1_beta(p, zeta + h0, alpha)
        build, rhs_fn = sample_product, product_mellin_rhs
    elif construction == "ratio":
        _check(zeta > 0.5 * (p - 1), "the ratio construction needs zeta > (p-1)/2")
        x1 = type1_beta(p, zeta, alpha)
        build, rhs_fn = sample_ratio, ratio_mellin_rhs
    else:
        raise ValueError("construction must be 'product' or 'ratio'")

    def sampler(gen, m):
        return build(x1.sampler, f.sampler, gen, size=m)

    for i, s in enumerate(s_list):
        rhs = rhs_fn(p, zeta, alpha, f, s)
        lhs = det_moment(sampler, s - h0, n, seed + i, workers=workers,
                         label=f"E|U|^{s - h0}")
        report.add(make_case({"construction": construction, "p": p, "zeta": zeta, "alpha": alpha,
                              "s": s, "f": f.label}, lhs, rhs, "mc"))
    return report


def verify_operator_density(zeta, alpha, f, n=20_000, seed=0, *, method="auto",
                            n_inner=DEFAULT_INNER, workers=1):
    """The rescaled second kind Kober output of a density integrates to one."""
    p = f.p
    h0 = 0.5 * (p + 1)
    case = verify_kober2_mtransform(zeta, alpha, f, h0, n, seed, method=method, n_inner=n_inner,
                                    workers=workers)
    c = math.exp(log_gamma_p(p, alpha + zeta + h0) - log_gamma_p(p, zeta + h0))
    lhs = case.lhs * c
    se = case.se * c
    params = dict(case.params, theorem="operator_density")
    if case.method == "quadrature":
        return make_case(params, lhs, 1.0, case.method, tol=1e-6)
    return make_case(params, EstimatorResult(lhs, se, n, seed), 1.0, case.method)
