"""Named verification suites and the q -> 1 convergence tables.

Every suite takes a plain config dict (``p``, ``n``, ``seed``, ``workers`` plus
suite-specific overrides) and returns a :class:`VerificationReport`.
"""

from __future__ import annotations

import math

import numpy as np

from .densities import (
    FIRST,
    DetPower,
    SECOND,
    PathwayParams,
    matrix_gamma,
    pathway_log_constant,
)
from .mtransform import (
    VerificationReport,
    make_case,
    verify_kober1_mtransform,
    verify_kober2_mtransform,
    verify_mellin_convolution,
    verify_operator_density,
    verify_rl_mtransform,
    verify_weyl_mtransform,
)
from .operators import (
    OperatorSpec,
    hyper2_apply,
    kober1_apply,
    kober2_apply,
    pathway1_apply,
    pathway1_limit_apply,
    pathway2_apply,
    pathway2_limit_apply,
)
from .pdcore import random_pd
from .special import log_gamma_p, log_stirling_gamma_p
from .zonal import build_zonal_table, lemma41_check, lemma42_check

RATIO_TARGET = 2.0
RATIO_BAND = 0.4


def _common(cfg, n_default):
    p = int(cfg.get("p", 1))
    return p, int(cfg.get("n", n_default)), int(cfg.get("seed", 0)), int(cfg.get("workers", 1))


def _test_density(p, cfg):
    """The default integrand: a matrix gamma density (``e^{-x}`` when p = 1)."""
    shape = float(cfg.get("shape", 1.0 if p == 1 else p + 1.0))
    return matrix_gamma(p, shape, float(cfg.get("rate", 1.0)))


def _mtransform_suite(name, fn, defaults, cfg):
    p, n, seed, workers = _common(cfg, 20_000)
    f = _test_density(p, cfg)
    d = defaults[1 if p == 1 else 2]
    args = [float(cfg.get(k, v)) for k, v in d["args"]]
    report = VerificationReport(name)
    for i, s in enumerate(cfg.get("s", d["s"])):
        report.add(fn(*args, f, float(s), n, seed + i, method=cfg.get("method", "auto"),
                      workers=workers))
    return report


def suite_thm31(cfg):
    return _mtransform_suite("thm31", verify_kober2_mtransform, {
        1: {"args": [("zeta", 1.0), ("alpha", 1.0)], "s": [0.5, 1.0, 1.5]},
        2: {"args": [("zeta", 1.5), ("alpha", 2.0)], "s": [1.5, 2.0, 2.5]},
    }, cfg)


def suite_thm51(cfg):
    return _mtransform_suite("thm51", verify_kober1_mtransform, {
        1: {"args": [("zeta", 0.0), ("alpha", 1.0)], "s": [0.25, 0.5, 0.75]},
        2: {"args": [("zeta", 1.0), ("alpha", 2.0)], "s": [0.5, 1.0, 1.5]},
    }, cfg)


def suite_cor311(cfg):
    return _mtransform_suite("cor311", verify_weyl_mtransform, {
        1: {"args": [("alpha", 1.0)], "s": [1.0, 1.5, 2.0]},
        2: {"args": [("alpha", 1.5)], "s": [1.5, 2.0, 2.5]},
    }, cfg)


def suite_cor511(cfg):
    return _mtransform_suite("cor511", verify_rl_mtransform, {
        1: {"args": [("alpha", 1.0)], "s": [0.25, 0.5, 0.75]},
        2: {"args": [("alpha", 1.5)], "s": [0.0, 0.25, 0.5]},
    }, cfg)


def suite_thm32(cfg):
    """Mellin factorization for the product and ratio constructions, plus normalization."""
    p, n, seed, workers = _common(cfg, 1_000_000)
    f = _test_density(p, cfg)
    h0 = 0.5 * (p + 1)
    zeta = float(cfg.get("zeta", 1.0 if p == 1 else 2.0))
    alpha = float(cfg.get("alpha", 1.0 if p == 1 else 2.0))
    report = VerificationReport("thm32")
    s_prod = cfg.get("s_product", [h0, h0 + 0.5, h0 + 1.0])
    s_ratio = cfg.get("s_ratio", [h0 - 0.5, h0 - 0.25, h0])
    report.extend(verify_mellin_convolution(zeta, alpha, f, s_prod, n, seed, workers=workers))
    report.extend(verify_mellin_convolution(zeta, alpha, f, s_ratio, n, seed + 100,
                                            construction="ratio", workers=workers))
    n_norm = int(cfg.get("n_normalization", 50_000))
    report.add(verify_operator_density(zeta, alpha, f, n_norm, seed + 200, workers=workers))
    return report


def suite_eigenfn(cfg):
    """Eigenfunction laws of both Kober operators on determinant powers."""
    p, n, seed, workers = _common(cfg, 100_000)
    h0 = 0.5 * (p + 1)
    triples = cfg.get("triples") or [[1.5, 2.0, 0.5], [2.0, 1.5, 1.0], [2.5, 3.0, 0.25]]
    gen = np.random.default_rng(seed)
    report = VerificationReport("eigenfn")
    for i, (zeta, alpha, lam) in enumerate(triples):
        U = np.array([[1.0]]) * 1.7 if p == 1 else random_pd(p, gen, cond=4.0).array
        logdet = float(np.linalg.slogdet(U)[1])
        method = "quadrature" if p == 1 else "mc"
        k2_rhs = math.exp(log_gamma_p(p, zeta + lam) - log_gamma_p(p, zeta + alpha + lam)
                          - lam * logdet)
        k1_rhs = math.exp(log_gamma_p(p, zeta + lam + h0) - log_gamma_p(p, zeta + alpha + lam + h0)
                          + lam * logdet)
        params = {"p": p, "zeta": zeta, "alpha": alpha, "lambda": lam, "U": U.tolist()}
        for name, fn, lam_sign, rhs in (("kober2", kober2_apply, -1, k2_rhs),
                                        ("kober1", kober1_apply, 1, k1_rhs)):
            ev = fn((zeta, alpha), DetPower(lam_sign * lam), U, n, seed + i, workers=workers,
                    method=method)
            report.add(make_case(dict(params, operator=name), ev.value, rhs, ev.method,
                                 tol=1e-8 * max(1.0, abs(rhs))))
    return report


def suite_lemma41(cfg):
    p, n, seed, workers = _common(dict({"p": 2}, **cfg), 100_000)
    table = build_zonal_table(2, p)
    alpha, beta = float(cfg.get("alpha", 2.0)), float(cfg.get("beta", 1.5))
    T = np.asarray(cfg.get("T", [[1.0, 0.3], [0.3, 0.5]] if p == 2 else np.eye(p)))
    report = VerificationReport("lemma41")
    for i, K in enumerate(cfg.get("partitions", [[], [1], [2], [1, 1]])):
        chk = lemma41_check(table, alpha, beta, tuple(K), T, n, seed + i, workers)
        report.add(make_case({"p": p, "alpha": alpha, "beta": beta, "K": list(K)}, chk.lhs,
                             chk.rhs, "mc"))
    return report


def suite_lemma42(cfg):
    p, n, seed, workers = _common(dict({"p": 2}, **cfg), 100_000)
    table = build_zonal_table(2, p)
    alpha = float(cfg.get("alpha", 2.0))
    A = np.asarray(cfg.get("A", [[1.2, 0.2], [0.2, 0.8]] if p == 2 else np.eye(p)))
    Z = np.asarray(cfg.get("Z", [[0.5, -0.1], [-0.1, 0.3]] if p == 2 else 0.5 * np.eye(p)))
    report = VerificationReport("lemma42")
    for i, K in enumerate(cfg.get("partitions", [[], [1], [2], [1, 1]])):
        chk = lemma42_check(table, alpha, tuple(K), A, Z, n, seed + i, workers)
        report.add(make_case({"p": p, "alpha": alpha, "K": list(K)}, chk.lhs, chk.rhs, "mc"))
    return report


# -- pathway limits ----------------------------------------------------------

def q_grid(m_values=None):
    m_values = range(1, 13) if m_values is None else m_values
    return [(int(m), 1.0 - 2.0 ** -int(m)) for m in m_values]


def _ratio_rows(rows):
    """Attach ``error_ratio`` = previous error / this error."""
    prev = None
    for row in rows:
        err = row["abs_error"]
        row["error_ratio"] = prev / err if prev is not None and err > 0 else None
        prev = err
    return rows


def _ratio_case(params, rows, m_min, method):
    """Pass when every ratio from ``m_min`` on lies within the target band."""
    tail = [r["error_ratio"] for r in rows if r["m"] >= m_min and r["error_ratio"] is not None]
    worst = max(tail, key=lambda r: abs(r - RATIO_TARGET)) if tail else math.inf
    return make_case(dict(params, m_min=m_min, ratios=tail), float(worst), RATIO_TARGET, method,
                     tol=RATIO_BAND)


def _kernel_row(a, eta, lam, q):
    t = 1.0 - a * (1.0 - q) * lam
    kern = math.exp(eta / (1.0 - q) * float(np.sum(np.log(t)))) if np.all(t > 0) else 0.0
    limit = math.exp(-a * eta * float(lam.sum()))
    return {"q": q, "value": kern, "limit": limit, "abs_error": abs(kern - limit)}


def lemma22_table(a=1.0, eta=1.0, eigenvalues=(1.0,), m_values=None):
    """``|I - a(1-q)X|^{eta/(1-q)}`` against ``e^{-a eta tr X}`` over the q grid."""
    lam = np.asarray(eigenvalues, dtype=float)
    rows = [dict(_kernel_row(a, eta, lam, q), m=m) for m, q in q_grid(m_values)]
    return _ratio_rows(rows)


def lemma21_row(p, gamma, a, eta, one_minus_q, kind=SECOND):
    """Exact pathway constant, its q -> 1 limit, and the Stirling-device value."""
    q = 1.0 - one_minus_q
    params = PathwayParams(gamma=gamma, eta=eta, q=q, scale=a, kind=kind, p=p)
    h0 = 0.5 * (p + 1)
    e = params.exponent
    log_exact = pathway_log_constant(params)
    c = a * one_minus_q
    if kind == SECOND:
        log_limit = (p * gamma + p * h0) * math.log(a * eta) - log_gamma_p(p, gamma + h0)
        log_stirling = ((p * gamma + p * h0) * math.log(c) + log_stirling_gamma_p(p, e, gamma + p + 1)
                        - log_gamma_p(p, gamma + h0) - log_stirling_gamma_p(p, e, h0))
    else:
        log_limit = p * gamma * math.log(a * eta) - log_gamma_p(p, gamma)
        log_stirling = (p * gamma * math.log(c) + log_stirling_gamma_p(p, e, gamma + h0)
                        - log_gamma_p(p, gamma) - log_stirling_gamma_p(p, e, h0))
    return {"p": p, "kind": kind, "one_minus_q": one_minus_q, "exact": math.exp(log_exact),
            "stirling": math.exp(log_stirling), "limit": math.exp(log_limit),
            "rel_error_exact": abs(math.expm1(log_exact - log_limit)),
            "rel_error_stirling": abs(math.expm1(log_stirling - log_limit))}


def suite_lemma21(cfg):
    report = VerificationReport("lemma21")
    omq = float(cfg.get("one_minus_q", 1e-4))
    for p in cfg.get("dims", [1, 2, 3]):
        for kind in (SECOND, FIRST):
            gamma = float(cfg.get("gamma", 0.5 * p + 1.0))
            row = lemma21_row(p, gamma, float(cfg.get("a", 1.0)), float(cfg.get("eta", 1.0)),
                              omq, kind)
            params = {"p": p, "kind": kind, "gamma": gamma, "one_minus_q": omq}
            report.add(make_case(dict(params, form="exact"), row["exact"] / row["limit"], 1.0,
                                 "direct", tol=0.01))
            report.add(make_case(dict(params, form="stirling"), row["stirling"] / row["limit"], 1.0,
                                 "stirling", tol=0.01))
    return report


def suite_lemma22(cfg):
    report = VerificationReport("lemma22")
    a, eta = float(cfg.get("a", 1.0)), float(cfg.get("eta", 1.0))
    m_min = int(cfg.get("m_min", 3))
    ref = _kernel_row(a, eta, np.array([1.0]), 0.9)
    report.add(make_case({"q": 0.9, "a": a, "eta": eta, "x": 1.0, "limit": ref["limit"],
                          "abs_error": ref["abs_error"]}, ref["value"], (1.0 - 0.1 * a) ** (10 * eta),
                         "direct", tol=1e-12))
    for ev in cfg.get("eigenvalues", [[1.0], [0.5, 1.5], [0.2, 0.7, 1.1]]):
        rows = lemma22_table(a, eta, ev, cfg.get("m_values"))
        report.add(_ratio_case({"eigenvalues": list(ev), "a": a, "eta": eta}, rows, m_min,
                               "table"))
    return report


def pathway_operator_table(kind, p, gamma, eta, a, f, U, n, seed, m_values=None, workers=1):
    """Pathway operator values against the limit operator with common samples of f."""
    app, lim = (pathway2_apply, pathway2_limit_apply) if kind == SECOND else (
        pathway1_apply, pathway1_limit_apply)
    limit = lim(gamma, a * eta, f, U, n, seed, workers=workers, method="mixture").estimate
    rows = []
    for m, q in q_grid(m_values):
        params = PathwayParams(gamma=gamma, eta=eta, q=q, scale=a, kind=kind, p=p)
        v = app(params, f, U, n, seed, workers=workers, method="mixture").estimate
        rows.append({"m": m, "q": q, "value": v, "limit": limit, "abs_error": abs(v - limit)})
    return _ratio_rows(rows)


def _default_point(p):
    return np.array([[1.0]]) if p == 1 else np.eye(p) + 0.2 * (np.ones((p, p)) - np.eye(p))


def suite_pathway_limit(cfg):
    """Convergence of pathway operators to their limits, plus a near-limit spot check."""
    report = VerificationReport("pathway-limit")
    n = int(cfg.get("n", 20_000))
    seed = int(cfg.get("seed", 0))
    workers = int(cfg.get("workers", 1))
    m_min = int(cfg.get("m_min", 5))
    for p in cfg.get("dims", [1, 2]):
        f = _test_density(p, dict(cfg, shape=cfg.get("shape", p + 1.0)))
        U = _default_point(p)
        gamma = float(cfg.get("gamma", 0.5 * p + 0.5))
        eta, a = float(cfg.get("eta", 1.0)), float(cfg.get("a", 1.0))
        for kind in (SECOND, FIRST):
            rows = pathway_operator_table(kind, p, gamma, eta, a, f, U, n, seed,
                                          cfg.get("m_values"), workers)
            report.add(_ratio_case({"p": p, "kind": kind, "gamma": gamma, "eta": eta, "a": a},
                                   rows, m_min, "table"))
        # independent samples at 1 - q = 1e-4
        q = 1.0 - 1e-4
        v = pathway2_apply(PathwayParams(gamma=gamma, eta=eta, q=q, scale=a, kind=SECOND, p=p),
                           f, U, n, seed + 1, workers=workers, method="substitution").value
        lim = pathway2_limit_apply(gamma, a * eta, f, U, n, seed + 2, workers=workers,
                                   method="substitution").value
        bound = 3 * math.hypot(v.std_error, lim.std_error) + 1e-2 * abs(lim.estimate)
        report.add(make_case({"p": p, "kind": SECOND, "q": q, "check": "near_limit"}, v.estimate,
                             lim.estimate, "mc", tol=bound))
    return report


def suite_pathway_reduction(cfg):
    """At a = 1, q = 0 the pathway operators reproduce the Kober operators on the same samples."""
    report = VerificationReport("pathway-reduction")
    n = int(cfg.get("n", 20_000))
    seed = int(cfg.get("seed", 0))
    for p in cfg.get("dims", [1, 2, 3]):
        h0 = 0.5 * (p + 1)
        zeta, alpha = 0.5 * p + 0.5, h0 + 1.0
        f = _test_density(p, {})
        U = _default_point(p)
        for kind, app, ref in ((SECOND, pathway2_apply, kober2_apply),
                               (FIRST, pathway1_apply, kober1_apply)):
            params = PathwayParams(gamma=zeta, eta=alpha - h0, q=0.0, scale=1.0, kind=kind, p=p)
            v = app(params, f, U, n, seed, method="substitution").diagnostics["kober_scaled"]
            r = ref((zeta, alpha), f, U, n, seed).estimate
            report.add(make_case({"p": p, "kind": kind, "zeta": zeta, "alpha": alpha}, v, r,
                                 "same_samples", tol=1e-12 * max(1.0, abs(r))))
    return report


def suite_hyper2(cfg):
    """Saigo-type operator: collapse at A = 0, p = 1 quadrature, truncation tail."""
    from scipy import integrate
    from scipy.special import hyp2f1

    report = VerificationReport("hyper2")
    n = int(cfg.get("n", 100_000))
    seed = int(cfg.get("seed", 0))
    zeta, alpha = 1.0, 2.0
    a_list, b_list = (0.5, 0.5), (1.5,)
    # A = 0 collapse, p = 2
    f2 = matrix_gamma(2, 3.0)
    U2 = _default_point(2)
    spec0 = OperatorSpec("hyper2", zeta=zeta, alpha=alpha, A_h=np.zeros((2, 2)), a_list=a_list,
                         b_list=b_list)
    hv = hyper2_apply(spec0, f2, U2, n // 5, seed).diagnostics["kober_normalized"]
    kv = kober2_apply((zeta, alpha), f2, U2, n // 5, seed).estimate
    report.add(make_case({"check": "A=0", "p": 2}, hv, kv, "same_samples",
                         tol=1e-12 * max(1.0, abs(kv))))
    # p = 1 against an independent quadrature with the exact Gauss function
    ah = 0.2
    f1 = matrix_gamma(1, 1.0)
    u = 1.0
    spec1 = OperatorSpec("hyper2", zeta=zeta, alpha=alpha, A_h=ah, a_list=a_list, b_list=b_list)
    mc = hyper2_apply(spec1, f1, u, n, seed)
    cf = (math.gamma(zeta + 1) * math.gamma(alpha) / math.gamma(zeta + alpha + 1)
          * _hyp3f2(a_list[0], a_list[1], zeta + 1, b_list[0], zeta + alpha + 1, ah))

    def f1x(x):
        return hyp2f1(a_list[0], a_list[1], b_list[0], ah * x) * x**zeta * (1 - x) ** (alpha - 1) / cf

    oracle, _ = integrate.quad(lambda v: f1x(u / v) * math.exp(-v) / v, u, np.inf,
                               epsabs=1e-13, epsrel=1e-11, limit=500)
    report.add(make_case({"check": "p=1 quadrature", "A": ah}, mc.value, oracle, "mc"))
    # truncation tail at |A| <= 0.2, kmax = 8
    A = np.diag([0.2, 0.1])
    spec2 = OperatorSpec("hyper2", zeta=zeta, alpha=alpha, A_h=A, a_list=a_list, b_list=b_list,
                         kmax=8)
    hv = hyper2_apply(spec2, f2, U2, n // 5, seed)
    report.add(make_case({"check": "tail", "A": A.diagonal().tolist(), "kmax": 8},
                         max(hv.diagnostics["tail"], hv.diagnostics["normalizer_tail"]), 0.0,
                         "series", tol=1e-6))
    return report


def _hyp3f2(a1, a2, a3, b1, b2, z, terms=200):
    """Scalar 3F2 by direct summation (|z| < 1)."""
    total, term = 1.0, 1.0
    for k in range(terms):
        term *= (a1 + k) * (a2 + k) * (a3 + k) / ((b1 + k) * (b2 + k) * (k + 1)) * z
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total


SUITES = {
    "thm31": suite_thm31,
    "thm51": suite_thm51,
    "cor311": suite_cor311,
    "cor511": suite_cor511,
    "thm32": suite_thm32,
    "lemma21": suite_lemma21,
    "lemma22": suite_lemma22,
    "lemma41": suite_lemma41,
    "lemma42": suite_lemma42,
    "eigenfn": suite_eigenfn,
    "pathway-limit": suite_pathway_limit,
    "pathway-reduction": suite_pathway_reduction,
    "hyper2": suite_hyper2,
}


def run_suite(name, cfg=None):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
    return SUITES[name](dict(cfg or {}))
