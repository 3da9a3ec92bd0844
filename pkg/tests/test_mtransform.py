import math

import numpy as np
import pytest

from conefrac.densities import matrix_gamma, type2_beta
from conefrac.exceptions import DomainError
from conefrac.mtransform import (
    MTransformQuery,
    VerificationReport,
    m_transform,
    make_case,
    product_mellin_rhs,
    verify_kober1_mtransform,
    verify_kober2_mtransform,
    verify_mellin_convolution,
    verify_operator_density,
    verify_rl_mtransform,
    verify_weyl_mtransform,
)
from conefrac.sampling import EstimatorResult
from conefrac.special import log_gamma_p

F1 = matrix_gamma(1, 1.0)
F2 = matrix_gamma(2, 3.0)


def test_m_transform_examples():
    for method in ("closed_form", "quadrature", "auto"):
        r = m_transform(MTransformQuery(2.0, F1, method=method))
        assert r.estimate == pytest.approx(1.0, abs=1e-10)
    r = m_transform(MTransformQuery(1.5, F2, method="mc", n=1000, seed=1))
    assert r.estimate == pytest.approx(1.0, abs=1e-12)
    for s in (1.2, 2.0, 2.7, 3.5, 4.0):
        r = m_transform(MTransformQuery(s, F2, method="mc", n=100_000, seed=2))
        exact = math.exp(log_gamma_p(2, 3 + s - 1.5) - log_gamma_p(2, 3))
        assert r.agrees(exact), (s, r.z_score(exact))
    with pytest.raises(DomainError):
        m_transform(MTransformQuery(2.0, lambda X: X[:, 0, 0], p=2, method="closed_form"))


def test_m_transform_of_plain_function_with_proposal():
    fun = lambda X: F2.pdf_stack(X)
    prop = type2_beta(2, 3.0, 3.0)
    r = m_transform(MTransformQuery(2.0, fun, p=2, method="mc", n=100_000, seed=3, proposal=prop))
    assert r.agrees(F2.m_transform(2.0))
    with pytest.raises(ValueError):
        m_transform(MTransformQuery(2.0, fun, p=2, method="mc"))


def test_kober2_theorem():
    c = verify_kober2_mtransform(1.0, 1.0, F1, 1.0)
    assert c.rhs == pytest.approx(0.5, rel=1e-14)
    assert c.passed and abs(c.lhs - 0.5) < 1e-6
    assert verify_kober2_mtransform(1.5, 2.0, F2, 2.0, 20_000, 4).passed
    with pytest.raises(DomainError):
        verify_kober2_mtransform(1.0, 2.0, F2, -0.5)


def test_kober1_theorem():
    c = verify_kober1_mtransform(0.0, 1.0, F1, 0.5)
    assert c.rhs == pytest.approx(2.0 * math.sqrt(math.pi), rel=1e-14)
    assert c.passed and abs(c.lhs - c.rhs) < 1e-6
    assert verify_kober1_mtransform(1.0, 2.0, F2, 1.0, 20_000, 5).passed
    with pytest.raises(DomainError):
        verify_kober1_mtransform(0.0, 1.0, F1, 1.0)


def test_weyl_corollary():
    c = verify_weyl_mtransform(1.0, F1, 1.0)
    assert c.rhs == pytest.approx(1.0, rel=1e-14)
    assert c.passed and abs(c.lhs - 1.0) < 1e-6
    assert verify_weyl_mtransform(1.5, F2, 2.0, 20_000, 6).passed


def test_rl_corollary():
    c = verify_rl_mtransform(1.0, F1, 0.5)
    assert c.rhs == pytest.approx(2.0 * math.sqrt(math.pi), rel=1e-14)
    assert c.passed and abs(c.lhs - c.rhs) < 1e-6
    with pytest.raises(DomainError):
        verify_rl_mtransform(1.0, F1, 1.0)
    assert verify_rl_mtransform(1.5, F2, 0.25, 20_000, 7).passed


def test_mellin_convolution():
    rep = verify_mellin_convolution(0.0, 1.0, F1, [1.0, 2.0], 100_000, 8)
    assert rep.cases[0].rhs == pytest.approx(1.0) and rep.cases[0].lhs == pytest.approx(1.0)
    assert rep.cases[1].rhs == pytest.approx(0.5)
    assert rep.passed
    rep = verify_mellin_convolution(1.5, 2.0, F2, [1.0, 2.0], 100_000, 9, construction="ratio")
    assert rep.passed
    with pytest.raises(ValueError):
        verify_mellin_convolution(1.5, 2.0, F2, [1.0], construction="sum")


def test_theorems_are_jointly_consistent():
    # M of the product density is the Kober M-transform times Gamma_p(a+z+h0)/Gamma_p(z+h0)
    p, zeta, alpha, s = 2, 1.5, 2.0, 2.0
    k = verify_kober2_mtransform(zeta, alpha, F2, s, 1000, 0)
    c = math.exp(log_gamma_p(p, alpha + zeta + 1.5) - log_gamma_p(p, zeta + 1.5))
    assert product_mellin_rhs(p, zeta, alpha, F2, s) == pytest.approx(c * k.rhs, rel=1e-12)


def test_operator_density_normalization():
    assert verify_operator_density(1.0, 1.0, F1).passed
    c = verify_operator_density(1.5, 2.0, F2, 20_000, 10)
    assert c.passed and c.rhs == 1.0


def test_make_case_and_report():
    c = make_case({"x": 1}, EstimatorResult(1.0, 0.1, 10), 1.25, "mc")
    assert c.passed and c.se == 0.1
    c = make_case({"x": 1}, 1.0, 1.0 + 1e-8, "direct", tol=1e-9)
    assert not c.passed
    rep = VerificationReport("demo")
    rep.add(c)
    d = rep.to_dict()
    assert d["suite"] == "demo" and d["cases"][0]["pass"] is False
    assert set(d["cases"][0]) >= {"params", "lhs", "rhs", "se", "pass"}
