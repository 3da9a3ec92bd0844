import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conefrac.exceptions import DomainError
from conefrac.special import (
    log_beta_p,
    log_gamma_p,
    log_gamma_p_partition,
    log_stirling_gamma,
    log_stirling_gamma_p,
    pochhammer_partition,
    rising_factorial,
    signed_log_gamma_p_partition,
    stirling_gamma,
)

# frozen from an independent 30-digit mpmath evaluation
LOG_GAMMA2_3_TIMES_7_5 = 3.56509801449982931270021291551
LOG_BETA2_3_3 = -6.21728066541033326295393453239


def test_log_gamma_p_examples():
    assert log_gamma_p(1, 4) == pytest.approx(math.log(6), abs=1e-14)
    assert log_gamma_p(2, 1.5) == pytest.approx(math.log(math.pi / 2), abs=1e-14)
    with pytest.raises(DomainError):
        log_gamma_p(2, 0.4)
    with pytest.raises(DomainError):
        log_gamma_p(3, 1.0)
    with pytest.raises(ValueError):
        log_gamma_p(0, 2.0)


@pytest.mark.parametrize("a", [0.6, 1.0, 2.5, 7.0])
def test_scalar_reduction(a):
    assert abs(log_gamma_p(1, a) - math.lgamma(a)) <= 1e-12


@given(st.floats(0.51, 50.0))
def test_gamma2_recurrence(a):
    ratio = math.exp(log_gamma_p(2, a + 1) - log_gamma_p(2, a))
    assert ratio == pytest.approx(a * (a - 0.5), rel=1e-10)


@given(st.integers(1, 5), st.floats(0.0, 20.0))
def test_gamma_p_splits_off_one_dimension(p, extra):
    # Gamma_p(a) = pi^{(p-1)/2} Gamma(a) Gamma_{p-1}(a - 1/2)
    a = 0.5 * (p - 1) + 0.05 + extra
    if p == 1:
        return
    lhs = log_gamma_p(p, a)
    rhs = 0.5 * (p - 1) * math.log(math.pi) + math.lgamma(a) + log_gamma_p(p - 1, a - 0.5)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_log_beta_examples():
    assert log_beta_p(1, 2, 3) == pytest.approx(math.log(1 / 12), abs=1e-14)
    assert log_beta_p(2, 3, 3) == pytest.approx(LOG_BETA2_3_3, abs=1e-12)


@given(st.integers(1, 4), st.floats(2.0, 30.0), st.floats(2.0, 30.0))
def test_log_beta_symmetric(p, a, b):
    assert log_beta_p(p, a, b) == pytest.approx(log_beta_p(p, b, a), rel=1e-13, abs=1e-13)


def test_pochhammer_examples():
    a = 2.7
    assert pochhammer_partition(a, (1,)) == pytest.approx(a)
    assert pochhammer_partition(a, (2,)) == pytest.approx(a * (a + 1))
    assert pochhammer_partition(a, (1, 1)) == pytest.approx(a * (a - 0.5))
    assert pochhammer_partition(a, ()) == 1.0
    assert pochhammer_partition(0.5, (1, 1)) == 0.0
    assert rising_factorial(-2.0, 3) == 0.0
    assert rising_factorial(-2.5, 2) == pytest.approx(-2.5 * -1.5)


def test_gamma_p_partition_examples():
    assert log_gamma_p_partition(1, 2, (1,)) == pytest.approx(math.log(2), abs=1e-14)
    assert log_gamma_p_partition(2, 3.1, ()) == pytest.approx(log_gamma_p(2, 3.1))
    assert log_gamma_p_partition(2, 3, (1, 1)) == pytest.approx(LOG_GAMMA2_3_TIMES_7_5, abs=1e-12)
    assert signed_log_gamma_p_partition(2, 0.75, (1, 1, 1))[0] == -1.0
    with pytest.raises(DomainError):
        log_gamma_p_partition(2, 0.75, (1, 1, 1))


def test_stirling_examples():
    assert stirling_gamma(10) == pytest.approx(math.gamma(10), rel=0.01)
    assert math.exp(log_stirling_gamma(100, 0.5) - math.lgamma(100.5)) == pytest.approx(1, rel=1e-3)
    with pytest.raises(DomainError):
        stirling_gamma(0.0)


@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_stirling_ratio_leading_order(g1, g2):
    z = 1e6
    ratio = log_stirling_gamma(z, g1) - log_stirling_gamma(z, g2)
    assert ratio == pytest.approx((g1 - g2) * math.log(z), abs=1e-7)


def test_stirling_matrix_version_converges():
    for p in (1, 2, 3):
        err = abs(log_stirling_gamma_p(p, 1e5, 1.3) - log_gamma_p(p, 1e5 + 1.3))
        assert err < 1e-4
