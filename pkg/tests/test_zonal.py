import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conefrac.exceptions import CapExceeded, DomainError, PoleError
from conefrac.zonal import (
    Partition,
    build_zonal_table,
    enumerate_partitions,
    hypergeometric_matrix,
    lemma41_check,
    lemma42_check,
    zonal_eval,
)

# frozen from an independent 30-digit mpmath evaluation of the Gauss series
GAUSS_1_2_3_AT_03 = 1.25944319863849729665174547298


def _count_partitions(k):
    # Euler's recurrence via dynamic programming; independent of the enumerator
    ways = [1] + [0] * k
    for part in range(1, k + 1):
        for total in range(part, k + 1):
            ways[total] += ways[total - part]
    return ways[k]


def test_partition_enumeration():
    assert enumerate_partitions(2, 2) == [(2,), (1, 1)]
    assert enumerate_partitions(3, 2) == [(3,), (2, 1)]
    assert len(enumerate_partitions(5, 5)) == 7
    assert enumerate_partitions(0, 3) == [()]
    with pytest.raises(ValueError):
        enumerate_partitions(-1)
    with pytest.raises(ValueError):
        Partition((1, 2))


@given(st.integers(0, 14))
def test_partition_count_matches_recurrence(k):
    parts = enumerate_partitions(k)
    assert len(parts) == _count_partitions(k)
    assert len(set(parts)) == len(parts)
    assert all(P.weight == k for P in parts)
    assert parts == sorted(parts, reverse=True)


def test_degree_two_exact_coefficients():
    table = build_zonal_table(2, 2)
    rows = {(K, L): c for K, L, c in table.rows() if K.weight == 2}
    # C_(2) = m_2 + (2/3) m_11, C_(11) = (4/3) m_11
    assert rows[(Partition((2,)), (2, 0))] == 1
    assert rows[(Partition((2,)), (1, 1))] == Fraction(2, 3)
    assert rows[(Partition((1, 1)), (1, 1))] == Fraction(4, 3)
    assert zonal_eval(table, (2,), np.eye(2)) == pytest.approx(8 / 3)
    assert zonal_eval(table, (1, 1), np.eye(2)) == pytest.approx(4 / 3)


def test_eval_examples():
    table = build_zonal_table(3, 2)
    assert zonal_eval(table, (1,), np.diag([1.0, 2.0])) == pytest.approx(3.0)
    assert zonal_eval(table, (1, 1, 1), np.diag([1.0, 2.0])) == 0.0
    with pytest.raises(CapExceeded):
        zonal_eval(table, (4,), np.eye(2))


@given(st.integers(1, 4), st.integers(0, 2**31))
def test_sum_identity(p, seed):
    table = build_zonal_table(6, p)
    gen = np.random.default_rng(seed)
    G = gen.normal(size=(p, p))
    Z = 0.5 * (G + G.T)
    tr = np.trace(Z)
    for k in range(7):
        total = sum(zonal_eval(table, K, Z) for K in table.partitions[k])
        assert abs(total - tr**k) <= 1e-9 * (1 + abs(tr) ** k)


@given(st.integers(2, 3), st.integers(0, 2**31))
def test_invariance_and_homogeneity(p, seed):
    table = build_zonal_table(4, p)
    gen = np.random.default_rng(seed)
    G = gen.normal(size=(p, p))
    Z = 0.5 * (G + G.T)
    Q, _ = np.linalg.qr(gen.normal(size=(p, p)))
    for k in range(5):
        for K in table.partitions[k]:
            v = zonal_eval(table, K, Z)
            assert zonal_eval(table, K, Q @ Z @ Q.T) == pytest.approx(v, rel=1e-10, abs=1e-10)
            for c in (2.0, 0.5):
                assert zonal_eval(table, K, c * Z) == pytest.approx(c**k * v, rel=1e-10, abs=1e-10)


@given(st.floats(-3, 3), st.integers(0, 6))
def test_scalar_degeneracy(z, k):
    table = build_zonal_table(6, 1)
    assert [tuple(K) for K in table.partitions[k]] == [((k,) if k else ())]
    assert zonal_eval(table, (k,) if k else (), np.array([[z]])) == pytest.approx(z**k, abs=1e-12)


def test_hypergeometric_examples():
    Z = np.array([[0.3, -0.1], [-0.1, 0.2]])
    assert hypergeometric_matrix([], [], Z, kmax=25).value == pytest.approx(math.exp(0.5), abs=1e-12)
    r = hypergeometric_matrix([1.0, 2.0], [3.0], np.array([[0.3]]), kmax=60)
    assert abs(r.value - GAUSS_1_2_3_AT_03) < 1e-10
    assert r.last_term_magnitude < 1e-25
    assert hypergeometric_matrix([1.5], [2.5, 0.7], np.zeros((3, 3)), kmax=5).value == 1.0
    with pytest.raises(PoleError):
        hypergeometric_matrix([1.0], [-1.0], np.array([[0.1]]), kmax=3)


def test_lemma41_examples():
    table = build_zonal_table(2, 2)
    chk = lemma41_check(table, 2.0, 1.5, (), np.eye(2), 1000, 0)
    assert chk.discrepancy == 0.0
    # p = 1, K = (1): E[x t] with x ~ beta(a, b) equals a t / (a + b)
    t1 = build_zonal_table(1, 1)
    chk = lemma41_check(t1, 2.0, 3.0, (1,), np.array([[1.7]]), 100_000, 1)
    beta = math.gamma(2) * math.gamma(3) / math.gamma(5)
    assert chk.rhs == pytest.approx(beta * 2 / 5 * 1.7, rel=1e-12)
    assert chk.passed()
    chk = lemma41_check(table, 3.0, 3.0, (2,), np.eye(2), 100_000, 2)
    assert abs(chk.discrepancy) < 3
    with pytest.raises(DomainError):
        lemma41_check(table, 0.4, 2.0, (1,), np.eye(2), 100, 0)


def test_lemma42_examples():
    t1 = build_zonal_table(1, 1)
    chk = lemma42_check(t1, 1.0, (), np.array([[2.5]]), np.array([[0.3]]), 1000, 0)
    assert chk.rhs == pytest.approx(2.5)
    assert chk.lhs.estimate == pytest.approx(2.5)
    table = build_zonal_table(2, 2)
    chk = lemma42_check(table, 2.0, (1,), np.eye(2), np.zeros((2, 2)), 1000, 0)
    assert chk.lhs.estimate == 0.0 and chk.rhs == 0.0
    chk = lemma42_check(table, 1.7, (1, 1), [[1.3, 0.2], [0.2, 0.9]], [[0.4, 0.1], [0.1, -0.2]],
                        100_000, 3)
    assert chk.passed()
