import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from conefrac.densities import DetPower, matrix_gamma
from conefrac.estimators import EmpiricalMTransform, OperatorTransformer
from conefrac.operators import kober2_apply
from conefrac.sampling import RngStream

U = np.array([[[1.2, 0.3], [0.3, 0.8]], [[2.0, 0.0], [0.0, 1.0]], [[0.7, -0.1], [-0.1, 0.9]]])


def test_transformer_matches_functional_api():
    f = matrix_gamma(2, 3.0)
    t = OperatorTransformer(f=f, kind="kober2", zeta=1.5, alpha=2.0, n=5000, random_state=4)
    out = t.fit_transform(U)
    assert out.shape == (3, 2)
    ref = kober2_apply((1.5, 2.0), f, U[1], 5000, RngStream(4, 1))
    assert out[1, 0] == ref.estimate and out[1, 1] == ref.std_error
    # flattened rows are accepted and give the same values
    np.testing.assert_array_equal(t.transform(U.reshape(3, 4)), out)
    # each row has its own stream, so a sub-batch reproduces the first rows
    np.testing.assert_array_equal(t.transform(U[:1]), out[:1])


def test_transformer_eigenfunction():
    lam = 0.5
    t = OperatorTransformer(f=DetPower(-lam), kind="kober2", zeta=1.5, alpha=2.0, n=50_000)
    out = t.fit_transform(U)
    from conefrac.special import log_gamma_p
    c = math.exp(log_gamma_p(2, 2.0) - log_gamma_p(2, 4.0))
    exact = c * np.linalg.det(U) ** -lam
    assert np.all(np.abs(out[:, 0] - exact) <= 3 * out[:, 1])


def test_transformer_params_and_validation():
    t = OperatorTransformer(f=DetPower(1.0), kind="kober1", zeta=0.5)
    c = clone(t)
    assert c.get_params()["zeta"] == 0.5 and c.get_params()["kind"] == "kober1"
    with pytest.raises(NotFittedError):
        t.transform(U)
    with pytest.raises(ValueError):
        OperatorTransformer(f=DetPower(1.0), kind="pathway2").fit(U)
    with pytest.raises(ValueError):
        OperatorTransformer(f=None).fit(U)
    with pytest.raises(ValueError):
        OperatorTransformer(f=DetPower(1.0), random_state=None).fit(U)
    with pytest.raises(ValueError):
        t.fit(-U)
    t.fit(U)
    with pytest.raises(ValueError):
        t.transform(np.eye(3)[None])


def test_transformer_in_pipeline():
    pipe = make_pipeline(OperatorTransformer(f=DetPower(0.5), kind="rl", alpha=1.5, n=2000))
    assert pipe.fit_transform(U).shape == (3, 2)


def test_empirical_m_transform():
    f = matrix_gamma(2, 3.0)
    X = f.rvs(size=100_000, rng=7)
    e = EmpiricalMTransform().fit(X)
    s = np.array([1.5, 2.0, 2.5, 3.0])
    exact = np.array([f.m_transform(v) for v in s])
    assert e.predict(1.5)[0] == pytest.approx(1.0)
    assert np.all(np.abs(e.predict(s) - exact) <= 3 * np.maximum(e.predict_se(s), 1e-12))
    assert e.score(s, exact) > -3
    with pytest.raises(ValueError):
        EmpiricalMTransform().fit(X[:1])
    with pytest.raises(NotFittedError):
        EmpiricalMTransform().predict([1.0])
