"""scikit-learn style wrappers.

The library is functional at heart; these classes exist so operator values and
empirical M-transforms can sit inside a ``Pipeline`` or be cloned and
grid-searched like any other estimator.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .densities import MatrixDensity
from .operators import KINDS, OperatorSpec, apply_operator
from .pdcore import batch_is_pd, batch_logdet
from .sampling import RngStream


def _as_stack(X, p=None):
    """Accept ``(m, p, p)`` or flattened ``(m, p*p)`` input."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        side = p if p is not None else int(round(math.sqrt(X.shape[1])))
        if side * side != X.shape[1]:
            raise ValueError(f"cannot reshape rows of length {X.shape[1]} into square matrices")
        X = X.reshape(X.shape[0], side, side)
    if X.ndim != 3 or X.shape[1] != X.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {X.shape}")
    if not np.allclose(X, np.swapaxes(X, 1, 2), atol=1e-12):
        raise ValueError("input matrices must be symmetric")
    if not np.all(batch_is_pd(X)):
        raise ValueError("input matrices must be positive definite")
    return X


class OperatorTransformer(TransformerMixin, BaseEstimator):
    """Map each input matrix ``U`` to the value of a fractional operator at ``U``.

    ``f`` is a :class:`MatrixDensity` or a callable on matrix stacks.  Row ``i``
    uses stream ``i`` of ``random_state`` so results do not depend on batching.
    ``transform`` returns ``(m, 2)``: estimate and standard error.
    """

    def __init__(self, f=None, kind="kober2", zeta=1.0, alpha=1.0, n=20_000,
                 random_state=0, workers=1, method=None):
        self.f = f
        self.kind = kind
        self.zeta = zeta
        self.alpha = alpha
        self.n = n
        self.random_state = random_state
        self.workers = workers
        self.method = method

    def _validate_params(self):
        if self.kind not in ("kober2", "kober1", "weyl", "rl"):
            raise ValueError(f"kind must be one of kober2/kober1/weyl/rl, got {self.kind!r}")
        if self.f is None or not (isinstance(self.f, MatrixDensity) or callable(self.f)):
            raise ValueError("f must be a MatrixDensity or a callable")
        if int(self.n) < 1:
            raise ValueError("n must be positive")
        if self.random_state is None:
            raise ValueError("random_state is required; there is no entropy default")

    def fit(self, X, y=None):
        self._validate_params()
        X = _as_stack(X)
        self.p_ = X.shape[1]
        self.n_features_in_ = self.p_ * self.p_
        self.spec_ = OperatorSpec(self.kind, zeta=float(self.zeta), alpha=float(self.alpha))
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = _as_stack(X, self.p_)
        if X.shape[1] != self.p_:
            raise ValueError(f"fitted on p={self.p_}, got p={X.shape[1]}")
        out = np.empty((X.shape[0], 2))
        for i, U in enumerate(X):
            ev = apply_operator(self.spec_, self.f, U, int(self.n),
                                RngStream(int(self.random_state), i),
                                workers=self.workers, method=self.method)
            out[i] = ev.estimate, ev.std_error
        return out


class EmpiricalMTransform(BaseEstimator):
    """Sample version of the M-transform, ``s -> mean |X_i|^{s-(p+1)/2}``.

    Fit on draws from a density, then ``predict`` at evaluation points ``s``.
    """

    def __init__(self, ddof=1):
        self.ddof = ddof

    def fit(self, X, y=None):
        X = _as_stack(X)
        if X.shape[0] < 2:
            raise ValueError("need at least two samples")
        self.p_ = X.shape[1]
        self.n_features_in_ = self.p_ * self.p_
        self.logdet_ = batch_logdet(X)
        return self

    def _powers(self, s):
        check_is_fitted(self, "logdet_")
        s = np.atleast_1d(np.asarray(s, dtype=float))
        h = s - 0.5 * (self.p_ + 1)
        return np.exp(np.outer(h, self.logdet_))

    def predict(self, s):
        return self._powers(s).mean(axis=1)

    def predict_se(self, s):
        vals = self._powers(s)
        return vals.std(axis=1, ddof=self.ddof) / math.sqrt(vals.shape[1])

    def score(self, s, target):
        """Negative largest z-score against reference values ``target``."""
        est, se = self.predict(s), self.predict_se(s)
        z = np.abs(est - np.asarray(target, dtype=float)) / np.maximum(se, 1e-300)
        return -float(z.max())


__all__ = ["OperatorTransformer", "EmpiricalMTransform", "KINDS"]
