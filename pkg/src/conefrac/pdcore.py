"""Symmetric and positive definite matrices.

Everything derives from one spectral decomposition: square roots, inverses
and determinants of a :class:`PDMatrix` are read off its eigenpairs.  The
``batch_*`` helpers operate on stacks of shape ``(n, p, p)`` and are what the
Monte Carlo kernels use; the classes are the public argument types.
"""

from __future__ import annotations

import json

import numpy as np

SYMMETRY_RTOL = 1e-8
PD_RTOL = 1e-12


def _symmetrize(data, rtol=SYMMETRY_RTOL):
    arr = np.array(data, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    scale = 1.0 + np.max(np.abs(arr))
    if np.max(np.abs(arr - arr.T)) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (arr + arr.T)


class SymMatrix:
    """Immutable real symmetric matrix.

    The input is replaced by ``(M + M.T) / 2``; inputs whose asymmetry exceeds
    ``1e-8 * (1 + max|M|)`` are rejected.
    """

    __slots__ = ("_a", "_eig")

    def __init__(self, data):
        a = data._a if isinstance(data, SymMatrix) else _symmetrize(data)
        a.setflags(write=False)
        self._a = a
        self._eig = None

    @property
    def p(self):
        return self._a.shape[0]

    @property
    def array(self):
        """Read-only view of the entries."""
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a.astype(dtype) if dtype is not None else self._a.copy()

    def eigh(self):
        """Eigenvalues in descending order and matching orthonormal eigenvectors."""
        if self._eig is None:
            w, v = np.linalg.eigh(self._a)
            w, v = w[::-1].copy(), v[:, ::-1].copy()
            w.setflags(write=False)
            v.setflags(write=False)
            self._eig = (w, v)
        return self._eig

    @property
    def eigenvalues(self):
        return self.eigh()[0]

    def trace(self):
        return float(np.trace(self._a))

    def to_dict(self):
        return {"p": self.p, "data": [float(x) for x in self._a.ravel()]}

    @classmethod
    def from_dict(cls, d):
        p = int(d["p"])
        data = np.asarray(d["data"], dtype=float)
        if data.size != p * p:
            raise ValueError(f"expected {p * p} entries for p={p}, got {data.size}")
        return cls(data.reshape(p, p))

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self._a.shape == other._a.shape and bool(np.all(self._a == other._a))

    def __hash__(self):
        return hash(self._a.tobytes())

    def __repr__(self):
        return f"{type(self).__name__}({self._a.tolist()!r})"


class PDMatrix(SymMatrix):
    """Immutable symmetric positive definite matrix.

    The smallest eigenvalue must exceed ``1e-12 * max(1, largest eigenvalue)``.
    """

    __slots__ = ()

    def __init__(self, data):
        super().__init__(data)
        w = self.eigenvalues
        if not w[-1] > PD_RTOL * max(1.0, w[0]):
            raise ValueError(f"matrix is not positive definite (eigenvalues {w.tolist()})")

    @classmethod
    def from_eigh(cls, w, v):
        w = np.asarray(w, dtype=float)
        return cls((v * w) @ v.T)


def as_sym(A):
    return A if isinstance(A, SymMatrix) else SymMatrix(A)


def as_pd(A):
    if isinstance(A, PDMatrix):
        return A
    if isinstance(A, SymMatrix):
        return PDMatrix(A.array)
    return PDMatrix(A)


def _spectral_map(A, fn):
    w, v = A.eigh()
    return PDMatrix((v * fn(w)) @ v.T)


def sqrt_pd(A):
    """Unique positive definite square root."""
    return _spectral_map(as_pd(A), np.sqrt)


def inverse_pd(A):
    return _spectral_map(as_pd(A), np.reciprocal)


def logdet(A):
    """Log-determinant as the sum of log eigenvalues."""
    return float(np.sum(np.log(as_pd(A).eigenvalues)))


def loewner_gt(A, B):
    """True iff ``A - B`` is strictly positive definite."""
    A, B = as_sym(A), as_sym(B)
    if A.p != B.p:
        raise ValueError(f"dimension mismatch: {A.p} vs {B.p}")
    w = np.linalg.eigvalsh(A.array - B.array)
    scale = max(1.0, float(np.max(np.abs(A.eigenvalues))))
    return bool(w[0] > PD_RTOL * scale)


def congruence(A, C):
    """``C^{1/2} A C^{1/2}``."""
    A, C = as_pd(A), as_pd(C)
    if A.p != C.p:
        raise ValueError(f"dimension mismatch: {A.p} vs {C.p}")
    r = sqrt_pd(C).array
    return PDMatrix(r @ A.array @ r)


def det_i_plus(A, C):
    """``|I + AC|`` through the symmetric form ``|I + C^{1/2} A C^{1/2}|``."""
    M = congruence(A, C)
    return float(np.prod(1.0 + M.eigenvalues))


# -- batched kernels ---------------------------------------------------------

def batch_eigh(X):
    return np.linalg.eigh(X)


def batch_spectral(X, fn):
    w, v = np.linalg.eigh(X)
    return np.einsum("...ij,...j,...kj->...ik", v, fn(w), v)


def batch_sqrt(X):
    return batch_spectral(X, np.sqrt)


def batch_invsqrt(X):
    return batch_spectral(X, lambda w: 1.0 / np.sqrt(w))


def batch_inv(X):
    return batch_spectral(X, np.reciprocal)


def batch_logdet(X):
    """Log-determinant of a stack; ``-inf`` where not positive definite."""
    w = np.linalg.eigvalsh(X)
    out = np.full(w.shape[:-1], -np.inf)
    ok = np.all(w > 0, axis=-1)
    out[ok] = np.sum(np.log(w[ok]), axis=-1)
    return out


def batch_congruence(X, R):
    """``R X R`` for symmetric ``R`` (broadcast over leading axes)."""
    out = R @ X @ R
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def batch_is_pd(X):
    w = np.linalg.eigvalsh(X)
    scale = np.maximum(1.0, np.max(np.abs(w), axis=-1))
    return w[..., 0] > PD_RTOL * scale


def batch_trace(X):
    return np.trace(X, axis1=-2, axis2=-1)


# -- validation --------------------------------------------------------------

def check_matrix_stack(X, p=None, require_pd=True):
    """Validate an array of matrices and return it as float ``(n, p, p)``.

    Accepts a single matrix, a list of :class:`SymMatrix`, or an array of
    shape ``(n, p, p)``.  For ``p == 1`` an array of scalars of shape ``(n,)``
    or ``(n, 1)`` is also accepted.
    """
    if isinstance(X, SymMatrix):
        X = X.array[None]
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], SymMatrix):
        X = np.stack([m.array for m in X])
    X = np.asarray(X, dtype=float)
    if X.ndim == 0 or X.ndim == 1 or (X.ndim == 2 and (p == 1 or X.shape[1] == 1)):
        X = X.reshape(-1, 1, 1)
    elif X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1] != X.shape[2]:
        raise ValueError(f"expected an array of square matrices, got shape {X.shape}")
    if p is not None and X.shape[1] != p:
        raise ValueError(f"expected {p}x{p} matrices, got {X.shape[1]}x{X.shape[2]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    scale = 1.0 + np.max(np.abs(X), axis=(1, 2))
    asym = np.max(np.abs(X - np.swapaxes(X, 1, 2)), axis=(1, 2))
    if np.any(asym > SYMMETRY_RTOL * scale):
        raise ValueError("input contains non-symmetric matrices")
    X = 0.5 * (X + np.swapaxes(X, 1, 2))
    if require_pd and not np.all(batch_is_pd(X)):
        raise ValueError("input contains matrices that are not positive definite")
    return X


def to_json(A):
    return json.dumps(as_sym(A).to_dict())


def from_json(text, pd=True):
    d = json.loads(text) if isinstance(text, str) else text
    m = SymMatrix.from_dict(d)
    return as_pd(m) if pd else m


def random_pd(p, rng, cond=10.0):
    """Random PD matrix with eigenvalues in ``[1, cond]`` (test utility)."""
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    w = rng.uniform(1.0, cond, size=p)
    return PDMatrix((q * w) @ q.T)
