"""Smooth parts of the composite objective ``F = f + g``.

Two concrete objectives are provided, least squares ``||Ax - b||^2`` (no
one-half factor) and the logistic loss ``sum_i log(1 + exp(-b_i <a_i, x>))``.
Both expose value, gradient, Hessian (dense or as an operator) and a
Lipschitz constant of the gradient.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator
from scipy.special import expit

from .data_io import estimate_spectral_norm

__all__ = ['SmoothOracle', 'LeastSquares', 'Logistic', 'Problem',
           'ls_oracle', 'logistic_oracle', 'DENSE_LIMIT']

# Above this dimension Hessians are only handed out as operators.
DENSE_LIMIT = 2000
# Exact SVD is used for dense matrices with min(m, n) at most this size.
_EXACT_NORM_LIMIT = 1000


def _check_matrix(A, b):
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=float)
        A.sort_indices()
    else:
        A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError("A must be a non-empty 2-D matrix, got shape %r"
                         % (A.shape,))
    if b.shape[0] != A.shape[0]:
        raise ValueError("b has length %d but A has %d rows"
                         % (b.shape[0], A.shape[0]))
    return A, b


def _spectral_norm(A, seed=0):
    """Largest singular value: exact for small dense input, otherwise a
    power-method upper estimate (inflated by 1%)."""
    if not sp.issparse(A) and min(A.shape) <= _EXACT_NORM_LIMIT:
        return float(np.linalg.norm(A, 2))
    return estimate_spectral_norm(A, seed=seed)


class SmoothOracle:
    """Base class for the smooth term ``f``.

    Subclasses implement :meth:`value`, :meth:`grad` and :meth:`hess_vec`
    and set ``n`` and ``lipschitz``. Instances are treated as immutable.
    """

    n = None
    lipschitz = None

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess_vec(self, x, v):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def hess(self, x):
        """Dense Hessian at ``x`` (only for ``n <= DENSE_LIMIT``)."""
        if self.n > DENSE_LIMIT:
            raise ValueError("dense Hessian refused for n=%d > %d; use hess_op"
                             % (self.n, DENSE_LIMIT))
        return self._dense_hess(x)

    def _dense_hess(self, x):
        H = np.column_stack([self.hess_vec(x, e) for e in np.eye(self.n)])
        return 0.5 * (H + H.T)

    def hess_op(self, x):
        """Hessian at ``x`` as a symmetric ``LinearOperator``."""
        x = np.array(x, dtype=float)
        mv = lambda v: self.hess_vec(x, np.ravel(v))
        return LinearOperator((self.n, self.n), matvec=mv, rmatvec=mv,
                              dtype=float)


class LeastSquares(SmoothOracle):
    """``f(x) = ||Ax - b||^2``."""

    def __init__(self, A, b, lipschitz=None):
        self.A, self.b = _check_matrix(A, b)
        self.m, self.n = self.A.shape
        if lipschitz is None:
            lipschitz = 2.0 * _spectral_norm(self.A) ** 2
        self.lipschitz = float(lipschitz)
        self._gram = None

    def value(self, x):
        r = self.A @ x - self.b
        return float(r @ r)

    def grad(self, x):
        return 2.0 * (self.A.T @ (self.A @ x - self.b))

    def hess_vec(self, x, v):
        return 2.0 * (self.A.T @ (self.A @ v))

    def _dense_hess(self, x):
        # constant Hessian, built once
        if self._gram is None:
            AtA = self.A.T @ self.A
            AtA = AtA.toarray() if sp.issparse(AtA) else np.asarray(AtA)
            self._gram = AtA + AtA.T
        return self._gram.copy()


class Logistic(SmoothOracle):
    """``f(x) = sum_i log(1 + exp(-b_i <a_i, x>))`` with labels in {-1, +1}."""

    def __init__(self, A, b, lipschitz=None):
        self.A, self.b = _check_matrix(A, b)
        if not np.all(np.isin(self.b, (-1.0, 1.0))):
            bad = self.b[~np.isin(self.b, (-1.0, 1.0))][0]
            raise ValueError("logistic labels must be -1 or +1, got %r" % bad)
        self.m, self.n = self.A.shape
        if lipschitz is None:
            lipschitz = 0.25 * _spectral_norm(self.A) ** 2
        self.lipschitz = float(lipschitz)

    def _margins(self, x):
        return self.b * (self.A @ x)

    def value(self, x):
        # log(1 + exp(-t)) = logaddexp(0, -t), safe for large |t|
        return float(np.sum(np.logaddexp(0.0, -self._margins(x))))

    def grad(self, x):
        s = expit(-self._margins(x))
        return -(self.A.T @ (self.b * s))

    def _weights(self, x):
        s = expit(-self._margins(x))
        return s * (1.0 - s)

    def hess_vec(self, x, v):
        return self.A.T @ (self._weights(x) * (self.A @ v))

    def _dense_hess(self, x):
        D = self._weights(x)
        if sp.issparse(self.A):
            H = (self.A.T @ sp.diags(D) @ self.A).toarray()
        else:
            H = self.A.T @ (D[:, None] * self.A)
        return 0.5 * (H + H.T)


def ls_oracle(A, b, lipschitz=None):
    """Least-squares oracle ``||Ax - b||^2``.

    ``L = 2 sigma_max(A)^2``; ``sigma_max`` is exact for small dense ``A``
    and a 1%-inflated power-method bound otherwise.
    """
    return LeastSquares(A, b, lipschitz=lipschitz)


def logistic_oracle(A, b, lipschitz=None):
    """Logistic-loss oracle with ``L = sigma_max(A)^2 / 4``."""
    return Logistic(A, b, lipschitz=lipschitz)


class Problem:
    """Composite problem ``F(x) = f(x) + g(x)``.

    Parameters
    ----------
    smooth : SmoothOracle
    reg : pgssn.regularizers.Regularizer
    """

    def __init__(self, smooth, reg):
        self.smooth = smooth
        self.reg = reg

    @property
    def n(self):
        return self.smooth.n

    @property
    def lipschitz(self):
        return self.smooth.lipschitz

    def objective(self, x):
        gx = self.reg.value(x)
        if not np.isfinite(gx):
            return np.inf
        return self.smooth.value(x) + gx

    __call__ = objective
