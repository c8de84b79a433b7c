"""Forward-backward machinery built on one ``(x, gamma)`` evaluation.

For ``F = f + g`` and a step ``gamma`` this module provides the
forward-backward map ``T(x) = prox_{gamma g}(x - gamma grad f(x))``, the
residual ``R(x) = (x - T(x)) / gamma``, the forward-backward envelope (FBE)

    F_gamma(x) = e_{gamma g}(x - gamma grad f(x)) + f(x) - gamma/2 ||grad f(x)||^2,

its gradient ``Q R`` with ``Q = I - gamma hess f(x)``, and the generalized
Hessian element ``H = Q (I - W Q) / gamma`` where ``W`` is a Clarke element
of the prox.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from ._base import ProxNotSingleValued, ProxResult
from .problem import DENSE_LIMIT

__all__ = ['ForwardBackward', 'SecondOrderElement', 'EnvelopeContext',
           'forward_backward', 't_map', 'residual', 'fbe', 'q_matrix',
           'fbe_gradient', 'second_order_element']

# symmetry tolerance for the assembled dense H (relative to its scale)
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ForwardBackward:
    """Everything a single forward-backward step at ``(x, gamma)`` yields.

    Attributes
    ----------
    x, gamma : the evaluation point and step.
    fx, grad : ``f(x)`` and ``grad f(x)``.
    forward : the forward point ``x - gamma grad``.
    prox : :class:`ProxResult` of ``gamma g`` at ``forward``.
    """
    x: np.ndarray
    gamma: float
    fx: float
    grad: np.ndarray
    forward: np.ndarray
    prox: ProxResult

    @property
    def point(self):
        return self.prox.point

    @property
    def certificate(self):
        return self.prox.certificate

    @property
    def residual(self):
        return (self.x - self.prox.point) / self.gamma

    @property
    def value(self):
        """The FBE ``F_gamma(x)`` from the Moreau value of the prox call."""
        return (self.prox.moreau + self.fx
                - 0.5 * self.gamma * float(self.grad @ self.grad))


def forward_backward(problem, x, gamma):
    """Evaluate ``f``, ``grad f`` and the prox once at ``(x, gamma)``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive, got %r" % (gamma,))
    if gamma >= problem.reg.prox_bound:
        raise ValueError("gamma exceeds the prox-boundedness threshold")
    x = np.asarray(x, dtype=float)
    fx = float(problem.smooth.value(x))
    grad = np.asarray(problem.smooth.grad(x), dtype=float)
    forward = x - gamma * grad
    return ForwardBackward(x, float(gamma), fx, grad, forward,
                           problem.reg.prox(gamma, forward))


@dataclass(frozen=True, eq=False)
class SecondOrderElement:
    """``H = Q (I - W Q) / gamma`` together with the parts it was built from.

    ``H`` and ``Q`` are dense arrays for ``n <= DENSE_LIMIT`` and
    ``LinearOperator`` objects otherwise. ``W`` is a sparse matrix.
    """
    H: object
    W: object
    Q: object
    gamma: float

    @property
    def dense(self):
        return isinstance(self.H, np.ndarray)

    def matvec(self, v):
        return self.H @ v

    def norm_bound(self):
        """``||Q|| (1 + ||W|| ||Q||) / gamma`` from the stored parts."""
        if not self.dense:
            raise ValueError("norm bound needs the dense representation")
        q = np.linalg.norm(self.Q, 2)
        w = np.linalg.norm(self.W.toarray(), 2) if self.W.shape[0] else 0.0
        return q * (1.0 + w * q) / self.gamma


def _q_dense(problem, x, gamma):
    n = problem.n
    return np.eye(n) - gamma * problem.smooth.hess(x)


def _q_operator(problem, x, gamma):
    x = np.array(x, dtype=float)
    hv = problem.smooth.hess_vec
    mv = lambda v: np.ravel(v) - gamma * hv(x, np.ravel(v))
    n = problem.n
    return LinearOperator((n, n), matvec=mv, rmatvec=mv, dtype=float)


def q_matrix(problem, x, gamma, dense=None):
    """``I - gamma hess f(x)``, dense when ``n <= DENSE_LIMIT``."""
    if dense is None:
        dense = problem.n <= DENSE_LIMIT
    return (_q_dense if dense else _q_operator)(problem, x, gamma)


def _require_single_valued(fb):
    if not fb.certificate.single_valued:
        raise ProxNotSingleValued(
            "prox at gamma=%g is %s; envelope gradient undefined"
            % (fb.gamma, fb.certificate))


class EnvelopeContext:
    """A problem paired with a step ``gamma``.

    Every method takes an optional precomputed :class:`ForwardBackward` so a
    caller that already paid for the prox does not pay again. No state is
    cached between calls.
    """

    def __init__(self, problem, gamma):
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        if gamma >= problem.reg.prox_bound:
            raise ValueError("gamma exceeds the prox-boundedness threshold")
        self.problem = problem
        self.gamma = float(gamma)

    def evaluate(self, x):
        return forward_backward(self.problem, x, self.gamma)

    def _fb(self, x, fb):
        return fb if fb is not None else self.evaluate(x)

    def t_map(self, x, fb=None):
        return self._fb(x, fb).prox

    def residual(self, x, fb=None):
        fb = self._fb(x, fb)
        return fb.residual, fb.certificate

    def fbe(self, x, fb=None):
        return self._fb(x, fb).value

    def q_matrix(self, x, dense=None):
        return q_matrix(self.problem, x, self.gamma, dense)

    def fbe_gradient(self, x, fb=None):
        fb = self._fb(x, fb)
        _require_single_valued(fb)
        r = fb.residual
        return r - self.gamma * self.problem.smooth.hess_vec(fb.x, r)

    def second_order_element(self, x, fb=None, dense=None):
        fb = self._fb(x, fb)
        _require_single_valued(fb)
        gamma = self.gamma
        reg = self.problem.reg
        W = sp.csr_matrix(reg.clarke_element(gamma, fb.forward, fb.prox))
        Q = self.q_matrix(fb.x, dense)
        if isinstance(Q, np.ndarray):
            factor = getattr(reg, 'clarke_factor', None)
            if factor is not None:
                # W = U U^T, so Q W Q = (QU)(QU)^T: cheap when U is thin
                U = sp.csc_matrix(factor(gamma, fb.forward, fb.prox))
                QU = np.asarray((U.T @ Q).T)
                H = (Q - QU @ QU.T) / gamma
            else:
                H = (Q - Q @ (W @ Q)) / gamma
            scale = 1.0 + np.max(np.abs(H), initial=0.0)
            asym = np.max(np.abs(H - H.T), initial=0.0)
            if asym > SYMMETRY_TOL * scale:
                raise ArithmeticError(
                    "second-order element asymmetric by %.3g" % asym)
            H = 0.5 * (H + H.T)
        else:
            def mv(v):
                qv = Q @ np.ravel(v)
                return (qv - Q @ (W @ qv)) / gamma
            n = self.problem.n
            H = LinearOperator((n, n), matvec=mv, rmatvec=mv, dtype=float)
        return SecondOrderElement(H, W, Q, gamma)


def t_map(problem, x, gamma):
    """``prox_{gamma g}(x - gamma grad f(x))`` as a :class:`ProxResult`."""
    return EnvelopeContext(problem, gamma).t_map(x)


def residual(problem, x, gamma):
    """``(x - T(x)) / gamma`` and the prox certificate."""
    return EnvelopeContext(problem, gamma).residual(x)


def fbe(problem, x, gamma):
    """Forward-backward envelope value at ``x``."""
    return EnvelopeContext(problem, gamma).fbe(x)


def fbe_gradient(problem, x, gamma):
    """``Q(x) R(x)``; raises :class:`ProxNotSingleValued` at ties."""
    return EnvelopeContext(problem, gamma).fbe_gradient(x)


def second_order_element(problem, x, gamma, dense=None):
    """Generalized Hessian element of the FBE at ``x``."""
    return EnvelopeContext(problem, gamma).second_order_element(x, dense=dense)
