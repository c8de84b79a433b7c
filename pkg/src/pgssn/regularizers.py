"""Nonsmooth terms ``g``: values, proximal maps, certificates and Clarke
elements of the proximal map.

Conventions: ``prox(gamma, z)`` minimizes ``||x - z||^2 / (2 gamma) + g(x)``
and returns a :class:`~pgssn._base.ProxResult` whose ``moreau`` field is the
attained minimum. ``clarke_element(gamma, z, res)`` returns a symmetric
sparse matrix ``W`` from the Clarke Jacobian of the prox at ``z``.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fused_dp
from ._base import (Certificate, DegenerateProxError, ProxNotSingleValued,
                    ProxResult)

__all__ = ['Regularizer', 'BoxConstraint', 'LqNorm', 'ZeroNormBox',
           'FusedZeroNorm', 'FusedLq', 'lq_scalar_prox', 'lq_objective',
           'zero_box_scalar_prox', 'lq_vector_prox', 'lq_clarke_element',
           'fused_clarke_element', 'lq_regularizer',
           'zero_norm_box_regularizer', 'fused_zero_norm_regularizer',
           'fused_lq_regularizer', 'constant_segments']

_Q_VALUES = (0.5, 2.0 / 3.0)


def _check_q(q):
    for qq in _Q_VALUES:
        if abs(q - qq) < 1e-12:
            return qq
    raise ValueError("q must be 1/2 or 2/3, got %r" % (q,))


def lq_objective(q, w, z, t):
    """``(t - z)^2 / 2 + w |t|^q``."""
    return 0.5 * (t - z) ** 2 + w * np.abs(t) ** q


def _lq_root(q, w, a):
    """Largest positive root ``t`` of ``t - a + w q t^(q-1) = 0`` for
    ``a > 0``; ``nan`` where none exists."""
    if q == 0.5:
        # s = sqrt(t):  s^3 - a s + w/2 = 0, trigonometric form
        # tiny a overflows to -inf, which correctly means "no root"
        with np.errstate(over='ignore', divide='ignore'):
            arg = -(0.75 * w / a) * np.sqrt(3.0 / a)
        ok = arg >= -1.0
        s = 2.0 * np.sqrt(a / 3.0) * np.cos(np.arccos(np.maximum(arg, -1.0))
                                            / 3.0)
    else:
        # s = t^(1/3):  s^4 - a s + 2w/3 = 0 via batched companion matrices
        c = 2.0 * w / 3.0 * np.ones_like(a)
        ok = 0.75 * a * np.cbrt(a / 4.0) >= c
        comp = np.zeros(a.shape + (4, 4))
        comp[..., 0, 2] = a
        comp[..., 0, 3] = -c
        comp[..., 1, 0] = comp[..., 2, 1] = comp[..., 3, 2] = 1.0
        s = np.max(np.linalg.eigvals(comp).real, axis=-1) if a.size else a
        s = np.where(ok, s, 1.0)
    t = np.where(ok, s ** (1.0 / q) if q == 0.5 else s ** 3, np.nan)
    # one safeguarded Newton step on the stationarity equation
    with np.errstate(invalid='ignore', divide='ignore'):
        psi = t - a + w * q * t ** (q - 1.0)
        dpsi = 1.0 + w * q * (q - 1.0) * t ** (q - 2.0)
        t_new = t - psi / dpsi
        psi_new = t_new - a + w * q * t_new ** (q - 1.0)
        better = (dpsi > 0) & (t_new > 0) & (np.abs(psi_new) < np.abs(psi))
    return np.where(better, t_new, t)


def lq_scalar_prox(q, w, z):
    """Prox of ``w |.|^q`` for ``q`` in {1/2, 2/3}, vectorized over ``z``.

    Compares ``t = 0`` with the nonzero stationary point of
    ``(t - z)^2/2 + w |t|^q``. Returns ``(p, gap)`` where ``gap`` is the
    objective difference of the two candidates (``inf`` if no nonzero
    stationary point exists).
    """
    q = _check_q(q)
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    w = np.broadcast_to(np.asarray(w, dtype=float), z.shape)
    a = np.abs(z)
    p = np.zeros_like(z)
    gap = np.full(z.shape, np.inf)
    pos = (a > 0) & (w > 0)
    if np.any(pos):
        ap, wp = a[pos], w[pos]
        t = _lq_root(q, wp, ap)
        has = ~np.isnan(t)
        f0 = 0.5 * ap * ap
        ft = np.where(has, lq_objective(q, wp, ap, np.where(has, t, 0.0)),
                      np.inf)
        p[pos] = np.where(ft < f0, t, 0.0) * np.sign(z[pos])
        gap[pos] = np.where(has, np.abs(f0 - ft), np.inf)
    zero_w = w == 0
    p[zero_w] = z[zero_w]
    if scalar:
        return float(p[0]), float(gap[0])
    return p, gap


def zero_box_scalar_prox(lam, gamma, lower, upper, z):
    """Prox of ``lam [t != 0] + indicator([lower, upper])``, vectorized
    (all arguments broadcast).

    The candidates are ``0`` and ``clip(z, lower, upper)`` charged ``lam``.
    Returns ``(p, gap)``; ``gap = inf`` when ``lam == 0`` (plain projection).
    """
    z = np.asarray(z, dtype=float)
    c = np.clip(z, lower, upper)
    f_nz = (c - z) ** 2 / (2.0 * gamma) + lam
    f_0 = z ** 2 / (2.0 * gamma)
    p = np.where(f_nz < f_0, c, 0.0)
    gap = np.where(np.asarray(lam) > 0, np.abs(f_nz - f_0), np.inf)
    if p.ndim == 0:
        return float(p), float(gap)
    return p, gap


def lq_vector_prox(q, lam, gamma, z):
    """Separable prox of ``lam ||.||_q^q`` with step ``gamma``."""
    z = np.asarray(z, dtype=float)
    w = gamma * lam
    p, gap = lq_scalar_prox(q, w, z)
    moreau = float(np.sum(lq_objective(q, w, z, p))) / gamma
    min_gap = float(np.min(gap)) / gamma if gap.size else math.inf
    return ProxResult(p, moreau, Certificate.from_gap(min_gap, moreau))


def _lq_slope(q, w, t):
    # derivative of the scalar prox at a nonzero prox value t
    return 1.0 / (1.0 + w * q * (q - 1.0) * np.abs(t) ** (q - 2.0))


def lq_clarke_element(q, lam, gamma, p, certificate=None):
    """Diagonal Clarke element of the ``l_q`` prox at a prox point ``p``.

    ``W_ii = 1 / (1 + gamma lam q (q-1) |p_i|^(q-2))`` on the support of
    ``p`` and 0 elsewhere (implicit differentiation of the stationarity
    condition).
    """
    if certificate is not None and not certificate.single_valued:
        raise ProxNotSingleValued("l_q prox is not certified single valued")
    q = _check_q(q)
    p = np.asarray(p, dtype=float)
    d = np.zeros_like(p)
    nz = p != 0
    d[nz] = _lq_slope(q, gamma * lam, p[nz])
    return sp.diags(d, format='csr')


def constant_segments(x):
    """Start/stop indices of the maximal runs of equal values in ``x``."""
    x = np.asarray(x)
    cuts = np.flatnonzero(np.diff(x) != 0) + 1
    starts = np.concatenate(([0], cuts))
    stops = np.concatenate((cuts, [x.size]))
    return starts, stops


def _block_matrix(n, blocks):
    rows, cols, vals = [], [], []
    for i0, i1, c in blocks:
        idx = np.arange(i0, i1)
        rows.append(np.repeat(idx, idx.size))
        cols.append(np.tile(idx, idx.size))
        vals.append(np.full(idx.size ** 2, c / idx.size))
    if not rows:
        return sp.csr_matrix((n, n))
    W = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    W.sort_indices()
    return W


def _block_factor(n, blocks):
    # U with W = U U^T: one column per block, entries sqrt(c / l)
    rows, cols, vals = [], [], []
    for j, (i0, i1, c) in enumerate(blocks):
        l = i1 - i0
        rows.append(np.arange(i0, i1))
        cols.append(np.full(l, j))
        vals.append(np.full(l, math.sqrt(c / l)))
    if not rows:
        return sp.csc_matrix((n, 0))
    return sp.csc_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, len(blocks)))


def _check_box_faces(p, box):
    lower, upper = box.bounds(p.size)
    nz = p != 0
    if np.any(nz & ((p <= lower) | (p >= upper))):
        raise DegenerateProxError("prox point touches the box boundary")


def _fused_blocks(p):
    starts, stops = constant_segments(p)
    return [(i0, i1, 1.0) for i0, i1 in zip(starts, stops) if p[i0] != 0]


def fused_clarke_element(p, box=None):
    """Orthogonal projector onto ``{z : supp z in supp p, supp Bz in supp Bp}``.

    Each maximal constant nonzero run of length ``l`` contributes a block
    ``ones((l, l)) / l``. Raises :class:`DegenerateProxError` if a nonzero
    entry of ``p`` sits on a face of ``box``.
    """
    p = np.asarray(p, dtype=float)
    if box is not None:
        _check_box_faces(p, box)
    return _block_matrix(p.size, _fused_blocks(p))


@dataclass(frozen=True)
class BoxConstraint:
    """``{x : lower <= x <= upper}`` with ``lower < 0 < upper``.

    Bounds may be scalars (applied to every coordinate) or arrays.
    """
    lower: object = -np.inf
    upper: object = np.inf

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if np.any(lo >= 0) or np.any(hi <= 0):
            raise ValueError("box must contain 0 in its interior")

    def bounds(self, n):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,))
        return lo, hi

    def contains(self, x):
        lo, hi = self.bounds(np.size(x))
        return bool(np.all((x >= lo) & (x <= hi)))


class Regularizer:
    """Interface for the nonsmooth term.

    ``prox_bound`` is the prox-boundedness threshold (``inf`` for the
    regularizers here, all of which are bounded below).
    """

    prox_bound = math.inf

    def value(self, x):
        raise NotImplementedError

    def prox(self, gamma, z):
        raise NotImplementedError

    def certificate(self, gamma, z):
        return self.prox(gamma, z).certificate

    def clarke_blocks(self, gamma, z, res=None):
        """``W`` as a list of ``(start, stop, c)``: each block is
        ``c * ones((l, l)) / l`` on ``[start, stop)``."""
        raise NotImplementedError

    def clarke_element(self, gamma, z, res=None):
        """A symmetric sparse element ``W`` of the Clarke Jacobian of the
        prox at ``z``."""
        res = res or self.prox(gamma, z)
        return _block_matrix(res.point.size,
                             self.clarke_blocks(gamma, z, res))

    def clarke_factor(self, gamma, z, res=None):
        """Sparse ``U`` with ``W = U U^T`` (one column per block)."""
        res = res or self.prox(gamma, z)
        return _block_factor(res.point.size,
                             self.clarke_blocks(gamma, z, res))

    def __call__(self, x):
        return self.value(x)

    @staticmethod
    def _require(res):
        if not res.certificate.single_valued:
            raise ProxNotSingleValued(
                "prox not certified single valued (%s)" % res.certificate)


class LqNorm(Regularizer):
    """``lam ||x||_q^q`` for ``q`` in {1/2, 2/3}."""

    def __init__(self, lam, q=0.5):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        self.q = _check_q(q)

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x) ** self.q))

    def prox(self, gamma, z):
        if self.lam == 0:
            z = np.array(z, dtype=float)
            return ProxResult(z, 0.0, Certificate(math.inf, 0.0))
        return lq_vector_prox(self.q, self.lam, gamma, z)

    def clarke_blocks(self, gamma, z, res=None):
        res = res or self.prox(gamma, z)
        self._require(res)
        p = res.point
        nz = np.flatnonzero(p)
        d = _lq_slope(self.q, gamma * self.lam, p[nz])
        return [(int(i), int(i) + 1, float(c)) for i, c in zip(nz, d)]

    def clarke_element(self, gamma, z, res=None):
        res = res or self.prox(gamma, z)
        self._require(res)
        return lq_clarke_element(self.q, self.lam, gamma, res.point)


class ZeroNormBox(Regularizer):
    """``lam ||x||_0 + indicator(box)`` (separable)."""

    def __init__(self, lam, box):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        self.box = box

    def value(self, x):
        if not self.box.contains(x):
            return math.inf
        return self.lam * np.count_nonzero(x)

    def prox(self, gamma, z):
        z = np.asarray(z, dtype=float)
        lo, hi = self.box.bounds(z.size)
        p, gap = zero_box_scalar_prox(self.lam, gamma, lo, hi, z)
        p, gap = np.atleast_1d(p), np.atleast_1d(gap)
        moreau = float(np.sum((p - z) ** 2)) / (2 * gamma) \
            + self.lam * np.count_nonzero(p)
        return ProxResult(p, moreau, Certificate.from_gap(np.min(gap), moreau))

    def clarke_blocks(self, gamma, z, res=None):
        res = res or self.prox(gamma, z)
        self._require(res)
        # a clamped coordinate is locally constant in z, so W_ii = 0 there;
        # only free nonzeros move with z
        lo, hi = self.box.bounds(res.point.size)
        p = res.point
        free = (p != 0) & (p > lo) & (p < hi)
        return [(int(i), int(i) + 1, 1.0) for i in np.flatnonzero(free)]


class FusedZeroNorm(Regularizer):
    """``lam0 ||Bx||_0 + lam ||x||_0 + indicator(box)``, ``B`` = first
    differences."""

    def __init__(self, lam0, lam, box):
        if lam0 < 0 or lam < 0:
            raise ValueError("weights must be nonnegative")
        self.lam0, self.lam, self.box = float(lam0), float(lam), box

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if not self.box.contains(x):
            return math.inf
        return (self.lam0 * np.count_nonzero(np.diff(x))
                + self.lam * np.count_nonzero(x))

    def prox(self, gamma, z):
        z = np.asarray(z, dtype=float)
        if z.size == 1:
            return ZeroNormBox(self.lam, self.box).prox(gamma, z)
        lo, hi = self.box.bounds(z.size)
        x, val, gap = fused_dp.prox_pruned(z, self.lam0, self.lam, (lo, hi),
                                           gamma)
        moreau = val / gamma
        return ProxResult(x, moreau, Certificate.from_gap(gap / gamma, moreau))

    def clarke_blocks(self, gamma, z, res=None):
        res = res or self.prox(gamma, z)
        self._require(res)
        _check_box_faces(res.point, self.box)
        return _fused_blocks(res.point)


def _lq_segment_solver(z, w, q):
    z = np.asarray(z, dtype=float)
    c1 = np.concatenate(([0.0], np.cumsum(z)))
    c2 = np.concatenate(([0.0], np.cumsum(z * z)))

    def solve(starts, end):
        starts = np.asarray(starts)
        m = end - starts
        mean = (c1[end] - c1[starts]) / m
        alpha, gap = lq_scalar_prox(q, w, mean)
        # complete the square around the segment mean
        q_val = (0.5 * (c2[end] - c2[starts]) - 0.5 * m * mean ** 2
                 + m * lq_objective(q, w, mean, alpha))
        return alpha, q_val, m * gap

    return solve


class FusedLq(Regularizer):
    """``lam0 ||Bx||_0 + lam ||x||_q^q``, ``B`` = first differences."""

    def __init__(self, lam0, lam, q=0.5):
        if lam0 < 0 or lam < 0:
            raise ValueError("weights must be nonnegative")
        self.lam0, self.lam, self.q = float(lam0), float(lam), _check_q(q)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return (self.lam0 * np.count_nonzero(np.diff(x))
                + self.lam * float(np.sum(np.abs(x) ** self.q)))

    def prox(self, gamma, z):
        z = np.asarray(z, dtype=float)
        solver = _lq_segment_solver(z, gamma * self.lam, self.q)
        x, val, gap = fused_dp.prox_segment_dp(z, gamma * self.lam0, solver)
        moreau = val / gamma
        return ProxResult(x, moreau, Certificate.from_gap(gap / gamma, moreau))

    def clarke_blocks(self, gamma, z, res=None):
        res = res or self.prox(gamma, z)
        self._require(res)
        p = res.point
        starts, stops = constant_segments(p)
        w = gamma * self.lam
        # a run's level is the scalar prox (weight w) of the run mean, so
        # its block is c * ones / l with c the scalar prox slope
        return [(int(i0), int(i1),
                 float(_lq_slope(self.q, w, p[i0])) if w > 0 else 1.0)
                for i0, i1 in zip(starts, stops) if p[i0] != 0]


def lq_regularizer(lam, q=0.5):
    return LqNorm(lam, q)


def zero_norm_box_regularizer(lam, box):
    return ZeroNormBox(lam, box)


def fused_zero_norm_regularizer(lam0, lam, box):
    """``lam0 ||B.||_0 + lam ||.||_0 + indicator(box)``; prox by pruned DP."""
    return FusedZeroNorm(lam0, lam, box)


def fused_lq_regularizer(lam0, lam, q=0.5):
    """``lam0 ||B.||_0 + lam ||.||_q^q``; prox by the segment DP."""
    return FusedLq(lam0, lam, q)
