"""Dynamic programs for the prox of fused zero-norm regularizers.

Both programs minimize

    h(x; z) = 1/2 ||x - z||^2 + lam0 ||Bx||_0 + theta(x)

where ``B`` takes first differences and ``theta`` is separable.

``prox_pruned`` handles ``theta = lam ||x||_0 + indicator(box)`` by carrying
the cost-to-come ``P_s(alpha) = min_i P_s(i, alpha)`` as a piecewise
quadratic in the level ``alpha`` of the last segment (functional pruning).
``prox_segment_dp`` is the generic O(n^2) optimal-partitioning recursion
``H(s) = min_i H(i) + Q(i+1, s) + lam0`` for any per-segment solver.

Both report the smallest uniqueness gap met while backtracking, so callers
can decide whether the prox is single valued.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ['PiecewiseQuadratic', 'DPTrace', 'pw_min_with_constant',
           'pw_add_data', 'pw_global_min', 'forward_pass',
           'reference_forward_pass', 'prox_pruned',
           'prox_segment_dp', 'zero_box_segment_solver', 'fused_objective',
           'PruningError']

_ALPHA_TOL = 1e-9


class PruningError(RuntimeError):
    pass


@dataclass
class PiecewiseQuadratic:
    """``P(alpha)`` on a closed interval, as quadratic pieces plus a point
    value at ``alpha = 0``.

    Piece ``k`` lives on ``[lo[k], hi[k]]`` and equals
    ``base[k] + curv[k]/2 * (alpha - vertex[k])^2`` there (vertex form keeps
    crossing computations free of cancellation). ``origin[k]`` is the last
    changepoint index ``i`` realizing that piece. The pieces describe the
    function for ``alpha != 0``; the value at exactly zero, which does not
    pay the zero-norm charge, is carried in ``zero_value``/``zero_origin``.
    ``zero_margin`` is the distance from ``zero_value`` to the best
    alternative origin at zero.
    """
    lo: list
    hi: list
    curv: list
    vertex: list
    base: list
    origin: list
    zero_value: float
    zero_origin: int
    zero_margin: float = math.inf

    def __len__(self):
        return len(self.lo)

    def copy(self):
        return PiecewiseQuadratic(list(self.lo), list(self.hi),
                                  list(self.curv), list(self.vertex),
                                  list(self.base), list(self.origin),
                                  self.zero_value, self.zero_origin,
                                  self.zero_margin)

    def __call__(self, alpha):
        """Evaluate at scalar or array ``alpha`` (``inf`` off the domain)."""
        alpha = np.asarray(alpha, dtype=float)
        out = np.full(alpha.shape, np.inf)
        for lo, hi, a, v, c in zip(self.lo, self.hi, self.curv, self.vertex,
                                   self.base):
            m = (alpha >= lo) & (alpha <= hi)
            out[m] = np.minimum(out[m], c + 0.5 * a * (alpha[m] - v) ** 2)
        out[alpha == 0] = self.zero_value
        return out if out.ndim else float(out)

    @property
    def domain(self):
        return self.lo[0], self.hi[-1]


def _append(P, lo, hi, a, v, c, org):
    # merge with the previous piece when it is the same function
    if P.lo and P.origin[-1] == org and P.hi[-1] >= lo:
        P.hi[-1] = max(P.hi[-1], hi)
        return
    P.lo.append(lo)
    P.hi.append(hi)
    P.curv.append(a)
    P.vertex.append(v)
    P.base.append(c)
    P.origin.append(org)


def _empty_like(P):
    return PiecewiseQuadratic([], [], [], [], [], [], P.zero_value,
                              P.zero_origin, P.zero_margin)


def pw_min_with_constant(P, c, origin):
    """Pointwise ``min(P, c)``; regions where ``c`` wins get ``origin``.

    Each quadratic crosses the level ``c`` at ``vertex +- sqrt(2(c-base)/curv)``,
    so an input piece splits into at most three. Adjacent pieces with equal
    origin are merged.
    """
    if not math.isfinite(c):
        raise ValueError("clip level must be finite")
    out = _empty_like(P)
    for lo, hi, a, v, b, org in zip(P.lo, P.hi, P.curv, P.vertex, P.base,
                                    P.origin):
        if b >= c or a == 0:
            if a == 0 and b < c:
                _append(out, lo, hi, a, v, b, org)
            else:
                _append(out, lo, hi, 0.0, 0.0, c, origin)
            continue
        r = math.sqrt(2.0 * (c - b) / a)
        left, right = v - r, v + r
        if lo < left:
            _append(out, lo, min(hi, left), 0.0, 0.0, c, origin)
        qlo, qhi = max(lo, left), min(hi, right)
        if qlo < qhi or (qlo == qhi and lo == hi):
            _append(out, qlo, qhi, a, v, b, org)
        if right < hi:
            _append(out, max(lo, right), hi, 0.0, 0.0, c, origin)
    if c < P.zero_value:
        out.zero_margin = P.zero_value - c
        out.zero_value = c
        out.zero_origin = origin
    else:
        out.zero_margin = min(P.zero_margin, c - P.zero_value)
    return out


def pw_add_data(P, z, lam, lower, upper):
    """``P(alpha) + (alpha - z)^2/2 + lam*[alpha != 0]`` restricted to
    ``[lower, upper]`` (which must contain 0 in its interior)."""
    out = _empty_like(P)
    for lo, hi, a, v, b, org in zip(P.lo, P.hi, P.curv, P.vertex, P.base,
                                    P.origin):
        lo, hi = max(lo, lower), min(hi, upper)
        if lo > hi:
            continue
        a1 = a + 1.0
        out.lo.append(lo)
        out.hi.append(hi)
        out.curv.append(a1)
        out.vertex.append((a * v + z) / a1)
        out.base.append(b + 0.5 * (a / a1) * (v - z) ** 2 + lam)
        out.origin.append(org)
    if not out.lo:
        raise PruningError("empty feasible interval")
    out.zero_value = P.zero_value + 0.5 * z * z
    return out


@dataclass(frozen=True)
class _Min:
    alpha: float
    value: float
    origin: int
    gap: float


def _candidates(P):
    """Local minima of ``P`` as (alpha, value, origin) triples."""
    k = len(P)
    dom_lo, dom_hi = P.domain
    clamped = [min(max(v, lo), hi) for lo, hi, v in zip(P.lo, P.hi, P.vertex)]
    cands = []
    for j in range(k):
        t = clamped[j]
        lo, hi = P.lo[j], P.hi[j]
        keep = True
        if t == lo and lo > dom_lo:
            # clamped to an inner boundary: a local min only if the left
            # neighbour also bottoms out there
            keep = clamped[j - 1] == P.hi[j - 1]
        elif t == hi and hi < dom_hi:
            keep = clamped[j + 1] == P.lo[j + 1]
        if keep:
            a = P.curv[j]
            cands.append((t, P.base[j] + 0.5 * a * (t - P.vertex[j]) ** 2,
                          P.origin[j]))
    cands.append((0.0, P.zero_value, P.zero_origin))
    return cands


def pw_global_min(P, rel_tie=1e-12):
    """Global minimizer of ``P`` with its origin and uniqueness gap.

    The gap is measured to the best local minimum that has a different
    origin or a different level. Near-exact ties (within ``rel_tie``) are
    broken toward the smaller origin. ``P`` must be continuous across
    piece boundaries away from 0, as every state of the recursion is.
    """
    if not P.lo and not math.isfinite(P.zero_value):
        raise PruningError("empty piecewise quadratic")
    cands = _candidates(P)
    best_val = min(c[1] for c in cands)
    tie = rel_tie * (1.0 + abs(best_val))
    near = [c for c in cands if c[1] <= best_val + tie]
    best = min(near, key=lambda c: (c[2], c[1]))
    gap = math.inf
    scale = _ALPHA_TOL * (1.0 + abs(best[0]))
    for c in cands:
        if c is best:
            continue
        if c[2] != best[2] or abs(c[0] - best[0]) > scale:
            gap = min(gap, c[1] - best[1])
    if best[0] == 0.0 and best[2] == P.zero_origin \
            and best[1] == P.zero_value:
        gap = min(gap, P.zero_margin)
    return _Min(best[0], best[1], best[2], max(gap, 0.0))


@dataclass
class DPTrace:
    """Per-step results of the forward pass (index ``s`` = prefix length).

    ``H[s]`` is the optimal value of the prefix problem with ``H[0] = -lam0``;
    ``alpha[s]``, ``origin[s]`` and ``gap[s]`` describe ``argmin P_s``.
    ``snapshots`` holds each ``P_s`` when recording was requested.
    """
    H: np.ndarray
    alpha: np.ndarray
    origin: np.ndarray
    gap: np.ndarray
    n_pieces: np.ndarray
    snapshots: list = field(default_factory=list)


def _step(pieces, c, org, z, lam, lower, upper):
    """Clip at ``c`` (new origin ``org``) then add the data term: the
    fused equivalent of :func:`pw_min_with_constant` followed by
    :func:`pw_add_data`, with identical arithmetic, on plain lists."""
    lo_, hi_, a_, v_, b_, o_ = pieces
    clo, chi, ca, cv, cb, co = [], [], [], [], [], []

    def push(lo, hi, a, v, b, o):
        if co and co[-1] == o and chi[-1] >= lo:
            if hi > chi[-1]:
                chi[-1] = hi
            return
        clo.append(lo)
        chi.append(hi)
        ca.append(a)
        cv.append(v)
        cb.append(b)
        co.append(o)

    for lo, hi, a, v, b, o in zip(lo_, hi_, a_, v_, b_, o_):
        if b >= c or a == 0:
            if a == 0 and b < c:
                push(lo, hi, a, v, b, o)
            else:
                push(lo, hi, 0.0, 0.0, c, org)
            continue
        r = math.sqrt(2.0 * (c - b) / a)
        left, right = v - r, v + r
        if lo < left:
            push(lo, min(hi, left), 0.0, 0.0, c, org)
        qlo, qhi = max(lo, left), min(hi, right)
        if qlo < qhi or (qlo == qhi and lo == hi):
            push(qlo, qhi, a, v, b, o)
        if right < hi:
            push(max(lo, right), hi, 0.0, 0.0, c, org)
    nlo, nhi, na, nv, nb, no = [], [], [], [], [], []
    for lo, hi, a, v, b, o in zip(clo, chi, ca, cv, cb, co):
        lo, hi = max(lo, lower), min(hi, upper)
        if lo > hi:
            continue
        a1 = a + 1.0
        nlo.append(lo)
        nhi.append(hi)
        na.append(a1)
        nv.append((a * v + z) / a1)
        nb.append(b + 0.5 * (a / a1) * (v - z) ** 2 + lam)
        no.append(o)
    if not nlo:
        raise PruningError("empty feasible interval")
    return nlo, nhi, na, nv, nb, no


def _global_min(pieces, zv, zo, zm, rel_tie=1e-12):
    # list-based twin of pw_global_min (same candidates, same arithmetic)
    lo_, hi_, a_, v_, b_, o_ = pieces
    k = len(lo_)
    dom_lo, dom_hi = lo_[0], hi_[-1]
    clamped = [min(max(v, lo), hi) for lo, hi, v in zip(lo_, hi_, v_)]
    ct, cval, corg = [], [], []
    for j in range(k):
        t = clamped[j]
        lo, hi = lo_[j], hi_[j]
        if t == lo and lo > dom_lo:
            if clamped[j - 1] != hi_[j - 1]:
                continue
        elif t == hi and hi < dom_hi:
            if clamped[j + 1] != lo_[j + 1]:
                continue
        ct.append(t)
        cval.append(b_[j] + 0.5 * a_[j] * (t - v_[j]) ** 2)
        corg.append(o_[j])
    ct.append(0.0)
    cval.append(zv)
    corg.append(zo)
    best_val = min(cval)
    tie = rel_tie * (1.0 + abs(best_val))
    ib = -1
    for i, (val, org) in enumerate(zip(cval, corg)):
        if val <= best_val + tie and (
                ib < 0 or (org, val) < (corg[ib], cval[ib])):
            ib = i
    bt, bv, bo = ct[ib], cval[ib], corg[ib]
    g = math.inf
    scale = _ALPHA_TOL * (1.0 + abs(bt))
    for i, (t, val, org) in enumerate(zip(ct, cval, corg)):
        if i != ib and (org != bo or abs(t - bt) > scale):
            if val - bv < g:
                g = val - bv
    if bt == 0.0 and bo == zo and bv == zv:
        g = min(g, zm)
    return bt, bv, bo, max(g, 0.0)


def _as_pq(pieces, zv, zo, zm):
    return PiecewiseQuadratic(*(list(p) for p in pieces), zv, zo, zm)


def forward_pass(z, lam0, lam, lower, upper, record=False):
    """Run the pruned recursion over ``s = 1..n``.

    ``lam0``, ``lam`` are the (already step-scaled) jump and sparsity
    weights; ``lower``, ``upper`` are per-coordinate box bounds.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    H = np.empty(n + 1)
    alpha = np.zeros(n + 1)
    origin = np.zeros(n + 1, dtype=int)
    gap = np.full(n + 1, np.inf)
    n_pieces = np.zeros(n + 1, dtype=int)
    H[0] = -lam0
    snaps = [None] if record else []
    zl, lowl, upl = z.tolist(), np.asarray(lower, float).tolist(), \
        np.asarray(upper, float).tolist()
    z0 = zl[0]
    pieces = ([lowl[0]], [upl[0]], [1.0], [z0], [lam], [0])
    zv, zo, zm = 0.5 * z0 * z0, 0, math.inf
    h_prev = None
    for s in range(1, n + 1):
        if s > 1:
            c = h_prev + lam0
            if not math.isfinite(c):
                raise ValueError("clip level must be finite")
            pieces = _step(pieces, c, s - 1, zl[s - 1], lam, lowl[s - 1],
                           upl[s - 1])
            if c < zv:
                zm, zv, zo = zv - c, c, s - 1
            else:
                zm = min(zm, c - zv)
            zv = zv + 0.5 * zl[s - 1] * zl[s - 1]
        res = _global_min(pieces, zv, zo, zm)
        h_prev = res[1]
        H[s], alpha[s], origin[s], gap[s] = res[1], res[0], res[2], res[3]
        n_pieces[s] = len(pieces[0])
        if record:
            snaps.append(_as_pq(pieces, zv, zo, zm))
    return DPTrace(H, alpha, origin, gap, n_pieces, snaps)


def reference_forward_pass(z, lam0, lam, lower, upper):
    """:func:`forward_pass` written as a plain composition of the public
    piecewise-quadratic operations (slow; kept as a cross-check)."""
    z = np.asarray(z, dtype=float)
    n = z.size
    H = np.empty(n + 1)
    alpha = np.zeros(n + 1)
    origin = np.zeros(n + 1, dtype=int)
    gap = np.full(n + 1, np.inf)
    n_pieces = np.zeros(n + 1, dtype=int)
    H[0] = -lam0
    z0 = float(z[0])
    P = PiecewiseQuadratic([float(lower[0])], [float(upper[0])], [1.0], [z0],
                           [lam], [0], 0.5 * z0 * z0, 0)
    for s in range(1, n + 1):
        if s > 1:
            P = pw_min_with_constant(P, H[s - 1] + lam0, s - 1)
            P = pw_add_data(P, float(z[s - 1]), lam, float(lower[s - 1]),
                            float(upper[s - 1]))
        res = pw_global_min(P)
        H[s], alpha[s], origin[s], gap[s] = (res.value, res.alpha, res.origin,
                                             res.gap)
        n_pieces[s] = len(P)
    return DPTrace(H, alpha, origin, gap, n_pieces)


def _backtrack(n, alpha, origin, gap):
    x = np.empty(n)
    min_gap = math.inf
    s = n
    while s > 0:
        i = int(origin[s])
        x[i:s] = alpha[s]
        min_gap = min(min_gap, gap[s])
        s = i
    return x, min_gap


def _box_bounds(box, n):
    lower, upper = box
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    if np.any(lower >= 0) or np.any(upper <= 0):
        raise ValueError("box must satisfy lower < 0 < upper componentwise")
    return lower, upper


def prox_pruned(z, lam0, lam, box, gamma=1.0):
    """Prox of ``lam0 ||B.||_0 + lam ||.||_0 + indicator(box)`` at ``z``.

    Minimizes ``1/2 ||x - z||^2 + gamma*lam0 ||Bx||_0 + gamma*lam ||x||_0``
    over the box by functional pruning.

    Returns
    -------
    x : ndarray
        A minimizer (ties broken toward earlier changepoints).
    value : float
        The optimal value of the scaled problem above.
    gap : float
        Smallest uniqueness gap met while backtracking, in the same units as
        ``value``; ``inf`` means every choice was unique.
    """
    z = np.asarray(z, dtype=float).ravel()
    lower, upper = _box_bounds(box, z.size)
    tr = forward_pass(z, gamma * lam0, gamma * lam, lower, upper)
    x, gap = _backtrack(z.size, tr.alpha, tr.origin, tr.gap)
    return x, float(tr.H[-1]), gap


def zero_box_segment_solver(z, lam, lower, upper):
    """Segment solver for ``theta = lam ||.||_0 + indicator(box)``.

    The returned callable maps ``(starts, end)`` (0-based, half-open
    segments ``[start, end)``; ``starts`` may be an array) to
    ``(alpha, Q, gap)`` where ``Q`` is the segment's optimal cost.
    """
    z = np.asarray(z, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), z.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), z.shape)
    c1 = np.concatenate(([0.0], np.cumsum(z)))
    c2 = np.concatenate(([0.0], np.cumsum(z * z)))

    def solve(starts, end):
        starts = np.asarray(starts)
        m = end - starts
        mean = (c1[end] - c1[starts]) / m
        sq = c2[end] - c2[starts]
        # box of a segment: intersection of the coordinate boxes
        lo = np.maximum.accumulate(lower[:end][::-1])[::-1][starts]
        hi = np.minimum.accumulate(upper[:end][::-1])[::-1][starts]
        a = np.clip(mean, lo, hi)
        base = 0.5 * sq - 0.5 * m * mean ** 2
        q_nz = base + 0.5 * m * (a - mean) ** 2 + m * lam
        q_0 = 0.5 * sq
        alpha = np.where(q_nz < q_0, a, 0.0)
        gap = np.abs(q_nz - q_0) if lam > 0 else np.full(m.shape, np.inf)
        return alpha, np.minimum(q_nz, q_0), gap

    return solve


def prox_segment_dp(z, lam0, segment_solver, rel_tie=1e-12):
    """Optimal partitioning ``H(s) = min_i H(i) + Q(i+1, s) + lam0``.

    Parameters
    ----------
    z : array_like
        Only its length is used; the data live in ``segment_solver``.
    lam0 : float
        Jump weight (already multiplied by the prox step).
    segment_solver : callable
        ``(starts, end) -> (alpha, Q, gap)`` on 0-based half-open segments,
        vectorized over ``starts``.

    Returns
    -------
    x, value, gap
        As for :func:`prox_pruned`.
    """
    n = np.size(z)
    H = np.empty(n + 1)
    H[0] = -lam0
    alpha = np.zeros(n + 1)
    origin = np.zeros(n + 1, dtype=int)
    gap = np.full(n + 1, np.inf)
    for s in range(1, n + 1):
        starts = np.arange(s)
        a, q, sgap = segment_solver(starts, s)
        tot = H[:s] + q + lam0
        best = tot.min()
        near = np.flatnonzero(tot <= best + rel_tie * (1.0 + abs(best)))
        i = near[0]
        H[s], alpha[s], origin[s] = tot[i], a[i], i
        rest = np.delete(tot, i)
        g = rest.min() - tot[i] if rest.size else np.inf
        gap[s] = max(0.0, min(g, sgap[i]))
    x, min_gap = _backtrack(n, alpha, origin, gap)
    return x, float(H[n]), min_gap


def fused_objective(x, z, lam0, theta=None):
    """``1/2 ||x - z||^2 + lam0 ||Bx||_0 + theta(x)`` recomputed from scratch."""
    x = np.asarray(x, dtype=float)
    val = 0.5 * float(np.sum((x - z) ** 2))
    val += lam0 * np.count_nonzero(np.diff(x))
    if theta is not None:
        val += theta(x)
    return val
