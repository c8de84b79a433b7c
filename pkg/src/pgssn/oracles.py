"""Brute-force reference computations.

Nothing here imports the code it is used to check: scalar minimization is
done by grid scan plus golden-section refinement, fused proxes by
enumerating every segmentation, derivatives by central differences and
trust-region subproblems by dense polar/spherical grids.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = ['GridSpec', 'grid_prox_rows', 'grid_scalar_prox', 'lq_grid_prox',
           'zero_box_segment_oracle', 'lq_segment_oracle', 'enumerate_fused',
           'fd_gradient', 'fd_jacobian', 'trs_grid_oracle']

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    coarse: int = 100_000
    rounds: int = 40

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("GridSpec needs lo < hi")

    @property
    def resolution(self):
        h = (self.hi - self.lo) / (self.coarse - 1)
        return 2.0 * h * _INV_PHI ** self.rounds


def _golden(obj, a, b, rounds):
    # vectorized golden-section search, one bracket per entry
    for _ in range(rounds):
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
        left = obj(c) <= obj(d)
        a, b = np.where(left, a, c), np.where(left, d, b)
    t = 0.5 * (a + b)
    return t, obj(t)


def _bisect(deriv, a, b, rounds):
    # derivative-sign bisection; brackets are assumed to satisfy
    # deriv(a) < 0 < deriv(b)
    # a bracket around the cusp at 0 would otherwise shrink toward
    # subnormals, so widths also stop at 2^-60 of the starting width
    floor = np.ldexp(np.max(b - a, initial=0.0), -60)
    for _ in range(rounds):
        mid = 0.5 * (a + b)
        width = b - a
        if np.all((width <= floor)
                  | (width <= 2.0 ** -52 * np.maximum(abs(a), abs(b)))):
            break
        up = deriv(mid) > 0
        a, b = np.where(up, a, mid), np.where(up, mid, b)
    return 0.5 * (a + b)


def grid_prox_rows(objective, lo, hi, coarse=100_000, rounds=40,
                   extra_points=(), max_basins=16, derivative=None):
    """Row-batched scalar minimization over ``[lo[k], hi[k]]``.

    ``objective`` and ``derivative`` receive arrays of shape ``(K, M)``
    whose row ``k`` belongs to problem ``k`` (row parameters should be
    broadcast as column vectors). A uniform scan locates every locally
    minimal grid cell; each of the ``max_basins`` best is refined by
    bisection on the derivative sign where the cell brackets a sign change,
    else by golden-section search. Points in ``extra_points`` (e.g. a kink
    at 0) are evaluated exactly.

    Returns
    -------
    t, value, second_best_gap : arrays of shape ``(K,)``
        ``second_best_gap`` is the value difference between the two best
        distinct basins (``inf`` if only one exists).
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    K = lo.size
    rows = np.arange(K)[:, None]
    u = np.linspace(0.0, 1.0, coarse)
    span = (hi - lo)[:, None]
    grid = lo[:, None] + span * u
    h = span / (coarse - 1)
    f = objective(grid)
    inf_col = np.full((K, 1), np.inf)
    left = np.hstack((inf_col, f[:, :-1]))
    right = np.hstack((f[:, 1:], inf_col))
    masked = np.where((f <= left) & (f <= right), f, np.inf)
    B = min(max_basins, coarse)
    idx = np.argsort(masked, axis=1, kind='stable')[:, :B]
    valid = np.isfinite(masked[rows, idx])
    g0, f0 = grid[rows, idx], f[rows, idx]
    a = np.maximum(g0 - h, lo[:, None])
    b = np.minimum(g0 + h, hi[:, None])
    ok = np.zeros_like(valid)
    t, ft = g0.copy(), f0.copy()
    with np.errstate(invalid='ignore', divide='ignore'):
        if derivative is not None:
            ok = valid & (derivative(a) < 0) & (derivative(b) > 0)
            if np.any(ok):
                tb = _bisect(derivative, np.where(ok, a, g0),
                             np.where(ok, b, g0), rounds + 20)
                t = np.where(ok, tb, t)
        rest = valid & ~ok
        if np.any(rest):
            tg, _ = _golden(objective, np.where(rest, a, g0),
                            np.where(rest, b, g0), rounds)
            t = np.where(rest, tg, t)
        ft = objective(t)
    # refinement must not lose to the grid point it started from
    worse = ~(ft <= f0)
    t = np.where(worse, g0, t)
    ft = np.where(valid, np.where(worse, f0, ft), np.inf)
    if len(extra_points):
        e = np.broadcast_to(np.asarray(extra_points, dtype=float),
                            (K, len(extra_points)))
        t = np.hstack((t, e))
        ft = np.hstack((ft, objective(e)))
    best = np.argmin(ft, axis=1)
    best_t = t[rows[:, 0], best]
    best_f = ft[rows[:, 0], best]
    far = (np.abs(t - best_t[:, None]) > 2 * h) & np.isfinite(ft)
    gap = np.min(np.where(far, ft - best_f[:, None], np.inf), axis=1)
    return best_t, best_f, gap


def grid_scalar_prox(objective, spec, extra_points=(), max_basins=16,
                     derivative=None):
    """Single-problem form of :func:`grid_prox_rows` on a :class:`GridSpec`.

    ``objective`` and ``derivative`` must be elementwise. Returns floats
    ``(t, value, second_best_gap)``.
    """
    t, f, gap = grid_prox_rows(objective, spec.lo, spec.hi, spec.coarse,
                               spec.rounds, extra_points, max_basins,
                               derivative)
    return float(t[0]), float(f[0]), float(gap[0])


def lq_grid_prox(q, w, z, coarse=100_000, rounds=40):
    """Grid oracle for ``argmin (t - z)^2/2 + w |t|^q``."""
    r = abs(z) + 1.0
    obj = lambda t: 0.5 * (t - z) ** 2 + w * np.abs(t) ** q
    der = lambda t: t - z + w * q * np.sign(t) * np.abs(t) ** (q - 1)
    return grid_scalar_prox(obj, GridSpec(-r, r, coarse, rounds),
                            extra_points=(0.0,), derivative=der)


def zero_box_segment_oracle(z, lam, lower, upper):
    """Segment solver for ``lam ||.||_0 + box`` by direct two-candidate
    comparison. Segments are 0-based half-open ``[i, s)``."""
    z = np.asarray(z, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), z.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), z.shape)

    def solve(i, s):
        seg = z[i:s]
        lo, hi = lower[i:s].max(), upper[i:s].min()
        cand = min(max(seg.mean(), lo), hi)
        f_nz = 0.5 * np.sum((cand - seg) ** 2) + lam * seg.size
        f_0 = 0.5 * np.sum(seg ** 2)
        gap = abs(f_nz - f_0) if lam > 0 else math.inf
        return (cand, f_nz, gap) if f_nz < f_0 else (0.0, f_0, gap)

    return solve


def lq_segment_oracle(z, w, q, coarse=4001, rounds=60):
    """Segment solver for ``w ||.||_q^q`` by grid search on the segment
    objective ``sum_j (alpha - z_j)^2/2 + m w |alpha|^q``.

    All ``n(n+1)/2`` segments are solved up front in one batched scan.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    keys = [(i, s) for i in range(n) for s in range(i + 1, n + 1)]
    if not keys:
        return lambda i, s: (0.0, 0.0, math.inf)
    csum = np.concatenate(([0.0], np.cumsum(z)))
    csq = np.concatenate(([0.0], np.cumsum(z * z)))
    i, s = np.array(keys).T
    m = (s - i).astype(float)[:, None]
    mean = (csum[s] - csum[i])[:, None] / m
    sq = (csq[s] - csq[i])[:, None]
    r = np.abs(mean[:, 0]) + 1.0
    # expanded form keeps the objective vectorized over alpha
    obj = lambda a: (0.5 * (m * a * a - 2 * a * mean * m + sq)
                     + m * w * np.abs(a) ** q)
    der = lambda a: m * (a - mean + w * q * np.sign(a) * np.abs(a) ** (q - 1))
    # with w = 0 the origin is not a separate basin (no cusp there)
    extra = (0.0,) if w > 0 else ()
    t, f, gap = grid_prox_rows(obj, -r, r, coarse, rounds, extra,
                               derivative=der)
    table = {k: (float(a), float(v), float(g))
             for k, a, v, g in zip(keys, t, f, gap)}
    return lambda i, s: table[(i, s)]


def enumerate_fused(z, lam0, segment_solver, eps_tie=1e-10, x_tol=1e-9):
    """Exhaustive search over all ``2^(n-1)`` segmentations (``n <= 12``).

    The cost of a segmentation is the sum of its segment costs plus
    ``lam0`` per breakpoint, i.e. the same convention as ``H(n)`` with
    ``H(0) = -lam0``.

    Returns
    -------
    x, value, unique, gap
        ``gap`` is the distance from the optimum to the best segmentation
        with a different output, or to the optimum's own within-segment
        ambiguity, whichever is smaller.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if n > 12:
        raise ValueError("enumeration is capped at n = 12")
    cache = {}

    def seg(i, s):
        if (i, s) not in cache:
            cache[(i, s)] = segment_solver(i, s)
        return cache[(i, s)]

    results = []
    for cuts in itertools.product((False, True), repeat=n - 1):
        bounds = [0] + [j + 1 for j, c in enumerate(cuts) if c] + [n]
        x = np.empty(n)
        val = lam0 * (len(bounds) - 2)
        sgap = math.inf
        for i, s in zip(bounds[:-1], bounds[1:]):
            a, q, g = seg(i, s)
            x[i:s] = a
            val += q
            sgap = min(sgap, g)
        results.append((val, x, sgap))
    results.sort(key=lambda r: r[0])
    best_val, best_x, best_sgap = results[0]
    gap = best_sgap
    for val, x, _ in results[1:]:
        if val - best_val >= gap:
            break
        if np.max(np.abs(x - best_x)) > x_tol:
            gap = val - best_val
            break
    unique = gap > eps_tie * (1.0 + abs(best_val))
    return best_x, float(best_val), bool(unique), float(gap)


def fd_gradient(fun, x, h=None):
    """Central-difference gradient; default step ``1e-6 (1 + ||x||)``."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + np.linalg.norm(x))
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h[i])
    return g


def fd_jacobian(fmap, x, h=None):
    """Central-difference Jacobian ``J[i, j] = d fmap_i / d x_j``."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + np.linalg.norm(x))
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        cols.append((np.asarray(fmap(x + e)) - np.asarray(fmap(x - e)))
                    / (2.0 * h[j]))
    return np.column_stack(cols)


def _trs_obj(G, g, D):
    return 0.5 * np.einsum('ki,ij,kj->k', D, G, D) + D @ g


def _ball_points(n, radius, centre, widths, counts):
    # points in polar (n=2) or spherical (n=3) coordinates
    axes = [np.linspace(c - w, c + w, k) for c, w, k in
            zip(centre, widths, counts)]
    mesh = np.meshgrid(*axes, indexing='ij')
    r = np.clip(mesh[0].ravel(), 0.0, radius)
    if n == 2:
        th = mesh[1].ravel()
        D = np.column_stack((r * np.cos(th), r * np.sin(th)))
    else:
        th, ph = mesh[1].ravel(), mesh[2].ravel()
        D = np.column_stack((r * np.sin(th) * np.cos(ph),
                             r * np.sin(th) * np.sin(ph), r * np.cos(th)))
    return D, np.column_stack([m.ravel() for m in mesh])


def trs_grid_oracle(G, g, radius, zoom_rounds=6):
    """Minimize ``d'Gd/2 + g'd`` over ``||d|| <= radius`` for ``n`` in {2, 3}
    by a ~10^6-point polar/spherical grid followed by local zooming."""
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.size
    if n == 1:
        d = np.linspace(-radius, radius, 1_000_001)[:, None]
        f = _trs_obj(G, g, d)
        k = np.argmin(f)
        return d[k], float(f[k])
    if n == 2:
        centre = [radius / 2, math.pi]
        widths = [radius / 2, math.pi]
        counts = [1001, 1000]
    elif n == 3:
        centre = [radius / 2, math.pi / 2, math.pi]
        widths = [radius / 2, math.pi / 2, math.pi]
        counts = [101, 100, 100]
    else:
        raise ValueError("grid oracle supports n <= 3")
    best_d, best_f = None, math.inf
    for _ in range(zoom_rounds + 1):
        D, coords = _ball_points(n, radius, centre, widths, counts)
        f = _trs_obj(G, g, D)
        k = int(np.argmin(f))
        if f[k] < best_f:
            best_d, best_f = D[k], float(f[k])
        centre = list(coords[k])
        widths = [3 * w / (c - 1) for w, c in zip(widths, counts)]
        counts = [41] * n
    return best_d, best_f
