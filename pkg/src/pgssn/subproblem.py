"""Trust-region subproblem ``min d'Gd/2 + g'd  s.t. ||d|| <= radius``.

Dense ``G`` is solved to global optimality: a Cholesky fast path for the
interior case, a safeguarded Newton iteration on the secular equation
``1/||d(nu)|| = 1/radius`` (one factorization of ``G + nu I`` per step),
and an eigendecomposition fallback that also resolves the hard case.
Operator ``G`` (large ``n``) uses Steihaug truncated CG, which is only
approximately optimal when ``G`` is indefinite.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

__all__ = ['TrsProblem', 'TrsSolution', 'solve_trs', 'trs_objective',
           'steihaug_cg']

INTERIOR, BOUNDARY, HARD_CASE = 'Interior', 'Boundary', 'HardCase'

SECULAR_RTOL = 1e-10
MAX_FACTORIZATIONS = 50


@dataclass(frozen=True, eq=False)
class TrsProblem:
    G: object
    grad: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True, eq=False)
class TrsSolution:
    """Minimizer ``d``, multiplier ``nu`` and how it was obtained."""
    d: np.ndarray
    nu: float
    status: str
    factorizations: int = 0


def trs_objective(p, d):
    """Value of the quadratic model at ``d``."""
    d = np.asarray(d, dtype=float)
    return 0.5 * float(d @ (p.G @ d)) + float(p.grad @ d)


def _cholesky(M):
    try:
        return la.cho_factor(M, lower=True, check_finite=False)
    except la.LinAlgError:
        return None


def _eigen_solve(G, g, radius, nfact):
    lam, V = la.eigh(G)
    gt = V.T @ g
    gnorm = float(np.linalg.norm(g))
    lam1 = lam[0]
    scale = max(1.0, float(np.max(np.abs(lam))))
    if lam1 > 0:
        d = -V @ (gt / lam)
        if np.linalg.norm(d) <= radius:
            return TrsSolution(d, 0.0, INTERIOR, nfact)
    lo = max(0.0, -lam1)

    def norm_d(nu, mask=slice(None)):
        return float(np.linalg.norm(gt[mask] / (lam[mask] + nu)))

    # coordinates (numerically) orthogonal to g in the leading eigenspace
    lead = lam <= lam1 + 1e-12 * scale
    degenerate = np.all(np.abs(gt[lead]) <= 1e-12 * max(gnorm, 1e-300))
    if degenerate and lam1 <= 0:
        rest = ~lead
        base = np.zeros_like(gt)
        if np.any(rest):
            base[rest] = -gt[rest] / (lam[rest] - lam1)
        if np.linalg.norm(base) <= radius:
            # hard case: move along the leading eigenvector to the boundary
            tau = math.sqrt(max(radius ** 2 - float(base @ base), 0.0))
            k = int(np.flatnonzero(lead)[0])
            base[k] += tau
            return TrsSolution(V @ base, float(-lam1), HARD_CASE, nfact)
    hi = lo + gnorm / radius + scale
    phi = lambda nu: 1.0 / radius - 1.0 / norm_d(nu)
    left = lo
    # bracket from the right of the pole
    eps = max(1e-300, 1e-15 * scale)
    while not phi(left + eps) < 0 and eps < hi:
        eps *= 10.0
    if not phi(left + eps) < 0:
        # numerically flat: the boundary is reached right at the pole
        nu = left
    else:
        nu = brentq(phi, left + eps, hi, xtol=1e-15 * scale, rtol=1e-15,
                    maxiter=200)
    d = -V @ (gt / (lam + nu))
    return TrsSolution(d, float(nu), BOUNDARY, nfact)


def _safeguard(nu_lo, nu_hi):
    return max(math.sqrt(nu_lo * nu_hi), nu_lo + 0.01 * (nu_hi - nu_lo))


def _dense_solve(G, g, radius):
    n = g.size
    gnorm = float(np.linalg.norm(g))
    I = np.eye(n)
    fac = _cholesky(G)
    nfact = 1
    if fac is not None:
        d = -la.cho_solve(fac, g, check_finite=False)
        if np.linalg.norm(d) <= radius:
            return TrsSolution(d, 0.0, INTERIOR, nfact)
    # Gershgorin-type bounds on the multiplier
    absrow = float(np.max(np.sum(np.abs(G), axis=1)))
    nu_lo = max(0.0, -float(np.min(np.diag(G))), gnorm / radius - absrow)
    nu_hi = gnorm / radius + absrow
    if fac is not None:
        nu = 0.0
    else:
        nu = nu_lo if nu_lo > 0 else 1e-12 * max(absrow, 1.0)
    while nfact <= MAX_FACTORIZATIONS:
        if fac is None:
            fac = _cholesky(G + nu * I)
            nfact += 1
        if fac is None:
            # G + nu I indefinite: nu is below the smallest admissible value
            nu_lo = max(nu_lo, nu)
            nu = _safeguard(nu_lo, nu_hi)
            continue
        d = -la.cho_solve(fac, g, check_finite=False)
        dn = float(np.linalg.norm(d))
        if abs(dn - radius) <= SECULAR_RTOL * radius:
            return TrsSolution(d, float(nu), BOUNDARY, nfact)
        if dn < radius:
            nu_hi = min(nu_hi, nu)
        else:
            nu_lo = max(nu_lo, nu)
        if nu_hi - nu_lo <= 1e-14 * max(1.0, nu_hi):
            break
        w = la.solve_triangular(fac[0], d, lower=True, check_finite=False)
        nu_new = nu + (dn / float(np.linalg.norm(w))) ** 2 \
            * (dn - radius) / radius
        nu = nu_new if nu_lo < nu_new < nu_hi else _safeguard(nu_lo, nu_hi)
        fac = None
    return _eigen_solve(G, g, radius, nfact)


def steihaug_cg(G, g, radius, rtol=1e-10, maxiter=None):
    """Truncated CG for an operator ``G`` (only products ``G @ v``)."""
    n = g.size
    maxiter = maxiter or 2 * n
    d = np.zeros(n)
    r = g.copy()
    p = -r
    rr = float(r @ r)
    tol = rtol * (1.0 + math.sqrt(rr))
    if math.sqrt(rr) <= tol:
        return TrsSolution(d, 0.0, INTERIOR)

    def to_boundary(d, p):
        a, b, c = float(p @ p), 2.0 * float(d @ p), float(d @ d) - radius ** 2
        tau = (-b + math.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)
        return d + tau * p

    def finish(d):
        gd = G @ d
        nu = max(0.0, -float(d @ (gd + g)) / float(d @ d))
        return TrsSolution(d, nu, BOUNDARY)

    for _ in range(maxiter):
        Gp = G @ p
        curv = float(p @ Gp)
        if curv <= 0:
            return finish(to_boundary(d, p))
        a = rr / curv
        d_new = d + a * p
        if np.linalg.norm(d_new) >= radius:
            return finish(to_boundary(d, p))
        d = d_new
        r = r + a * Gp
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= tol:
            return TrsSolution(d, 0.0, INTERIOR)
        p = -r + (rr_new / rr) * p
        rr = rr_new
    return TrsSolution(d, 0.0, INTERIOR)


def solve_trs(p):
    """Solve a :class:`TrsProblem`.

    Dense ``G`` gets the exact treatment; anything else exposing ``@`` is
    handed to :func:`steihaug_cg`.
    """
    g = np.asarray(p.grad, dtype=float)
    if not np.all(np.isfinite(g)) or not math.isfinite(p.radius):
        raise ValueError("non-finite subproblem data")
    if isinstance(p.G, np.ndarray):
        G = np.asarray(p.G, dtype=float)
        if not np.all(np.isfinite(G)):
            raise ValueError("non-finite subproblem data")
        if G.shape != (g.size, g.size):
            raise ValueError("G has shape %s, expected %d x %d"
                             % (G.shape, g.size, g.size))
        return _dense_solve(0.5 * (G + G.T), g, float(p.radius))
    return steihaug_cg(p.G, g, float(p.radius))
