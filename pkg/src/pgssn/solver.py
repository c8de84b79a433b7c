"""Hybrid proximal-gradient / semismooth-Newton solver on the FBE.

Each iteration takes a proximal-gradient safeguard step from ``y`` (BB
initial step, backtracking, optional enlarging search), stops when the
proximal-gradient residual is below ``eps``, and otherwise takes a
globalized Newton step on the forward-backward envelope from the PG point
``x``: pick the largest step ``L~^-1 beta^m`` at which the prox is certified
single valued, solve a trust-region Newton subproblem and line-search along
the segment between the Newton point and ``T(x)``.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator

from ._base import DegenerateProxError, ProxNotSingleValued
from .envelope import EnvelopeContext, forward_backward
from .problem import DENSE_LIMIT
from .subproblem import TrsProblem, solve_trs

__all__ = ['SolverConfig', 'IterationRecord', 'SolveReport', 'PGStep',
           'GammaTilde', 'run', 'bb_step', 'pg_step', 'search_gamma_tilde',
           'newton_direction', 'newton_linesearch', 'check_ledger',
           'CONVERGED', 'MAX_ITER', 'STALLED']

log = logging.getLogger('pgssn')

CONVERGED, MAX_ITER, STALLED = 'Converged', 'MaxIter', 'Stalled'

BB_MIN, BB_MAX = 1e-20, 1e20
LEDGER_SLACK = 1e-12
# relative rounding allowance in the PG decrease test; at gamma = 1/(L+alpha)
# the test holds with zero margin in exact arithmetic
PG_SLACK = 1e-13


class StepFailure(RuntimeError):
    """Raised inside an iteration; turned into a Stalled report."""


def _in_range(name, value, lo, hi, lo_open=True, hi_open=True):
    ok_lo = value > lo if lo_open else value >= lo
    ok_hi = value < hi if hi_open else value <= hi
    if not (ok_lo and ok_hi):
        raise ValueError("%s=%r outside its admissible range" % (name, value))


@dataclass(frozen=True)
class SolverConfig:
    """Solver parameters.

    ``alpha=None`` means ``alpha_rel * L``. ``sigma`` and ``varsigma`` may
    be constants or callables ``k -> value``; values are checked against
    ``sigma_range`` / ``varsigma_range`` when used. ``pg_decrease`` selects
    the PG sufficient-decrease constant ``alpha/2`` ('half') or ``alpha``
    ('full').
    """
    eps: float = 1e-5
    beta: float = 0.5
    alpha: float = None
    alpha_rel: float = 1e-3
    gamma_bar: float = BB_MAX
    tau: float = 0.4
    rho: float = 0.5
    varsigma: object = 10.0
    varsigma_range: tuple = (1.0, 10.0)
    sigma: object = 1.0
    sigma_range: tuple = (1.0, 1.0)
    eta: float = 0.5
    max_iter: int = 1000
    max_linesearch: int = 60
    max_m: int = 60
    pg_decrease: str = 'half'
    bb_pair: str = 'current'

    def __post_init__(self):
        _in_range('eps', self.eps, 0.0, math.inf, lo_open=False)
        _in_range('beta', self.beta, 0.0, 1.0)
        if self.alpha is not None:
            _in_range('alpha', self.alpha, 0.0, math.inf)
        _in_range('alpha_rel', self.alpha_rel, 0.0, math.inf)
        _in_range('tau', self.tau, 0.0, 1.0)
        _in_range('rho', self.rho, 0.0, 1.0 - self.tau)
        _in_range('eta', self.eta, 0.0, 1.0)
        for name, (lo, hi) in (('varsigma_range', self.varsigma_range),
                               ('sigma_range', self.sigma_range)):
            if not 0 < lo <= hi:
                raise ValueError("%s must satisfy 0 < lo <= hi" % name)
        if self.bb_pair not in ('current', 'previous'):
            raise ValueError("bb_pair must be 'current' or 'previous'")
        if self.pg_decrease not in ('half', 'full'):
            raise ValueError("pg_decrease must be 'half' or 'full'")
        for name in ('max_iter', 'max_linesearch', 'max_m'):
            if int(getattr(self, name)) < 0:
                raise ValueError("%s must be nonnegative" % name)

    def alpha_for(self, L):
        return self.alpha if self.alpha is not None else self.alpha_rel * L

    def l_tilde(self, L):
        return L + 2.0 * self.alpha_for(L)

    def pg_constant(self, L):
        a = self.alpha_for(L)
        return 0.5 * a if self.pg_decrease == 'half' else a

    def _pick(self, name, k):
        value = getattr(self, name)
        value = float(value(k) if callable(value) else value)
        lo, hi = getattr(self, name + '_range')
        if not lo <= value <= hi:
            raise ValueError("%s_k=%r outside %r" % (name, value, (lo, hi)))
        return value

    def sigma_at(self, k):
        return self._pick('sigma', k)

    def varsigma_at(self, k):
        return self._pick('varsigma', k)

    def check_against(self, L):
        if self.gamma_bar < 1.0 / (L + self.alpha_for(L)):
            raise ValueError("gamma_bar must be at least 1/(L + alpha)")

    with_updates = replace


@dataclass
class IterationRecord:
    """One iteration. Newton fields are ``nan`` on the terminal row, whose
    ``resid`` is the PG stopping residual ``||x - y|| / gamma``."""
    k: int
    F: float
    FBE: float
    resid: float
    gamma: float
    gamma_tilde: float
    d_norm: float
    pg_bt: int
    newton_bt: int
    unit_step: bool
    ms: float
    pg_dist: float = math.nan
    m: int = -1
    trs_status: str = ''


@dataclass
class SolveReport:
    """Outcome of :func:`run`.

    ``x`` is the output point ``y*``; ``gamma`` the PG step at which it
    passed the stopping test and ``residual`` that test's value.
    """
    x: np.ndarray
    residual: float
    gamma: float
    status: str
    records: list
    counts: dict
    time: float
    message: str = ''
    x_pg: np.ndarray = None
    ledger_violations: list = field(default_factory=list)

    @property
    def iters(self):
        return self.records[-1].k if self.records else 0

    @property
    def ledger_ok(self):
        return not self.ledger_violations


class _Counter:
    def __init__(self, problem):
        self.problem = problem
        self.counts = {'prox': 0, 'hessian': 0, 'trs': 0}

    def fb(self, x, gamma):
        self.counts['prox'] += 1
        return forward_backward(self.problem, x, gamma)


def _stable_fbe(problem, fb):
    # inf form of the FBE; unlike the Moreau form it does not cancel
    # catastrophically for very large gamma
    dx = fb.point - fb.x
    return (fb.fx + float(fb.grad @ dx) + float(dx @ dx) / (2.0 * fb.gamma)
            + problem.reg.value(fb.point))


def bb_step(s, ds):
    """Barzilai-Borwein step ``s's / s'ds`` clamped to ``[1e-20, 1e20]``.

    A non-positive denominator (no curvature information) maps to the upper
    clamp.
    """
    den = float(s @ ds)
    if not den > 0:
        return BB_MAX
    return min(BB_MAX, max(BB_MIN, float(s @ s) / den))


@dataclass
class PGStep:
    x: np.ndarray
    gamma: float
    backtracks: int
    Fx: float
    fb: object


def pg_step(problem, y, gamma0, config, counter=None):
    """Proximal-gradient step from ``y`` with initial step ``gamma0``.

    Backtracks ``gamma0 eta^t`` (floored at ``1/(L + alpha)``) until
    ``F(x) <= F_gamma(y) - c ||x - y||^2``; if the first trial succeeds,
    doubles the step while the test keeps holding (capped at ``gamma_bar``).
    """
    counter = counter or _Counter(problem)
    L = problem.lipschitz
    floor = 1.0 / (L + config.alpha_for(L))
    c = config.pg_constant(L)

    def trial(gamma):
        fb = counter.fb(y, gamma)
        x = fb.point
        Fx = problem.objective(x)
        dx = x - y
        bound = _stable_fbe(problem, fb) - c * float(dx @ dx)
        ok = Fx <= bound + PG_SLACK * (1.0 + abs(bound))
        return ok, fb, Fx

    t = 0
    while True:
        gamma = max(gamma0 * config.eta ** t, floor)
        ok, fb, Fx = trial(gamma)
        if ok:
            break
        if gamma == floor:
            raise StepFailure(
                "PG decrease fails at gamma = 1/(L+alpha) = %g; the "
                "Lipschitz constant is probably too small" % floor)
        t += 1
    if t == 0 and gamma == gamma0:
        cap = min(config.gamma_bar, BB_MAX)
        if gamma0 < cap:
            # enlarging search: largest 2^j gamma0 still passing the test
            j = 1
            while gamma0 * 2.0 ** j <= cap:
                ok2, fb2, Fx2 = trial(gamma0 * 2.0 ** j)
                if not ok2:
                    break
                gamma, fb, Fx = gamma0 * 2.0 ** j, fb2, Fx2
                j += 1
            if j > 1 and gamma0 * 2.0 ** j > cap and ok2:
                log.debug("enlarging search stopped at the cap %g", cap)
    return PGStep(fb.point, gamma, t, float(Fx), fb)


@dataclass
class GammaTilde:
    gamma: float
    m: int
    fb: object
    element: object


def search_gamma_tilde(problem, x, config, counter=None):
    """Largest ``L~^-1 beta^m`` at which the prox at the forward point of
    ``x`` is certified single valued and has a usable Clarke element.

    Returns ``None`` when ``m`` would exceed ``config.max_m``.
    """
    counter = counter or _Counter(problem)
    L = problem.lipschitz
    lt = config.l_tilde(L)
    dense = problem.n <= DENSE_LIMIT
    for m in range(config.max_m + 1):
        gamma = config.beta ** m / lt
        fb = counter.fb(x, gamma)
        if not fb.certificate.single_valued:
            continue
        try:
            element = EnvelopeContext(problem, gamma).second_order_element(
                x, fb=fb, dense=dense)
        except (DegenerateProxError, ProxNotSingleValued):
            continue
        counter.counts['hessian'] += 1
        return GammaTilde(gamma, m, fb, element)
    return None


def newton_direction(problem, gt, config, k=0, counter=None):
    """Trust-region Newton direction at ``gt.fb.x``.

    Returns ``(d, trs_solution, mu)``; ``trs_solution`` is ``None`` when
    the residual vanishes and ``d = 0`` is returned directly.
    """
    fb, el = gt.fb, gt.element
    r = fb.residual
    rn = float(np.linalg.norm(r))
    mu = rn ** config.tau
    if rn == 0.0:
        return np.zeros_like(r), None, mu
    shift = mu * config.sigma_at(k)
    grad = el.Q @ r
    if el.dense:
        G = el.H + shift * np.eye(r.size)
    else:
        H = el.H
        G = LinearOperator(H.shape, matvec=lambda v: H @ v + shift * v,
                           dtype=float)
    radius = config.varsigma_at(k) * rn ** config.rho
    sol = solve_trs(TrsProblem(G, np.asarray(grad, dtype=float), radius))
    if counter is not None:
        counter.counts['trs'] += 1
    return sol.d, sol, mu


def newton_linesearch(problem, gt, d, config, counter=None):
    """Backtrack along ``beta^l (x + d) + (1 - beta^l) T(x)``.

    Returns ``(y, l, fb_y)``, or ``None`` if ``l`` would exceed
    ``config.max_linesearch``.
    """
    counter = counter or _Counter(problem)
    fb = gt.fb
    gamma = gt.gamma
    L = problem.lipschitz
    r = fb.residual
    target = fb.value - (gamma - gamma * gamma * L) / 4.0 * float(r @ r)
    newton_pt = fb.x + d
    tpt = fb.point
    coef = 1.0
    for l in range(config.max_linesearch + 1):
        y = coef * newton_pt + (1.0 - coef) * tpt
        fy = counter.fb(y, gamma)
        if fy.value <= target:
            return y, l, fy
        coef *= config.beta
    return None


def check_ledger(records, L, config):
    """Descent checks between consecutive iterations.

    Returns a list of human-readable violations (empty when all hold).
    """
    alpha = config.alpha_for(L)
    lt = config.l_tilde(L)
    newton = [r for r in records if not math.isnan(r.gamma_tilde)]
    if not newton:
        return []
    gmin = min(r.gamma_tilde for r in newton)
    c1 = 0.25 * min(gmin - L * gmin ** 2, 1.0 / lt - L / lt ** 2)
    out = []
    for a, b in zip(records[:-1], records[1:]):
        slack = LEDGER_SLACK * (1.0 + abs(a.F))
        lhs = b.F - a.F
        if lhs > -0.5 * alpha * b.pg_dist ** 2 + slack:
            out.append("k=%d: F decrease %.6g vs required %.6g"
                       % (b.k, lhs, -0.5 * alpha * b.pg_dist ** 2))
        if math.isnan(a.gamma_tilde):
            continue
        need = -c1 * a.resid ** 2
        both = lhs if math.isnan(b.FBE) else max(lhs, b.FBE - a.FBE)
        if both > need + LEDGER_SLACK * (1.0 + abs(a.FBE)):
            out.append("k=%d: merit decrease %.6g vs required %.6g"
                       % (b.k, both, need))
    return out


def run(problem, config=None, y0=None, callback=None):
    """Run the solver from ``y0`` (default 0).

    Parameters
    ----------
    problem : pgssn.problem.Problem
    config : SolverConfig, optional
    y0 : array_like, optional
    callback : callable, optional
        Called with each :class:`IterationRecord` as it is produced.

    Returns
    -------
    SolveReport
    """
    config = config or SolverConfig()
    L = problem.lipschitz
    config.check_against(L)
    counter = _Counter(problem)
    y = np.zeros(problem.n) if y0 is None else np.array(y0, dtype=float)
    if y.shape != (problem.n,):
        raise ValueError("y0 has shape %s, expected (%d,)" % (y.shape,
                                                               problem.n))
    records = []
    start = time.perf_counter()
    gamma0 = 1.0
    x_prev = g_prev = None
    x_prev2 = g_prev2 = None
    status, message = MAX_ITER, ''
    x_out, resid_out, gamma_out, x_pg = y, math.inf, math.nan, None

    def emit(rec):
        records.append(rec)
        if callback is not None:
            callback(rec)

    for k in range(config.max_iter + 1):
        t0 = time.perf_counter()
        try:
            if config.bb_pair == 'current' and x_prev is not None:
                gamma0 = bb_step(y - x_prev, problem.smooth.grad(y) - g_prev)
            elif config.bb_pair == 'previous' and x_prev2 is not None:
                gamma0 = bb_step(x_prev - x_prev2, g_prev - g_prev2)
            pg = pg_step(problem, y, gamma0, config, counter)
        except StepFailure as exc:
            status, message = STALLED, str(exc)
            break
        x = pg.x
        pg_dist = float(np.linalg.norm(x - y))
        pg_resid = pg_dist / pg.gamma
        x_out, resid_out, gamma_out, x_pg = y, pg_resid, pg.gamma, x
        if not math.isfinite(pg.Fx):
            status, message = STALLED, "non-finite objective at k=%d" % k
            break
        if pg_resid <= config.eps:
            emit(IterationRecord(k, pg.Fx, math.nan, pg_resid, pg.gamma,
                                 math.nan, math.nan, pg.backtracks, -1,
                                 False, 1e3 * (time.perf_counter() - t0),
                                 pg_dist))
            status = CONVERGED
            break
        if k == config.max_iter:
            break
        gt = search_gamma_tilde(problem, x, config, counter)
        if gt is None:
            status = STALLED
            message = ("no certified single-valued prox within m <= %d at "
                       "k=%d" % (config.max_m, k))
            break
        d, sol, _ = newton_direction(problem, gt, config, k, counter)
        ls = newton_linesearch(problem, gt, d, config, counter)
        if ls is None:
            status = STALLED
            message = "Newton line search exceeded %d backtracks at k=%d" \
                % (config.max_linesearch, k)
            break
        y_next, l, _ = ls
        rn = float(np.linalg.norm(gt.fb.residual))
        emit(IterationRecord(k, pg.Fx, gt.fb.value, rn, pg.gamma, gt.gamma,
                             float(np.linalg.norm(d)), pg.backtracks, l,
                             l == 0 and sol is not None,
                             1e3 * (time.perf_counter() - t0), pg_dist,
                             gt.m, sol.status if sol is not None else ''))
        log.info("k=%d F=%.10g resid=%.3e gamma=%.3g gt=%.3g l=%d", k, pg.Fx,
                 rn, pg.gamma, gt.gamma, l)
        x_prev2, g_prev2 = x_prev, g_prev
        x_prev, g_prev = x, gt.fb.grad
        y = y_next
    elapsed = time.perf_counter() - start
    report = SolveReport(x_out, resid_out, gamma_out, status, records,
                         dict(counter.counts), elapsed, message, x_pg)
    report.ledger_violations = check_ledger(records, L, config)
    for v in report.ledger_violations:
        log.warning("descent ledger violated: %s", v)
    return report

