"""Command-line front end: ``python -m pgssn {solve,bench,check,prox}``.

Run configurations are flat ``key = value`` files (see :data:`RUN_KEYS`).
A bench suite is the same format split into ``[sections]``, one per run;
keys in ``[DEFAULT]`` apply to every run.

Exit codes: 0 converged / all passed, 1 check failure or descent-ledger
violation, 2 usage or I/O error, 3 solver stalled or hit ``max_iter``.
"""

import argparse
import configparser
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import data_io, envelope, fused_dp, oracles, regularizers, solver
from . import subproblem
from .problem import Problem, logistic_oracle, ls_oracle

__all__ = ['main', 'RUN_KEYS', 'SCHEMA', 'CSV_COLUMNS', 'SUMMARY_KEYS',
           'RESULT_COLUMNS', 'ConfigError', 'load_run_config', 'build_run',
           'solve_run', 'run_checks', 'CHECKS']

log = logging.getLogger('pgssn')

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_STALLED = 0, 1, 2, 3

CSV_COLUMNS = ('k', 'F', 'FBE', 'resid', 'gamma', 'gamma_tilde', 'd_norm',
               'pg_bt', 'newton_bt', 'unit_step', 'ms')
SUMMARY_KEYS = ('schema', 'name', 'status', 'iters', 'time', 'Nnz', 'BxNnz',
                'Obj', 'final_resid', 'PSNR', 'PSNR_input', 'ledger_ok',
                'lambda', 'lambda0', 'counts', 'message')
RESULT_COLUMNS = ('name', 'problem', 'reg', 'lambda_c', 'status', 'iters',
                  'time', 'Nnz', 'BxNnz', 'Obj', 'final_resid', 'PSNR',
                  'PSNR_input', 'ledger_ok', 'error')

_SOLVER_FIELDS = {f.name: f for f in dataclasses.fields(solver.SolverConfig)}

# documented run keys and their defaults (None: no default)
RUN_KEYS = {
    'name': 'run',
    'problem': 'ls',               # ls | logistic | deblur
    'data': None,                  # LIBSVM file, relative to the config
    'n_features': None,
    'poly_degree': None,           # 2 appends all degree-2 monomials
    'generator': None,             # sparse_regression | sparse_classification
    'm': '100', 'n': '500', 'k': '10',
    'noise': '0.0', 'flip': '0.0',
    'seed': '0',
    'side': '32', 'blur_sigma': '4.0', 'ksize': '9', 'image_noise': '0.02',
    'reg': None,                   # lq | zero_box | fused_zero | fused_lq
    'q': '0.5',
    'lambda_c': None, 'lambda': None,
    'lambda0_c': None, 'lambda0': None,
    'box_lower': None, 'box_upper': None,
    'y0': 'zeros',                 # zeros | random
    'timing': 'false',
}
RUN_KEYS.update({name: None for name in _SOLVER_FIELDS})

_REG_KINDS = ('lq', 'zero_box', 'fused_zero', 'fused_lq')
_DEFAULT_REG = {'ls': 'lq', 'logistic': 'lq', 'deblur': 'fused_zero'}
_DEFAULT_LAMBDA_C = {'ls': 0.01, 'logistic': 0.01, 'deblur': 0.005}
_DEFAULT_BOX = {'deblur': (-5.0, 5.0)}


class ConfigError(ValueError):
    """Bad configuration or input file; maps to exit code 2."""


# ---------------------------------------------------------------- config

def _read_ini(path, flat):
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=('#', ';'))
    parser.optionxform = str
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s"
                          % (path, exc.strerror or exc)) from None
    if flat:
        text = '[run]\n' + text
    try:
        parser.read_string(text, source=os.fspath(path))
    except configparser.Error as exc:
        raise ConfigError("%s: %s" % (path, exc)) from None
    return parser


def _validate_keys(cfg, where):
    unknown = sorted(set(cfg) - set(RUN_KEYS))
    if unknown:
        raise ConfigError("%s: unknown key(s) %s" % (where, ', '.join(unknown)))


def load_run_config(path):
    """Parse a flat run config into a ``dict`` of strings.

    The directory of ``path`` is stored under ``'_base'`` so relative data
    paths resolve against the config file.
    """
    cfg = dict(_read_ini(path, flat=True)['run'])
    _validate_keys(cfg, path)
    cfg['_base'] = os.path.dirname(os.path.abspath(path))
    return cfg


def load_suite(path):
    """Parse a suite file into a list of run configs (one per section)."""
    parser = _read_ini(path, flat=False)
    base = os.path.dirname(os.path.abspath(path))
    runs = []
    for section in parser.sections():
        cfg = dict(parser[section])
        _validate_keys(cfg, '%s [%s]' % (path, section))
        cfg.setdefault('name', section)
        cfg['_base'] = base
        runs.append(cfg)
    if not runs:
        raise ConfigError("%s: suite has no runs" % path)
    return runs


def _get(cfg, key, conv=str):
    raw = cfg.get(key)
    if raw is None or raw == '':
        raw = RUN_KEYS.get(key)
    if raw is None:
        return None
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError("key %r: cannot parse %r" % (key, raw)) from None


def _bool(s):
    s = s.strip().lower()
    if s in ('1', 'true', 'yes', 'on'):
        return True
    if s in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(s)


def _float_tuple(s):
    return tuple(float(t) for t in s.split(','))


def solver_config(cfg):
    """Build a :class:`~pgssn.solver.SolverConfig` from the solver keys."""
    kwargs = {}
    for name, f in _SOLVER_FIELDS.items():
        raw = cfg.get(name)
        if raw is None or raw == '':
            continue
        default = f.default
        if name.endswith('_range'):
            conv = _float_tuple
        elif isinstance(default, str):
            conv = str
        elif isinstance(default, int) and not isinstance(default, bool):
            conv = int
        else:
            conv = float
        kwargs[name] = _get(cfg, name, conv)
    try:
        return solver.SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ------------------------------------------------------------ build a run

@dataclasses.dataclass
class Run:
    name: str
    kind: str
    reg_kind: str
    problem: Problem
    config: solver.SolverConfig
    y0: np.ndarray
    lam: float
    lam0: float
    lambda_c: float
    timing: bool
    image: data_io.ImageProblem = None


def _load_data(cfg, seed):
    path = cfg.get('data')
    if path:
        path = os.path.join(cfg['_base'], path)
        if not os.path.exists(path):
            raise ConfigError("data file not found: %s" % path)
        try:
            data = data_io.read_libsvm(path, _get(cfg, 'n_features', int))
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        degree = _get(cfg, 'poly_degree', int)
        if degree:
            data = data_io.Dataset(data_io.poly_expand(data.A, degree),
                                   data.b, dict(data.meta, poly=degree))
        return data
    kind = cfg.get('problem', 'ls')
    gen = _get(cfg, 'generator') or (
        'sparse_classification' if kind == 'logistic' else 'sparse_regression')
    m, n, k = (_get(cfg, key, int) for key in ('m', 'n', 'k'))
    if gen == 'sparse_regression':
        return data_io.gen_sparse_regression(m, n, k, _get(cfg, 'noise', float),
                                             seed)
    if gen == 'sparse_classification':
        return data_io.gen_sparse_classification(m, n, k,
                                                 _get(cfg, 'flip', float),
                                                 seed)
    raise ConfigError("unknown generator %r" % gen)


def _resolve_weight(cfg, key, scale, default_c):
    direct = _get(cfg, key, float)
    if direct is not None:
        return direct, math.nan
    c = _get(cfg, key + '_c', float)
    c = default_c if c is None else c
    return c * scale, c


def _make_regularizer(kind, lam, lam0, q, box):
    if kind == 'lq':
        return regularizers.LqNorm(lam, q)
    if kind == 'zero_box':
        return regularizers.ZeroNormBox(lam, box)
    if kind == 'fused_zero':
        return regularizers.FusedZeroNorm(lam0, lam, box)
    if kind == 'fused_lq':
        return regularizers.FusedLq(lam0, lam, q)
    raise ConfigError("unknown regularizer %r (expected one of %s)"
                      % (kind, ', '.join(_REG_KINDS)))


def build_run(cfg, seed=None):
    """Turn a run config into a ready-to-solve :class:`Run`.

    ``seed`` (e.g. from ``--seed``) overrides the config's ``seed``.
    """
    kind = _get(cfg, 'problem')
    if kind not in _DEFAULT_REG:
        raise ConfigError("unknown problem %r (expected ls, logistic or "
                          "deblur)" % kind)
    seed = _get(cfg, 'seed', int) if seed is None else int(seed)
    image = None
    try:
        if kind == 'deblur':
            image = data_io.make_image_problem(
                _get(cfg, 'side', int), _get(cfg, 'image_noise', float),
                _get(cfg, 'blur_sigma', float), _get(cfg, 'ksize', int), seed)
            A, b = image.blur, image.b
            smooth = ls_oracle(A, b)
        else:
            data = _load_data(cfg, seed)
            A, b = data.A, data.b
            smooth = (ls_oracle if kind == 'ls' else logistic_oracle)(A, b)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    scale = float(np.max(np.abs(A.T @ b)))
    reg_kind = _get(cfg, 'reg') or _DEFAULT_REG[kind]
    lam, lambda_c = _resolve_weight(cfg, 'lambda', scale,
                                    _DEFAULT_LAMBDA_C[kind])
    lam0, _ = _resolve_weight(cfg, 'lambda0', scale,
                              lambda_c if not math.isnan(lambda_c)
                              else _DEFAULT_LAMBDA_C[kind])
    lo, hi = _DEFAULT_BOX.get(kind, (-math.inf, math.inf))
    lo = _get(cfg, 'box_lower', float) if cfg.get('box_lower') else lo
    hi = _get(cfg, 'box_upper', float) if cfg.get('box_upper') else hi
    try:
        box = regularizers.BoxConstraint(lo, hi)
        reg = _make_regularizer(reg_kind, lam, lam0, _get(cfg, 'q', float),
                                box)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    problem = Problem(smooth, reg)
    start = _get(cfg, 'y0')
    if start == 'zeros':
        y0 = np.zeros(problem.n)
    elif start == 'random':
        y0 = np.random.default_rng([seed, 3]).standard_normal(problem.n)
    else:
        raise ConfigError("y0 must be 'zeros' or 'random', got %r" % start)
    return Run(_get(cfg, 'name'), kind, reg_kind, problem, solver_config(cfg),
               y0, lam, lam0 if reg_kind.startswith('fused') else math.nan,
               lambda_c, _get(cfg, 'timing', _bool), image)


# ------------------------------------------------------------------ solve

def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return '1' if v else '0'
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return '' if math.isnan(v) else repr(v)


def iterations_csv(records, timing=False):
    """The iteration table as text; ``ms`` stays blank unless ``timing``."""
    buf = io.StringIO()
    buf.write('# schema=%d\n' % SCHEMA)
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([r.k, _fmt(r.F), _fmt(r.FBE), _fmt(r.resid),
                    _fmt(r.gamma), _fmt(r.gamma_tilde), _fmt(r.d_norm),
                    r.pg_bt, '' if r.newton_bt < 0 else r.newton_bt,
                    _fmt(r.unit_step), _fmt(r.ms) if timing else ''])
    return buf.getvalue()


def _json_num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def summarize(run, report):
    """Summary dict; sparsity and objective are measured at ``T(y*)``."""
    x = report.x_pg if report.x_pg is not None else report.x
    nnz, bx = data_io.sparsity_metrics(x)
    out = {
        'schema': SCHEMA, 'name': run.name, 'status': report.status,
        'iters': report.iters, 'time': report.time, 'Nnz': nnz,
        'BxNnz': bx, 'Obj': _json_num(run.problem.objective(x)),
        'final_resid': _json_num(report.residual),
        'PSNR': None, 'PSNR_input': None,
        'ledger_ok': report.ledger_ok,
        'lambda': run.lam, 'lambda0': _json_num(run.lam0),
        'counts': report.counts, 'message': report.message,
    }
    if run.image is not None:
        out['PSNR'] = float(data_io.psnr(run.image.truth, x))
        out['PSNR_input'] = float(data_io.psnr(run.image.truth, run.image.b))
    return out


def solve_run(run, out_dir):
    """Solve ``run`` and write ``iterations.csv`` and ``summary.json``."""
    report = solver.run(run.problem, run.config, run.y0)
    summary = summarize(run, report)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, 'iterations.csv'), 'w',
              newline='') as fh:
        fh.write(iterations_csv(report.records, run.timing))
    with open(os.path.join(out_dir, 'summary.json'), 'w') as fh:
        json.dump(summary, fh, indent=2)
        fh.write('\n')
    if run.image is not None:
        side = run.image.side
        x = report.x_pg if report.x_pg is not None else report.x
        data_io.write_pgm(os.path.join(out_dir, 'output.pgm'),
                          np.clip(x, 0, 1).reshape(side, side))
    return report, summary


def _exit_for(report):
    if report.status != solver.CONVERGED:
        return EXIT_STALLED
    return EXIT_OK if report.ledger_ok else EXIT_FAIL


def cmd_solve(args):
    cfg = load_run_config(args.config)
    run = build_run(cfg, args.seed)
    out = args.out or os.path.join(os.getcwd(), 'pgssn_out', run.name)
    try:
        report, summary = solve_run(run, out)
    except OSError as exc:
        raise ConfigError("cannot write to %s: %s"
                          % (out, exc.strerror or exc)) from None
    print("%s: %s after %d iterations, resid %.3e, Nnz %d, Obj %.10g"
          % (run.name, report.status, report.iters, report.residual,
             summary['Nnz'], summary['Obj']))
    if summary['PSNR'] is not None:
        print("PSNR %.4f (input %.4f), BxNnz %d"
              % (summary['PSNR'], summary['PSNR_input'], summary['BxNnz']))
    if not report.ledger_ok:
        print("descent ledger violated at %d iteration(s)"
              % len(report.ledger_violations), file=sys.stderr)
    if report.message:
        print(report.message, file=sys.stderr)
    print("wrote %s" % out)
    return _exit_for(report)


# ------------------------------------------------------------------ bench

def _bench_one(cfg, seed, out):
    row = {c: '' for c in RESULT_COLUMNS}
    row['name'] = cfg.get('name', '')
    row['problem'] = cfg.get('problem', RUN_KEYS['problem'])
    try:
        run = build_run(cfg, seed)
        row['reg'] = run.reg_kind
        row['lambda_c'] = _fmt(run.lambda_c)
        report, s = solve_run(run, os.path.join(out, run.name))
        for key in ('status', 'iters', 'time', 'Nnz', 'BxNnz', 'Obj',
                    'final_resid', 'PSNR', 'PSNR_input', 'ledger_ok'):
            v = s[key]
            row[key] = '' if v is None else _fmt(v)
        if report.status != solver.CONVERGED:
            row['error'] = report.message or report.status
        elif not report.ledger_ok:
            row['error'] = 'descent ledger violated'
    except Exception as exc:  # recorded per row; the suite goes on
        log.exception("run %s failed", row['name'])
        row['error'] = '%s: %s' % (type(exc).__name__, exc)
    return row


def cmd_bench(args):
    runs = load_suite(args.config)
    names = [cfg['name'] for cfg in runs]
    if len(set(names)) != len(names):
        raise ConfigError("%s: run names must be unique" % args.config)
    out = args.out or os.path.join(os.getcwd(), 'pgssn_bench')
    os.makedirs(out, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(lambda c: _bench_one(c, args.seed, out), runs))
    path = os.path.join(out, 'results.csv')
    with open(path, 'w', newline='') as fh:
        fh.write('# schema=%d\n' % SCHEMA)
        w = csv.DictWriter(fh, RESULT_COLUMNS, lineterminator='\n')
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print("%-20s %-10s iters=%-5s Nnz=%-6s Obj=%-14s %s"
              % (r['name'], r['status'] or 'error', r['iters'], r['Nnz'],
                 r['Obj'], r['error']))
    print("wrote %s" % path)
    return EXIT_OK if all(not r['error'] for r in rows) else EXIT_FAIL


# ------------------------------------------------------------------ check

def _check_lq(rng, samples):
    worst = -math.inf
    for _ in range(samples):
        q = float(rng.choice(regularizers._Q_VALUES))
        w = float(rng.uniform(0.05, 2.0))
        z = float(rng.uniform(-5, 5))
        p, _ = regularizers.lq_scalar_prox(q, w, z)
        _, f_or, _ = oracles.lq_grid_prox(q, w, z, coarse=20_001)
        worst = max(worst, regularizers.lq_objective(q, w, z, p) - f_or)
    return worst <= 1e-8, 'max excess %.2e' % worst


def _check_zero_box(rng, samples):
    worst = -math.inf
    for _ in range(samples):
        lam, gamma = rng.uniform(0.01, 1.0), rng.uniform(0.1, 2.0)
        lo, hi = -rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)
        z = float(rng.uniform(-3, 3))
        p, _ = regularizers.zero_box_scalar_prox(lam, gamma, lo, hi, z)
        obj = lambda t: (t - z) ** 2 / (2 * gamma) + lam * (t != 0)
        best = min(obj(0.0), obj(min(max(z, lo), hi)))
        worst = max(worst, float(obj(float(p))) - best)
    return worst <= 1e-12, 'max excess %.2e' % worst


def _check_fused(rng, samples):
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(2, 8))
        z = rng.normal(0, 2, n)
        lam0, lam = rng.uniform(0.05, 1.0), rng.uniform(0.0, 0.5)
        box = (-rng.uniform(1, 3), rng.uniform(1, 3))
        _, val, _ = fused_dp.prox_pruned(z, lam0, lam, box)
        solve = oracles.zero_box_segment_oracle(z, lam, *box)
        _, ref, _, _ = oracles.enumerate_fused(z, lam0, solve)
        worst = max(worst, abs(val - ref))
    return worst <= 1e-9, 'max |DP - enumeration| %.2e' % worst


def _check_dp_cross(rng, samples):
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(2, 40))
        z = rng.normal(0, 2, n)
        lam0, lam = rng.uniform(0.05, 1.0), rng.uniform(0.0, 0.5)
        lo, hi = -rng.uniform(1, 3), rng.uniform(1, 3)
        _, v1, _ = fused_dp.prox_pruned(z, lam0, lam, (lo, hi))
        seg = fused_dp.zero_box_segment_solver(z, lam, np.full(n, lo),
                                               np.full(n, hi))
        _, v2, _ = fused_dp.prox_segment_dp(z, lam0, seg)
        worst = max(worst, abs(v1 - v2))
    return worst <= 1e-9, 'max |pruned - segment| %.2e' % worst


def _random_problems(rng):
    A = rng.standard_normal((20, 10))
    b = rng.standard_normal(20)
    labels = np.where(rng.random(20) < 0.5, -1.0, 1.0)
    return {'ls': ls_oracle(A, b), 'logistic': logistic_oracle(A, labels)}


def _check_gradients(rng, samples):
    worst = 0.0
    for _ in range(samples):
        for f in _random_problems(rng).values():
            x = rng.standard_normal(f.n)
            g = f.grad(x)
            fd = oracles.fd_gradient(f.value, x)
            worst = max(worst, np.linalg.norm(g - fd)
                        / max(1.0, np.linalg.norm(fd)))
            J = oracles.fd_jacobian(f.grad, x)
            H = f.hess(x)
            worst = max(worst, np.linalg.norm(H - J)
                        / max(1.0, np.linalg.norm(J)))
    return worst <= 1e-5, 'max rel. error %.2e' % worst


def _check_fbe(rng, samples):
    worst_gap, worst_bound = 0.0, -math.inf
    for _ in range(samples):
        for f in _random_problems(rng).values():
            prob = Problem(f, regularizers.LqNorm(rng.uniform(0.1, 1.0)))
            x = rng.standard_normal(f.n)
            gamma = rng.uniform(0.05, 0.95) / f.lipschitz
            fb = envelope.forward_backward(prob, x, gamma)
            dx = fb.point - x
            inf_form = (fb.fx + fb.grad @ dx + dx @ dx / (2 * gamma)
                        + prob.reg.value(fb.point))
            worst_gap = max(worst_gap, abs(inf_form - fb.value)
                            / (1.0 + abs(fb.value)))
            lower = (prob.objective(fb.point)
                     + (1 - gamma * f.lipschitz) / (2 * gamma) * (dx @ dx))
            worst_bound = max(worst_bound, fb.value - prob.objective(x),
                              lower - fb.value - 1e-10 * (1 + abs(fb.value)))
    ok = worst_gap <= 1e-10 and worst_bound <= 1e-10
    return ok, 'two-form gap %.2e, bound excess %.2e' % (worst_gap,
                                                         worst_bound)


def _check_fbe_gradient(rng, samples):
    worst, tested = 0.0, 0
    for _ in range(samples * 4):
        if tested == samples:
            break
        f = _random_problems(rng)['ls']
        prob = Problem(f, regularizers.LqNorm(rng.uniform(0.1, 1.0)))
        x = rng.standard_normal(f.n)
        gamma = 0.5 / f.lipschitz
        fb = envelope.forward_backward(prob, x, gamma)
        if not fb.certificate.single_valued or fb.certificate.gap < 1e-3:
            continue
        g = envelope.fbe_gradient(prob, x, gamma)
        fd = oracles.fd_gradient(lambda v: envelope.fbe(prob, v, gamma), x,
                                 h=1e-6)
        worst = max(worst, np.linalg.norm(g - fd)
                    / max(1.0, np.linalg.norm(fd)))
        tested += 1
    return tested > 0 and worst <= 1e-5, \
        'max rel. error %.2e over %d points' % (worst, tested)


def _check_trs(rng, samples):
    worst = -math.inf
    for _ in range(samples):
        n = int(rng.integers(2, 4))
        M = rng.standard_normal((n, n))
        G = 0.5 * (M + M.T)
        g = rng.standard_normal(n)
        radius = float(rng.uniform(0.2, 2.0))
        sol = subproblem.solve_trs(subproblem.TrsProblem(G, g, radius))
        if np.linalg.norm(sol.d) > radius * (1 + 1e-9):
            return False, 'solution outside the ball'
        val = subproblem.trs_objective(subproblem.TrsProblem(G, g, radius),
                                       sol.d)
        _, ref = oracles.trs_grid_oracle(G, g, radius, zoom_rounds=4)
        worst = max(worst, val - ref)
    return worst <= 1e-6, 'max excess over grid %.2e' % worst


CHECKS = (
    ('lq_prox_vs_grid', _check_lq, 40),
    ('zero_box_prox_vs_enumeration', _check_zero_box, 200),
    ('fused_prox_vs_enumeration', _check_fused, 30),
    ('fused_dp_cross_validation', _check_dp_cross, 30),
    ('smooth_derivatives_vs_fd', _check_gradients, 3),
    ('fbe_identity_and_bounds', _check_fbe, 30),
    ('fbe_gradient_vs_fd', _check_fbe_gradient, 5),
    ('trs_vs_grid', _check_trs, 5),
)


def run_checks(seed=0, only=None):
    """Run the oracle checks; returns ``[(name, ok, detail)]``."""
    results = []
    for i, (name, fn, samples) in enumerate(CHECKS):
        if only and name not in only:
            continue
        rng = np.random.default_rng([seed, i])
        try:
            ok, detail = fn(rng, samples)
        except Exception as exc:
            ok, detail = False, 'raised %s: %s' % (type(exc).__name__, exc)
        results.append((name, bool(ok), detail))
    return results


def cmd_check(args):
    results = run_checks(args.seed if args.seed is not None else 0)
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print('%s  %-*s  %s' % ('PASS' if ok else 'FAIL', width, name, detail))
    failed = [name for name, ok, _ in results if not ok]
    if failed:
        print('failed: %s' % ', '.join(failed))
        return EXIT_FAIL
    print('all %d checks passed' % len(results))
    return EXIT_OK


# ------------------------------------------------------------------- prox

def cmd_prox(args):
    if args.z is not None:
        try:
            z = data_io.read_csv_matrix(args.z).ravel()
        except OSError as exc:
            raise ConfigError("cannot read %s: %s"
                              % (args.z, exc.strerror or exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        try:
            z = np.array([float(t) for t in args.values.split(',')])
        except ValueError:
            raise ConfigError("--values must be comma-separated numbers") \
                from None
    try:
        box = regularizers.BoxConstraint(args.lower, args.upper)
        reg = _make_regularizer(args.kind, args.lam, args.lam0, args.q, box)
        res = reg.prox(args.gamma, z)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print('point: %s' % ','.join(repr(float(v)) for v in res.point))
    print('value: %r' % float(res.moreau))
    print('certificate: %s' % res.certificate)
    return EXIT_OK


# ------------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog='python -m pgssn',
                description='Hybrid PG / semismooth Newton solver.')
    sub = p.add_subparsers(dest='verb', required=True, parser_class=_Parser)

    def common(sp, config_required):
        sp.add_argument('--config', required=config_required,
                        help='run config (solve) or suite file (bench)')
        sp.add_argument('--out', help='output directory')
        sp.add_argument('--seed', type=int, default=None,
                        help='overrides the config seed')
        sp.add_argument('--threads', type=int, default=1,
                        help='concurrent runs for bench')

    common(sub.add_parser('solve', help='solve one configured problem'), True)
    common(sub.add_parser('bench', help='run a suite of problems'), True)
    common(sub.add_parser('check', help='run the oracle validation suite'),
           False)
    px = sub.add_parser('prox', help='evaluate one proximal mapping')
    px.add_argument('--kind', required=True, choices=_REG_KINDS)
    zsrc = px.add_mutually_exclusive_group(required=True)
    zsrc.add_argument('--z', help='CSV file with the input vector')
    zsrc.add_argument('--values', help='comma-separated input vector')
    px.add_argument('--lam', type=float, default=0.0)
    px.add_argument('--lam0', type=float, default=0.0)
    px.add_argument('--q', type=float, default=0.5)
    px.add_argument('--gamma', type=float, default=1.0)
    px.add_argument('--lower', type=float, default=-math.inf)
    px.add_argument('--upper', type=float, default=math.inf)
    return p


_COMMANDS = {'solve': cmd_solve, 'bench': cmd_bench, 'check': cmd_check,
             'prox': cmd_prox}


def _setup_logging():
    level = os.environ.get('PGSSN_LOG', 'WARNING').strip().upper()
    level = int(level) if level.isdigit() else getattr(logging, level,
                                                       logging.WARNING)
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter('%(levelname)s %(message)s'))
        log.addHandler(handler)
    log.setLevel(level)


def main(argv=None):
    """Entry point; returns the process exit code."""
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.verb](args)
    except ConfigError as exc:
        print('error: %s' % exc, file=sys.stderr)
        return EXIT_USAGE
