"""Data ingestion and generation.

LIBSVM text files, seeded synthetic regression/classification data with a
planted ground truth, polynomial feature expansion, the Gaussian blur
operator and image metrics for the deblurring experiment, plain-text PGM and
CSV matrix exchange, and a power-method spectral norm bound.
"""

import os
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import correlate1d
from scipy.sparse.linalg import LinearOperator

__all__ = ['Dataset', 'ImageProblem', 'LibsvmFormatError', 'read_libsvm',
           'write_libsvm', 'poly_expand', 'gen_sparse_regression',
           'gen_sparse_classification', 'gaussian_kernel1d',
           'gaussian_blur_operator', 'piecewise_constant_image',
           'make_image_problem', 'psnr', 'PSNR_CAP', 'estimate_spectral_norm',
           'sparsity_metrics', 'NNZ_THRESHOLD', 'read_pgm', 'write_pgm',
           'read_csv_matrix', 'write_csv_matrix']

NNZ_THRESHOLD = 1e-8
PSNR_CAP = 999.0


class LibsvmFormatError(ValueError):
    """Malformed LIBSVM input; the message names the offending line."""


@dataclass
class Dataset:
    """A design matrix with targets.

    ``meta`` records where the data came from (a path or the generator
    parameters and seed); ``truth`` holds a planted solution when known.
    """
    A: object
    b: np.ndarray
    meta: dict = field(default_factory=dict)
    truth: np.ndarray = None

    def __post_init__(self):
        data = self.A.data if sp.issparse(self.A) else np.asarray(self.A)
        if not (np.all(np.isfinite(data)) and np.all(np.isfinite(self.b))):
            raise ValueError("dataset contains NaN or Inf entries")
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A has %d rows but b has length %d"
                             % (self.A.shape[0], self.b.shape[0]))

    @property
    def shape(self):
        return self.A.shape


def read_libsvm(path, n_features=None):
    """Read a LIBSVM/SVMlight text file into a CSR matrix and label vector.

    Each non-blank line is ``label idx:val idx:val ...`` with 1-based,
    strictly increasing indices. ``n_features`` overrides the column count
    (it must be at least the largest index seen).
    """
    rows, cols, vals, labels = [], [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise LibsvmFormatError("%s:%d: bad label %r"
                                        % (path, lineno, tokens[0])) from None
            r = len(labels) - 1
            last = 0
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(':')
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    j = None
                if not sep or j is None:
                    raise LibsvmFormatError("%s:%d: bad feature %r"
                                            % (path, lineno, tok))
                if j < 1:
                    raise LibsvmFormatError("%s:%d: index %d is not 1-based"
                                            % (path, lineno, j))
                if j == last:
                    raise LibsvmFormatError("%s:%d: duplicate index %d"
                                            % (path, lineno, j))
                if j < last:
                    raise LibsvmFormatError(
                        "%s:%d: indices not increasing (%d after %d)"
                        % (path, lineno, j, last))
                last = j
                rows.append(r)
                cols.append(j - 1)
                vals.append(v)
    n_seen = max(cols) + 1 if cols else 0
    if n_features is None:
        n_features = n_seen
    elif n_features < n_seen:
        raise LibsvmFormatError("%s: n_features=%d but index %d present"
                                % (path, n_features, n_seen))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), n_features))
    A.sort_indices()
    return Dataset(A, np.asarray(labels, dtype=float),
                   meta={'source': os.fspath(path)})


def write_libsvm(path, A, b):
    """Write ``(A, b)`` in LIBSVM format with ``repr`` floats (exact)."""
    A = sp.csr_matrix(A)
    A.sort_indices()
    with open(path, 'w') as fh:
        for i in range(A.shape[0]):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            feats = ' '.join('%d:%r' % (j + 1, float(v))
                             for j, v in zip(A.indices[lo:hi], A.data[lo:hi])
                             if v != 0)
            fh.write(('%r %s' % (float(b[i]), feats)).rstrip() + '\n')


def poly_expand(A, degree=2):
    """Append all degree-2 monomials (squares and pairwise products).

    Columns are ``a_1..a_n`` followed by ``a_i a_j`` for ``i <= j`` in
    lexicographic order, ``n + n(n+1)/2`` columns in total.
    """
    if degree != 2:
        raise ValueError("only degree=2 is supported")
    dense = not sp.issparse(A)
    A = sp.csc_matrix(A, dtype=float)
    n = A.shape[1]
    cols = [A]
    for i, j in combinations_with_replacement(range(n), 2):
        cols.append(A[:, i].multiply(A[:, j]))
    out = sp.hstack(cols, format='csr')
    return out.toarray() if dense else out


def gen_sparse_regression(m, n, k, noise=0.0, seed=0):
    """Gaussian design with a planted ``k``-sparse solution.

    Nonzeros of the truth have magnitude in ``[1, 2]`` with random signs;
    ``b = A x_true + noise * N(0, I)``.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x = np.zeros(n)
    if k > 0:
        support = np.sort(rng.choice(n, size=k, replace=False))
        x[support] = rng.choice((-1.0, 1.0), size=k) * rng.uniform(1, 2, k)
    b = A @ x + noise * rng.standard_normal(m)
    meta = {'generator': 'sparse_regression', 'm': m, 'n': n, 'k': k,
            'noise': noise, 'seed': seed}
    return Dataset(A, b, meta=meta, truth=x)


def gen_sparse_classification(m, n, k, flip=0.0, seed=0):
    """Labels ``sign(A x_true)`` with a fraction ``flip`` randomly flipped."""
    data = gen_sparse_regression(m, n, k, seed=seed)
    rng = np.random.default_rng([seed, 1])
    b = np.where(data.A @ data.truth >= 0, 1.0, -1.0)
    b[rng.random(m) < flip] *= -1
    meta = dict(data.meta, generator='sparse_classification', flip=flip)
    return Dataset(data.A, b, meta=meta, truth=data.truth)


def gaussian_kernel1d(sigma=4.0, ksize=9):
    """Normalized, truncated 1-D Gaussian of odd length ``ksize``."""
    if ksize % 2 != 1:
        raise ValueError("ksize must be odd")
    t = np.arange(ksize) - ksize // 2
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _blur_matrix1d(side, kernel):
    return correlate1d(np.eye(side), kernel, axis=0, mode='reflect')


def gaussian_blur_operator(side, sigma=4.0, ksize=9, dense=None):
    """Separable Gaussian blur on ``side x side`` images (row-major vectors).

    The boundary is half-sample reflective, which keeps the operator
    symmetric and constant preserving. Returns a dense matrix when
    ``dense`` is true (default for ``side <= 64``), else a
    ``LinearOperator``.
    """
    kernel = gaussian_kernel1d(sigma, ksize)
    if dense is None:
        dense = side <= 64
    if dense:
        K = _blur_matrix1d(side, kernel)
        return np.kron(K, K)

    def mv(v):
        img = np.reshape(v, (side, side))
        img = correlate1d(img, kernel, axis=0, mode='reflect')
        img = correlate1d(img, kernel, axis=1, mode='reflect')
        return img.ravel()

    n = side * side
    return LinearOperator((n, n), matvec=mv, rmatvec=mv, dtype=float)


@dataclass
class ImageProblem:
    side: int
    truth: np.ndarray
    blur: object
    b: np.ndarray
    noise: float
    seed: int = 0


def piecewise_constant_image(side, seed=0, n_rects=4):
    """Synthetic ``side x side`` image in ``[0, 1]``: flat rectangles on a
    zero background."""
    rng = np.random.default_rng(seed)
    img = np.zeros((side, side))
    for _ in range(n_rects):
        r0, c0 = rng.integers(0, side - side // 4, size=2)
        h, w = rng.integers(side // 6, side // 2, size=2)
        img[r0:r0 + h, c0:c0 + w] = rng.choice((0.25, 0.5, 0.75, 1.0))
    return img


def make_image_problem(side=32, noise=0.02, sigma=4.0, ksize=9, seed=0):
    """Blur a synthetic piecewise-constant image and add ``N(0, noise^2)``."""
    truth = piecewise_constant_image(side, seed=seed).ravel()
    A = gaussian_blur_operator(side, sigma, ksize)
    rng = np.random.default_rng([seed, 7])
    b = A @ truth + noise * rng.standard_normal(truth.size)
    return ImageProblem(side, truth, A, b, noise, seed)


def psnr(xbar, xstar):
    """``10 log10(n / ||xbar - xstar||)`` (unsquared norm), capped at 999 dB."""
    xbar = np.ravel(xbar)
    err = np.linalg.norm(xbar - np.ravel(xstar))
    if err == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(xbar.size / err))


def estimate_spectral_norm(A, iters=200, seed=0):
    """Power iteration on ``A^T A`` from a seeded start, times 1.01.

    ``A`` may be dense, sparse or a ``LinearOperator``.
    """
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        est = np.sqrt(nw)
        v = w / nw
    return 1.01 * float(est)


def sparsity_metrics(x, threshold=NNZ_THRESHOLD):
    """``(Nnz, BxNnz)``: entries of ``x`` and of its first differences with
    magnitude strictly above ``threshold``."""
    x = np.ravel(x)
    nnz = int(np.count_nonzero(np.abs(x) > threshold))
    bx = int(np.count_nonzero(np.abs(np.diff(x)) > threshold))
    return nnz, bx


def write_pgm(path, img, maxval=255):
    """Plain-text (P2) PGM; values in ``[0, 1]`` are scaled to ``maxval``."""
    img = np.asarray(img, dtype=float)
    q = np.clip(np.rint(img * maxval), 0, maxval).astype(int)
    with open(path, 'w') as fh:
        fh.write('P2\n%d %d\n%d\n' % (q.shape[1], q.shape[0], maxval))
        for row in q:
            fh.write(' '.join(map(str, row)) + '\n')


def read_pgm(path):
    """Read a P2 PGM into a float array in ``[0, 1]``."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            tokens.extend(line.split('#', 1)[0].split())
    if not tokens or tokens[0] != 'P2':
        raise ValueError("%s: not a plain PGM (P2) file" % path)
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4:4 + w * h], dtype=float)
    if data.size != w * h:
        raise ValueError("%s: expected %d pixels, found %d"
                         % (path, w * h, data.size))
    return data.reshape(h, w) / maxval


def write_csv_matrix(path, M):
    """Row-major CSV with a leading ``rows,cols`` line; ``repr`` floats."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    with open(path, 'w') as fh:
        fh.write('%d,%d\n' % M.shape)
        for row in M:
            fh.write(','.join(repr(float(v)) for v in row) + '\n')


def read_csv_matrix(path):
    """Inverse of :func:`write_csv_matrix`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError("%s: empty file" % path)
    try:
        rows, cols = (int(t) for t in lines[0].split(','))
    except ValueError:
        raise ValueError("%s: first line must be 'rows,cols'" % path) from None
    body = [[float(t) for t in ln.split(',')] for ln in lines[1:]]
    M = np.array(body, dtype=float).reshape(-1, cols) if body else \
        np.zeros((0, cols))
    if M.shape != (rows, cols):
        raise ValueError("%s: header says %dx%d, found %dx%d"
                         % (path, rows, cols, M.shape[0], M.shape[1]))
    return M
