"""Deblur a small piecewise-constant image with a fused zero-norm penalty.

Run from the repository root:

    python3 demos/deblur.py [outdir]

Writes truth.pgm, blurred.pgm and restored.pgm (plain-text PGM, viewable
in most image tools) and prints PSNR and jump counts. Takes about 30 s.
"""

import os
import sys

import numpy as np

from pgssn import BoxConstraint, FusedZeroNorm, LeastSquares, Problem, run
from pgssn.data_io import (make_image_problem, psnr, sparsity_metrics,
                           write_pgm)

out = sys.argv[1] if len(sys.argv) > 1 else 'deblur_out'
os.makedirs(out, exist_ok=True)

img = make_image_problem(side=32, noise=0.02, sigma=4.0, ksize=9, seed=0)
A, b = img.blur, img.b
lam = 0.005 * np.max(np.abs(A.T @ b))
# the image is vectorized row by row, so jumps are counted along rows and
# across row ends
reg = FusedZeroNorm(lam0=lam, lam=lam, box=BoxConstraint(-5.0, 5.0))
report = run(Problem(LeastSquares(A, b), reg))
x = report.x_pg

for name, v in (('truth', img.truth), ('blurred', b), ('restored', x)):
    write_pgm(os.path.join(out, name + '.pgm'),
              np.clip(v, 0, 1).reshape(img.side, img.side))

print("status %s after %d iterations (%.1f s)"
      % (report.status, report.iters, report.time))
print("PSNR  blurred %.3f dB   restored %.3f dB"
      % (psnr(img.truth, b), psnr(img.truth, x)))
print("jumps blurred %d   restored %d   truth %d"
      % (sparsity_metrics(b)[1], sparsity_metrics(x)[1],
         sparsity_metrics(img.truth)[1]))
print("images written to %s/" % out)
