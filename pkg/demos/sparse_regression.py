"""Recover a planted sparse vector with an l_1/2 penalty.

Run from the repository root:

    python3 demos/sparse_regression.py

The solver alternates a safeguarded proximal-gradient step with a
trust-region Newton step on the forward-backward envelope. The table shows
both phases: a long stretch where the support is still being sorted out,
then a few fast Newton steps once it settles.
"""

import numpy as np

from pgssn import LeastSquares, LqNorm, Problem, SolverConfig, run
from pgssn.data_io import gen_sparse_regression

data = gen_sparse_regression(m=100, n=500, k=10, noise=0.01, seed=0)
lam = 0.01 * np.max(np.abs(data.A.T @ data.b))
problem = Problem(LeastSquares(data.A, data.b), LqNorm(lam, q=0.5))

print(" k          F        resid   Newton bt  TRS")
report = run(problem, SolverConfig(eps=1e-5, max_iter=500), callback=lambda r:
             print("%3d  %12.6f  %10.3e  %5s      %s"
                   % (r.k, r.F, r.resid, r.newton_bt if r.newton_bt >= 0
                      else '-', r.trs_status)))

x = report.x_pg
found = np.flatnonzero(x)
true = np.flatnonzero(data.truth)
print("\nstatus %s after %d iterations (%.2f s)" % (report.status, report.iters,
                                                  report.time))
print("true support      ", true.tolist())
print("recovered support ", found.tolist())
print("max error on support %.3e" % np.max(np.abs(x - data.truth)))
