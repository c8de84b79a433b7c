"""What the proximal mappings do, on tiny inputs.

    python3 demos/prox_gallery.py

Each prox comes with a certificate: a numerical gap between the best and
the second-best candidate. A gap near zero means the prox is (close to)
set valued there and the Newton machinery must not be used.
"""

import numpy as np

from pgssn import BoxConstraint, FusedLq, FusedZeroNorm, LqNorm, ZeroNormBox

z = np.array([-2.0, -1.0, -0.6, 0.3, 0.9, 1.5, 3.0])
print("z                 ", z)
for q in (0.5, 2 / 3):
    res = LqNorm(1.0, q=q).prox(0.5, z)
    print("l_%.2f, gamma 0.5  " % q, np.round(res.point, 4) + 0.0, res.certificate)

res = ZeroNormBox(0.3, BoxConstraint(-1.0, 1.0)).prox(1.0, z)
print("zero-norm + box   ", res.point, res.certificate)

# a noisy step: the fused penalties snap it back to constant pieces
rng = np.random.default_rng(0)
step = np.repeat([0.0, 2.0, -1.0], 6) + 0.1 * rng.standard_normal(18)
print("\nnoisy step        ", np.round(step, 2))
res = FusedZeroNorm(0.5, 0.05, BoxConstraint(-5, 5)).prox(1.0, step)
print("fused zero-norm   ", np.round(res.point, 2))
res = FusedLq(0.5, 0.05, q=0.5).prox(1.0, step)
print("fused + l_1/2     ", np.round(res.point, 2))

# a tie: at z = 1.5 the l_1/2 prox with weight 1 has two minimizers
res = LqNorm(1.0).prox(1.0, np.array([1.5]))
print("\nl_1/2 at its threshold:", res.point, res.certificate)
