"""Local limit counts for two laws: one lattice, one not.

{diag(2, 1/2), rotation(pi/2)} moves log|<e1, G_n e1>| on the lattice log2 Z,
and half of its words send e1 to e2.  The normalized interval probability
then settles at log(2)/2 instead of 1.  The shear-plus-rotations law has no
such structure, and its ratio approaches 1.

Run:  python3 demos/03_llt_lattice.py    (about a minute)
"""

import math

import numpy as np

from projwalk import ensemble as E
from projwalk import montecarlo as MC
from projwalk.projgeom import rotation

e1 = np.array([1.0, 0.0])

lattice = E.two_matrix()
res = MC.coefficient_llt_count(lattice, e1, e1, -1, 1, [100, 200, 400], 200_000, 0.0,
                               math.log(2), seed=0)
print("two-matrix law (lambda = 0, sigma = log 2)")
for r in res:
    print(f"  n={r.n:4d}  ratio {r.ratio:.4f}  [{r.ratio_ci[0]:.4f}, {r.ratio_ci[1]:.4f}]")
print(f"  lattice prediction log(2)/2 = {math.log(2) / 2:.4f}")

generic = E.finite_support([[[1.5, 0.5], [0.0, 1 / 1.5]], rotation(1.0), rotation(-0.3)],
                           [0.4, 0.3, 0.3])
cfg = MC.PathConfig(n=2000, replicas=2000, burn_in=200, seed=1)
lam = MC.estimate_lyapunov(generic, cfg)
var = MC.estimate_variance(generic, cfg, lam.value)
sigma = math.sqrt(var.value)
print(f"\nshear + rotations (lambda {lam.value:.4f}, sigma {sigma:.4f}, both simulated)")
res = MC.coefficient_llt_count(generic, e1, e1, -1, 1, [100, 200, 400], 200_000, lam.value,
                               sigma, seed=2)
for r in res:
    print(f"  n={r.n:4d}  ratio {r.ratio:.4f}  [{r.ratio_ci[0]:.4f}, {r.ratio_ci[1]:.4f}]")
