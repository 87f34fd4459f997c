"""Stationary mass on algebraic sets for the Lorentz-type example in d = 3.

The law is supported on isometries of v1^2 - v2^2 - v3^2, so the walk is
pushed onto the light cone {q = 0}.  On e1* that cone is the level set
delta(e1*, x) = 1/sqrt 2, and it should carry all of the mass.

Run:  python3 demos/02_example1_zero_one.py
"""

import math

import numpy as np

from projwalk import ensemble as E
from projwalk import montecarlo as MC
from projwalk import zeroone as Z
from projwalk.projgeom import delta

ens = E.example_one()
meas = MC.empirical_stationary(ens, MC.PathConfig(n=1, replicas=100_000, burn_in=500, seed=0))
e1 = np.array([1.0, 0.0, 0.0])
dl = delta(e1, meas.points)

print("width     mass of |delta - 1/sqrt2| < width")
for w in (0.1, 0.01, 0.001, 1e-4):
    print(f"{w:<8g}  {meas.integrate(np.abs(dl - 1 / math.sqrt(2)) < w):.5f}")

for label, t in (("cone", math.log(1 / math.sqrt(2))), ("delta = 0.3", math.log(0.3))):
    c = Z.level_set_mass(meas, Z.LevelSetQuery(e1, t))
    print(f"\nlevel set {label}: atom {c.atom:.4f}, verdict {c.verdict}")
    for h, m, lo, hi in c.rows()[::2]:
        print(f"  band {h:.4f}: {m:.5f}  [{lo:.5f}, {hi:.5f}]")

cone = Z.algebraic_mass(meas, Z.PolynomialSet.quadratic_form(3, 1))
print(f"\n|q(x)| <= h: atom {cone.atom:.4f}, verdict {cone.verdict}")

# Hyperplanes get mass zero, with a power-law approach.
hp = Z.hyperplane_mass(meas, [0.0, 1.0, 0.0])
print(f"hyperplane e2*: masses {np.round(hp.masses, 5)}, exponent {hp.alpha:.2f}, "
      f"verdict {hp.verdict}")

# Tail of log delta(e2*, G_n x) under the walk: geometric in k.
rep = MC.regularity_tail(ens, [0.0, 1.0, 0.0], 400, 0.1, 40, 100_000, seed=0)
print(f"regularity tail: rate {rep.rate:.4f} (t = {rep.t_stat:.0f})")
