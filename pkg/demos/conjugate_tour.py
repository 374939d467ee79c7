"""Conjugating x^2 under three different couplings.

Run with ``python3 demos/conjugate_tour.py``.  The same function looks very
different depending on the coupling: under the square-product coupling its
conjugate is an indicator of [-1, 1], under the norm construction it is |x*|,
and a function with a bad conjugate (x^2 restricted to x >= 0 under the
reciprocal coupling) fails to be recovered by its biconjugate.
"""

import numpy as np

from gcoupling.conjugate import g_biconjugate, g_conjugate, membership_Ff
from gcoupling.coupling import ProperFn, builtin_coupling
from gcoupling.extreal import GridSpec
from gcoupling.sets import SetSpec

xgrid = GridSpec.centered(20.0, 1, 201)
cgrid = GridSpec.centered(2.0, 1, 9, 0)
f = ProperFn(1, lambda X: X[..., 0] ** 2, name="x^2")


def show(title, fg):
    print(title)
    for s, v, st in zip(fg.points[:, 0], fg.values, fg.status):
        print(f"  x* = {s:+.2f}   value = {v:<10.6g} ({st})")


# Square-product coupling: the sup over x is finite only for |x*| <= 1.
g = builtin_coupling("square_product")
fg = g_conjugate(f, g, cgrid, xgrid)
show("f^g under square_product", fg)
fgg = g_biconjugate(f, g, g_conjugate(f, g, GridSpec.centered(2.0, 1, 41), xgrid), cgrid)
print("  biconjugate error:", float(np.max(np.abs(fgg.values - fgg.points[:, 0] ** 2))))

# Norm construction: the conjugate is the Euclidean norm of x*.
g = builtin_coupling("norm_on_dom", dom=f)
show("\nf^g under norm_on_dom", g_conjugate(f, g, cgrid, xgrid))

# A non-member: the conjugate is the constant 1, so f^gg is 1 and misses f.
h = ProperFn(1, lambda X: X[..., 0] ** 2, SetSpec.orthant(1))
v = membership_Ff(h, builtin_coupling("reciprocal"), xgrid, GridSpec.on([0.0], [4.0], 41, 0))
print(f"\nx^2 on x >= 0 under reciprocal: member={v.member}, inf gamma={v.inf_gamma:.6f}")
