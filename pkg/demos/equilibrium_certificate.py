"""Certifying an equilibrium point and checking the complementarity bridge.

Run with ``python3 demos/equilibrium_certificate.py``.  We sweep candidates
for the bifunction f(x, y) = (x - 0.5)(y - x) on [0, 1], certify the one
solution, and then solve a small linear complementarity problem exactly.
"""

import numpy as np

from gcoupling.complementarity import CPInstance, cp_zdgp_equivalence, lcp_enumerate
from gcoupling.equilibrium import EPInstance, ep_residual, jemlws_certificate
from gcoupling.sets import SetSpec

inst = EPInstance(SetSpec.box([0.0], [1.0]),
                  lambda X, Y: (X[..., 0] - 0.5) * (Y[..., 0] - X[..., 0]))

print("candidate   residual    certificate")
for xb in np.linspace(0, 1, 11):
    cert = jemlws_certificate(inst, [xb])
    print(f"  {xb:.1f}     {ep_residual(inst, [xb]) + 0.0:+.4f}    {cert['status']}")

# LCP: find z >= 0 with Mz + q >= 0 and z'(Mz + q) = 0.
M, q = [[2, 1], [1, 2]], [-1, -1]
res = lcp_enumerate(M, q)
print("\nLCP solution (exact):", [str(v) for v in res.solution])
print("infeasible instance found a solution:", lcp_enumerate([[-1, 0], [0, -1]], [-1, -1]).found)

X = np.array([[a, b] for a in np.arange(0, 2.01, 0.5) for b in np.arange(0, 2.01, 0.5)])
eq = cp_zdgp_equivalence(CPInstance(M, q), X)
print("gap function agrees with its dual form on the grid:", eq["F_matches"], eq["dual_matches"])
