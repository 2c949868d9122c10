"""Build the boundary-layer weight Z for a few viscosities and measure its constants.

Z follows 1/G_s near the wall, is bridged to a constant plateau past y = 2,
and the constant C0 of its inequalities should not drift with eps.
"""
import numpy as np

from mhdlayer.grid import build_grid
from mhdlayer.profiles import build_profile, validate_assumptions
from mhdlayer.weight import build_weight, check_weight_bounds

for eps in (1e-2, 1e-3, 1e-4):
    g = build_grid(eps, y_max=20.0, node_count=4000)
    p = build_profile("exp-approach", [0.5, 1.0, 0.1], g)
    rep = validate_assumptions(p)
    w = build_weight(p)
    z = check_weight_bounds(w)
    print(f"eps={eps:g}  profile ok={rep.ok}  gamma0={rep.gamma0:.4f}  Mbar={rep.Mbar:.3f}")
    print(f"   Zbar={w.Zbar:.4f}  C0={z['C0']:.4f}  binding item: {z['binding_item']}  all pass={z['all_pass']}")

# the weight near the wall, on the fast variable Y = y / sqrt(eps)
g = build_grid(1e-3, 20.0, 4000)
w = build_weight(build_profile("exp-approach", None, g))
for Y in (0.5, 1, 2, 5, 10, 30):
    i = int(np.searchsorted(g.Y, Y))
    print(f"Y={g.Y[i]:6.2f}  y={g.y[i]:.4f}  Z={w.Z[i]:.5f}  Z'={w.Zp[i]:.4f}")
