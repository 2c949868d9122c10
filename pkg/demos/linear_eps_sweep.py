"""How the linear estimate ratio behaves as eps shrinks.

For a fixed smooth forcing on modes 1 and 2 the ratio of ||W||_X to the
predicted right-hand side should stay bounded; the fitted growth slope
against log(1/eps) should not be positive.
"""
from mhdlayer.forcing import forcing_family
from mhdlayer.grid import build_grid
from mhdlayer.linear import LinearSolver, Physics
from mhdlayer.norms import linear_estimate_ratio, scaling_fit
from mhdlayer.profiles import build_profile
from mhdlayer.weight import build_weight

samples = []
for k in range(6, 15, 2):
    eps = 2.0**-k
    g = build_grid(eps, y_max=30.0, node_count=16000)
    p = build_profile("exp-approach", None, g)
    w = build_weight(p)
    F = forcing_family("smooth-modes", g, K=4)
    lf = LinearSolver(p, Physics(), 4).solve(F)
    r = linear_estimate_ratio(lf.field, F, w)
    samples.append((eps, r.ratio))
    print(f"eps=2^-{k:<2d}  ||W||_X={r.lhs:.3e}  rhs={r.rhs:.3e}  ratio={r.ratio:.3e}")

fit = scaling_fit(samples)
print(f"growth slope vs log(1/eps): {fit['growth_slope']:+.3f}  (r2 {fit['r2']:.3f})")
