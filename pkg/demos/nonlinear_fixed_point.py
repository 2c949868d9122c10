"""Picard iteration for the full nonlinear problem.

The forcing is scaled to half of the admissible size, the iteration starts
from zero and each step is one linear solve with the quadratic sources of
the previous iterate added to the forcing.
"""
from mhdlayer.forcing import forcing_family
from mhdlayer.grid import build_grid
from mhdlayer.linear import Physics
from mhdlayer.nonlinear import NonContractionError, admissible_forcing_size, fixed_point_solve, nonlinear_estimate_ratio
from mhdlayer.norms import forcing_size
from mhdlayer.profiles import build_profile
from mhdlayer.weight import build_weight

eps = 1e-3
g = build_grid(eps, y_max=30.0, node_count=16000)
p = build_profile("exp-approach", None, g)
w = build_weight(p)
F = forcing_family("smooth-modes", g, K=4)
F = F * (0.5 * admissible_forcing_size(eps) / forcing_size(F, w))

st = fixed_point_solve(F, p, Physics(), w)
print(f"converged={st.converged} after {st.iteration} iterations")
for it, xn, ratio, res in st.history_rows():
    print(f"  iter {it}: ||W||_X={xn:.4e}  ratio={ratio:.2e}  residual={res:.1e}")
print(f"contraction radius {st.meta['contraction_radius']:.3e}, estimate ratio {nonlinear_estimate_ratio(st.field, F, w):.3f}")

# far past the admissible size the iteration stops contracting
try:
    fixed_point_solve(F * 1e7, p, Physics(), w)
except NonContractionError as e:
    print(f"forcing x1e7: {e}")
