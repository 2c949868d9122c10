"""Manufactured-solution refinement for the per-mode linear solver.

Each row prints the max-norm error of (u, v, h, g) and the worst residual;
the fitted order should sit at 2 for every mode and viscosity.
"""
from mhdlayer.manufactured import mms_study

for n in (1, 4, 16):
    for eps in (1e-2, 1e-3):
        st = mms_study(n, eps, node_counts=(2000, 4000, 8000, 16000))
        print(f"n={n:2d} eps={eps:g}  fitted order {st['fitted_order']:.3f}")
        for r in st["rows"]:
            print(f"    N={r['N']:6d}  h_max={r['h_max']:.2e}  error={r['error']:.3e}  residual={r['max_residual']:.1e}")
