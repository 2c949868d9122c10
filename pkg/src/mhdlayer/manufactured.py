"""Manufactured solutions for the per-mode linear system and refinement studies."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial as P
from scipy.stats import linregress

from .grid import build_grid
from .linear import ModeForcing, ModeOperator, Physics
from .profiles import build_profile

# stream functions and pressure of the form poly(y) * exp(-y^2); the
# polynomials are chosen so that phi = phi' = psi = psi'' = 0 at the wall
PHI = P([0, 0, 1, 0.5j])
PSI = P([0, 1, 0, -1j / 3])
PRESSURE = P([1, 1])


def gauss_jet(poly, y, order=3):
    """Values of d^k/dy^k [poly(y) e^{-y^2}] for k = 0..order."""
    e = np.exp(-y**2)
    out, q = [], poly
    for _ in range(order + 1):
        out.append(q(y) * e)
        q = q.deriv() - P([0, 2]) * q
    return np.array(out)


def manufactured_mode(n, profile, physics: Physics):
    """Exact fields and the forcing that produces them for mode n."""
    y = profile.grid.y
    nt = n / physics.rho
    eps, mu, ka = profile.eps, physics.mu, physics.kappa
    ph, ps, pr = gauss_jet(PHI, y), gauss_jet(PSI, y), gauss_jet(PRESSURE, y, 1)
    jy = profile.jets_y()
    U, U1, H, H1 = jy["U"][0], jy["U"][1], jy["H"][0], jy["H"][1]
    u, v, h, g, p = ph[1], -1j * nt * ph[0], ps[1], -1j * nt * ps[0], pr[0]
    Lu = ph[3] - nt**2 * ph[1]
    Lv = -1j * nt * (ph[2] - nt**2 * ph[0])
    Lh = ps[3] - nt**2 * ps[1]
    Lg = -1j * nt * (ps[2] - nt**2 * ps[0])
    f1 = 1j * nt * U * u + v * U1 - 1j * nt * H * h - g * H1 + 1j * nt * p - mu * eps * Lu
    f2 = 1j * nt * U * v - 1j * nt * H * g + pr[1] - mu * eps * Lv
    q1 = 1j * nt * U * h + v * H1 - 1j * nt * H * u - g * U1 - ka * eps * Lh
    q2 = 1j * nt * U * g - 1j * nt * H * v - ka * eps * Lg
    exact = dict(u=u, v=v, h=h, g=g, p=p, phi=ph[0], psi=ps[0])
    return exact, ModeForcing(n, physics.rho, f1, f2, q1, q2)


def mms_study(n, eps, node_counts=(2000, 4000, 8000, 16000, 32000), y_max=12.0,
              family="exp-approach", params=None, physics=Physics()):
    """Max-norm errors of (u, v, h, g) and residuals over a sequence of grids."""
    rows = []
    for N in node_counts:
        grid = build_grid(eps, y_max, N)
        prof = build_profile(family, params, grid)
        exact, mf = manufactured_mode(n, prof, physics)
        sol = ModeOperator(n, prof, physics).solve(mf)
        err = max(np.max(np.abs(getattr(sol, k) - exact[k])) for k in "uvhg")
        rows.append(dict(n=n, eps=eps, N=N, h_max=float(np.max(np.diff(grid.y))),
                         h_min=float(np.min(np.diff(grid.y))), error=float(err),
                         max_residual=max(sol.residuals.values()), **sol.residuals))
    orders = [float(np.log(rows[i - 1]["error"] / rows[i]["error"]) / np.log(rows[i - 1]["h_max"] / rows[i]["h_max"]))
              for i in range(1, len(rows))]
    fit = linregress(np.log([r["h_max"] for r in rows]), np.log([r["error"] for r in rows]))
    return {"rows": rows, "pairwise_orders": orders, "fitted_order": float(fit.slope)}
