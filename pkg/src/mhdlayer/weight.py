"""The degenerate wall weight Z(y) and the inequalities built on it."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import HalfLineGrid
from .profiles import ShearProfile

Z_FLOOR = 1e-300


class WeightConstructionError(ValueError):
    pass


def _inverse_G(p: ShearProfile, y):
    """1/G_s(y/sqrt eps) and its y-derivative."""
    U, H = p.evaluate(np.asarray(y) / np.sqrt(p.eps))
    G = H[0]**2 - U[0]**2
    dG = (2 * H[0] * H[1] - 2 * U[0] * U[1]) / np.sqrt(p.eps)
    return 1 / G, -dG / G**2


def gtilde(p: ShearProfile, y):
    """Z' as a function of y, and Z''.

    1/G_s on [0, 1]; a quadratic on [1, 3/2] that keeps the value and slope
    at 1 and flattens out at 3/2; a smoothstep down to 0 on [3/2, 2]; 0 after.
    """
    y = np.asarray(y, dtype=float)
    g1, d1 = (float(np.ravel(v)[0]) for v in _inverse_G(p, np.array([1.0])))
    gm = g1 + 0.25 * d1
    G, dG = np.zeros_like(y), np.zeros_like(y)
    a = y <= 1
    G[a], dG[a] = _inverse_G(p, y[a])
    b = (y > 1) & (y <= 1.5)
    s = y[b] - 1
    G[b], dG[b] = g1 + d1 * (s - s**2), d1 * (1 - 2 * s)
    c = (y > 1.5) & (y < 2)
    t = (y[c] - 1.5) / 0.5
    G[c], dG[c] = gm * (1 - 3 * t**2 + 2 * t**3), gm * (-6 * t + 6 * t**2) / 0.5
    return G, dG, (g1, d1, gm)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    grid: HalfLineGrid
    profile: ShearProfile
    Gtilde: np.ndarray
    Z: np.ndarray
    Zp: np.ndarray
    Zpp: np.ndarray
    Zbar: float
    eps: float
    bridge: dict
    C0_measured: float = float("nan")
    extras: dict = field(default_factory=dict)

    @property
    def sqrtZ(self):
        return np.sqrt(self.Z)

    def log_weight(self, eta):
        return np.abs(np.log(np.maximum(self.Z, Z_FLOOR))) ** (1 + eta / 3)


def build_weight(p: ShearProfile, eps=None, grid=None):
    grid = p.grid if grid is None else grid
    eps = p.eps if eps is None else eps
    if abs(eps - p.eps) > 1e-15 * eps:
        raise WeightConstructionError("profile was sampled for a different eps")
    if not (p.gamma0 > 0 and p.gamma_lo > 0):
        raise WeightConstructionError("weight needs G_s >= gamma0 > 0 and |H_s| bounded below")
    y = grid.y
    G, dG, (g1, d1, gm) = gtilde(p, y)
    lo, hi = 1 / (2 * p.gamma_hi**2), 2 / p.gamma0
    bridge_vals = [g1, gm]
    if min(bridge_vals) < lo or max(bridge_vals) > hi:
        raise WeightConstructionError(
            f"bridge leaves [{lo:.4g}, {hi:.4g}]: G~(1) = {g1:.4g}, G~(3/2) = {gm:.4g}")
    Z = grid.integrate_from_zero(G)
    # exact plateau past y=2 (the integrand vanishes there)
    past = y >= 2
    if np.any(past):
        Z[past] = Z[np.argmax(past)]
    Zbar = float(Z[past][0]) if np.any(past) else float(Z[-1] + 0.0)
    w = WeightFunction(grid=grid, profile=p, Gtilde=G, Z=Z, Zp=G, Zpp=dG, Zbar=Zbar, eps=float(eps),
                       bridge=dict(value_at_1=g1, slope_at_1=d1, value_at_3_2=gm, band=(lo, hi)))
    rep = check_weight_bounds(w)
    return WeightFunction(**{**w.__dict__, "C0_measured": rep["C0"]})


def check_weight_bounds(w: WeightFunction, C0=None):
    """Measure the constants of the weight inequalities.

    Each item reports the smallest constant that makes it hold on the grid.
    With C0=None the binding constant is the max over items and only the
    sign/identity items can fail; pass a C0 to test against a fixed value.
    """
    p, y, eps = w.profile, w.grid.y, w.eps
    M = p.Mbar
    Z, Zp, Zpp = w.Z, w.Zp, w.Zpp
    Y = y / np.sqrt(eps)
    U, H = p.evaluate(Y)
    G = H[0]**2 - U[0]**2
    dG = (2 * H[0] * H[1] - 2 * U[0] * U[1]) / np.sqrt(eps)

    def ratio(num, den):
        num = np.abs(num)
        if den == 0:
            return 0.0 if np.all(num == 0) else float("inf")
        return float(np.max(num) / den) if num.size else 0.0

    near = (y > 0) & (y <= 2)
    inner = y <= 1.5
    outer = y >= 1
    items = {
        "Z_lower (y <= C0 Z on [0,2])": float(np.max(y[near] / Z[near])),
        "Z_upper (Z <= C0 y on [0,2])": float(np.max(Z[near] / y[near])),
    }
    for k in range(4):
        items[f"|y^{k} Z''| <= C0 Mbar eps^({k - 1}/2) on [0,3/2]"] = ratio(
            y[inner]**k * Zpp[inner], M * eps ** ((k - 1) / 2))
    flux = dG * Zp + G * Zpp                      # (G_s Z')'
    items["-(G_s Z')' >= -C0 Mbar eps on [1,inf)"] = ratio(np.maximum(flux[outer], 0), M * eps)
    items["|(1+y) Z'| <= C0"] = float(np.max((1 + y) * np.abs(Zp)))
    items["|y Z''| <= C0 (Mbar+1)"] = ratio(y * Zpp, M + 1)
    items["Z <= C0"] = float(np.max(Z))
    measured_C0 = max(items.values())
    C = measured_C0 if C0 is None else C0
    report = {name: {"bound": C, "measured": v, "pass": bool(np.isfinite(v) and v <= C)}
              for name, v in items.items()}
    zpp_out = float(np.max(Zpp[y >= 1.5])) if np.any(y >= 1.5) else 0.0
    report["Z'' <= 0 on [3/2,inf)"] = {"bound": 0.0, "measured": zpp_out, "pass": zpp_out <= 0.0}
    one = y <= 1
    unit = float(np.max(np.abs(G[one] * Zp[one] - 1)))
    report["G_s Z' = 1 on [0,1]"] = {"bound": 1e-12, "measured": unit, "pass": unit <= 1e-12}
    mono = float(np.min(np.diff(Z)))
    report["Z non-decreasing"] = {"bound": 0.0, "measured": mono, "pass": mono >= 0}
    plateau = float(np.max(np.abs(Z[y >= 2] - w.Zbar))) if np.any(y >= 2) else 0.0
    report["Z = Zbar on [2,inf)"] = {"bound": 0.0, "measured": plateau, "pass": plateau == 0.0}
    report["Z(0) = 0"] = {"bound": 0.0, "measured": float(abs(Z[0])), "pass": Z[0] == 0.0}
    binding = max(items, key=items.get)
    return {"items": report, "C0": float(measured_C0), "binding_item": binding,
            "all_pass": all(v["pass"] for v in report.values()), "eps": eps, "Mbar": M, "Zbar": w.Zbar}


def interpolation_check(g, w: WeightFunction, C0=None):
    """||g|| over 2 sqrt(2 C0) ||Z^1/2 g||^(2/3) ||g'||^(1/3) + C0 ||Z^1/2 g||."""
    grid = w.grid
    C0 = w.C0_measured if C0 is None else C0
    n = grid.norm(g)
    if n == 0:
        return 0.0
    zg = grid.norm(g, weight=w.Z)
    dg = grid.norm(grid.derivative(g))
    den = 2 * np.sqrt(2 * C0) * zg ** (2 / 3) * dg ** (1 / 3) + C0 * zg
    return float(n / den)


def _restrict(grid, w, top=2.0):
    m = grid.y <= top
    sub = HalfLineGrid(nodes=grid.y[m], eps=grid.eps)
    return m, sub


def weighted_hardy_check(h, w: WeightFunction, eta=1.0):
    """||Z^-1/2 d^-1 h|| over ||Z^1/2 |log Z|^(1+eta/3) h||, both on (0, 2)."""
    m, sub = _restrict(w.grid, w)
    h = np.asarray(h)[m]
    Z = np.maximum(w.Z[m], Z_FLOOR)
    H = sub.integrate_from_zero(h)
    num = sub.norm(H, weight=1 / Z * (w.Z[m] > 0))
    den = sub.norm(h, weight=Z * w.log_weight(eta)[m] ** 2)
    if num == 0:
        return 0.0
    return float(num / den)


def log_weight_bound_check(h, w: WeightFunction, eta=1.0, delta=0.0):
    """||Z^1/2 |log Z|^(1+eta/3) h|| over |log eps|^(1+eta/3)(||Z^1/2 h|| + eps^(1/4+delta)||h||)."""
    grid, eps = w.grid, w.eps
    num = grid.norm(h, weight=w.Z * w.log_weight(eta) ** 2)
    if num == 0:
        return 0.0
    den = abs(np.log(eps)) ** (1 + eta / 3) * (grid.norm(h, weight=w.Z) + eps ** (0.25 + delta) * grid.norm(h))
    return float(num / den)
