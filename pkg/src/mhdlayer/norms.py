"""The solution norm, forcing norms, discrete multiplier identities and
estimate ratios with their eps-scaling fits."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import linregress

from .fields import ModeStack
from .profiles import ShearProfile
from .transform import CoefficientFields, GoodUnknowns, _mv, transformed_source
from .weight import WeightFunction

X_COMPONENTS = ("sup_sum", "mean_gradient", "mean_gradient_weighted", "oscillating",
                "oscillating_weighted", "oscillating_gradient", "oscillating_gradient_weighted")


@dataclass
class XNormReport:
    sup_sum: float
    mean_gradient: float
    mean_gradient_weighted: float
    oscillating: float
    oscillating_weighted: float
    oscillating_gradient: float
    oscillating_gradient_weighted: float
    total: float
    truncation_tail: float

    def to_dict(self):
        return asdict(self)


def _omega_sq(stack: ModeStack, per_mode):
    """2 pi rho sum over n != 0 of per_mode(n, W_n)."""
    s = sum(per_mode(n, stack.mode(n)) for n in stack.modes if n != 0)
    return 2 * np.pi * stack.rho * s


def x_norm(field: ModeStack, w: WeightFunction, eps=None) -> XNormReport:
    g = field.grid
    eps = w.eps if eps is None else eps
    Z = w.Z
    sup_sum = float(sum(g.norm(field.mode(n), "Linf") for n in field.modes))
    tail = float(max(g.norm(field.mode(n), "Linf") for n in (-field.K, field.K))) if field.K > 0 else 0.0
    m0 = field.mode(0)
    d0 = g.derivative(np.array([m0[0], m0[2]]))
    L2 = lambda n, W: g.norm(W) ** 2
    ZL2 = lambda n, W: g.norm(W, weight=Z) ** 2
    grad = lambda n, W: (n / field.rho) ** 2 * g.norm(W) ** 2 + g.norm(g.derivative(W)) ** 2
    Zgrad = lambda n, W: (n / field.rho) ** 2 * g.norm(W, weight=Z) ** 2 + g.norm(g.derivative(W), weight=Z) ** 2
    comps = [
        sup_sum,
        eps**0.25 * g.norm(d0),
        g.norm(d0, weight=Z),
        eps**-0.25 * np.sqrt(_omega_sq(field, L2)),
        eps**-0.5 * np.sqrt(_omega_sq(field, ZL2)),
        eps**0.25 * np.sqrt(_omega_sq(field, grad)),
        np.sqrt(_omega_sq(field, Zgrad)),
    ]
    comps = [float(c) for c in comps]
    return XNormReport(*comps, total=float(sum(comps)), truncation_tail=tail)


def omega_norm(stack: ModeStack, weight=None):
    """L2 norm over the strip: sqrt(2 pi rho sum_n ||W_n||^2), all modes."""
    g = stack.grid
    return float(np.sqrt(2 * np.pi * stack.rho * sum(g.norm(stack.mode(n), weight=weight) ** 2 for n in stack.modes)))


def forcing_size(F: ModeStack, w: WeightFunction, eps=None):
    """||F|| + eps^-1/4 ||Z^1/2 F|| over the strip."""
    eps = w.eps if eps is None else eps
    return omega_norm(F) + eps**-0.25 * omega_norm(F, weight=w.Z)


def linear_estimate_rhs(F: ModeStack, w: WeightFunction, eps=None, eta=1.0):
    """Right side of the linear estimate with unit constant."""
    g = F.grid
    eps = w.eps if eps is None else eps
    f0 = F.mode(0)
    mean = np.array([g.integrate_to_infinity(f0[0], tail_tol=np.inf), g.integrate_from_zero(f0[2])])
    zero_part = eps**-1 * (g.norm(mean, "L1") + eps**0.25 * g.norm(mean) + g.norm(mean, weight=w.Z))
    osc = F.zero_mean_part()
    osc_part = eps**-0.25 * abs(np.log(eps)) ** ((3 + eta) / 2) * (omega_norm(osc) + eps**-0.25 * omega_norm(osc, weight=w.Z))
    return float(zero_part + osc_part), {"zero_mode_part": float(zero_part), "oscillating_part": float(osc_part)}


def nonlinear_estimate_rhs(F: ModeStack, w: WeightFunction, eps=None, eta=1.0):
    eps = w.eps if eps is None else eps
    return float(eps**-0.25 * abs(np.log(eps)) ** ((3 + eta) / 2) * forcing_size(F, w, eps))


# ---------------------------------------------------------------- identities

def _derivs(gu: GoodUnknowns, grid):
    return grid.derivative(gu.Uh), grid.derivative(gu.Hh)


def _defect(terms):
    total = sum(terms.values())
    scale = sum(abs(v) for v in terms.values())
    return float(abs(total) / scale) if scale > 0 else 0.0


def energy_identity_check(gu: GoodUnknowns, p: ShearProfile, cf: CoefficientFields, mf):
    """Real-part energy identity: velocity equation tested with U^, magnetic
    equation with G_s H^, diffusion integrated by parts once. The pressure
    term and the U_s, G_s cross terms are purely imaginary and drop out."""
    grid, eps, nt = p.grid, p.eps, gu.nt
    mu, ka, se = cf.mu, cf.kappa, np.sqrt(eps)
    G = p.G
    Uh, Hh = gu.Uh, gu.Hh
    dU, dH = _derivs(gu, grid)
    RU, RH = transformed_source(p, mf, mu, ka)
    GH = G * Hh
    dGH = grid.derivative(GH)
    lower_U = 1j * nt * se * _mv(cf.A_U, Hh) + se * _mv(cf.B_U, dH) + _mv(cf.C_U, Hh) + gu.psih * cf.D_U / se
    lower_H = -2 * ka * se * p.b_p * dH + _mv(cf.C_H, Hh) + gu.psih * cf.D_H / se
    ip = grid.inner
    terms = {
        "velocity_diffusion": mu * eps * (nt**2 * grid.norm(Uh) ** 2 + grid.norm(dU) ** 2),
        "magnetic_diffusion": ka * eps * (ip(dH, dGH) + nt**2 * ip(Hh, GH)).real,
        "velocity_lower_order": ip(lower_U, Uh).real,
        "magnetic_lower_order": ip(lower_H, GH).real,
        "sources": -(ip(RU, Uh) + ip(RH, GH)).real,
    }
    return {"defect": _defect(terms), "terms": terms}


def velocity_multiplier_check(gu: GoodUnknowns, p: ShearProfile, cf: CoefficientFields, mf):
    """Complex identity from the magnetic equation tested with U^."""
    grid, eps, nt = p.grid, p.eps, gu.nt
    ka, se = cf.kappa, np.sqrt(eps)
    Uh, Hh = gu.Uh, gu.Hh
    dU, dH = _derivs(gu, grid)
    _, RH = transformed_source(p, mf, cf.mu, ka)
    ip = grid.inner
    terms = {
        "transport": -1j * nt * grid.norm(Uh) ** 2,
        "stretching": -ip(2 * ka * se * p.b_p * dH, Uh),
        "lower_order": ip(_mv(cf.C_H, Hh) + gu.psih * cf.D_H / se, Uh),
        "diffusion": ka * eps * (ip(dH, dU) + nt**2 * ip(Hh, Uh)),
        "sources": -ip(RH, Uh),
    }
    return {"defect": _defect(terms), "terms": terms}


def modified_sources(gu: GoodUnknowns, p: ShearProfile, cf: CoefficientFields, mf):
    """Right sides of the vorticity system (velocity source after eliminating U^ with the magnetic equation)."""
    grid, eps, nt = p.grid, p.eps, gu.nt
    mu, ka, se = cf.mu, cf.kappa, np.sqrt(eps)
    Hh = gu.Hh
    dH = grid.derivative(Hh)
    RU, RH = transformed_source(p, mf, mu, ka)
    U0, a, H1 = p.U[0], p.a_p, p.H[1]
    c = (mu + ka) / ka
    B_mod = cf.B_U - 2 * (ka + mu) * (a * H1)[None, None, :] * np.eye(2)[:, :, None]
    tRU = (RU + c * U0 * RH - 1j * nt * se * _mv(cf.A_U, Hh) - se * _mv(B_mod, dH)
           - _mv(cf.C_U + c * U0 * cf.C_H, Hh) - gu.psih * (cf.D_U + c * U0 * cf.D_H) / se)
    tRH = RH + 2 * ka * se * p.b_p * dH - _mv(cf.C_H, Hh) - gu.psih * cf.D_H / se
    return tRU, tRH


def weighted_multiplier_check(gu: GoodUnknowns, p: ShearProfile, cf: CoefficientFields, mf, w: WeightFunction):
    """Imaginary-part identity of the vorticity system tested with Z psi^ and Z phi^.

    curl V = d_y V1 - i n~ V2 is moved onto the multiplier by one integration
    by parts; the wall terms vanish because Z(0) = 0.
    """
    grid, eps, nt = p.grid, p.eps, gu.nt
    mu, ka = cf.mu, cf.kappa
    sg = np.sign(nt)
    Z, Zp = w.Z, w.Zp
    ip = grid.inner
    mpsi, mphi = Z * gu.psih, Z * gu.phih
    dmpsi = Zp * gu.psih + Z * gu.hh
    dmphi = Zp * gu.phih + Z * gu.uh

    def curl_against(V, m, dm):
        return -ip(V[0], dm) - ip(1j * nt * V[1], m)

    def lap_against(om, m, dm):
        return -ip(grid.derivative(om), dm) - nt**2 * ip(om, m)

    G, U0 = p.G, p.U[0]
    tRU, tRH = modified_sources(gu, p, cf, mf)
    dwh = grid.derivative(gu.omega_h)
    ULH = np.array([U0 * dwh, -1j * nt * U0 * gu.omega_h])
    terms = {
        "I1": -abs(nt) * (curl_against(G * gu.Hh, mpsi, dmpsi) / mu + ip(gu.omega_u, mphi) / ka).real,
        "I2": -eps * sg * (lap_against(gu.omega_u, mpsi, dmpsi) + lap_against(gu.omega_h, mphi, dmphi)).imag,
        "I3": -eps * sg * ((mu + ka) * curl_against(ULH, mpsi, dmpsi) / mu).imag,
        "I4": -sg * (curl_against(tRU, mpsi, dmpsi) / mu + curl_against(tRH, mphi, dmphi) / ka).imag,
    }
    return {"defect": _defect(terms), "terms": terms}


# ---------------------------------------------------------------- estimates

ESTIMATE_TAGS = ("L2-gradient", "L2-velocity", "weighted-L2", "combined", "weighted-gradient", "linear-X")


@dataclass
class EstimateRatio:
    estimate: str
    eps: float
    n: int
    lhs: float
    rhs: float
    ratio: float

    def to_dict(self):
        return asdict(self)


def estimate_ratio(tag, gu: GoodUnknowns, p: ShearProfile, w: WeightFunction, mf, mu=1.0, kappa=1.0, eta=1.0):
    """LHS / RHS of the per-mode estimates with unit constants.

    Tags: 'L2-gradient', 'L2-velocity', 'weighted-L2', 'combined', 'weighted-gradient'.
    """
    grid, eps, nt = p.grid, p.eps, abs(gu.nt)
    M = p.Mbar
    Wh = gu.as_array()
    dW = grid.derivative(Wh)
    RU, RH = transformed_source(p, mf, mu, kappa)
    R = np.concatenate([RU, RH])
    nW, nR = grid.norm(Wh), grid.norm(R)
    zW, zR = grid.norm(Wh, weight=w.Z), grid.norm(R, weight=w.Z)
    nU = grid.norm(gu.Uh)
    L = abs(np.log(eps))
    if tag == "L2-gradient":
        lhs = np.sqrt(eps) * (grid.norm(dW) + nt * nW)
        rhs = M**0.5 * (1 + M**0.5) * nW + nR**0.5 * nW**0.5
    elif tag == "L2-velocity":
        lhs = nt**0.5 * nU
        rhs = M**0.5 * (1 + M**0.5) * nW + nR**0.5 * nW**0.5
    elif tag == "weighted-L2":
        lhs = nt**0.5 * zW
        rhs = (nt**-0.5 * L ** (1 + eta / 3) * zR + eps**0.25 * M**0.5 * nR**0.5 * nW**0.5
               + eps**0.25 * (1 + M**0.5) * nR**0.25 * nW**0.75 + eps**0.25 * M**0.25 * (1 + M**1.25) * nW)
    elif tag == "combined":
        lhs = (np.sqrt(eps) * nt ** (1 / 3) * (grid.norm(dW) + nt * nW) + nt ** (2 / 3) * nW
               + eps**-0.25 * nt ** (5 / 6) * zW)
        rhs = L ** (1 + eta / 3) * (nR + eps**-0.25 * zR)
    elif tag == "weighted-gradient":
        lhs = np.sqrt(eps) * (grid.norm(dW, weight=w.Z) + nt * zW)
        rhs = (L ** (0.5 + eta / 6) * (nt**-0.5 * zR + nt**0.5 * zW)
               + eps**0.25 * (nW + nW**0.5 * nR**0.5))
    else:
        raise ValueError(f"unknown estimate tag {tag!r}; known: {ESTIMATE_TAGS}")
    return EstimateRatio(tag, float(eps), int(gu.n), float(lhs), float(rhs), float(lhs / rhs) if rhs > 0 else 0.0)


def linear_estimate_ratio(field: ModeStack, F: ModeStack, w: WeightFunction, eta=1.0):
    lhs = x_norm(field, w).total
    rhs, _ = linear_estimate_rhs(F, w, eta=eta)
    return EstimateRatio("linear-X", float(w.eps), 0, lhs, rhs, lhs / rhs if rhs > 0 else 0.0)


def scaling_fit(samples):
    """Least squares of log(value) against log(eps).

    ``growth_slope`` is the slope against log(1/eps), positive when the value
    grows as eps -> 0.
    """
    e, v = np.array(samples, dtype=float).T
    fit = linregress(np.log(e), np.log(v))
    return {"slope": float(fit.slope), "growth_slope": float(-fit.slope),
            "intercept": float(fit.intercept), "r2": float(fit.rvalue**2)}


def vorticity_gradient_check(q: ModeStack, w: WeightFunction, first=0, second=1):
    """||Z^1/2 grad q|| / ||Z^1/2 curl q|| for a divergence-free planar field."""
    g = q.grid
    num = den = 0.0
    for n in q.modes:
        nt = n / q.rho
        a, b = q.mode(n)[first], q.mode(n)[second]
        da, db = g.derivative(a), g.derivative(b)
        num += g.norm(np.array([1j * nt * a, da, 1j * nt * b, db]), weight=w.Z) ** 2
        den += g.norm(da - 1j * nt * b, weight=w.Z) ** 2
    return float(np.sqrt(num / den)) if den > 0 else 0.0
