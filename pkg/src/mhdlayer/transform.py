"""Good unknowns: the change of variables that removes the large stretching
terms, its inverse, the coefficient fields of the transformed system and the
checks built on them.

Coefficient fields are functions of Y; primes below are Y-derivatives and the
transformed equations are written in y, so eps factors appear explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import HalfLineGrid
from .profiles import ShearProfile


@dataclass(eq=False)
class GoodUnknowns:
    n: int
    rho: float
    uh: np.ndarray
    vh: np.ndarray
    hh: np.ndarray
    gh: np.ndarray
    psih: np.ndarray
    phih: np.ndarray
    omega_u: np.ndarray
    omega_h: np.ndarray

    @property
    def nt(self):
        return self.n / self.rho

    @property
    def Uh(self):
        return np.array([self.uh, self.vh])

    @property
    def Hh(self):
        return np.array([self.hh, self.gh])

    def as_array(self):
        return np.array([self.uh, self.vh, self.hh, self.gh])


@dataclass(frozen=True)
class PrimitiveMode:
    """Bare (u, v, h, g) for a mode, optionally with psi and the stream Laplacians."""
    n: int
    rho: float
    u: np.ndarray
    v: np.ndarray
    h: np.ndarray
    g: np.ndarray
    psi: np.ndarray | None = None
    omega: np.ndarray | None = None
    chi: np.ndarray | None = None

    @property
    def nt(self):
        return self.n / self.rho


def to_good_unknowns(ms, p: ShearProfile):
    """Forward transform of a mode solution (anything with n, rho, u, v, h, g).

    psi is taken from ``ms.psi`` when present, otherwise it is the running
    integral of h from the wall.
    """
    grid = p.grid
    nt = ms.n / ms.rho
    j = p.jets_y()
    a, rH, H = j["a"], j["rH"], j["H"]
    psi = getattr(ms, "psi", None)
    if psi is None:
        psi = grid.integrate_from_zero(ms.h)
    u, v, h, g = ms.u, ms.v, ms.h, ms.g
    uh = u - a[1] * psi - a[0] * h
    vh = v + 1j * nt * a[0] * psi
    psih = psi * rH[0]
    hh = (h - H[1] * rH[0] * psi) * rH[0]
    gh = g * rH[0]
    phih = 1j * vh / nt
    omega, chi = getattr(ms, "omega", None), getattr(ms, "chi", None)
    if omega is not None and chi is not None:
        # L(a psi) and L(psi / H) by the product rule, using the stored L psi
        omega_u = omega - (a[0] * chi + 2 * a[1] * h + a[2] * psi)
        omega_h = rH[0] * chi + 2 * rH[1] * h + rH[2] * psi
    else:
        omega_u = grid.derivative(uh) - 1j * nt * vh
        omega_h = grid.derivative(hh) - 1j * nt * gh
    return GoodUnknowns(ms.n, ms.rho, uh, vh, hh, gh, psih, phih, omega_u, omega_h)


def from_good_unknowns(gu: GoodUnknowns, p: ShearProfile):
    """Inverse transform; returns (u, v, h, g, psi)."""
    nt = gu.nt
    j = p.jets_y()
    a, H = j["a"], j["H"]
    psi = H[0] * gu.psih
    h = H[0] * gu.hh + H[1] * gu.psih
    g = H[0] * gu.gh
    u = gu.uh + a[1] * psi + a[0] * h
    v = gu.vh - 1j * nt * a[0] * psi
    return u, v, h, g, psi


@dataclass(eq=False)
class CoefficientFields:
    """A_U, B_U, C_U, C_H as (2, 2, N) arrays; D_U, D_H as (2, N)."""
    A_U: np.ndarray
    B_U: np.ndarray
    C_U: np.ndarray
    C_H: np.ndarray
    D_U: np.ndarray
    D_H: np.ndarray
    mu: float
    kappa: float
    extras: dict = field(default_factory=dict)


def coefficients_from_jets(U, H, mu, kappa):
    a = U[0] / H[0]
    z = np.zeros_like(U[0])
    A = np.array([[z, (mu - kappa) * U[1]], [z, z]])
    B = np.array([[(kappa - 3 * mu) * U[1] + 2 * mu * a * H[1], z], [z, 2 * mu * (a * H[1] - U[1])]])
    shear = U[0] * H[2] - H[0] * U[2]
    C_U = np.array([[2 * kappa * H[1] * U[1] - 2 * mu * a * H[1]**2 + 3 * mu * shear, z], [z, mu * shear]]) / H[0]
    C_H = kappa / H[0]**2 * np.array([[2 * H[1]**2 - 3 * H[0] * H[2], z], [z, -H[0] * H[2]]])
    D_U = np.array([kappa * U[1] * H[2] - mu * a * H[1] * H[2] + mu * U[0] * H[3] - mu * H[0] * U[3], z]) / H[0]
    D_H = kappa / H[0]**2 * np.array([H[1] * H[2] - H[0] * H[3], z])
    return A, B, C_U, C_H, D_U, D_H


def build_coefficients(p: ShearProfile, mu=1.0, kappa=1.0):
    return CoefficientFields(*coefficients_from_jets(p.U, p.H, mu, kappa), mu=mu, kappa=kappa)


def transformed_source(p: ShearProfile, mf, mu=1.0, kappa=1.0, Iq1=None):
    """(R_U, R_H) built from a mode forcing (f1, f2, q1, q2)."""
    grid = p.grid
    Iq1 = grid.integrate_from_zero(mf.q1) if Iq1 is None else Iq1
    s = 1 / np.sqrt(p.eps)
    a, b, H, U = p.a_p, p.b_p, p.H, p.U
    r = mu / kappa
    RU = np.array([mf.f1 - r * a * mf.q1 + s / H[0] * (r * a * H[1] - U[1]) * Iq1,
                   mf.f2 - r * a * mf.q2])
    RH = np.array([mf.q1 - s * b * Iq1, mf.q2]) / H[0]
    return RU, RH


def _mv(M, x):
    return np.einsum("ijn,jn->in", M, x)


def transformed_operator(gu: GoodUnknowns, p: ShearProfile, cf: CoefficientFields, pressure):
    """Left sides of the two transformed equations, without the sources."""
    grid, eps, nt = p.grid, p.eps, gu.nt
    mu, ka = cf.mu, cf.kappa
    se = np.sqrt(eps)
    Uh, Hh = gu.Uh, gu.Hh
    dH = grid.derivative(Hh)
    LU = np.array([grid.derivative(gu.omega_u), -1j * nt * gu.omega_u])
    LH = np.array([grid.derivative(gu.omega_h), -1j * nt * gu.omega_h])
    G, U0, b = p.G, p.U[0], p.b_p
    E1 = (1j * nt * ((1 + mu / ka) * U0 * Uh - G * Hh + se * _mv(cf.A_U, Hh))
          + se * _mv(cf.B_U, dH) + _mv(cf.C_U, Hh) + gu.psih * cf.D_U / se
          + np.array([1j * nt * pressure, grid.derivative(pressure)]) - mu * eps * LU)
    E2 = (-1j * nt * Uh - 2 * ka * se * b * dH + _mv(cf.C_H, Hh) + gu.psih * cf.D_H / se - ka * eps * LH)
    return E1, E2


def transformed_residual(gu: GoodUnknowns, p: ShearProfile, cf: CoefficientFields, pressure, mf, Iq1=None):
    """Relative residuals of both transformed vector equations."""
    grid = p.grid
    E1, E2 = transformed_operator(gu, p, cf, pressure)
    RU, RH = transformed_source(p, mf, cf.mu, cf.kappa, Iq1)
    out = {}
    for name, E, R in (("velocity", E1, RU), ("magnetic", E2, RH)):
        den = grid.norm(R)
        out[name] = float(grid.norm(E - R) / den) if den > 0 else float(grid.norm(E - R))
    return out


def coefficient_bounds(p: ShearProfile, mu=1.0, kappa=1.0):
    """Measured constants in the O(1) bounds on the coefficient fields.

    Sampled densely in Y. Returns C1 with (1+Y)(|A_U| + |B_U|) <= C1 Mbar and
    C2 with (1+Y)(|C_U| + |C_H|) + (1+Y)^2(|D_U| + |D_H|) <= C2 Mbar (1 + Mbar).
    """
    Y = p.dense_Y()
    U, H = p.evaluate(Y)
    A, B, CU, CH, DU, DH = coefficients_from_jets(np.asarray(U), np.asarray(H), mu, kappa)
    fro = lambda M: np.sqrt(np.sum(np.abs(M)**2, axis=tuple(range(M.ndim - 1))))
    w = 1 + Y
    first = np.max(w * fro(A)) + np.max(w * fro(B))
    second = np.max(w * fro(CU)) + np.max(w * fro(CH)) + np.max(w**2 * fro(DU)) + np.max(w**2 * fro(DH))
    M = p.Mbar
    return {"first": float(first), "second": float(second),
            "C_first": float(first / M) if M > 0 else 0.0,
            "C_second": float(second / (M * (1 + M))) if M > 0 else 0.0}


def source_bound_ratio(p: ShearProfile, weight, mf, mu=1.0, kappa=1.0):
    """(||R|| + eps^-1/4 ||Z^1/2 R||) / ((1+Mbar)(||(f,q)|| + eps^-1/4 ||Z^1/2 (f,q)||))."""
    grid, e4 = p.grid, p.eps ** -0.25
    RU, RH = transformed_source(p, mf, mu, kappa)
    R = np.concatenate([RU, RH])
    F = np.array([mf.f1, mf.f2, mf.q1, mf.q2])
    lhs = grid.norm(R) + e4 * grid.norm(R, weight=weight.Z)
    rhs = (1 + p.Mbar) * (grid.norm(F) + e4 * grid.norm(F, weight=weight.Z))
    return float(lhs / rhs) if rhs > 0 else 0.0


def norm_equivalence_report(ms, gu: GoodUnknowns, weight, eps=None):
    """Both directions of the four norm equivalences between W and its good unknowns."""
    grid: HalfLineGrid = weight.grid
    eps = weight.eps if eps is None else eps
    nt = gu.nt
    W = np.array([ms.u, ms.v, ms.h, ms.g])
    Wh = gu.as_array()
    Z = weight.Z

    def measures(X):
        dX = grid.derivative(X)
        return {
            "L2": grid.norm(X),
            "Linf": grid.norm(X, "Linf"),
            "weighted": grid.norm(X, weight=Z) + eps**0.25 * grid.norm(X),
            "H1_eps": grid.norm(X) + eps**0.5 * grid.norm(dX),
            "weighted_gradient": grid.norm(X) + eps**0.25 * grid.norm(np.concatenate([dX, 1j * nt * X]), weight=Z),
        }

    a, b = measures(W), measures(Wh)
    return {k: {"original_over_good": a[k] / b[k] if b[k] > 0 else 0.0,
                "good_over_original": b[k] / a[k] if a[k] > 0 else 0.0} for k in a}
