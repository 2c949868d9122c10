"""Background shear profiles (U_s, H_s) of the fast variable Y = y/sqrt(eps)."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .grid import HalfLineGrid, InvalidParameter

DENSE_SAMPLES = 100_000


class AssumptionViolation(ValueError):
    """A structural assumption on the background profile fails."""


# ---- derivative jets: arrays of shape (4, ...) holding f, f', f'', f''' ----

def jet_mul(a, b):
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    for k in range(4):
        out[k] = sum(comb(k, j) * a[j] * b[k - j] for j in range(k + 1))
    return out


def jet_recip(a):
    f0, f1, f2, f3 = a
    r = np.empty_like(a, dtype=float)
    r[0] = 1 / f0
    r[1] = -f1 / f0**2
    r[2] = (2 * f1**2 - f0 * f2) / f0**3
    r[3] = (-6 * f1**3 + 6 * f0 * f1 * f2 - f0**2 * f3) / f0**4
    return r


def _gauss(Y):
    e = np.exp(-Y**2)
    return np.stack([e, -2 * Y * e, (4 * Y**2 - 2) * e, (12 * Y - 8 * Y**3) * e])


def _y_gauss(Y):
    e = np.exp(-Y**2)
    return np.stack([Y * e, (1 - 2 * Y**2) * e, (4 * Y**3 - 6 * Y) * e, (-6 + 24 * Y**2 - 8 * Y**4) * e])


def _const(c, Y):
    out = np.zeros((4,) + np.shape(Y))
    out[0] = c
    return out


def _exp_approach(p):
    U_E, H_E, bump = p
    def ev(Y):
        e = np.exp(-Y)
        U = np.stack([U_E * (1 - e), U_E * e, -U_E * e, U_E * e])
        return U, _const(H_E, Y) + bump * _gauss(Y)
    return ev, U_E, H_E


def _gauss_bump(p):
    U_E, H_E, jet, bump = p
    def ev(Y):
        U = _const(U_E, Y) - U_E * _gauss(Y) + jet * _y_gauss(Y)
        return U, H_E * (_const(1.0, Y) + bump * _gauss(Y))
    return ev, U_E, H_E


def _uniform(p):
    (H_E,) = p
    return (lambda Y: (_const(0.0, Y), _const(H_E, Y))), 0.0, H_E


def _tanh_shear(p):
    U_E, H_E = p
    def ev(Y):
        t = np.tanh(Y)
        s = 1 - t**2
        U = U_E * np.stack([t, s, -2 * t * s, (6 * t**2 - 2) * s])
        return U, _const(H_E, Y)
    return ev, U_E, H_E


# name -> (builder, default params, short description)
FAMILIES = {
    "exp-approach": (_exp_approach, [0.5, 1.0, 0.1],
                     "U = U_E(1 - e^-Y), H = H_E + b e^{-Y^2}; params [U_E, H_E, b]"),
    "gauss-bump": (_gauss_bump, [0.4, 1.0, 0.3, 0.2],
                   "U = U_E(1 - e^{-Y^2}) + j Y e^{-Y^2}, H = H_E(1 + b e^{-Y^2}); params [U_E, H_E, j, b]"),
    "uniform": (_uniform, [1.0], "U = 0, H = H_E; params [H_E]"),
    "tanh-shear": (_tanh_shear, [0.5, 1.0], "U = U_E tanh Y, H = H_E; params [U_E, H_E]"),
}


def read_tabulated(path):
    """Read a profile table.

    The first line is a comment holding the far-field values, e.g.
    ``# U_E=0.5 H_E=1.0``. Data columns are Y, U, H, flags followed by the
    derivative columns U', U'', U''', H', H'', H''' (all in Y).
    """
    with open(path) as fh:
        header = fh.readline()
    if not header.startswith("#"):
        raise InvalidParameter("tabulated profile needs a '# U_E=.. H_E=..' header line")
    far = {}
    for tok in header[1:].split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            far[k.strip()] = float(v)
    if "U_E" not in far or "H_E" not in far:
        raise InvalidParameter("header must give U_E and H_E")
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] < 10:
        raise InvalidParameter("tabulated profile must supply derivative columns "
                               "(Y U H flags dU d2U d3U dH d2H d3H)")
    return data, far["U_E"], far["H_E"]


def _tabulated(data, U_E, H_E):
    Yt = data[:, 0]
    if np.any(np.diff(Yt) <= 0):
        raise InvalidParameter("tabulated Y column must be strictly increasing")
    U = data[:, [1, 4, 5, 6]].T
    H = data[:, [2, 7, 8, 9]].T
    far_U, far_H = [U_E, 0, 0, 0], [H_E, 0, 0, 0]

    def interp(col):
        parts = [CubicHermiteSpline(Yt, col[k], col[k + 1]) for k in range(3)]
        def ev(Y):
            out = np.empty((4,) + np.shape(Y))
            for k in range(3):
                out[k] = parts[k](Y)
            out[3] = np.interp(Y, Yt, col[3])
            return out
        return ev

    eu, eh = interp(U), interp(H)
    def ev(Y):
        Y = np.asarray(Y, dtype=float)
        u, h = eu(Y), eh(Y)
        beyond = Y > Yt[-1]
        for k in range(4):
            u[k][beyond] = far_U[k]
            h[k][beyond] = far_H[k]
        return u, h
    return ev


@dataclass(frozen=True, eq=False)
class ShearProfile:
    """Profile evaluator plus its samples on a grid.

    U and H have shape (4, N): derivatives of order 0..3 in the fast
    variable Y at the grid nodes.
    """
    family: str
    params: tuple
    U_E: float
    H_E: float
    grid: HalfLineGrid
    evaluate: Callable
    U: np.ndarray
    H: np.ndarray
    gamma0: float
    gamma0_at: float
    Mbar: float
    gamma_lo: float
    gamma_hi: float
    extras: dict = field(default_factory=dict)

    @property
    def eps(self):
        return self.grid.eps

    @property
    def G(self):
        return self.H[0]**2 - self.U[0]**2

    @property
    def a_p(self):
        return self.U[0] / self.H[0]

    @property
    def b_p(self):
        return self.H[1] / self.H[0]

    def y_jet(self, jet):
        """Rescale a Y-jet to derivatives in y."""
        scale = self.eps ** (-0.5 * np.arange(4))
        return jet * scale[:, None]

    def jets_y(self):
        """y-derivative jets of U, H, 1/H and a_p = U/H."""
        rH = jet_recip(self.H)
        a = jet_mul(self.U, rH)
        return {k: self.y_jet(v) for k, v in dict(U=self.U, H=self.H, rH=rH, a=a).items()}

    def dense_Y(self):
        return _dense_samples(self.grid)


def _dense_samples(grid):
    top = max(50.0, 5 * grid.y_max / np.sqrt(grid.eps))
    Y = np.linspace(0.0, 50.0, DENSE_SAMPLES)
    if top > 50.0:
        Y = np.concatenate([Y, np.geomspace(50.0, top, 20_000)[1:]])
    return Y


def _structural_constants(ev, grid):
    Y = _dense_samples(grid)
    U, H = ev(Y)
    G = H[0]**2 - U[0]**2
    w = (1 + Y)**3
    Mbar = float(sum(np.max(w * (np.abs(U[k]) + np.abs(H[k]))) for k in (1, 2, 3)))
    i = int(np.argmin(G))
    return dict(gamma0=float(G[i]), gamma0_at=float(Y[i]), Mbar=Mbar,
                gamma_lo=float(np.min(np.abs(H[0]))), gamma_hi=float(np.max(np.abs(H[0]))))


def build_profile(family, params=None, grid=None, path=None):
    if grid is None:
        raise InvalidParameter("a grid is required")
    if family == "user-tabulated":
        if path is None:
            raise InvalidParameter("user-tabulated profile needs a file path")
        data, U_E, H_E = read_tabulated(path)
        ev = _tabulated(data, U_E, H_E)
        params = ()
    else:
        if family not in FAMILIES:
            raise InvalidParameter(f"unknown profile family {family!r}; known: {sorted(FAMILIES)} + user-tabulated")
        builder, default, _ = FAMILIES[family]
        params = tuple(float(x) for x in (default if params is None else params))
        if len(params) != len(default):
            raise InvalidParameter(f"{family} takes {len(default)} params, got {len(params)}")
        ev, U_E, H_E = builder(params)
    U0, H0 = ev(np.zeros(1))
    if abs(U0[0, 0]) > 1e-12 or abs(H0[1, 0]) > 1e-12:
        raise AssumptionViolation(f"(A1) fails: U_s(0) = {U0[0, 0]:.3g}, H_s'(0) = {H0[1, 0]:.3g}")
    U, H = ev(grid.Y)
    consts = _structural_constants(ev, grid)
    return ShearProfile(family=family, params=tuple(params), U_E=float(U_E), H_E=float(H_E), grid=grid,
                        evaluate=ev, U=np.asarray(U, float), H=np.asarray(H, float), **consts)


def profile_from_callable(ev, grid, U_E, H_E, name="custom"):
    """Wrap an arbitrary evaluator Y -> (U jet, H jet)."""
    U0, H0 = ev(np.zeros(1))
    if abs(U0[0, 0]) > 1e-12 or abs(H0[1, 0]) > 1e-12:
        raise AssumptionViolation(f"(A1) fails: U_s(0) = {U0[0, 0]:.3g}, H_s'(0) = {H0[1, 0]:.3g}")
    U, H = ev(grid.Y)
    return ShearProfile(family=name, params=(), U_E=U_E, H_E=H_E, grid=grid, evaluate=ev,
                        U=np.asarray(U, float), H=np.asarray(H, float), **_structural_constants(ev, grid))


@dataclass
class ProfileReport:
    A1: bool
    A2: bool
    A3: bool
    A4: bool
    gamma0: float
    gamma0_at: float
    Mbar: float
    gamma_lo: float
    gamma_hi: float
    details: dict

    @property
    def ok(self):
        return self.A1 and self.A2 and self.A3 and self.A4

    def to_dict(self):
        return dict(A1=self.A1, A2=self.A2, A3=self.A3, A4=self.A4, all_pass=self.ok,
                    gamma0=self.gamma0, gamma0_at_Y=self.gamma0_at, Mbar=self.Mbar,
                    gamma_lo=self.gamma_lo, gamma_hi=self.gamma_hi, details=self.details)


def validate_assumptions(p: ShearProfile) -> ProfileReport:
    Y = p.dense_Y()
    U, H = p.evaluate(Y)
    u0, h1 = float(U[0][0]), float(H[1][0])
    a1 = abs(u0) <= 1e-12 and abs(h1) <= 1e-12
    a2 = p.gamma_lo > 0 and np.isfinite(p.gamma_hi)
    # the (1+Y)^3 weighted derivatives must have decayed by the end of the sample
    w = (1 + Y)**3
    tail = max(float(w[-1] * (abs(U[k][-1]) + abs(H[k][-1]))) for k in (1, 2, 3))
    a3 = bool(np.isfinite(p.Mbar) and tail <= 1e-6 * max(p.Mbar, 1.0))
    a4 = p.gamma0 > 0
    details = {"U_s(0)": u0, "dH_s(0)": h1, "weighted_derivative_tail": tail,
               "G_s_far_field": p.H_E**2 - p.U_E**2, "samples": int(Y.size), "Y_max_sampled": float(Y[-1])}
    return ProfileReport(bool(a1), bool(a2), a3, bool(a4), p.gamma0, p.gamma0_at, p.Mbar,
                         p.gamma_lo, p.gamma_hi, details)
