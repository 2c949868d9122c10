"""Per-mode linearized solves: quadrature for the mean mode, banded LU for n != 0.

For n != 0 the unknowns are the stream functions phi (velocity) and psi
(magnetic field) together with their Laplacians omega = L phi and
chi = L psi, where L = d_y^2 - n~^2. The momentum equations are curled to
eliminate the pressure; the induction equations are integrated once, which
is exact because of the compatibility condition on q. Per node the rows are

    omega - L phi                                              = 0
    i n~ (U omega - U'' phi) - mu eps L omega - i n~ (H chi - H'' psi) = f1' - i n~ f2
    chi - L psi                                                = 0
    i n~ (U psi - H phi) - kappa eps chi                        = i q2 / n~

with phi = phi' = psi = 0 replacing the first three rows at both ends.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .fields import ModeStack
from .grid import HalfLineGrid
from .profiles import ShearProfile


class LinearSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Physics:
    mu: float = 1.0
    kappa: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.kappa > 0 and self.rho > 0):
            raise ValueError("mu, kappa and rho must be positive")


@dataclass(eq=False)
class ModeForcing:
    n: int
    rho: float
    f1: np.ndarray
    f2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray

    @property
    def nt(self):
        return self.n / self.rho

    def as_array(self):
        return np.array([self.f1, self.f2, self.q1, self.q2], dtype=complex)

    @classmethod
    def from_array(cls, n, rho, a):
        return cls(n, rho, *np.asarray(a, dtype=complex))

    def compatibility(self, grid: HalfLineGrid):
        """Defects of i n~ q1 + q2' = 0 (relative) and q2(0) = 0."""
        div = 1j * self.nt * self.q1 + grid.derivative(self.q2)
        scale = max(np.max(np.abs(self.q1)) * max(abs(self.nt), 1), np.max(np.abs(self.q2)), 1e-300)
        return {"divergence": float(np.max(np.abs(div)) / scale), "q2_at_wall": float(abs(self.q2[0]))}


@dataclass(eq=False)
class ModeSolution:
    n: int
    rho: float
    u: np.ndarray
    v: np.ndarray
    h: np.ndarray
    g: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    omega: np.ndarray     # L phi
    chi: np.ndarray       # L psi
    residuals: dict = field(default_factory=dict)
    verified: bool = True

    @property
    def nt(self):
        return self.n / self.rho

    def as_array(self):
        return np.array([self.u, self.v, self.h, self.g])

    def laplacians(self, grid):
        """(Lu, Lv, Lh, Lg) evaluated from the stored Laplacians of the stream functions."""
        return np.array([grid.derivative(self.omega), -1j * self.nt * self.omega,
                         grid.derivative(self.chi), -1j * self.nt * self.chi])


@dataclass(eq=False)
class ZeroModeSolution:
    u0: np.ndarray
    h0: np.ndarray
    v0: np.ndarray
    g0: np.ndarray
    p0: np.ndarray
    meta: dict = field(default_factory=dict)

    def as_array(self):
        return np.array([self.u0, self.v0, self.h0, self.g0], dtype=complex)


def solve_zero_mode(f10, q10, eps, mu, kappa, grid: HalfLineGrid, f20=None):
    """Mean-flow correction: v0 = g0 = 0 and two explicit quadratures.

    u0 = -(1/(mu eps)) d^-1 I f10,   h0 = -(1/(kappa eps)) I d^-1 q10,
    with d^-1 the running integral from the wall and I f = -int_y^inf f.
    """
    If, info_f = grid.integrate_to_infinity(f10, return_info=True)
    u0 = -grid.integrate_from_zero(If) / (mu * eps)
    Hq = grid.integrate_from_zero(q10)
    IHq, info_q = grid.integrate_to_infinity(Hq, return_info=True)
    h0 = -IHq / (kappa * eps)
    p0 = np.zeros_like(u0) if f20 is None else grid.integrate_to_infinity(f20)
    z = np.zeros_like(u0)
    return ZeroModeSolution(u0=u0, h0=h0, v0=z, g0=z.copy(), p0=p0,
                            meta={"tail_f10": info_f, "tail_antiderivative_q10": info_q})


def zero_mode_from_antiderivatives(If10, Hq10, eps, mu, kappa, grid: HalfLineGrid, If20=None):
    """Mean mode when I f10 and d^-1 q10 are already known (e.g. in closed
    form for quadratic sources)."""
    u0 = -grid.integrate_from_zero(If10) / (mu * eps)
    h0 = -grid.integrate_to_infinity(Hq10, tail_tol=np.inf) / (kappa * eps)
    z = np.zeros_like(u0)
    p0 = z.copy() if If20 is None else np.asarray(If20)
    return ZeroModeSolution(u0=u0, h0=h0, v0=z, g0=z.copy(), p0=p0)


def _to_band(A):
    """Row-equilibrate A and pack it for the LAPACK general band LU."""
    r = 1.0 / np.asarray(abs(A).max(axis=1).todense()).ravel()
    A = (sp.diags(r) @ A).tocoo()
    off = A.col - A.row
    kl, ku = int(-off.min()), int(off.max())
    ab = np.zeros((2 * kl + ku + 1, A.shape[1]), dtype=complex)
    ab[kl + ku + A.row - A.col, A.col] = A.data
    return ab, kl, ku, r, A.tocsr()


class ModeOperator:
    """Assembled and factorized operator for one Fourier mode n != 0."""

    def __init__(self, n, profile: ShearProfile, physics: Physics):
        if n == 0:
            raise ValueError("mode 0 is solved by quadrature; use solve_zero_mode")
        self.n, self.profile, self.physics = int(n), profile, physics
        self.grid = profile.grid
        self.nt = n / physics.rho
        self.matrix = self._assemble()
        ab, self.kl, self.ku, self.row_scale, self.scaled = _to_band(self.matrix)
        lub, piv, info = lapack.zgbtrf(ab, self.kl, self.ku)
        diag = np.abs(lub[self.kl + self.ku])
        if info > 0 or not np.all(np.isfinite(diag)) or diag.min() == 0:
            ratio = float(diag.max() / max(diag.min(), 1e-300))
            raise LinearSolveError(f"singular operator for mode {n} (pivot ratio ~ {ratio:.3e}, info={info})")
        self.pivot_ratio = float(diag.max() / diag.min())
        self._lub, self._piv = lub, piv

    @property
    def bandwidth(self):
        return self.kl, self.ku

    def _assemble(self):
        g, N = self.grid, self.grid.size
        eps, mu, ka, nt = g.eps, self.physics.mu, self.physics.kappa, self.nt
        jy = self.profile.jets_y()
        U, U2, H, H2 = jy["U"][0], jy["U"][2], jy["H"][0], jy["H"][2]
        I = sp.identity(N, format="csr", dtype=complex)
        L = (g.D2 - nt**2 * I).tocsr()
        dg = lambda a: sp.diags(np.asarray(a, dtype=complex))
        Z = sp.csr_matrix((N, N), dtype=complex)
        B = [[-L, I, Z, Z],
             [-1j * nt * dg(U2), 1j * nt * dg(U) - mu * eps * L, 1j * nt * dg(H2), -1j * nt * dg(H)],
             [Z, Z, -L, I],
             [-1j * nt * dg(H), Z, 1j * nt * dg(U), -ka * eps * I]]
        A = sp.bmat(B, format="csr")
        # boundary rows: phi = 0, phi' = 0, psi = 0 at both ends
        keep = np.ones(4 * N)
        ends = np.array([0, N - 1])
        for k in range(3):
            keep[k * N + ends] = 0
        A = sp.diags(keep) @ A
        D1 = g.D1
        bc_r, bc_c, bc_v = [], [], []
        for e in ends:
            bc_r += [e, 2 * N + e]
            bc_c += [e, 2 * N + e]
            bc_v += [1.0, 1.0]
            row = D1.getrow(e)
            bc_r += [N + e] * row.nnz
            bc_c += list(row.indices)
            bc_v += list(row.data)
        A = A + sp.csr_matrix((bc_v, (bc_r, bc_c)), shape=A.shape)
        # interleave (phi, omega, psi, chi) node by node to make the matrix banded
        perm = np.arange(4 * N).reshape(4, N).T.ravel()
        self._perm = perm
        return A[perm][:, perm].tocsr()

    def rhs(self, mf: ModeForcing):
        g, N, nt = self.grid, self.grid.size, self.nt
        b = np.zeros((4, N), dtype=complex)
        b[1] = g.derivative(mf.f1) - 1j * nt * mf.f2
        b[3] = 1j * mf.q2 / nt
        b[:3, [0, N - 1]] = 0
        return b.ravel()[self._perm]

    def _band_solve(self, b):
        x, info = lapack.zgbtrs(self._lub, self.kl, self.ku, self.row_scale * b, self._piv)
        if info != 0:
            raise LinearSolveError(f"band solve failed for mode {self.n} (info={info})")
        return x

    def solve_raw(self, b):
        x = self._band_solve(b)
        x = x + self._band_solve(b - self.matrix @ x)     # one step of iterative refinement
        out = np.empty_like(x)
        out[self._perm] = x
        return out.reshape(4, -1)

    def scaled_residual(self, x, b):
        """|| S (A x - b) || / || S b || with S the row equilibration."""
        xp = x.ravel()[self._perm]
        r = self.row_scale * (self.matrix @ xp - b)
        nb = np.linalg.norm(self.row_scale * b)
        return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))

    def solve(self, mf: ModeForcing, residual_tol=1e-6):
        if mf.n != self.n:
            raise ValueError(f"forcing is for mode {mf.n}, operator for mode {self.n}")
        phi, om, psi, chi = self.solve_raw(self.rhs(mf))
        return recover_fields(self.n, self.physics, self.profile, phi, om, psi, chi, mf, residual_tol)


def recover_fields(n, physics, profile, phi, om, psi, chi, mf, residual_tol=1e-6):
    g = profile.grid
    nt = n / physics.rho
    eps, mu, ka = g.eps, physics.mu, physics.kappa
    jy = profile.jets_y()
    U, U1, H, H1 = jy["U"][0], jy["U"][1], jy["H"][0], jy["H"][1]
    u, v, h, gg = g.derivative(phi), -1j * nt * phi, g.derivative(psi), -1j * nt * psi
    Lu, Lv, Lh, Lg = g.derivative(om), -1j * nt * om, g.derivative(chi), -1j * nt * chi
    # pressure from the normal momentum balance, pinned to zero at y_max
    dp = mf.f2 - (1j * nt * U * v - 1j * nt * H * gg - mu * eps * Lv)
    p = g.integrate_to_infinity(dp, tail_tol=np.inf)
    r = [1j * nt * U * u + v * U1 - 1j * nt * H * h - gg * H1 + 1j * nt * p - mu * eps * Lu - mf.f1,
         1j * nt * U * v - 1j * nt * H * gg + g.derivative(p) - mu * eps * Lv - mf.f2,
         1j * nt * U * h + v * H1 - 1j * nt * H * u - gg * U1 - ka * eps * Lh - mf.q1,
         1j * nt * U * gg - 1j * nt * H * v - ka * eps * Lg - mf.q2]
    src = [mf.f1, mf.f2, mf.q1, mf.q2]
    total = g.norm(np.array(src))
    res = {}
    for name, ri, si in zip(("momentum_x", "momentum_y", "induction_x", "induction_y"), r, src):
        den = g.norm(si)
        den = den if den > 1e-14 * total else total
        res[name] = float(g.norm(ri) / den) if den > 0 else float(g.norm(ri))
    verified = max(res.values()) <= residual_tol
    return ModeSolution(n=n, rho=physics.rho, u=u, v=v, h=h, g=gg, p=p, phi=phi, psi=psi, omega=om, chi=chi,
                        residuals=res, verified=bool(verified))


def assemble_mode_operator(n, profile: ShearProfile, physics: Physics):
    return ModeOperator(n, profile, physics)


def solve_mode(n, mf: ModeForcing, profile: ShearProfile, physics: Physics, residual_tol=1e-6):
    return ModeOperator(n, profile, physics).solve(mf, residual_tol)


@dataclass(eq=False)
class LinearField:
    """Solution over modes -K..K plus the per-mode solve records."""
    field: ModeStack
    pressure: np.ndarray
    zero: ZeroModeSolution
    solutions: dict
    meta: dict = field(default_factory=dict)


class LinearSolver:
    """Caches one factorization per mode, so repeated solves (fixed-point
    iterations) only pay for the triangular solves."""

    def __init__(self, profile: ShearProfile, physics: Physics, K: int, threads=1, residual_tol=1e-6):
        self.profile, self.physics, self.K = profile, physics, int(K)
        self.grid = profile.grid
        self.threads = max(1, int(threads))
        self.residual_tol = residual_tol
        self._ops = {}

    def operator(self, n):
        if n not in self._ops:
            self._ops[n] = ModeOperator(n, self.profile, self.physics)
        return self._ops[n]

    def _map(self, fn, items):
        if self.threads == 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    def solve(self, forcing: ModeStack, zero_mean_forcing=None):
        g, ph = self.grid, self.physics
        if forcing.K != self.K:
            raise ValueError("forcing truncation does not match the solver")
        out = ModeStack.zeros(g, self.K, ph.rho)
        pres = np.zeros((2 * self.K + 1, g.size), dtype=complex)
        f0 = forcing.mode(0)
        if zero_mean_forcing is None:
            zero = solve_zero_mode(f0[0], f0[2], g.eps, ph.mu, ph.kappa, g, f20=f0[1])
        else:
            zero = zero_mean_forcing
        out.set_mode(0, zero.as_array())
        pres[self.K] = zero.p0

        def one(n):
            mf = ModeForcing.from_array(n, ph.rho, forcing.mode(n))
            return self.operator(n).solve(mf, self.residual_tol)

        sols = dict(zip(range(1, self.K + 1), self._map(one, range(1, self.K + 1))))
        for n, s in sols.items():
            out.set_mode(n, s.as_array())       # mode -n is the conjugate
            pres[self.K + n] = s.p
            pres[self.K - n] = np.conj(s.p)
        meta = {"verified": all(s.verified for s in sols.values()),
                "residuals": {n: s.residuals for n, s in sols.items()}}
        return LinearField(field=out, pressure=pres, zero=zero, solutions=sols, meta=meta)


def solve_linear_field(forcing: ModeStack, profile: ShearProfile, physics: Physics, threads=1, residual_tol=1e-6):
    return LinearSolver(profile, physics, forcing.K, threads, residual_tol).solve(forcing)
