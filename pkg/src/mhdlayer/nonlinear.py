"""Quadratic mode-coupled sources, the fixed-point map and its iteration.

A perturbation W = (u, v, h, g) is split into q = (u, v) and r = (h, g).
The sources of the nonlinear problem are

    F_U = -q.grad q + r.grad r,    F_H = -q.grad r + r.grad q,

evaluated mode by mode as truncated convolutions over -K..K. For the mean
mode the antiderivatives needed by the zero-mode solve are taken in closed
form from P0(s.grad t) = d_y P0(Q0 s2 Q0 t), valid for divergence-free s
with s2(0) = 0, so no tail quadrature is involved.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import ModeStack, divergence_defect
from .linear import LinearSolver, ModeForcing, Physics, zero_mode_from_antiderivatives
from .norms import forcing_size, nonlinear_estimate_rhs, x_norm
from .profiles import ShearProfile
from .weight import WeightFunction


class NonContractionError(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ForcingSizeWarning(UserWarning):
    """External forcing is larger than the admissible size for the given knobs."""


def convective_term(s, t, dt, rho):
    """(s.grad t) per mode for stacks s, t of shape (2K+1, 2, N); dt = d_y t.

    Direct truncated convolution: out_k = sum_{n+m=k} s1_n (i m~ t_m) + s2_n dt_m.
    """
    M = s.shape[0]
    K = (M - 1) // 2
    mt = np.arange(-K, K + 1) / rho
    # grad t per mode: [(i m~ t1, dy t1), (i m~ t2, dy t2)] contracted with s
    tx = 1j * mt[:, None, None] * t
    out = np.zeros_like(t, dtype=complex)
    for i in range(M):
        n = i - K
        lo, hi = max(0, -n), min(M, M - n)     # m-index range keeping k in -K..K
        if lo >= hi:
            continue
        s1, s2 = s[i, 0], s[i, 1]
        out[lo + n:hi + n] += s1 * tx[lo:hi] + s2 * dt[lo:hi]
    return out


def _split(W: ModeStack):
    g = W.grid
    q, r = W.data[:, 0:2], W.data[:, 2:4]
    return q, r, g.derivative(q), g.derivative(r)


@dataclass(eq=False)
class BilinearSources:
    forcing: ModeStack             # (F_U1, F_U2, F_H1, F_H2) per mode
    mean_momentum: np.ndarray      # I P0 F_U1, closed form
    mean_normal: np.ndarray        # I P0 F_U2, closed form (mean pressure)
    mean_induction: np.ndarray     # d^-1 P0 F_H1, closed form


def _mean_product(a, b, K):
    """P0(Q0 a Q0 b) = sum_{n != 0} a_n b_{-n}."""
    idx = [i for i in range(2 * K + 1) if i != K]
    return sum(a[i] * b[2 * K - i] for i in idx) if idx else np.zeros_like(a[K])


def bilinear_sources(W: ModeStack) -> BilinearSources:
    """Sources of the nonlinear problem for the perturbation W."""
    q, r, dq, dr = _split(W)
    rho, K = W.rho, W.K
    FU = -convective_term(q, q, dq, rho) + convective_term(r, r, dr, rho)
    FH = -convective_term(q, r, dr, rho) + convective_term(r, q, dq, rho)
    out = ModeStack(W.grid, rho, np.concatenate([FU, FH], axis=1))
    mp = lambda a, b: _mean_product(a, b, K)
    return BilinearSources(
        forcing=out,
        mean_momentum=-mp(q[:, 1], q[:, 0]) + mp(r[:, 1], r[:, 0]),
        mean_normal=-mp(q[:, 1], q[:, 1]) + mp(r[:, 1], r[:, 1]),
        mean_induction=-mp(q[:, 1], r[:, 0]) + mp(r[:, 1], q[:, 0]),
    )


def check_source_compatibility(W: ModeStack, S: BilinearSources | None = None):
    """Divergence and wall trace of the magnetic source per mode, and the
    mean-mode projection identity compared against quadrature."""
    g = W.grid
    S = bilinear_sources(W) if S is None else S
    F = S.forcing
    scale = max(float(np.max(np.abs(F.data))), 1e-300)
    wall = float(np.max(np.abs(F.data[:, 3, 0]))) / scale
    div = divergence_defect(F, 2, 3)
    f0 = F.mode(0)
    # d_y of the closed-form antiderivatives should reproduce the mean sources
    ident = {}
    for name, closed, direct in (("momentum", S.mean_momentum, f0[0]),
                                 ("normal", S.mean_normal, f0[1]),
                                 ("induction", S.mean_induction, f0[2])):
        ref = max(float(np.max(np.abs(direct))), 1e-300)
        ident[name] = float(np.max(np.abs(g.derivative(closed) - direct))) / ref
    return {"magnetic_divergence": div, "magnetic_wall_trace": wall,
            "mean_identity": ident, "mean_induction_normal": float(np.max(np.abs(f0[3]))) / scale}


def admissible_forcing_size(eps, alpha=1.0, C=1.0, eta=1.0):
    """delta2 eps^(3/4) / |log eps|^(3+eta) with delta2 = alpha (2 - alpha) / (4 C^2)."""
    delta2 = alpha * (2 - alpha) / (4 * C**2)
    return float(delta2 * eps**0.75 / abs(np.log(eps)) ** (3 + eta))


def contraction_radius(eps, alpha=1.0, C=1.0, eta=1.0):
    return float(alpha * eps**0.5 / (2 * C * abs(np.log(eps)) ** ((3 + eta) / 2)))


class FixedPointMap:
    """W -> linear solve with forcing = bilinear sources(W) + external forcing."""

    def __init__(self, profile: ShearProfile, physics: Physics, F: ModeStack, threads=1):
        self.profile, self.physics, self.F = profile, physics, F
        self.grid = profile.grid
        self.K = F.K
        self.solver = LinearSolver(profile, physics, F.K, threads=threads, residual_tol=np.inf)
        g, f0 = self.grid, F.mode(0)
        # external mean forcing enters through quadrature once
        self._ext_If1 = g.integrate_to_infinity(f0[0])
        self._ext_If2 = g.integrate_to_infinity(f0[1])
        self._ext_Hq1 = g.integrate_from_zero(f0[2])

    def total_forcing(self, W: ModeStack):
        S = bilinear_sources(W)
        return S, S.forcing + self.F

    def zero_mode(self, S: BilinearSources):
        g, ph = self.grid, self.physics
        return zero_mode_from_antiderivatives(S.mean_momentum + self._ext_If1, S.mean_induction + self._ext_Hq1,
                                              g.eps, ph.mu, ph.kappa, g, If20=S.mean_normal + self._ext_If2)

    def apply(self, W: ModeStack):
        S, total = self.total_forcing(W)
        return self.solver.solve(total, zero_mean_forcing=self.zero_mode(S))

    def residuals(self, lf):
        """Discrete residual of W = Phi(W) per retained mode n >= 0, for the
        linear-solve record ``lf`` that produced W."""
        W = lf.field
        S, total = self.total_forcing(W)
        out = {}
        z = self.zero_mode(S).as_array()
        w0 = W.mode(0)
        ref = max(float(np.max(np.abs(z))), float(np.max(np.abs(w0))))
        out[0] = float(np.max(np.abs(w0 - z))) / ref if ref > 0 else 0.0
        for n, sol in lf.solutions.items():
            op = self.solver.operator(n)
            b = op.rhs(ModeForcing.from_array(n, self.physics.rho, total.mode(n)))
            x = np.array([sol.phi, sol.omega, sol.psi, sol.chi])
            out[n] = op.scaled_residual(x, b) if np.any(b) or np.any(x) else 0.0
        return out


@dataclass(eq=False)
class IterationState:
    field: ModeStack
    iteration: int
    x_norms: list
    increments: list
    contraction_ratios: list
    residuals: list
    normal_mean_defect: list
    converged: bool = False
    final_residuals: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return max(self.final_residuals.values()) if self.final_residuals else 0.0

    @property
    def contraction_estimate(self):
        """Largest ratio among steps whose increments sit well above the
        roundoff floor of the linear solves (about 1e-12 relative)."""
        good = [r for k, r in enumerate(self.contraction_ratios)
                if self.increments[k + 1] > 1e-10 * self.x_norms[k + 1]]
        return max(good) if good else 0.0

    def history_rows(self):
        """(iter, x_norm, contraction_ratio, residual) per iterate."""
        rows = []
        for k, xn in enumerate(self.x_norms):
            ratio = self.contraction_ratios[k - 1] if 1 <= k <= len(self.contraction_ratios) else float("nan")
            res = self.residuals[k] if k < len(self.residuals) else float("nan")
            rows.append((k + 1, xn, ratio, res))
        return rows


def fixed_point_solve(F: ModeStack, profile: ShearProfile, physics: Physics, weight: WeightFunction,
                      tol=1e-10, max_iter=50, threads=1, alpha=1.0, C=1.0, eta=1.0):
    """Picard iteration from the zero field.

    Stops when ||W_{k+1} - W_k||_X <= tol ||W_{k+1}||_X. Three consecutive
    contraction ratios >= 1 raise NonContractionError with the state attached.
    """
    eps = profile.eps
    size = forcing_size(F, weight, eps)
    bound = admissible_forcing_size(eps, alpha, C, eta)
    if size > bound:
        warnings.warn(f"forcing size {size:.3e} exceeds the admissible size {bound:.3e}", ForcingSizeWarning,
                      stacklevel=2)
    phi = FixedPointMap(profile, physics, F, threads)
    W = ModeStack.zeros(profile.grid, F.K, F.rho)
    st = IterationState(W, 0, [], [], [], [], [])
    st.meta.update(forcing_size=size, admissible_size=bound, contraction_radius=contraction_radius(eps, alpha, C, eta))
    bad, lf = 0, None
    for k in range(1, max_iter + 1):
        if lf is not None:
            st.residuals.append(max(phi.residuals(lf).values()))
        lf = phi.apply(W)
        Wn = lf.field
        st.normal_mean_defect.append(float(np.max(np.abs(Wn.mode(0)[[1, 3]]))))
        xn = x_norm(Wn, weight, eps).total
        dx = x_norm(Wn - W, weight, eps).total
        st.x_norms.append(xn)
        if st.increments:
            prev = st.increments[-1]
            ratio = dx / prev if prev > 0 else 0.0
            st.contraction_ratios.append(ratio)
            bad = bad + 1 if not ratio < 1 else 0     # nan counts as growth
        st.increments.append(dx)
        W = Wn
        st.field, st.iteration = W, k
        if dx <= tol * xn or xn == 0:
            st.converged = True
            break
        if bad >= 3:
            st.final_residuals = phi.residuals(lf)
            raise NonContractionError(f"no contraction: ratios {st.contraction_ratios[-3:]}", st)
    st.final_residuals = phi.residuals(lf)
    st.residuals.append(max(st.final_residuals.values()))
    st.meta["pressure"] = lf.pressure
    st.meta["conjugate_defect"] = W.conjugate_defect()
    return st


def smallness_parameter(profile: ShearProfile, physics: Physics):
    """rho (Mbar + Mbar^4), the quantity that has to stay below delta1."""
    M = profile.Mbar
    return float(physics.rho * (M + M**4))


def _contracts(F, profile, physics, weight, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ForcingSizeWarning)
        try:
            st = fixed_point_solve(F, profile, physics, weight, **kw)
        except (NonContractionError, FloatingPointError):
            return False
    return bool(st.converged and np.isfinite(st.x_norms[-1]))


def largest_contracting_amplitude(F: ModeStack, profile: ShearProfile, physics: Physics, weight: WeightFunction,
                                  start=1.0, factor=10.0, max_expand=12, steps=8, **kw):
    """Largest multiple s of F for which the iteration still converges.

    Grows s by ``factor`` from ``start`` until the iteration fails, then
    bisects in log s for ``steps`` rounds. Returns the bracket together with
    the forcing sizes it corresponds to.
    """
    eps = profile.eps
    good, bad = 0.0, None
    s = start
    for _ in range(max_expand):
        if _contracts(F * s, profile, physics, weight, **kw):
            good, s = s, s * factor
        else:
            bad = s
            break
    if good == 0.0 and bad is not None:
        # even the starting amplitude fails: shrink instead
        for _ in range(max_expand):
            s /= factor
            if _contracts(F * s, profile, physics, weight, **kw):
                good = s
                break
            bad = s
    if good > 0 and bad is not None:
        for _ in range(steps):
            mid = np.sqrt(good * bad)
            if _contracts(F * mid, profile, physics, weight, **kw):
                good = mid
            else:
                bad = mid
    size = forcing_size(F, weight, eps)
    admissible = admissible_forcing_size(eps, kw.get("alpha", 1.0), kw.get("C", 1.0), kw.get("eta", 1.0))
    return {"largest_scale": float(good), "failing_scale": None if bad is None else float(bad),
            "largest_forcing_size": float(good * size),
            "failing_forcing_size": None if bad is None else float(bad * size),
            "admissible_size": admissible,
            "largest_over_admissible": float(good * size / admissible) if admissible > 0 else float("inf")}


def nonlinear_estimate_ratio(W: ModeStack, F: ModeStack, weight: WeightFunction, eta=1.0):
    """||W||_X over eps^-1/4 |log eps|^((3+eta)/2) (||F|| + eps^-1/4 ||Z^1/2 F||)."""
    rhs = nonlinear_estimate_rhs(F, weight, weight.eps, eta)
    return float(x_norm(W, weight).total / rhs) if rhs > 0 else 0.0
