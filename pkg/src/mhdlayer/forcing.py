"""Built-in forcing families and random admissible fields.

Magnetic forcings are generated from a potential theta_n with theta_n(0) = 0,
q = (theta', -i n~ theta), so the compatibility condition holds exactly for
the discrete derivative.
"""
from __future__ import annotations

import numpy as np

from .fields import ModeStack
from .grid import HalfLineGrid


def _compatible(grid, nt, theta):
    return grid.derivative(theta), -1j * nt * theta


def smooth_modes(grid: HalfLineGrid, K, rho=1.0, amplitude=1.0, modes=(1, 2), **_):
    """Fixed eps-independent forcing on a few modes, zero x-mean."""
    F = ModeStack.zeros(grid, K, rho)
    y = grid.y
    for n in modes:
        if n > K:
            continue
        nt = n / rho
        c = amplitude / n**2
        theta = c * (1 + 0.5j) * y**2 * np.exp(-y)
        f1 = c * (1 - 0.3j) * y * np.exp(-y)
        f2 = c * (0.4 + 1j) * np.exp(-y**2 / 2)
        q1, q2 = _compatible(grid, nt, theta)
        F.set_mode(n, np.array([f1, f2, q1, q2]))
    return F


def layer_modes(grid: HalfLineGrid, K, rho=1.0, amplitude=1.0, modes=(1,), **_):
    """Forcing concentrated in the sqrt(eps) layer."""
    F = ModeStack.zeros(grid, K, rho)
    Y = grid.Y
    for n in modes:
        if n > K:
            continue
        nt = n / rho
        theta = amplitude * np.sqrt(grid.eps) * Y**2 * np.exp(-Y)
        f1 = amplitude * (1 + 1j) * Y * np.exp(-Y)
        f2 = amplitude * np.exp(-Y**2)
        q1, q2 = _compatible(grid, nt, theta)
        F.set_mode(n, np.array([f1, f2, q1, q2]))
    return F


def mean_flow(grid: HalfLineGrid, K, rho=1.0, amplitude=1.0, **_):
    """Zero-mode forcing only: f1 = e^-y (1 - y/2) type shear, q1 = y e^-y."""
    F = ModeStack.zeros(grid, K, rho)
    y = grid.y
    F.set_mode(0, amplitude * np.array([np.exp(-y) * (1 - y / 2), 0 * y, y * np.exp(-y), 0 * y], dtype=complex))
    return F


def random_modes(grid: HalfLineGrid, K, rho=1.0, amplitude=1.0, seed=0, **_):
    """Seeded random smooth compatible forcing on all modes 1..K, zero x-mean."""
    rng = np.random.default_rng(seed)
    F = ModeStack.zeros(grid, K, rho)
    for n in range(1, K + 1):
        nt = n / rho
        f1, f2, theta = (random_smooth(grid.y, rng, grid.eps) for _ in range(3))
        theta = theta * grid.y      # vanishes at the wall
        q1, q2 = _compatible(grid, nt, theta)
        F.set_mode(n, amplitude / n**2 * np.array([f1, f2, q1, q2]))
    return F


def zero_forcing(grid, K, rho=1.0, **_):
    return ModeStack.zeros(grid, K, rho)


FORCING_FAMILIES = {
    "smooth-modes": smooth_modes,
    "layer-modes": layer_modes,
    "mean-flow": mean_flow,
    "random": random_modes,
    "none": zero_forcing,
}


def forcing_family(name, grid, K, rho=1.0, amplitude=1.0, seed=0):
    if name not in FORCING_FAMILIES:
        raise ValueError(f"unknown forcing family {name!r}; known: {sorted(FORCING_FAMILIES)}")
    return FORCING_FAMILIES[name](grid, K, rho=rho, amplitude=amplitude, seed=seed)


def random_smooth(y, rng, eps=None, scale="mixed"):
    """Random complex sum of y^a e^{-b y / s} terms.

    scale='fixed' uses s = 1, 'layer' uses s ~ sqrt(eps), 'mixed' picks either.
    """
    out = np.zeros_like(y, dtype=complex)
    for _ in range(int(rng.integers(1, 4))):
        a, b = int(rng.integers(0, 3)), rng.uniform(0.5, 4.0)
        c = rng.normal() + 1j * rng.normal()
        kind = scale if scale != "mixed" else ("fixed" if rng.random() < 0.5 else "layer")
        s = 1.0 if kind == "fixed" or eps is None else np.sqrt(eps) * rng.uniform(0.5, 5.0)
        out += c * (y / s) ** a * np.exp(-b * y / s)
    return out


def random_stream_jet(y, rng, eps=None, scale="mixed", wall_order=1):
    """Random stream function vanishing to order ``wall_order`` at y=0, with
    exact first and second derivatives; terms are c (y/s)^a e^{-b y/s}."""
    f = np.zeros((3,) + y.shape, dtype=complex)
    for _ in range(int(rng.integers(1, 4))):
        a = int(rng.integers(wall_order, wall_order + 3))
        b = rng.uniform(0.5, 4.0)
        c = rng.normal() + 1j * rng.normal()
        kind = scale if scale != "mixed" else ("fixed" if rng.random() < 0.5 else "layer")
        s = 1.0 if kind == "fixed" or eps is None else np.sqrt(eps) * rng.uniform(0.5, 5.0)
        t = y / s
        e = np.exp(-b * t)
        p0 = t**a
        p1 = a * t ** max(a - 1, 0) if a > 0 else 0 * t
        p2 = a * (a - 1) * t ** max(a - 2, 0) if a > 1 else 0 * t
        f[0] += c * p0 * e
        f[1] += c * (p1 - b * p0) * e / s
        f[2] += c * (p2 - 2 * b * p1 + b**2 * p0) * e / s**2
    return f
