"""Containers for Fourier-mode stacks of complex fields on a grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import HalfLineGrid


@dataclass(eq=False)
class ModeStack:
    """Modes -K..K of a four-component field, data shape (2K+1, 4, N).

    For a perturbation the components are (u, v, h, g); for a forcing they
    are (f1, f2, q1, q2). Row k of ``data`` holds mode k - K.
    """
    grid: HalfLineGrid
    rho: float
    data: np.ndarray

    @classmethod
    def zeros(cls, grid, K, rho=1.0):
        return cls(grid, float(rho), np.zeros((2 * K + 1, 4, grid.size), dtype=complex))

    @property
    def K(self):
        return (self.data.shape[0] - 1) // 2

    @property
    def modes(self):
        return np.arange(-self.K, self.K + 1)

    def wavenumber(self, n):
        return n / self.rho

    def mode(self, n):
        return self.data[n + self.K]

    def set_mode(self, n, value, conjugate=True):
        self.data[n + self.K] = value
        if conjugate and n != 0:
            self.data[-n + self.K] = np.conj(value)

    def copy(self):
        return ModeStack(self.grid, self.rho, self.data.copy())

    def __add__(self, other):
        return ModeStack(self.grid, self.rho, self.data + other.data)

    def __sub__(self, other):
        return ModeStack(self.grid, self.rho, self.data - other.data)

    def __mul__(self, a):
        return ModeStack(self.grid, self.rho, a * self.data)

    __rmul__ = __mul__

    def conjugate_defect(self):
        """max |W_{-n} - conj(W_n)| relative to max |W|."""
        d = self.data
        scale = np.max(np.abs(d)) if d.size else 0.0
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(d[::-1] - np.conj(d))) / scale)

    def zero_mean_part(self):
        out = self.copy()
        out.data[self.K] = 0
        return out

    def physical(self, x):
        """Evaluate sum_n W_n(y) e^{i n x / rho} at the points x; shape (len(x), 4, N)."""
        ph = np.exp(1j * np.outer(np.asarray(x), self.modes / self.rho))
        return np.einsum("xn,ncj->xcj", ph, self.data)


def divergence_defect(stack: ModeStack, first=0, second=1):
    """max over modes of |i n~ a + d_y b| relative to the field size."""
    g = stack.grid
    worst = 0.0
    for n in stack.modes:
        a, b = stack.mode(n)[first], stack.mode(n)[second]
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
        worst = max(worst, float(np.max(np.abs(1j * stack.wavenumber(n) * a + g.derivative(b))) / scale))
    return worst
