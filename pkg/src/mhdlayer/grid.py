"""Half-line grid with a graded boundary layer, finite differences and quadrature."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

LAYER_WIDTH = 10.0   # layer edge sits at LAYER_WIDTH * sqrt(eps)
MIN_LAYER_NODES = 32


class InvalidParameter(ValueError):
    pass


class TailWarning(UserWarning):
    """A field handed to the tail integral has not decayed at y_max."""


def fornberg_weights(x, x0, m):
    """Finite-difference weights on nodes x for derivatives 0..m at x0."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@dataclass(frozen=True, eq=False)
class HalfLineGrid:
    """Nodes on [0, y_max] plus trapezoid weights.

    Everything derived (difference matrices, weights) is cached, so a grid
    can be shared read-only between threads once built.
    """
    nodes: np.ndarray
    eps: float
    layer_fraction: float = 0.5
    stretch: float = 0.0          # 0 means uniform
    meta: dict = field(default_factory=dict)

    @property
    def y(self):
        return self.nodes

    @property
    def size(self):
        return self.nodes.size

    @property
    def y_max(self):
        return float(self.nodes[-1])

    @property
    def Y(self):
        """Fast variable y / sqrt(eps)."""
        return self.nodes / np.sqrt(self.eps)

    @cached_property
    def quadrature_weights(self):
        h = np.diff(self.nodes)
        w = np.zeros(self.size)
        w[1:] += h / 2
        w[:-1] += h / 2
        return w

    @cached_property
    def D1(self):
        return self._difference_matrices()[0]

    @cached_property
    def D2(self):
        return self._difference_matrices()[1]

    def _difference_matrices(self):
        y = self.nodes
        N = y.size
        if N < 4:
            raise InvalidParameter("need at least 4 nodes for one-sided stencils")
        hm = y[1:-1] - y[:-2]
        hp = y[2:] - y[1:-1]
        d1 = np.stack([-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))])
        d2 = np.stack([2 / (hm * (hm + hp)), -2 / (hm * hp), 2 / (hp * (hm + hp))])
        rows = np.repeat(np.arange(1, N - 1), 3)
        cols = (np.arange(1, N - 1)[:, None] + np.arange(-1, 2)[None, :]).ravel()
        r1, c1, v1 = [rows], [cols], [d1.T.ravel()]
        r2, c2, v2 = [rows], [cols], [d2.T.ravel()]
        # second order at the ends: 3 points for the slope, 4 for the curvature
        for i, idx in ((0, np.arange(4)), (N - 1, N - 1 - np.arange(4))):
            w1 = fornberg_weights(y[idx[:3]], y[i], 1)[:, 1]
            w2 = fornberg_weights(y[idx], y[i], 2)[:, 2]
            r1.append(np.full(3, i)); c1.append(idx[:3]); v1.append(w1)
            r2.append(np.full(4, i)); c2.append(idx); v2.append(w2)
        D1 = sp.csr_matrix((np.concatenate(v1), (np.concatenate(r1), np.concatenate(c1))), shape=(N, N))
        D2 = sp.csr_matrix((np.concatenate(v2), (np.concatenate(r2), np.concatenate(c2))), shape=(N, N))
        return D1, D2

    def derivative(self, f, order=1):
        f = np.asarray(f)
        if f.shape[-1] != self.size:
            raise InvalidParameter(f"field length {f.shape[-1]} does not match grid size {self.size}")
        D = self.D1 if order == 1 else self.D2 if order == 2 else None
        if D is None:
            raise InvalidParameter("order must be 1 or 2")
        if f.ndim == 1:
            return D @ f
        return (D @ f.reshape(-1, self.size).T).T.reshape(f.shape)

    def integrate_from_zero(self, f):
        """Running integral from the wall, zero at y=0."""
        return cumulative_trapezoid(np.asarray(f), self.nodes, initial=0, axis=-1)

    def integrate_to_infinity(self, f, tail_tol=1e-8, return_info=False):
        """-int_y^inf f, with the tail past y_max dropped.

        Warns with TailWarning when |f(y_max)| is not small relative to max|f|.
        """
        f = np.asarray(f)
        c = cumulative_trapezoid(f, self.nodes, initial=0, axis=-1)
        out = c - c[..., -1:]
        scale = np.max(np.abs(f)) if f.size else 0.0
        tail = float(np.max(np.abs(f[..., -1]))) if f.size else 0.0
        decayed = scale == 0.0 or not np.isfinite(tail_tol) or tail <= tail_tol * scale
        if not decayed:
            warnings.warn(f"field not decayed at y_max: |f(y_max)|/max|f| = {tail / scale:.2e}",
                          TailWarning, stacklevel=2)
        if return_info:
            return out, {"tail_value": tail, "tail_decayed": bool(decayed)}
        return out

    def integral(self, f):
        return np.sum(self.quadrature_weights * np.asarray(f), axis=-1)

    def norm(self, f, kind="L2", weight=None):
        """Quadrature norm; leading axes are treated as vector components."""
        a2 = np.abs(np.asarray(f)) ** 2
        if a2.ndim > 1:
            a2 = a2.reshape(-1, self.size).sum(axis=0)
        if weight is not None:
            weight = np.asarray(weight, dtype=float)
            if np.any(weight < 0):
                raise InvalidParameter("weight must be nonnegative")
            a2 = weight * a2
        if kind == "L2":
            return float(np.sqrt(self.integral(a2)))
        if kind == "L1":
            return float(self.integral(np.sqrt(a2)))
        if kind == "Linf":
            return float(np.sqrt(a2.max()))
        raise InvalidParameter(f"unknown norm kind {kind!r}")

    def inner(self, a, b, weight=None):
        """<a, b> = int a conj(b), summed over leading components."""
        prod = np.asarray(a) * np.conj(np.asarray(b))
        if prod.ndim > 1:
            prod = prod.reshape(-1, self.size).sum(axis=0)
        if weight is not None:
            prod = weight * prod
        return complex(self.integral(prod))


def _map(s, b, y_max):
    # y_max * (1 - tanh(b(1-s))/tanh(b)), written without cancellation near s=0
    return y_max * np.sinh(b * s) / (np.cosh(b * (1 - s)) * np.sinh(b))


def build_grid(eps, y_max=20.0, node_count=2000, layer_fraction=0.5):
    """Graded grid with layer_fraction of the nodes inside [0, 10 sqrt(eps)]."""
    if not eps > 0 or not y_max > 0:
        raise InvalidParameter("eps and y_max must be positive")
    if node_count < 64:
        raise InvalidParameter("node_count must be at least 64")
    if y_max < 10:
        raise InvalidParameter("y_max must be at least 10")
    if not 0 < layer_fraction < 1:
        raise InvalidParameter("layer_fraction must lie in (0, 1)")
    edge = LAYER_WIDTH * np.sqrt(eps)
    s = np.linspace(0.0, 1.0, int(node_count))
    if edge >= layer_fraction * y_max:
        y, b = y_max * s, 0.0
    else:
        b = brentq(lambda b: _map(layer_fraction, b, y_max) - edge, 1e-10, 300.0, xtol=1e-14)
        y = _map(s, b, y_max)
        y[0], y[-1] = 0.0, y_max
    g = HalfLineGrid(nodes=y, eps=float(eps), layer_fraction=float(layer_fraction), stretch=float(b))
    if np.any(np.diff(y) <= 0):
        raise InvalidParameter("grid nodes are not strictly increasing; lower the grading")
    inside = int(np.count_nonzero(y <= edge * (1 + 1e-12)))
    if inside < MIN_LAYER_NODES:
        raise InvalidParameter(f"only {inside} nodes inside the boundary layer; need {MIN_LAYER_NODES}")
    g.meta["layer_nodes"] = inside
    return g


def uniform_grid(y_max, node_count, eps=1.0):
    """Uniform grid without the layer checks; used for refinement studies."""
    y = np.linspace(0.0, y_max, int(node_count))
    return HalfLineGrid(nodes=y, eps=float(eps), layer_fraction=float("nan"))
