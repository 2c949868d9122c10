import numpy as np
import pytest

from conftest import setup
from mhdlayer.forcing import random_smooth
from mhdlayer.grid import build_grid
from mhdlayer.profiles import build_profile
from mhdlayer.weight import (build_weight, check_weight_bounds, interpolation_check, log_weight_bound_check,
                             weighted_hardy_check)


def test_constant_profile_weight():
    g = build_grid(1e-3, 20, 4000)
    w = build_weight(build_profile("uniform", [1.0], g))
    one = g.y <= 1
    assert np.max(np.abs(w.Z[one] - g.y[one])) < 1e-12
    assert np.all(w.Zpp[one] == 0)
    mask = g.y <= 2
    assert abs(w.Zbar - np.trapezoid(w.Gtilde[mask], g.y[mask])) < 1e-3
    assert check_weight_bounds(w)["all_pass"]


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_unit_flux_and_plateau(eps):
    g, p, w = setup(eps)
    one = g.y <= 1
    assert np.max(np.abs(p.G[one] * w.Zp[one] - 1)) <= 1e-12
    assert w.Z[0] == 0 and np.all(np.diff(w.Z) >= 0)
    i2, i3 = np.searchsorted(g.y, 2.0), np.searchsorted(g.y, 3.0)
    assert w.Z[i2] == w.Z[i3] == w.Zbar


def test_weight_items_and_stable_constant():
    C0 = []
    for eps in (1e-2, 1e-3, 1e-4):
        rep = check_weight_bounds(setup(eps)[2])
        assert rep["all_pass"], [k for k, v in rep["items"].items() if not v["pass"]]
        C0.append(rep["C0"])
    assert (max(C0) - min(C0)) / min(C0) < 0.1


def test_fixed_constant_can_fail():
    w = setup(1e-3)[2]
    assert not check_weight_bounds(w, C0=0.5)["all_pass"]


def test_interpolation():
    g, _, w = setup(1e-3)
    assert interpolation_check(0 * g.y, w) == 0
    assert interpolation_check(np.exp(-g.y), w) <= 1
    rng = np.random.default_rng(0)
    assert max(interpolation_check(random_smooth(g.y, rng, g.eps), w) for _ in range(100)) <= 1


def test_hardy_and_log_weight_zero_and_bump():
    g, _, w = setup(1e-4)
    assert weighted_hardy_check(0 * g.y, w) == 0 and log_weight_bound_check(0 * g.y, w) == 0
    bump = (g.y <= np.sqrt(g.eps)).astype(float)
    for r in (weighted_hardy_check(bump, w), log_weight_bound_check(bump, w)):
        assert np.isfinite(r) and r > 0
