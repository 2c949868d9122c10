import numpy as np
import pytest

from conftest import setup
from mhdlayer.fields import ModeStack
from mhdlayer.forcing import random_modes, random_stream_jet
from mhdlayer.grid import build_grid
from mhdlayer.linear import ModeForcing, ModeOperator, Physics
from mhdlayer.manufactured import manufactured_mode
from mhdlayer.norms import (ESTIMATE_TAGS, energy_identity_check, estimate_ratio, scaling_fit,
                            velocity_multiplier_check, vorticity_gradient_check, weighted_multiplier_check,
                            x_norm)
from mhdlayer.profiles import build_profile
from mhdlayer.transform import build_coefficients, to_good_unknowns
from mhdlayer.weight import build_weight


def test_zero_field_norm():
    g, _, w = setup(1e-3)
    rep = x_norm(ModeStack.zeros(g, 3), w)
    assert all(v == 0 for v in rep.to_dict().values())


def test_single_mode_against_hand_quadrature():
    g, _, w = setup(1e-2)
    eps = g.eps
    F = ModeStack.zeros(g, 2)
    e = np.exp(-g.y)
    F.set_mode(1, np.array([e, 0 * e, 0 * e, 0 * e]))
    rep = x_norm(F, w)
    trap = lambda f: np.trapezoid(f, g.y)
    d = g.derivative(e)
    assert abs(rep.sup_sum - 2.0) < 1e-14
    assert abs(rep.oscillating - eps**-0.25 * np.sqrt(2 * np.pi * 2 * trap(e**2))) < 1e-8
    assert abs(rep.oscillating_weighted - eps**-0.5 * np.sqrt(4 * np.pi * trap(w.Z * e**2))) < 1e-8
    assert abs(rep.oscillating_gradient - eps**0.25 * np.sqrt(4 * np.pi * trap(e**2 + d**2))) < 1e-8
    assert rep.mean_gradient == 0 and rep.mean_gradient_weighted == 0
    # and against the exact integrals, up to quadrature error
    assert abs(rep.oscillating - eps**-0.25 * np.sqrt(2 * np.pi)) < 1e-4


def test_norm_axioms():
    g, _, w = setup(1e-3)
    a, b = random_modes(g, 3, seed=1), random_modes(g, 3, seed=2)
    na, nb = x_norm(a, w).total, x_norm(b, w).total
    assert abs(x_norm(2.0 * a, w).total - 2 * na) <= 1e-12 * na
    assert x_norm(a + b, w).total <= na + nb


@pytest.mark.parametrize("physics", [Physics(), Physics(1.5, 2 / 3, 1.3)])
def test_identity_defects_converge(physics):
    defects = []
    for N in (2000, 4000, 8000):
        g = build_grid(1e-2, 12, N)
        p = build_profile("exp-approach", None, g)
        w = build_weight(p)
        _, mf = manufactured_mode(1, p, physics)
        gu = to_good_unknowns(ModeOperator(1, p, physics).solve(mf), p)
        cf = build_coefficients(p, physics.mu, physics.kappa)
        defects.append([energy_identity_check(gu, p, cf, mf)["defect"],
                        velocity_multiplier_check(gu, p, cf, mf)["defect"],
                        weighted_multiplier_check(gu, p, cf, mf, w)["defect"]])
    d = np.array(defects)
    orders = np.log2(d[:-1] / d[1:])
    assert np.all(orders >= 1.5), orders


def test_ratios_symmetric_in_mode_sign():
    g, p, w = setup(1e-3)
    F = random_modes(g, 2, seed=3)
    ph = Physics()
    for tag in ESTIMATE_TAGS[:-1]:
        r = []
        for n in (2, -2):
            mf = ModeForcing.from_array(n, 1.0, F.mode(n))
            gu = to_good_unknowns(ModeOperator(n, p, ph).solve(mf), p)
            r.append(estimate_ratio(tag, gu, p, w, mf).ratio)
        assert abs(r[0] - r[1]) <= 1e-10 * r[0]


def test_unknown_tag():
    g, p, w = setup(1e-3)
    F = random_modes(g, 1, seed=3)
    mf = ModeForcing.from_array(1, 1.0, F.mode(1))
    gu = to_good_unknowns(ModeOperator(1, p, Physics()).solve(mf), p)
    with pytest.raises(ValueError):
        estimate_ratio("nope", gu, p, w, mf)


def test_scaling_fit_recovers_power():
    e = np.array([1e-2, 1e-3, 1e-4])
    fit = scaling_fit(list(zip(e, 3 * e**0.25)))
    assert abs(fit["slope"] - 0.25) < 1e-12 and abs(fit["growth_slope"] + 0.25) < 1e-12
    assert abs(fit["r2"] - 1) < 1e-12


def test_vorticity_gradient_ratio_bounded():
    g, _, w = setup(1e-3)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(30):
        q = ModeStack.zeros(g, 2)
        for n in (1, 2):
            ph = random_stream_jet(g.y, rng, g.eps, "mixed", 1)
            q.set_mode(n, np.array([ph[1], -1j * n * ph[0], 0 * ph[0], 0 * ph[0]]))
        worst = max(worst, vorticity_gradient_check(q, w))
    assert 0 < worst < 2
