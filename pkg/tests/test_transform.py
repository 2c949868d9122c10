import numpy as np
import pytest

from conftest import setup
from mhdlayer.forcing import random_stream_jet
from mhdlayer.grid import build_grid
from mhdlayer.linear import ModeOperator, Physics
from mhdlayer.manufactured import manufactured_mode
from mhdlayer.profiles import build_profile
from mhdlayer.transform import (PrimitiveMode, build_coefficients, coefficient_bounds, from_good_unknowns,
                                norm_equivalence_report, to_good_unknowns, transformed_operator,
                                transformed_residual, transformed_source)


def random_mode(g, rng, eps):
    n = int(rng.integers(1, 5))
    ph = random_stream_jet(g.y, rng, eps, "mixed", 2)
    ps = random_stream_jet(g.y, rng, eps, "mixed", 1)
    return PrimitiveMode(n, 1.0, ph[1], -1j * n * ph[0], ps[1], -1j * n * ps[0], psi=ps[0])


def test_zero_field():
    g, p, _ = setup(1e-3)
    z = np.zeros(g.size, complex)
    gu = to_good_unknowns(PrimitiveMode(1, 1.0, z, z, z, z), p)
    assert not np.any(gu.as_array())


def test_identity_for_constant_profile():
    g = build_grid(1e-3, 20, 4000)
    p = build_profile("uniform", [1.0], g)
    ms = random_mode(g, np.random.default_rng(2), 1e-3)
    gu = to_good_unknowns(ms, p)
    assert np.array_equal(gu.as_array(), np.array([ms.u, ms.v, ms.h, ms.g]))


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_round_trip(eps):
    g, p, _ = setup(eps)
    rng = np.random.default_rng(7)
    for _ in range(20):
        ms = random_mode(g, rng, eps)
        back = from_good_unknowns(to_good_unknowns(ms, p), p)
        for a, b in zip(back, (ms.u, ms.v, ms.h, ms.g, ms.psi)):
            assert np.max(np.abs(a - b)) <= 1e-12 * max(np.max(np.abs(b)), 1e-300)


def test_good_unknowns_divergence_free_and_traces():
    g, p, _ = setup(1e-3)
    exact, mf = manufactured_mode(2, p, Physics())
    sol = ModeOperator(2, p, Physics()).solve(mf)
    gu = to_good_unknowns(sol, p)
    nt = gu.nt
    for a, b in ((gu.uh, gu.vh), (gu.hh, gu.gh)):
        div = 1j * nt * a + g.derivative(b)
        assert np.max(np.abs(div)) < 1e-4 * np.max(np.abs(a))
    assert abs(gu.uh[0]) < 1e-12 and abs(gu.vh[0]) < 1e-12 and abs(gu.gh[0]) < 1e-12


def test_transformed_residual_on_manufactured_solution():
    g = build_grid(1e-3, 12, 8000)
    p = build_profile("exp-approach", None, g)
    _, mf = manufactured_mode(1, p, Physics())
    sol = ModeOperator(1, p, Physics()).solve(mf)
    cf = build_coefficients(p)
    res = transformed_residual(to_good_unknowns(sol, p), p, cf, sol.p, mf)
    assert max(res.values()) < 1e-5


def test_zero_solution_zero_residual():
    g, p, _ = setup(1e-2)
    z = np.zeros(g.size, complex)
    from mhdlayer.linear import ModeForcing
    gu = to_good_unknowns(PrimitiveMode(1, 1.0, z, z, z, z), p)
    res = transformed_residual(gu, p, build_coefficients(p), z, ModeForcing(1, 1.0, z, z, z, z))
    assert res == {"velocity": 0.0, "magnetic": 0.0}


def test_constant_profile_matches_primitive_equations():
    g = build_grid(1e-2, 12, 4000)
    p = build_profile("uniform", [1.0], g)
    ph = Physics()
    _, mf = manufactured_mode(2, p, ph)
    s = ModeOperator(2, p, ph).solve(mf)
    E1, E2 = transformed_operator(to_good_unknowns(s, p), p, build_coefficients(p), s.p)
    RU, RH = transformed_source(p, mf)
    nt, eps = s.nt, g.eps
    Lu, Lv, Lh, Lg = s.laplacians(g)
    prim_U = np.array([-1j * nt * s.h + 1j * nt * s.p - eps * Lu - mf.f1,
                       -1j * nt * s.g + g.derivative(s.p) - eps * Lv - mf.f2])
    prim_H = np.array([-1j * nt * s.u - eps * Lh - mf.q1, -1j * nt * s.v - eps * Lg - mf.q2])
    scale = g.norm(np.concatenate([RU, RH]))
    assert g.norm((E1 - RU) - prim_U) <= 1e-12 * scale
    assert g.norm((E2 - RH) - prim_H) <= 1e-12 * scale


def test_coefficient_bounds_one_constant():
    consts = [coefficient_bounds(setup(e)[1]) for e in (1e-2, 1e-3, 1e-4)]
    C1 = max(c["C_first"] for c in consts)
    C2 = max(c["C_second"] for c in consts)
    for e, c in zip((1e-2, 1e-3, 1e-4), consts):
        M = setup(e)[1].Mbar
        assert c["first"] <= C1 * M and c["second"] <= C2 * M * (1 + M)
    assert max(c["C_first"] for c in consts) <= 1.01 * min(c["C_first"] for c in consts)


def test_norm_equivalence_bounded():
    for eps in (1e-2, 1e-4):
        g, p, w = setup(eps)
        rng = np.random.default_rng(11)
        for _ in range(20):
            ms = random_mode(g, rng, eps)
            rep = norm_equivalence_report(ms, to_good_unknowns(ms, p), w)
            for v in rep.values():
                assert 0.5 <= v["original_over_good"] <= 2 and 0.5 <= v["good_over_original"] <= 2
