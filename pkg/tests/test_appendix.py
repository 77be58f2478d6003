import numpy as np
import pytest

from hartree_lab import appendix as ap
from hartree_lab.errors import DomainError, PreconditionError, StructuralError, WindowError
from hartree_lab.spectral import Grid, Potential
from hartree_lab.states import OrbitalSet, gaussian_packet, localized, plane_wave, random_slater


def test_pair_statistics_routes_agree():
    o = random_slater(Grid(32, np.pi), 2, seed=1, kmax=4)
    a = ap.pair_statistics_orbitals(o)
    b = ap.pair_statistics(ap.scaled_wavefunction(o, 0.3))
    assert abs(a.u - b.u) < 1e-10 and abs(a.v - b.v) < 1e-10


def test_two_mode_and_product_gaps():
    st = ap.pair_statistics_orbitals(plane_wave(2, closed_shell=False))
    assert np.isclose(st.v ** 2, ap.two_mode_gap(0.0, 1.0), atol=1e-12)
    g = Grid(64, 8.0)
    phi = gaussian_packet(g, 0.0, 0.0, 0.7)
    prod = ap.pair_statistics_product(g, phi)
    # independent copies: <(p1 - p2)^2> = 2 Var p
    c = np.fft.fft(phi)
    k = g.k_fft
    pr = np.abs(c) ** 2 / np.sum(np.abs(c) ** 2)
    var = np.sum(pr * k ** 2) - np.sum(pr * k) ** 2
    assert np.isclose(prod.v ** 2, 2 * var, rtol=1e-10)


def test_momentum_gap_exponent_and_precondition():
    res = ap.momentum_gap_scaling(localized, [4, 8, 16, 32])
    assert res["ok"] and abs(res["exponent"] - 2.0) < 0.15
    with pytest.raises(PreconditionError):
        ap.momentum_gap_scaling(localized, [4, 8], K=1e-6)


def test_lt_gaussian_closed_form_and_constant():
    g = Grid(256, 20.0)
    for s in (0.5, 1.0):
        o = OrbitalSet(g, gaussian_packet(g, 0, 0, s)[None, :], np.ones(1), 1)
        r = ap.lt_momentum_check(o)
        lhs, rhs = ap.lt_gaussian_closed(s)
        assert np.isclose(r.lhs, lhs, rtol=1e-6) and np.isclose(r.rhs, rhs, rtol=1e-6)
        assert r.ok and r.ratio <= ap.LT_CONSTANT


def test_husimi_tail_guards():
    o = plane_wave(8, closed_shell=False)
    r = ap.husimi_tail_check(o, 0.1, 2.0)
    assert r.ok and r.lhs <= r.rhs
    with pytest.raises(WindowError):
        ap.husimi_tail_check(o, 0.1, 1e3)
    with pytest.raises(DomainError):
        ap.husimi_tail_check(o, 0.1, 2.0, O=lambda x, v: np.ones_like(x))


def test_displacement_free_closed_form():
    g = Grid(128, 12.0)
    o = ap.hermite_pair(g, 1.0)
    alpha = 0.3
    res = ap.displacement_band_check(alpha, Potential.zero(), o, t_final=0.1, dt=0.001, sample_every=20)
    assert res["ok"]
    for t, u, v, _, _ in res["rows"]:
        assert np.isclose(u ** 2, res["u0"] ** 2 + 4 * alpha ** 2 * res["v0"] ** 2 * t ** 2, rtol=1e-8)
        assert np.isclose(v, res["v0"], rtol=1e-10)


def test_displacement_window_guard():
    g = Grid(64, 12.0)
    o = ap.hermite_pair(g, 1.0)
    with pytest.raises(WindowError):
        ap.displacement_band_check(0.1, Potential.gaussian(1.0, 0.7), o, t_final=10.0)
    with pytest.raises(StructuralError):
        ap.pair_statistics_orbitals(OrbitalSet(g, o.orbitals, np.array([0.5, 0.5]), 1))
