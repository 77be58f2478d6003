from math import factorial, pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartree_lab import hierarchy as hy
from hartree_lab.errors import ArityError, EnvelopeUndefined
from hartree_lab.nbody import slater_wavefunction
from hartree_lab.spectral import Grid, Potential
from hartree_lab.states import random_slater


def test_closed_form_spot_values():
    assert abs(hy.kappa_t(1.0, 1.0, 0.01) - 0.1836) < 1e-12
    assert abs(hy.time_horizon(1.0) - 0.0172612) < 1e-7
    k2, T = hy.kappa2_scan(1.0)
    assert k2 is not None and 2 * hy.kappa_t(1.0, k2, T) <= 1 / np.e


def test_envelope_undefined_beyond_unit_kappa():
    p = hy.BoundParameters(1.0, 1.0, 1.0, 1.0, 1, 1, 8)
    with pytest.raises(EnvelopeUndefined) as err:
        hy.closed_form_bounds(p)
    assert err.value.partial.K_bound > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 2.0), st.integers(1, 4))
def test_simplex_rule_volume(t, m):
    nodes, w = hy.simplex_rule(t, m, order=4)
    assert np.isclose(w.sum(), t ** m / factorial(m), rtol=1e-12)
    assert np.all(np.diff(np.c_[np.full(len(nodes), t), nodes], axis=1) <= 0)


def test_gaussian_alpha_norm_closed_vs_quadrature():
    O = hy.FourierObservable.gaussian(1, 0.5, 1.0, 2.0)
    for alpha in [(0,), (1,), (3,)]:
        assert np.isclose(hy.alpha_norm(O, alpha, points=96), hy.gaussian_alpha_norm(alpha, 1.0, 2.0), rtol=1e-6)
    assert abs(hy.alpha_norm(hy.FourierObservable.gaussian(1, 0.5, 1.0, 1.0), (0,)) - 4 * pi) < 1e-4


def test_lemma_constants_hold():
    C1, C2 = hy.gaussian_lemma_fit()
    assert C1 == hy.GAUSS_C1 and C2 <= hy.GAUSS_C2
    for alpha in [(0, 0), (6, 6), (3, 0)]:
        assert hy.gaussian_alpha_norm(alpha, 0.5, 0.5) <= hy.lemma_rhs(alpha, 0.5, 0.5, 0.5)


def test_spectrum_factor_and_carriers():
    cos = hy.spectrum(Potential.cosine(1.0, 2.0))
    assert np.allclose(cos.factor([2.0, -2.0, 1.0]), [0.5, 0.5, 0.0])
    assert set(cos.carrier(2).nodes) == {-4.0, -2.0, 0.0, 2.0, 4.0}
    line = hy.spectrum(Potential.gaussian(1.0, 1.0))
    assert np.isclose(line.weights.sum(), 1.0, rtol=1e-8)     # int Uhat = U(0)
    g = Grid(32, np.pi)
    lat = hy.spectrum(Potential.gaussian(1.0, 1.0), g)
    assert lat.kind == "lattice" and np.allclose(lat.carrier(1).weights, g.dual_spacing)


def test_free_potential_kills_B():
    O = hy.FourierObservable.gaussian(1, 0.5, 1.0, 1.0)
    assert hy.apply_B(O, 0.1).is_zero


def test_bound_verification_small_case():
    res = hy.bound_verification(1, 1, Potential.gaussian(1.0, 1.0), samples=3)
    assert res["ok"]
    for s in res["samples"]:
        assert s.K <= s.K_majorant * (1 + 1e-6)
    with pytest.raises(ArityError):
        hy.bound_verification(3, 1, Potential.gaussian(1.0, 1.0))


def test_pairing_equals_direct_trace():
    # <O, mu> for a Gaussian observable is a smoothed phase-space average; at t = 0 the
    # Duhamel truncation is the pairing itself
    g = Grid(32, np.pi)
    psi = slater_wavefunction(random_slater(g, 2, seed=3, kmax=4), 0.5)
    pot = Potential.gaussian(1.0, 0.7)
    fam = hy.NBodyMuFamily(psi, pot, dt=0.001)
    O = hy.FourierObservable.gaussian(1, 0.5, 1.0, 1.0, pot, g, coupling=psi.coupling)
    xa = hy.lattice_axis(g, O.windows[0])
    ea = hy.trapezoid_axis(O.windows[1] + 1, fam.eta_step())
    lhs = hy.pairing(O, fam(1, 0.0), xa, ea)
    r = hy.duhamel_pair(O, fam, 1, 0.0, xa, ea)
    assert abs(lhs - r.value) < 1e-10
    assert abs(lhs.imag) < 1e-10 and lhs.real > 0
