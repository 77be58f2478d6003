import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartree_lab.errors import ArityError, ResolutionError, StructuralError
from hartree_lab.spectral import Grid
from hartree_lab.states import random_packets, random_slater, slater_marginals
from hartree_lab.transforms import (coherent_husimi, free_evolve, husimi, inverse_wigner, marginal, mu_direct,
                                    mu_restrict, mu_transform, wigner)

G32 = Grid(32, np.pi)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([0.25, 0.5, 1.0]))
def test_wigner_round_trip_and_mass(seed, eps):
    g1 = random_slater(G32, 2, seed=seed, kmax=5).gamma1()
    W = wigner(g1, eps)
    assert np.isclose(W.integral(), 1.0, atol=1e-10)
    assert W.imag_residue < 1e-10
    assert np.allclose(inverse_wigner(W).kernel, g1.kernel, atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_mu_bound_and_origin(seed):
    g1 = random_slater(G32, 3, seed=seed, kmax=6).gamma1()
    mu = mu_direct(g1, 0.5)
    assert np.abs(mu.values).max() <= 1 + 1e-10
    assert abs(mu.at_origin() - 1) < 1e-10


def test_mu_transform_inverts():
    g1 = random_slater(G32, 2, seed=3, kmax=5).gamma1()
    W = wigner(g1, 0.5)
    back = mu_transform(mu_transform(W), inverse=True)
    assert np.allclose(back.values, W.values, atol=1e-12)
    assert np.allclose(mu_transform(g1, 0.5).values, mu_transform(W).values, atol=1e-10)


def test_marginal_paths_agree():
    g = Grid(16, np.pi)
    _, g2 = slater_marginals(random_slater(g, 2, seed=0, kmax=3))
    W2 = wigner(g2, 0.5)
    a, b = marginal(W2, 1), marginal(W2, 1, path="mu")
    assert np.allclose(a.values, b.values, atol=1e-10)
    with pytest.raises(ArityError):
        marginal(W2, 3)
    with pytest.raises(ArityError):
        mu_restrict(mu_transform(W2), 3)


def test_free_flow_shears_mu():
    # mu_t(xi, eta) = mu_0(xi, eta + t xi) under the free flow
    g1 = random_slater(G32, 2, seed=5, kmax=4).gamma1()
    eps, t = 0.5, 0.3
    m0 = mu_direct(g1, eps)
    ia = int(np.argmin(np.abs(m0.xi - 3 * G32.dual_spacing)))
    eta = m0.eta[40:60]
    lhs = mu_direct(free_evolve(g1, eps, t), eps, eta=eta).values[ia]
    rhs = mu_direct(g1, eps, eta=eta + t * m0.xi[ia]).values[ia]
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_husimi_routes_agree_and_nonnegative():
    g1 = random_packets(Grid(64, np.pi), 3, seed=2).gamma1()
    eps = 0.25
    W = wigner(g1, eps)
    Hc, Hs = husimi(W, 1.0, 1.0, method="coherent"), husimi(W, 1.0, 1.0, method="spectral")
    assert np.abs(Hc.values - Hs.values).max() < 1e-8
    assert Hc.values.min() >= -1e-14
    assert np.isclose(Hc.integral(), 1.0, atol=1e-6)
    with pytest.raises(StructuralError):
        husimi(W, 0.25, 0.25, method="coherent")
    with pytest.raises(ResolutionError):
        husimi(W, 1e-3, 1.0)


def test_coherent_husimi_matches_lattice_route():
    g1 = random_slater(Grid(64, np.pi), 2, seed=1, kmax=5).gamma1()
    eps = 0.25
    d1 = np.sqrt(eps)
    W = wigner(g1, eps)
    H = husimi(W, d1, eps / d1, method="coherent")
    direct = coherent_husimi(g1, eps, d1, H.xgrid.x, H.vgrid.x)
    assert np.allclose(direct, H.values, atol=1e-12)


def test_window_leak_flags_nonlocal_kernels():
    # band-limited random orbitals do not decay inside the torus window; packets do
    g = Grid(64, np.pi)
    assert wigner(random_slater(g, 3, seed=2, kmax=6).gamma1(), 0.25).window_leak > 0.1
    assert wigner(random_packets(g, 3, seed=2).gamma1(), 0.25).window_leak < 1e-2
