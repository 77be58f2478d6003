import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartree_lab.errors import StructuralError, UnsupportedPotential
from hartree_lab.spectral import Field, Grid, Potential, fourier_pair, gaussian_kernel, potential_norms


def test_grid_rejects_odd_points():
    with pytest.raises(StructuralError):
        Grid(31, np.pi)
    with pytest.raises(StructuralError):
        Grid(32, -1.0)


def test_grid_lattices():
    g = Grid(16, 2.0)
    assert g.x[0] == -2.0 and np.isclose(g.x[-1] + g.spacing, 2.0)
    assert np.isclose(g.k[1] - g.k[0], np.pi / 2.0)
    assert g.k[g.points // 2] == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([16, 32, 64]))
def test_fourier_pair_unitary(seed, n):
    g = Grid(n, 3.0)
    rng = np.random.default_rng(seed)
    f = Field(g, 1, rng.normal(size=n) + 1j * rng.normal(size=n), "position")
    F = fourier_pair(f)
    assert np.isclose(F.norm(), f.norm(), rtol=1e-12)
    back = fourier_pair(F, "inverse")
    assert np.allclose(back.values, f.values, atol=1e-12)


def test_plane_wave_lands_on_one_mode():
    g = Grid(32, np.pi)
    f = Field(g, 1, np.exp(3j * g.x) / np.sqrt(2 * np.pi), "position")
    F = fourier_pair(f)
    assert np.argmax(np.abs(F.values)) == np.argmin(np.abs(g.k - 3))


def test_gaussian_kernel_mass():
    g = Grid(128, 8.0)
    assert np.isclose(gaussian_kernel(g, 0.7).integral(), 1.0, atol=1e-10)


def test_potential_fourier_and_convolution():
    g = Grid(64, np.pi)
    pot = Potential.gaussian(1.3, 0.6)
    # U * 1 = int U = 2 pi Uhat(0)
    assert np.allclose(pot.convolve(np.ones(g.points), g), 2 * np.pi * pot.fourier(0.0), atol=1e-12)
    cos = Potential.cosine(0.5, 2.0)
    rho = np.cos(2 * g.x)
    # cos * cos = pi u0 cos on [-pi, pi)
    assert np.allclose(cos.convolve(rho, g), 0.5 * np.pi * np.cos(2 * g.x), atol=1e-12)


def test_moment_norms_closed_and_kappa():
    pot = Potential.gaussian(1.0, 1.0)
    norms, kappa1 = potential_norms(pot, 8)[:2]
    for m, v in enumerate(norms):
        assert np.isclose(v, pot.moment_norm_closed(m), rtol=1e-9)
    from math import factorial
    assert all(norms[m] <= kappa1 ** m * factorial(m) * (1 + 1e-12) for m in range(1, 9))
    with pytest.raises(UnsupportedPotential):
        potential_norms(Potential.coulomb(1.0), 4)


def test_grad_sup():
    pot = Potential.gaussian(2.0, 0.5)
    x = np.linspace(-3, 3, 20001)
    assert np.isclose(np.abs(pot.gradient(x)).max(), pot.grad_sup(), rtol=1e-6)
