import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartree_lab.errors import PauliBoundError, ShellError, StructuralError
from hartree_lab.spectral import Grid
from hartree_lab.states import (CoulombKernel, ExpCosine, FactoredObservable, GaussianVelocity, OrbitalSet,
                                exchange_pairing, localized, lowdin, orbital_set_from_gamma, pauli_max,
                                plane_wave, plane_wave_3d, quasifree_marginal, random_slater, slater_marginals)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 5))
def test_random_slater_is_orthonormal_and_pauli(seed, N):
    o = random_slater(Grid(32, np.pi), N, seed=seed, kmax=6)
    assert o.orthonormality_defect() < 1e-12
    g = o.gamma1()
    assert np.isclose(g.trace().real, 1.0, atol=1e-12)
    assert pauli_max(g) <= 1.0 / N + 1e-12


def test_random_slater_is_seeded():
    g = Grid(32, np.pi)
    a, b = random_slater(g, 3, seed=7), random_slater(g, 3, seed=7)
    assert np.array_equal(a.orbitals, b.orbitals)


def test_occupations_validated():
    g = Grid(16, np.pi)
    with pytest.raises(PauliBoundError):
        OrbitalSet(g, np.zeros((1, 16), complex), np.array([1.5]), 1)
    with pytest.raises(StructuralError):
        OrbitalSet(g, np.zeros((2, 16), complex), np.ones(2), 3)


def test_plane_wave_shells():
    o = plane_wave(5)
    assert o.orthonormality_defect() < 1e-12
    with pytest.raises(ShellError):
        plane_wave(2)
    assert plane_wave(2, closed_shell=False).count == 2


def test_localized_lowdin():
    o = localized(8)
    assert o.orthonormality_defect() < 1e-10
    g = Grid(64, np.pi)
    raw = np.array([np.exp(-(g.x - c) ** 2) for c in (-0.3, 0.2, 0.9)], dtype=complex)
    orb = lowdin(raw, g.spacing)
    assert np.allclose(orb.conj() @ orb.T * g.spacing, np.eye(3), atol=1e-12)


def test_two_particle_marginal_traces():
    o = random_slater(Grid(16, np.pi), 3, seed=1, kmax=4)
    g1, g2 = slater_marginals(o)
    n = o.grid.points
    mat = g2.kernel.reshape(n * n, n * n)
    assert np.isclose(np.trace(mat).real * o.grid.spacing ** 2, 1.0, atol=1e-12)
    # partial trace of the pair marginal returns the one-particle marginal
    part = np.einsum("abcb->ac", g2.kernel) * o.grid.spacing
    assert np.allclose(part, g1.kernel, atol=1e-12)


def test_quasifree_rejects_pauli_violation():
    o = random_slater(Grid(16, np.pi), 1, seed=0, kmax=3)
    with pytest.raises(PauliBoundError):
        quasifree_marginal(o.gamma1(), 2, 2)


def test_orbitals_from_gamma_round_trip():
    o = random_slater(Grid(32, np.pi), 3, seed=4, kmax=5)
    back = orbital_set_from_gamma(o.gamma1(), 3)
    assert np.allclose(back.gamma1().kernel, o.gamma1().kernel, atol=1e-12)


def test_shell_3d_counts_and_pairing_signs():
    sh = plane_wave_3d(64)
    assert sh.N >= 19
    obs = FactoredObservable(ExpCosine(1.0), ExpCosine(1.0), GaussianVelocity(1.0))
    small, big = exchange_pairing(plane_wave_3d(128), obs), exchange_pairing(plane_wave_3d(1024), obs)
    assert abs(big) < abs(small)
    assert exchange_pairing(sh, CoulombKernel()) > 0
