import numpy as np
import pytest

from hartree_lab.errors import ArityError, StepSizeError
from hartree_lab.nbody import (bbgky_consistency, evolve_nbody, free_one_body, nbody_marginal, slater_wavefunction,
                               wigner_equation_residual)
from hartree_lab.spectral import Grid, Potential
from hartree_lab.states import gaussian_packet, lowdin, OrbitalSet, random_slater, slater_marginals

G = Grid(32, np.pi)
POT = Potential.gaussian(1.0, 0.7)


def _pair(grid):
    orb = np.array([gaussian_packet(grid, -0.8, 1.0, 0.5), gaussian_packet(grid, 0.9, -0.5, 0.6)])
    return OrbitalSet(grid, lowdin(orb, grid.spacing), np.ones(2), 2)


def test_slater_wavefunction_marginals_match_orbitals():
    o = random_slater(G, 3, seed=2, kmax=4)
    psi = slater_wavefunction(o, 0.5)
    assert np.isclose(psi.norm(), 1.0, atol=1e-12)
    assert psi.antisymmetry_defect() < 1e-14
    g1, g2 = slater_marginals(o)
    assert np.allclose(nbody_marginal(psi, 1).kernel, g1.kernel, atol=1e-12)
    assert np.allclose(nbody_marginal(psi, 2).kernel, g2.kernel, atol=1e-12)


def test_free_nbody_equals_orbital_flow():
    o = _pair(G)
    eps, t = 0.5, 0.37
    tr = evolve_nbody(slater_wavefunction(o, eps), Potential.zero(), t, 0.01, sample_every=37)
    moved = o.with_orbitals(free_one_body(G, o.orbitals, eps, t))
    assert np.allclose(tr.states[-1], slater_wavefunction(moved, eps).values, atol=1e-10)


def test_norm_and_antisymmetry_conserved():
    psi = slater_wavefunction(_pair(G), 0.5)
    tr = evolve_nbody(psi, POT, 0.5, 0.01, sample_every=10)
    for i in range(len(tr.times)):
        w = tr.wavefunction(i)
        assert abs(w.norm() - 1) < 1e-12
        assert w.antisymmetry_defect() < 1e-12


def test_residuals_converge_and_detect_faults():
    psi = slater_wavefunction(_pair(Grid(64, np.pi)), 0.5)
    a = evolve_nbody(psi, POT, 0.2, 0.01, centres=[0.1])
    b = evolve_nbody(psi, POT, 0.2, 0.005, centres=[0.1])
    ra, rb = wigner_equation_residual(a)[0], wigner_equation_residual(b)[0]
    assert 3.5 < ra / rb < 4.5
    assert bbgky_consistency(b, 1)[0] < 1e-4
    assert wigner_equation_residual(b, scale=1.01)[0] > 100 * rb
    assert bbgky_consistency(b, 1, prefactor=False)[0] > 100 * bbgky_consistency(b, 1)[0]
    with pytest.raises(ArityError):
        bbgky_consistency(b, 2)
