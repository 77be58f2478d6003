import numpy as np

from hartree_lab.meanfield import (VlasovState, evolve_meanfield, evolve_vlasov, hartree_energy,
                                   hartree_mu_residual, smooth_phase, trajectory_pauli)
from hartree_lab.nbody import evolve_nbody, nbody_marginal, slater_wavefunction
from hartree_lab.spectral import Grid, Potential
from hartree_lab.states import plane_wave, random_slater

G = Grid(64, np.pi)
POT = Potential.gaussian(1.0, 0.7)


def test_hartree_conserves_trace_energy_pauli():
    o = random_slater(G, 3, seed=0, kmax=5)
    tr = evolve_meanfield(o, "hartree", 0.5, 0.5, 0.005, POT, sample_every=20)
    E = [hartree_energy(s, POT, 0.5) for s in tr.states]
    assert max(E) - min(E) < 1e-6 * abs(E[0])
    assert all(abs(tr.gamma(i).trace().real - 1) < 1e-12 for i in range(len(tr.times)))
    assert trajectory_pauli(tr, 3) < 1e-10


def test_hartree_and_dense_routes_agree():
    o = random_slater(G, 2, seed=1, kmax=4)
    a = evolve_meanfield(o, "hartree", 0.5, 0.2, 0.01, POT, sample_every=20)
    b = evolve_meanfield(o, "hartree_dense", 0.5, 0.2, 0.01, POT, sample_every=20)
    assert np.abs(a.gamma(-1).kernel - b.gamma(-1).kernel).max() * G.spacing < 1e-6


def test_plane_waves_are_stationary_for_hartree():
    o = plane_wave(5, grid=G)
    tr = evolve_meanfield(o, "hartree", 0.2, 0.3, 0.01, POT, sample_every=30)
    assert np.abs(tr.gamma(-1).kernel - tr.gamma(0).kernel).max() < 1e-10


def test_exact_two_body_close_to_hartree_fock_for_short_times():
    o = random_slater(Grid(32, np.pi), 2, seed=3, kmax=3)
    eps, t = 0.5, 0.05
    psi = slater_wavefunction(o, eps)
    nb = evolve_nbody(psi, POT, t, 0.005, sample_every=10)
    hf = evolve_meanfield(o, "hartree_fock", eps, t, 0.005, POT, sample_every=10)
    d = np.abs(nbody_marginal(nb.wavefunction(-1), 1).kernel - hf.gamma(-1).kernel).max()
    assert d < 1e-2


def test_hartree_residual_richardson():
    o = random_slater(G, 2, seed=4, kmax=4)
    r = [hartree_mu_residual(evolve_meanfield(o, "hartree", 0.5, 0.2, h, POT, centres=[0.1]))[0]
         for h in (0.01, 0.005)]
    assert 3.0 < r[0] / r[1] < 5.0


def test_vlasov_conserves_mass_and_free_streams():
    xg, vg = Grid(64, np.pi), Grid(64, 4.0)
    X, V = np.meshgrid(xg.x, vg.x, indexing="ij")
    f0 = np.exp(-X ** 2 / 0.5 - V ** 2 / 0.5)
    st = VlasovState(xg, vg, f0 / (f0.sum() * xg.spacing * vg.spacing), Potential.cosine(0.2, 1.0))
    tr = evolve_vlasov(st, 0.5, 0.01, sample_every=50, interp="spectral", clip=False)
    assert abs(tr.states[-1].mass() - 1) < 1e-10
    free = VlasovState(xg, vg, st.values, Potential.zero())
    ft = evolve_vlasov(free, 0.5, 0.05, sample_every=10, interp="spectral", clip=False).states[-1].values
    exact = np.exp(-(X - 0.5 * V) ** 2 / 0.5 - V ** 2 / 0.5) / (f0.sum() * xg.spacing * vg.spacing)
    assert np.abs(ft - exact).max() < 1e-6 * exact.max()


def test_smooth_phase_preserves_mass():
    xg, vg = Grid(64, np.pi), Grid(64, 4.0)
    X, V = np.meshgrid(xg.x, vg.x, indexing="ij")
    f = np.exp(-X ** 2 - 4 * V ** 2)
    cell = xg.spacing * vg.spacing
    assert np.isclose(smooth_phase(f, xg, vg, 0.5, 0.5).sum() * cell, f.sum() * cell, rtol=1e-8)
