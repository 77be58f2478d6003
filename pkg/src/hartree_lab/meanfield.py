"""Hartree, Hartree-Fock and Vlasov propagation on the one-dimensional torus.

The one-particle density matrix ``omega`` has unit trace and the mean field is
``U * rho`` with ``rho(x) = omega(x, x)``:

    i eps d_t omega = [-(eps^2/2) Delta + U * rho, omega]              (Hartree)
    i eps d_t omega = [-(eps^2/2) Delta + U * rho - X, omega]          (Hartree-Fock)

with the exchange operator ``X(x, z) = U(x - z) omega(x, z)``.  The Vlasov
equation is ``d_t f + v d_x f - d_x(U * rho) d_v f = 0``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, ndimage

from .errors import CapacityError, StencilError, StepSizeError, StructuralError
from .nbody import _windows, time_derivative
from .spectral import Grid, Potential
from .states import DensityMatrix, OrbitalSet, momentum_coefficients, pauli_max
from .transforms import momentum_kernel, mu_points

HF_MAX_POINTS = 256
NORM_DRIFT = 1e-6
CLIP = -1e-12


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    states: list                 # OrbitalSet (hartree) or DensityMatrix (hartree_fock)
    epsilon: float
    potential: Potential
    model: str
    dt: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    def gamma(self, i: int) -> DensityMatrix:
        s = self.states[i]
        return s.gamma1() if isinstance(s, OrbitalSet) else s

    def momentum_kernel(self, i: int) -> np.ndarray:
        """``omega_hat(p, q)`` in centered order."""
        if i not in self._cache:
            s = self.states[i]
            if isinstance(s, OrbitalSet):
                c = momentum_coefficients(s.grid, s.orbitals)
                self._cache[i] = np.einsum("j,jp,jq->pq", s.weights / s.particle_count, c, c.conj())
            else:
                self._cache[i] = momentum_kernel(s)
        return self._cache[i]


def dt_max(eps: float, grid: Grid, potential: Potential, rho: np.ndarray = None) -> float:
    """``min(eps dx^2/pi, 0.1 eps/||U * rho||_inf)``."""
    bound = eps * grid.spacing ** 2 / np.pi
    if rho is not None and not potential.is_zero:
        top = float(np.abs(potential.convolve(rho, grid)).max())
        if top > 0:
            bound = min(bound, 0.1 * eps / top)
    return bound


def _half_kinetic(grid: Grid, eps: float, dt: float) -> np.ndarray:
    return np.exp(-0.25j * eps * dt * grid.k_fft ** 2)


def _steps(t_final: float, dt: float) -> int:
    steps = int(round(abs(t_final) / abs(dt)))
    if steps == 0 or abs(steps * abs(dt) - abs(t_final)) > 1e-9 * max(1.0, abs(t_final)):
        raise StepSizeError("t_final must be a positive multiple of dt")
    return steps


def _keep(steps: int, sample_every: int, centres, dt: float, stencil: int):
    if centres is None:
        return set(range(0, steps + 1, sample_every)) | {steps}
    keep = set()
    for c in centres:
        s = int(round(c / abs(dt)))
        if s - stencil < 0 or s + stencil > steps:
            raise StencilError(f"centre {c} too close to the ends of the run")
        keep |= set(range(s - stencil, s + stencil + 1))
    return keep


def hartree_step(orbitals: np.ndarray, weights: np.ndarray, N: int, grid: Grid, pot: Potential,
                 eps: float, dt: float, half_kin: np.ndarray) -> np.ndarray:
    phi = np.fft.ifft(np.fft.fft(orbitals, axis=1) * half_kin, axis=1)
    if not pot.is_zero:
        rho = np.einsum("j,jx->x", weights, np.abs(phi) ** 2) / N
        phi = phi * np.exp(-1j * dt * pot.convolve(rho, grid) / eps)[None, :]
    return np.fft.ifft(np.fft.fft(phi, axis=1) * half_kin, axis=1)


def _kinetic_matrix(grid: Grid, eps: float) -> np.ndarray:
    n = grid.points
    F = np.fft.fft(np.eye(n), axis=0)
    return (F.conj().T @ (0.5 * eps ** 2 * grid.k_fft[:, None] ** 2 * F)) / n


def hf_hamiltonian(K: np.ndarray, grid: Grid, pot: Potential, T: np.ndarray, exchange: bool = True):
    """Operator matrix of ``h(omega)`` acting on grid samples (``K`` is the kernel)."""
    h = T.copy()
    if not pot.is_zero:
        rho = np.real(np.diag(K))
        h = h + np.diag(pot.convolve(rho, grid))
        if exchange:
            h = h - pot.pair_matrix(grid) * K * grid.spacing
    return 0.5 * (h + h.conj().T)


def _unitary(h: np.ndarray, dt: float, eps: float) -> np.ndarray:
    w, V = linalg.eigh(h)
    return (V * np.exp(-1j * dt * w / eps)) @ V.conj().T


def hf_step(K, grid, pot, eps, dt, T, iterations: int = 3, exchange: bool = True):
    """Implicit-midpoint exponential step ``K -> E K E^*`` with ``E = exp(-i dt h(K_mid)/eps)``."""
    E = _unitary(hf_hamiltonian(K, grid, pot, T, exchange), dt, eps)
    Kn = E @ K @ E.conj().T
    for _ in range(iterations):
        E = _unitary(hf_hamiltonian(0.5 * (K + Kn), grid, pot, T, exchange), dt, eps)
        Kn = E @ K @ E.conj().T
    return Kn


def evolve_meanfield(initial: OrbitalSet, model: str, epsilon: float, t_final: float, dt: float,
                     potential: Potential, sample_every: int = 1, centres=None, stencil: int = 2,
                     check: bool = True) -> MeanFieldTrajectory:
    """Propagate Hartree (orbital Strang splitting) or Hartree-Fock (dense kernel)."""
    grid = initial.grid
    if grid.dim != 1:
        raise StructuralError("mean-field propagation is implemented for dim = 1")
    steps = _steps(t_final, dt)
    keep = _keep(steps, sample_every, centres, dt, stencil)
    times, states = [], []
    if model == "hartree":
        half_kin = _half_kinetic(grid, epsilon, dt)
        phi = np.asarray(initial.orbitals, dtype=complex)
        norms0 = np.sum(np.abs(phi) ** 2, axis=1) * grid.spacing
        if 0 in keep:
            times.append(0.0)
            states.append(initial)
        for s in range(1, steps + 1):
            phi = hartree_step(phi, initial.weights, initial.particle_count, grid, potential, epsilon, dt, half_kin)
            if s in keep:
                times.append(s * dt)
                states.append(initial.with_orbitals(phi))
        if check:
            drift = np.abs(np.sum(np.abs(phi) ** 2, axis=1) * grid.spacing - norms0).max()
            if drift > NORM_DRIFT * max(1.0, abs(t_final)):
                raise StepSizeError(f"orbital norm drift {drift:.2e}")
    elif model in ("hartree_fock", "hartree_dense"):
        if grid.points > HF_MAX_POINTS:
            raise CapacityError(f"dense kernel propagation is capped at {HF_MAX_POINTS} points")
        T = _kinetic_matrix(grid, epsilon)
        K = np.asarray(initial.gamma1().kernel, dtype=complex)
        tr0 = np.real(np.trace(K)) * grid.spacing
        if 0 in keep:
            times.append(0.0)
            states.append(DensityMatrix(grid, 1, K.copy()))
        for s in range(1, steps + 1):
            K = hf_step(K, grid, potential, epsilon, dt, T, exchange=(model == "hartree_fock"))
            if s in keep:
                times.append(s * dt)
                states.append(DensityMatrix(grid, 1, K.copy()))
        if check:
            drift = abs(np.real(np.trace(K)) * grid.spacing - tr0)
            if drift > NORM_DRIFT * max(1.0, abs(t_final)):
                raise StepSizeError(f"trace drift {drift:.2e}")
    else:
        raise StructuralError(f"unknown model {model!r}")
    return MeanFieldTrajectory(np.array(times), states, epsilon, potential, model, dt)


def hartree_energy(state, potential: Potential, epsilon: float) -> float:
    """``(eps^2/2) Tr(-Delta omega) + (1/2) int rho (U * rho)`` for a unit-trace omega."""
    if isinstance(state, OrbitalSet):
        grid = state.grid
        c = momentum_coefficients(grid, state.orbitals)
        occ = np.einsum("j,jp->p", state.weights, np.abs(c) ** 2) / state.particle_count
        rho = state.density()
    elif isinstance(state, DensityMatrix):
        grid = state.grid
        occ = np.real(np.diag(momentum_kernel(state)))
        rho = np.real(state.diagonal())
    else:
        raise StructuralError("hartree_energy expects an OrbitalSet or DensityMatrix")
    kin = 0.5 * epsilon ** 2 * float(np.sum(occ * grid.k ** 2))
    if potential.is_zero:
        return kin
    pot = 0.5 * float(np.sum(rho * potential.convolve(rho, grid)) * grid.spacing)
    return kin + pot


def trajectory_pauli(traj: MeanFieldTrajectory, N: int) -> float:
    """Largest eigenvalue of omega along the trajectory, minus ``1/N``."""
    return max(pauli_max(traj.gamma(i)) for i in range(len(traj.times))) - 1.0 / N


# ---------------------------------------------------------------- Fourier-side residual

def hartree_mu_residual(traj: MeanFieldTrajectory, points=None, stencil: int = 2, scale: float = 1.0):
    """Sup of ``|d_t mu - xi d_eta mu + sum_q w(q) (2/eps) sin(eps q eta/2) mu(xi-q, eta) mu(q, 0)|``.

    ``points = (shifts, etas)`` (lattice shifts ``xi = a pi/L``); ``scale`` multiplies mu
    at the samples after each stencil centre (injected fault).  Returns ``(sup, location)``.
    """
    grid, eps = traj.grid, traj.epsilon
    if points is None:
        points = (list(range(-6, 7)), np.array([-1.0, -0.4, 0.3, 0.8]))
    shifts, etas = points
    etas = np.asarray(etas, dtype=float)
    dq = grid.dual_spacing
    pot = traj.potential
    if pot.is_zero:
        qs, ws = np.zeros(0, dtype=int), np.zeros(0)
    else:
        w = pot.weights(grid)
        m = np.arange(grid.points) - grid.points // 2
        keep = np.abs(w) > 1e-16 * np.abs(w).max()
        qs, ws = m[keep], w[keep]
    best = (-1.0, None)
    for idx, h in _windows(traj, stencil):
        mid = idx[len(idx) // 2]
        gh = traj.momentum_kernel(mid)
        dens = {int(q): mu_points(gh, grid, eps, int(q), 0.0)[0] for q in qs}
        for a in shifts:
            series = [(scale if i > mid else 1.0) * mu_points(traj.momentum_kernel(i), grid, eps, a, etas)
                      for i in idx]
            res = time_derivative(series, h)
            if a != 0:
                res = res - a * dq * mu_points(gh, grid, eps, a, etas, deriv=True)
            for q, w in zip(qs, ws):
                res = res + w * (2 / eps) * np.sin(eps * q * dq * etas / 2) * \
                    mu_points(gh, grid, eps, a - int(q), etas) * dens[int(q)]
            val = np.abs(res)
            j = int(np.argmax(val))
            if val[j] > best[0]:
                best = (float(val[j]), (float(traj.times[mid]), int(a), float(etas[j])))
    return best


# ---------------------------------------------------------------- Vlasov

@dataclass(frozen=True)
class VlasovState:
    xgrid: Grid
    vgrid: Grid
    values: np.ndarray = field(repr=False)     # f[x, v]
    potential: Potential = None

    @property
    def cell(self) -> float:
        return self.xgrid.spacing * self.vgrid.spacing

    def mass(self) -> float:
        return float(self.values.sum() * self.cell)

    def density(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.vgrid.spacing

    def momentum(self) -> float:
        return float(np.sum(self.values * self.vgrid.x[None, :]) * self.cell)

    def l2(self) -> float:
        return float(np.sum(self.values ** 2) * self.cell)

    def energy(self) -> float:
        kin = 0.5 * float(np.sum(self.values * self.vgrid.x[None, :] ** 2) * self.cell)
        if self.potential is None or self.potential.is_zero:
            return kin
        rho = self.density()
        return kin + 0.5 * float(np.sum(rho * self.potential.convolve(rho, self.xgrid)) * self.xgrid.spacing)

    def with_values(self, values) -> "VlasovState":
        return VlasovState(self.xgrid, self.vgrid, values, self.potential)


@dataclass
class VlasovTrajectory:
    times: np.ndarray
    states: list


def force(state: VlasovState) -> np.ndarray:
    """``F = -d_x (U * rho)`` by spectral differentiation."""
    pot, g = state.potential, state.xgrid
    if pot is None or pot.is_zero:
        return np.zeros(g.points)
    mult = pot.multiplier(g.k_fft, g.extent)
    return np.real(np.fft.ifft(-1j * g.k_fft * mult * np.fft.fft(state.density())))


def _shift_x(f: np.ndarray, xg: Grid, disp: np.ndarray, interp: str) -> np.ndarray:
    """``f(x - disp(v), v)`` periodic in x."""
    if interp == "spectral":
        ph = np.exp(-1j * np.outer(xg.k_fft, disp))
        return np.real(np.fft.ifft(np.fft.fft(f, axis=0) * ph, axis=0))
    nx, nv = f.shape
    X, V = np.meshgrid(np.arange(nx, dtype=float), np.arange(nv, dtype=float), indexing="ij")
    X = X - disp[None, :] / xg.spacing
    return ndimage.map_coordinates(f, [X, V], order=3, mode="grid-wrap")


def _shift_v(f: np.ndarray, vg: Grid, disp: np.ndarray, interp: str) -> np.ndarray:
    """``f(x, v - disp(x))`` with zero inflow at the velocity edges."""
    if interp == "spectral":
        n = vg.points
        pad = np.concatenate([f, np.zeros_like(f)], axis=1)
        k = 2 * np.pi * np.fft.fftfreq(2 * n, d=vg.spacing)
        ph = np.exp(-1j * np.outer(disp, k))
        return np.real(np.fft.ifft(np.fft.fft(pad, axis=1) * ph, axis=1))[:, :n]
    nx, nv = f.shape
    X, V = np.meshgrid(np.arange(nx, dtype=float), np.arange(nv, dtype=float), indexing="ij")
    V = V - disp[:, None] / vg.spacing
    return ndimage.map_coordinates(f, [X, V], order=3, mode="constant", cval=0.0)


def _clip(f: np.ndarray, mass: float, cell: float) -> np.ndarray:
    """Zero out negative undershoots and restore the mass by rescaling."""
    g = np.where(f < 0, 0.0, f)
    tot = g.sum() * cell
    return g * (mass / tot) if tot > 0 else g


def evolve_vlasov(initial: VlasovState, t_final: float, dt: float, sample_every: int = 1,
                  interp: str = "cubic", clip: bool = True) -> VlasovTrajectory:
    """Strang semi-Lagrangian: half x-advection, full v-kick, half x-advection."""
    xg, vg = initial.xgrid, initial.vgrid
    f = np.asarray(initial.values, dtype=float)
    if f.min() < CLIP:
        raise StructuralError("initial Vlasov data must be nonnegative")
    vmax = float(np.abs(vg.x).max())
    if dt * vmax > xg.spacing * (1 + 1e-12) and interp == "cubic":
        raise StepSizeError(f"CFL: dt*v_max = {dt * vmax:.3g} exceeds dx = {xg.spacing:.3g}")
    steps = _steps(t_final, dt)
    mass = initial.mass()
    cell = initial.cell
    times, states = [0.0], [initial]
    for s in range(1, steps + 1):
        f = _shift_x(f, xg, 0.5 * dt * vg.x, interp)
        F = force(initial.with_values(f))
        if interp == "cubic" and dt * np.abs(F).max() > vg.spacing * (1 + 1e-12):
            raise StepSizeError(f"CFL: dt*F_max = {dt * np.abs(F).max():.3g} exceeds dv = {vg.spacing:.3g}")
        f = _shift_v(f, vg, dt * F, interp)
        f = _shift_x(f, xg, 0.5 * dt * vg.x, interp)
        if clip:
            f = _clip(f, mass, cell)
        if s % sample_every == 0 or s == steps:
            times.append(s * dt)
            states.append(initial.with_values(f))
    return VlasovTrajectory(np.array(times), states)


def smooth_phase(values: np.ndarray, xg: Grid, vg: Grid, delta1: float, delta2: float) -> np.ndarray:
    """``f *_x G_delta1 *_v G_delta2`` (periodic in x, zero outside the velocity window)."""
    out = np.real(np.fft.ifft(np.fft.fft(values, axis=0) *
                              np.exp(-delta1 ** 2 * xg.k_fft ** 2 / 4)[:, None], axis=0))
    return ndimage.gaussian_filter1d(out, delta2 / np.sqrt(2) / vg.spacing, axis=1, mode="constant",
                                     truncate=8.0)
