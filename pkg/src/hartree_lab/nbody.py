"""Exact N-body propagation in one dimension and the mu-form hierarchy residuals.

``i eps d_t psi = H psi`` with ``H = -(eps^2/2) sum_j Delta_j + lam sum_{j<k} U(x_j - x_k)``
on the torus, ``lam = 1/N`` by default.  The Fourier-side function of the
trajectory is evaluated in the momentum representation

    mu_N(xi, eta) = sum_p psi_hat(p) conj(psi_hat(p - xi)) exp(-i eps sum_j eta_j (p_j - xi_j/2)),

which makes the ``eta`` derivatives and the interaction sum exact; only the
time derivative uses a finite-difference stencil.
"""

from dataclasses import dataclass, field
from itertools import combinations, permutations
from math import factorial, sqrt

import numpy as np

from .errors import ArityError, CapacityError, StencilError, StepSizeError, StructuralError
from .spectral import Grid, Potential
from .states import DensityMatrix, OrbitalSet, momentum_coefficients

MEMORY_BUDGET = 2 ** 22
NORM_DRIFT = 1e-6


@dataclass(frozen=True)
class NBodyWavefunction:
    grid: Grid
    N: int
    epsilon: float
    values: np.ndarray = field(repr=False)   # shape (n,)*N
    coupling: float = None

    def __post_init__(self):
        if self.grid.dim != 1:
            raise StructuralError("N-body propagation is implemented for dim = 1")
        if self.values.shape != (self.grid.points,) * self.N:
            raise StructuralError(f"values shape {self.values.shape} does not match N = {self.N}")
        if self.coupling is None:
            object.__setattr__(self, "coupling", 1.0 / self.N)

    def norm(self) -> float:
        return float(sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.spacing ** self.N))

    def antisymmetry_defect(self) -> float:
        out = 0.0
        for i, j in combinations(range(self.N), 2):
            out = max(out, float(np.abs(self.values + np.swapaxes(self.values, i, j)).max()))
        return out

    def with_values(self, values) -> "NBodyWavefunction":
        return NBodyWavefunction(self.grid, self.N, self.epsilon, values, self.coupling)


def slater_wavefunction(orbs: OrbitalSet, eps: float, coupling: float = None) -> NBodyWavefunction:
    """``det[phi_j(x_i)] / sqrt(N!)`` for unit occupations."""
    N = orbs.particle_count
    if orbs.count != N or not np.allclose(orbs.weights, 1.0):
        raise StructuralError("a Slater determinant needs N orbitals with unit occupations")
    n = orbs.grid.points
    if n ** N > MEMORY_BUDGET:
        raise CapacityError(f"{n}^{N} grid values exceed the budget {MEMORY_BUDGET}")
    letters = "abcdefgh"[:N]
    psi = np.zeros((n,) * N, dtype=complex)
    for perm in permutations(range(N)):
        sign = round(np.linalg.det(np.eye(N)[list(perm)]))
        psi = psi + sign * np.einsum(",".join(letters) + "->" + letters, *[orbs.orbitals[p] for p in perm])
    return NBodyWavefunction(orbs.grid, N, eps, psi / sqrt(factorial(N)), coupling)


def pair_potential(grid: Grid, N: int, pot: Potential, coupling: float) -> np.ndarray:
    """``lam sum_{j<k} U(x_j - x_k)`` on the tensor grid (band-limited periodized U)."""
    n = grid.points
    V = np.zeros((n,) * N)
    if pot.is_zero:
        return V
    P = pot.pair_matrix(grid)
    for j, k in combinations(range(N), 2):
        shp = [1] * N
        shp[j] = n
        shp[k] = n
        V = V + P.reshape(shp)
    return coupling * V


def _kinetic_symbol(grid: Grid, N: int) -> np.ndarray:
    k2 = grid.k_fft ** 2
    out = np.zeros((grid.points,) * N)
    for j in range(N):
        shp = [1] * N
        shp[j] = grid.points
        out = out + k2.reshape(shp)
    return out


@dataclass
class NBodyTrajectory:
    times: np.ndarray
    states: list
    potential: Potential
    dt: float
    template: NBodyWavefunction = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> Grid:
        return self.template.grid

    @property
    def epsilon(self) -> float:
        return self.template.epsilon

    def wavefunction(self, i: int) -> NBodyWavefunction:
        return self.template.with_values(self.states[i])


def evolve_nbody(psi0: NBodyWavefunction, potential: Potential, t_final: float, dt: float,
                 sample_every: int = 1, centres=None, stencil: int = 2, check: bool = True) -> NBodyTrajectory:
    """Strang split-step on the full tensor grid.

    Samples every ``sample_every`` steps, or, when ``centres`` is given, only at
    ``2*stencil + 1`` consecutive steps around each centre time.
    """
    grid, N, eps = psi0.grid, psi0.N, psi0.epsilon
    if grid.points ** N > MEMORY_BUDGET:
        raise CapacityError(f"{grid.points}^{N} grid values exceed the budget {MEMORY_BUDGET}")
    steps = int(round(abs(t_final) / abs(dt)))
    if steps == 0 or abs(steps * abs(dt) - abs(t_final)) > 1e-9 * max(1.0, abs(t_final)):
        raise StepSizeError("t_final must be a positive multiple of dt")
    half_kin = np.exp(-0.25j * eps * dt * _kinetic_symbol(grid, N))
    V = pair_potential(grid, N, potential, psi0.coupling)
    pot_phase = np.exp(-1j * dt * V / eps)
    if centres is None:
        keep = set(range(0, steps + 1, sample_every)) | {steps}
    else:
        keep = set()
        for c in centres:
            s = int(round(c / abs(dt)))
            if s - stencil < 0 or s + stencil > steps:
                raise StencilError(f"centre {c} too close to the ends of the run")
            keep |= set(range(s - stencil, s + stencil + 1))
    n0 = psi0.norm()
    anti0 = psi0.antisymmetry_defect() if check and N > 1 else np.inf
    psi = np.asarray(psi0.values, dtype=complex)
    times, states = [], []
    if 0 in keep:
        times.append(0.0)
        states.append(psi.copy())
    for s in range(1, steps + 1):
        psi = np.fft.ifftn(half_kin * np.fft.fftn(psi))
        psi = pot_phase * psi
        psi = np.fft.ifftn(half_kin * np.fft.fftn(psi))
        if s in keep:
            times.append(s * dt)
            states.append(psi.copy())
    if check:
        last = psi0.with_values(psi)
        drift = abs(last.norm() - n0)
        if drift > NORM_DRIFT * max(1.0, abs(t_final)):
            raise StepSizeError(f"norm drift {drift:.2e} exceeds tolerance")
        if anti0 < 1e-9 and last.antisymmetry_defect() > 1e-9:
            raise StructuralError("antisymmetry lost during propagation")
    return NBodyTrajectory(np.array(times), states, potential, dt, psi0)


def nbody_marginal(psi: NBodyWavefunction, k: int) -> DensityMatrix:
    """Reduced density matrix by contraction over the last ``N - k`` slots."""
    N, n = psi.N, psi.grid.points
    if k > N or k < 1:
        raise ArityError(f"k = {k} not in 1..{N}")
    if k > 2:
        raise CapacityError("grid marginals are produced for k <= 2")
    A = psi.values.reshape(n ** k, n ** (N - k))
    G = (A @ A.conj().T) * psi.grid.spacing ** (N - k)
    nrm = np.sum(np.abs(psi.values) ** 2) * psi.grid.spacing ** N
    return DensityMatrix(psi.grid, k, (G / nrm).reshape((n,) * (2 * k)))


# ---------------------------------------------------------------- mu_N

def momentum_wavefunction(psi: np.ndarray, grid: Grid) -> np.ndarray:
    out = np.asarray(psi, dtype=complex)
    for ax in range(out.ndim):
        out = np.moveaxis(momentum_coefficients(grid, np.moveaxis(out, ax, -1)), -1, ax)
    return out


def _shift_product(ph: np.ndarray, shift) -> np.ndarray:
    """``P(p) = ph(p) conj(ph(p - a))`` with zero outside the band."""
    n = ph.shape[0]
    P = np.zeros_like(ph)
    src, dst = [], []
    for a in shift:
        a = int(a)
        if abs(a) >= n:
            return P
        lo, hi = max(0, a), min(n, n + a)
        dst.append(slice(lo, hi))
        src.append(slice(lo - a, hi - a))
    P[tuple(dst)] = ph[tuple(dst)] * np.conj(ph[tuple(src)])
    return P


def mu_block(ph: np.ndarray, grid: Grid, eps: float, shift, etas, deriv: int = None) -> np.ndarray:
    """``mu_N`` at the lattice shift ``xi = shift * pi/L`` on the product grid ``etas``.

    ``deriv = j`` returns ``d mu/d eta_j`` instead.
    """
    p = grid.k
    P = _shift_product(ph, shift)
    out = P
    for j, (a, eta) in enumerate(zip(shift, etas)):
        mid = p - 0.5 * a * grid.dual_spacing
        E = np.exp(-1j * eps * np.multiply.outer(np.asarray(eta, dtype=float), mid))
        if deriv == j:
            E = E * (-1j * eps * mid)[None, :]
        # contract the leading momentum axis, append the eta axis at the end
        out = np.tensordot(out, E, axes=([0], [1]))
    return out


def time_derivative(samples, h: float):
    """Central difference at the middle sample (3- or 5-point)."""
    m = len(samples)
    if m == 5:
        return (samples[0] - 8 * samples[1] + 8 * samples[3] - samples[4]) / (12 * h)
    if m == 3:
        return (samples[2] - samples[0]) / (2 * h)
    raise StencilError("time derivative needs 3 or 5 equally spaced samples")


def _windows(traj: NBodyTrajectory, stencil: int):
    t = traj.times
    if len(t) < 3:
        raise StencilError("at least 3 samples are needed")
    width = 2 * stencil + 1
    if len(t) < width:
        stencil, width = 1, 3
    out = []
    i = stencil
    while i + stencil < len(t):
        idx = list(range(i - stencil, i + stencil + 1))
        h = np.diff(t[idx])
        if np.allclose(h, h[0], rtol=1e-9, atol=1e-12):
            out.append((idx, float(h[0])))
            i += width
        else:
            i += 1
    if not out:
        raise StencilError("no equally spaced stencil window in the trajectory")
    return out


def _interaction_modes(pot: Potential, grid: Grid, tol: float = 1e-16):
    if pot.is_zero:
        return np.zeros(0, dtype=int), np.zeros(0)
    w = pot.weights(grid)
    m = np.arange(grid.points) - grid.points // 2
    keep = np.abs(w) > tol * np.abs(w).max()
    return m[keep], w[keep]


def default_points(grid: Grid, eps: float, rank: int, span: int = 4, etas=(-1.0, -0.4, 0.0, 0.7)):
    """A small product set of lattice shifts and eta values used by the residual checks."""
    shifts = [s for s in np.ndindex(*(2 * span + 1,) * rank)]
    shifts = [tuple(int(v) - span for v in s) for s in shifts]
    return shifts, [np.asarray(etas, dtype=float)] * rank


def _ph(traj: NBodyTrajectory, i: int) -> np.ndarray:
    if i not in traj._cache:
        traj._cache[i] = momentum_wavefunction(traj.states[i], traj.grid)
    return traj._cache[i]


def hierarchy_residual(traj: NBodyTrajectory, n: int = None, points=None, stencil: int = 2,
                       prefactor: bool = True, scale: float = 1.0):
    """Residual of the mu-form hierarchy for the rank-``n`` marginal (``n = N``: full equation).

    Returns ``(sup, location)`` with ``location = (time, shift, eta)``.  ``prefactor=False``
    drops the ``(1 - n/N)`` factor of the coupling to the next marginal; ``scale``
    multiplies mu at the samples after each stencil centre (injected jump fault;
    the N-body equation is linear, so a constant rescaling would go unseen).
    """
    grid, eps = traj.grid, traj.epsilon
    N = traj.template.N
    lam = traj.template.coupling
    if n is None:
        n = N
    if n < 1 or n > N:
        raise ArityError(f"n = {n} not in 1..{N}")
    if points is None:
        points = default_points(grid, eps, n)
    shifts, etas = points
    etas = [np.asarray(e, dtype=float) for e in etas[:n]] + [np.zeros(1)] * (N - n)
    qs, ws = _interaction_modes(traj.potential, grid)
    dq = grid.dual_spacing
    best = (-1.0, None)
    for idx, h in _windows(traj, stencil):
        mid = idx[len(idx) // 2]
        ph = _ph(traj, mid)
        for shift in shifts:
            full = tuple(shift) + (0,) * (N - n)
            series = [(scale if i > mid else 1.0) * mu_block(_ph(traj, i), grid, eps, full, etas)
                      for i in idx]
            lhs = time_derivative(series, h)
            res = lhs.copy()
            for j in range(n):
                if shift[j] != 0:
                    res -= shift[j] * dq * mu_block(ph, grid, eps, full, etas, deriv=j)
            # pairs inside the marginal
            for j, k in combinations(range(n), 2):
                for q, w in zip(qs, ws):
                    sh = list(full)
                    sh[j] -= q
                    sh[k] += q
                    m = mu_block(ph, grid, eps, sh, etas)
                    s = _pair_sine(etas, j, k, eps * q * dq / 2)
                    res += (2 * lam / eps) * w * s * m
            # coupling to particles outside the marginal
            if n < N:
                coef = (2 * lam / eps) * ((N - n) if prefactor else N)
                for j in range(n):
                    for q, w in zip(qs, ws):
                        sh = list(full)
                        sh[j] -= q
                        sh[n] += q
                        m = mu_block(ph, grid, eps, sh, etas)
                        s = _pair_sine(etas, j, None, eps * q * dq / 2)
                        res += coef * w * s * m
            val = np.abs(res)
            loc = np.unravel_index(int(np.argmax(val)), val.shape)
            if val[loc] > best[0]:
                eta_at = tuple(float(etas[j][loc[j]]) for j in range(n))
                best = (float(val[loc]), (float(traj.times[mid]), tuple(shift), eta_at))
    return best


def _pair_sine(etas, j, k, c):
    """``sin(c (eta_j - eta_k))`` broadcast on the product grid of ``etas`` (``k=None``: ``eta_k = 0``)."""
    shp_j = [1] * len(etas)
    shp_j[j] = etas[j].size
    ej = etas[j].reshape(shp_j)
    if k is None:
        return np.sin(c * ej)
    shp_k = [1] * len(etas)
    shp_k[k] = etas[k].size
    return np.sin(c * (ej - etas[k].reshape(shp_k)))


def wigner_equation_residual(traj: NBodyTrajectory, points=None, stencil: int = 2, scale: float = 1.0):
    """Sup-norm residual of the full-rank mu equation along the trajectory."""
    return hierarchy_residual(traj, traj.template.N, points, stencil, True, scale)


def bbgky_consistency(traj: NBodyTrajectory, n: int, points=None, stencil: int = 2, prefactor: bool = True):
    """Residual of the ``n``-th hierarchy equation from the trajectory's exact marginals."""
    if n >= traj.template.N:
        raise ArityError("bbgky_consistency needs n < N")
    return hierarchy_residual(traj, n, points, stencil, prefactor)


def free_one_body(grid: Grid, values: np.ndarray, eps: float, t: float) -> np.ndarray:
    """Free propagator ``exp(i t eps Delta/2)`` on the last axis."""
    return np.fft.ifft(np.fft.fft(values, axis=-1) * np.exp(-0.5j * eps * grid.k_fft ** 2 * t), axis=-1)
