"""Checks of the kinetic, momentum-gap and displacement estimates in one dimension.

Exponents are written for general ``d`` and evaluated at ``d = 1``: the
Fourier-space Lieb-Thirring functional is ``int rho(v)^{1 + 2/d} dv``, the pair
momentum gap grows like ``N^{2/d}`` and ``eps = N^{-1/d}``.

The displacement checks use ``H = -alpha Delta + (1/N) sum_{i<j} U(x_i - x_j)``
with ``i d_t Psi = H Psi``.  This is the N-body propagator of :mod:`nbody` with
``eps = 2 alpha`` and pair coupling ``2 alpha / N``.
"""

from dataclasses import dataclass
from math import pi, sqrt

import numpy as np

from .errors import DomainError, PreconditionError, StructuralError, WindowError
from .fitting import fit_power_law
from .nbody import NBodyWavefunction, evolve_nbody, slater_wavefunction
from .spectral import Grid, Potential
from .states import OrbitalSet, lowdin, momentum_coefficients
from .transforms import husimi, wigner

DIM = 1
# largest int rho^3 / <sum x^2> seen on the calibration set (localized family
# N = 4..64, single Gaussian, seeded random Slater states), rounded up
LT_CONSTANT = 0.40
HUSIMI_SPREAD = DIM / 2      # int u^2 G(v - u) du = v^2 + c nu for the unit-mass Gaussian G


@dataclass(frozen=True)
class PairStatistics:
    u: float
    v: float
    time: float = 0.0


# ---------------------------------------------------------------- pair statistics

def _one_body(orbs: OrbitalSet):
    """Matrices ``<phi_i|a|phi_j>`` and diagonals ``<phi_i|a^2|phi_i>`` for a = x, p."""
    g = orbs.grid
    f = orbs.orbitals
    x = g.x
    X = (f.conj() * x) @ f.T * g.spacing
    X2 = np.real(np.sum(np.abs(f) ** 2 * x ** 2, axis=1) * g.spacing)
    c = momentum_coefficients(g, f)
    k = g.k
    P = (c.conj() * k) @ c.T
    P2 = np.real(np.sum(np.abs(c) ** 2 * k ** 2, axis=1))
    return X, X2, P, P2


def _pair_moment(A: np.ndarray, A2: np.ndarray, N: int) -> float:
    """``Tr gamma^(2) (a_1 - a_2)^2`` for a Slater state (unit occupations)."""
    one = np.sum(A2) / N
    two = (np.real(np.trace(A)) ** 2 - np.sum(np.abs(A) ** 2)) / (N * (N - 1))
    return float(2 * one - 2 * two)


def pair_statistics_orbitals(orbs: OrbitalSet, time: float = 0.0) -> PairStatistics:
    """Orbital-sum route for Slater states."""
    N = orbs.particle_count
    if N < 2 or orbs.count != N or not np.allclose(orbs.weights, 1.0):
        raise StructuralError("pair statistics need a Slater state with N >= 2")
    X, X2, P, P2 = _one_body(orbs)
    return PairStatistics(sqrt(max(_pair_moment(X, X2, N), 0.0)), sqrt(max(_pair_moment(P, P2, N), 0.0)), time)


def pair_statistics_product(grid: Grid, phi: np.ndarray, time: float = 0.0) -> PairStatistics:
    """Bosonic product state ``phi^{(x)N}``: ``Tr (a_1 - a_2)^2 = 2 Var(a)``."""
    orbs = OrbitalSet(grid, np.asarray(phi, dtype=complex)[None, :], np.ones(1), 1, {})
    X, X2, P, P2 = _one_body(orbs)
    var_x = X2[0] - np.real(X[0, 0]) ** 2
    var_p = P2[0] - np.real(P[0, 0]) ** 2
    return PairStatistics(sqrt(2 * max(var_x, 0.0)), sqrt(2 * max(var_p, 0.0)), time)


def pair_statistics(psi: NBodyWavefunction, time: float = 0.0) -> PairStatistics:
    """Operator-trace route on the full N-body wavefunction (slots 1 and 2)."""
    if psi.N < 2:
        raise StructuralError("pair statistics need N >= 2")
    g = psi.grid
    dens = np.abs(psi.values) ** 2
    cell = g.spacing ** psi.N
    shape = (g.points,) * 2 + (1,) * (psi.N - 2)
    x = g.x
    dx2 = ((x[:, None] - x[None, :]) ** 2).reshape(shape)
    u2 = float(np.sum(dens * dx2) * cell / (np.sum(dens) * cell))
    c = psi.values
    for ax in range(psi.N):
        c = np.moveaxis(momentum_coefficients(g, np.moveaxis(c, ax, -1)), -1, ax)
    mom = np.abs(c) ** 2
    k = g.k
    dk2 = ((k[:, None] - k[None, :]) ** 2).reshape(shape)
    v2 = float(np.sum(mom * dk2) / np.sum(mom))
    return PairStatistics(sqrt(u2), sqrt(v2), time)


# ---------------------------------------------------------------- momentum gap

def momentum_gap_scaling(family, Ns, K: float = None, exclude: int = 0):
    """Fit ``v_0^2 = Tr gamma (p_1 - p_2)^2`` against ``N`` over a Slater family.

    ``family(N)`` returns an :class:`OrbitalSet`.  The centre-of-mass condition is
    checked through ``(N-1)/N Tr gamma (x_1 - x_2)^2 <= K``.
    """
    rows = []
    for N in Ns:
        orbs = family(N)
        st = pair_statistics_orbitals(orbs)
        cm = (N - 1) / N * st.u ** 2
        if K is not None and cm > K:
            raise PreconditionError(f"centre-of-mass spread {cm:.3g} exceeds K = {K:g} at N = {N}")
        rows.append((N, st.v ** 2, st.u ** 2))
    Ns_fit = [r[0] for r in rows][exclude:]
    v2_fit = [r[1] for r in rows][exclude:]
    fit = fit_power_law(Ns_fit, v2_fit)
    return {"rows": rows, "fit": fit, "exponent": fit.slope, "target": 2.0 / DIM,
            "ok": fit.slope >= 2.0 / DIM - 0.15}


def two_mode_gap(k1: float, k2: float) -> float:
    """``v_0^2`` of the two-plane-wave Slater state."""
    return (k1 - k2) ** 2


# ---------------------------------------------------------------- Fourier-space Lieb-Thirring

def _line_momentum_density(orbs: OrbitalSet, pad: int = 8):
    """``rho(v) = sum_j |phi_j^(v)|^2`` with the continuous transform (zero padding)."""
    g = orbs.grid
    n = g.points * pad
    f = np.zeros((orbs.count, n), dtype=complex)
    f[:, :g.points] = orbs.orbitals
    F = np.fft.fftshift(np.fft.fft(f, axis=1), axes=1)
    v = 2 * pi * (np.arange(n) - n // 2) / (n * g.spacing)
    # phase of the left edge is irrelevant for |.|^2
    amp = F * g.spacing / sqrt(2 * pi)
    rho = np.einsum("j,jv->v", orbs.weights, np.abs(amp) ** 2)
    return v, rho, v[1] - v[0]


@dataclass(frozen=True)
class LTResult:
    lhs: float
    rhs: float
    constant: float = LT_CONSTANT

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    @property
    def ok(self) -> bool:
        return self.lhs <= self.constant * self.rhs


def lt_momentum_check(orbs: OrbitalSet, pad: int = 8) -> LTResult:
    """``int rho(v)^{1+2/d} dv`` against ``<Psi, sum x_j^2 Psi>`` (box treated as the line)."""
    v, rho, dv = _line_momentum_density(orbs, pad)
    mass = np.sum(rho) * dv
    if abs(mass - np.sum(orbs.weights)) > 1e-6 * mass:
        raise PreconditionError(f"momentum density carries mass {mass:.6g}, not N")
    lhs = float(np.sum(rho ** (1 + 2 / DIM)) * dv)
    g = orbs.grid
    rhs = float(np.sum(orbs.weights[:, None] * np.abs(orbs.orbitals) ** 2 * g.x ** 2) * g.spacing)
    return LTResult(lhs, rhs)


def lt_gaussian_closed(s: float):
    """Closed forms for ``phi = (pi s^2)^{-1/4} exp(-x^2/(2 s^2))`` in d = 1."""
    return s ** 2 / (pi * sqrt(3.0)), s ** 2 / 2


# ---------------------------------------------------------------- Husimi tail

@dataclass(frozen=True)
class TailResult:
    lhs: float
    rhs: float
    C1: float
    sup: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-9) + 1e-14


def tail_profile(lam: float, width: float = None):
    """``O(x, v) = 1 - exp(-(|v| - lam)^2/w^2)`` for ``|v| >= lam``, else 0 (sup 1)."""
    if width is None:
        width = lam / 2

    def O(x, v):
        a = np.maximum(np.abs(v) - lam, 0.0)
        return np.broadcast_to(1 - np.exp(-a ** 2 / width ** 2), np.broadcast(x, v).shape)

    return O


def kinetic_constant(orbs: OrbitalSet) -> float:
    """``C_1 = <sum -Delta> / N^{1 + 2/d}``."""
    c = momentum_coefficients(orbs.grid, orbs.orbitals)
    kin = float(np.sum(orbs.weights[:, None] * np.abs(c) ** 2 * orbs.grid.k ** 2))
    return kin / orbs.particle_count ** (1 + 2 / DIM)


def husimi_tail_check(orbs: OrbitalSet, nu: float, lam: float, O=None, C1_max: float = None,
                      sup: float = None) -> TailResult:
    """``|<O, H_nu>| <= [C1 (nu/(lam eps))^2 + c nu/lam^2] ||O||_inf`` for O supported in |v| >= lam."""
    N = orbs.particle_count
    eps = N ** (-1.0 / DIM)
    C1 = kinetic_constant(orbs)
    if C1_max is not None and C1 > C1_max:
        raise PreconditionError(f"kinetic constant {C1:.3g} exceeds {C1_max:g}")
    if O is None:
        O = tail_profile(lam)
        sup = 1.0
    W = wigner(orbs.gamma1(), nu)
    H = husimi(W, sqrt(nu), sqrt(nu))
    if lam >= 0.9 * np.abs(H.vgrid.x).max():
        raise WindowError(f"lambda = {lam:g} beyond the velocity window {np.abs(H.vgrid.x).max():.3g}")
    X, V = np.meshgrid(H.xgrid.x, H.vgrid.x, indexing="ij")
    vals = O(X, V)
    if sup is None:
        sup = float(np.abs(vals).max())
    if np.any(vals[np.abs(V) < lam] != 0):
        raise DomainError("observable is not supported in |v| >= lambda")
    lhs = abs(float(np.sum(vals * H.values) * H.cell))
    rhs = (C1 * (nu / (lam * eps)) ** 2 + HUSIMI_SPREAD * nu / lam ** 2) * sup
    return TailResult(lhs, rhs, C1, sup)


# ---------------------------------------------------------------- displacement band

def hermite_pair(grid: Grid, s: float = 1.0, x0: float = 0.0) -> OrbitalSet:
    """Two lowest Hermite functions of width ``s`` (real, zero mean momentum)."""
    z = (grid.x - x0) / s
    f = np.array([np.exp(-z ** 2 / 2), z * np.exp(-z ** 2 / 2)], dtype=complex)
    return OrbitalSet(grid, lowdin(f, grid.spacing), np.ones(2), 2, {"family": "hermite", "s": s})


def scaled_wavefunction(orbs: OrbitalSet, alpha: float) -> NBodyWavefunction:
    """Slater state propagated by ``-alpha Delta + (1/N) sum U``."""
    N = orbs.particle_count
    return slater_wavefunction(orbs, 2 * alpha, coupling=2 * alpha / N)


def displacement_run(orbs: OrbitalSet, alpha: float, potential: Potential, t_final: float,
                     dt: float, sample_every: int = 1):
    psi0 = scaled_wavefunction(orbs, alpha)
    traj = evolve_nbody(psi0, potential, t_final, dt, sample_every=sample_every)
    return [pair_statistics(psi0.with_values(s), t) for s, t in zip(traj.states, traj.times)]


def displacement_band_check(alpha: float, potential: Potential, orbs: OrbitalSet, t_final: float = None,
                            dt: float = 1e-3, sample_every: int = 5):
    """Sample ``u_t, v_t`` and check ``|v_t - v_0| <= 4Ct`` and ``u_t <= u_0 + 3 alpha v_0 t``."""
    st0 = pair_statistics(scaled_wavefunction(orbs, alpha))
    C = 0.0 if potential.is_zero else potential.grad_sup()
    window = np.inf if C == 0 else st0.v / (8 * C)
    if t_final is None:
        if not np.isfinite(window):
            raise WindowError("t_final is required when grad U = 0")
        t_final = np.floor(window / dt) * dt
    if t_final > window * (1 + 1e-12):
        raise WindowError(f"t = {t_final:g} beyond v0/(8C) = {window:g}")
    rows = displacement_run(orbs, alpha, potential, t_final, dt, sample_every)
    u0, v0 = rows[0].u, rows[0].v
    tol = 1e-9
    checks = []
    for r in rows:
        band = (v0 - 4 * C * r.time - tol <= r.v <= v0 + 4 * C * r.time + tol)
        grow = r.u <= u0 + 3 * alpha * v0 * r.time + tol
        checks.append((r.time, r.u, r.v, band, grow))
    return {"alpha": alpha, "C": C, "window": window, "u0": u0, "v0": v0, "rows": checks,
            "ok": all(c[3] and c[4] for c in checks)}


def growth_coefficient(rows, alpha: float) -> float:
    """Least-squares ``c`` in ``u_t^2 - u_0^2 = b t + c t^2``, reported as ``c/(alpha v_0)^2``."""
    t = np.array([r.time for r in rows])
    y = np.array([r.u ** 2 for r in rows]) - rows[0].u ** 2
    A = np.stack([t, t ** 2], axis=1)
    b, c = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(c / (alpha * rows[0].v) ** 2)


def alpha_sweep(orbs: OrbitalSet, potential: Potential, alphas, t: float = None, dt: float = 1e-3,
                sample_every: int = 5):
    """``u_t/u_0`` at a common time and the ``t^2`` growth coefficient for each ``alpha``."""
    C = potential.grad_sup()
    if t is None:
        v0 = pair_statistics(scaled_wavefunction(orbs, alphas[0])).v
        t = np.floor(v0 / (16 * C) / dt) * dt
    out = []
    for a in alphas:
        rows = displacement_run(orbs, a, potential, t, dt, sample_every)
        out.append({"alpha": a, "ratio": rows[-1].u / rows[0].u, "growth": growth_coefficient(rows, a),
                    "u0": rows[0].u, "v0": rows[0].v})
    ratios = [r["ratio"] for r in out]
    return {"t": t, "rows": out, "monotone": bool(np.all(np.diff(ratios) > 0))}
