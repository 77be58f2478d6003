"""Fermionic states: orbital sets, reduced density matrices and the standard families.

Density-matrix kernels of rank ``k`` are stored with shape ``(n,)*(2k)`` (for
``dim = 1``) ordered ``(x_1..x_k, y_1..y_k)`` and trace-normalized,
``Tr gamma = dx^k sum gamma(x; x) = 1``.  An orbital set carries occupations
``a_j`` in ``[0, 1]`` summing to ``N`` so that ``gamma^(1) = N^{-1} sum a_j |phi_j><phi_j|``.
"""

from dataclasses import dataclass, field
from itertools import permutations
from math import pi, sqrt

import numpy as np
from scipy import special

from .errors import (ArityError, CapacityError, PauliBoundError, ResolutionError,
                     ShellError, StructuralError, UnsupportedObservable)
from .spectral import Field, Grid

PAULI_TOL = 1e-12


@dataclass(frozen=True)
class DensityMatrix:
    grid: Grid
    rank: int
    kernel: np.ndarray = field(repr=False)
    trace_normalized: bool = True

    def __post_init__(self):
        expected = self.grid.shape(self.rank) * 2
        if tuple(self.kernel.shape) != expected:
            raise StructuralError(f"kernel shape {self.kernel.shape} != {expected}")

    @property
    def size(self) -> int:
        return self.grid.points ** (self.rank * self.grid.dim)

    def matrix(self) -> np.ndarray:
        return self.kernel.reshape(self.size, self.size)

    def operator(self) -> np.ndarray:
        """Matrix of the integral operator acting on grid samples."""
        return self.matrix() * self.grid.cell(self.rank)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix()) * self.grid.cell(self.rank))

    def hermiticity_defect(self) -> float:
        m = self.matrix()
        return float(np.abs(m - m.conj().T).max())

    def eigenvalues(self) -> np.ndarray:
        op = self.operator()
        return np.linalg.eigvalsh(0.5 * (op + op.conj().T))

    def diagonal(self) -> np.ndarray:
        d = np.diagonal(self.matrix()).real
        return d.reshape(self.grid.shape(self.rank))


@dataclass(frozen=True)
class OrbitalSet:
    grid: Grid
    orbitals: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    particle_count: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        orb = np.asarray(self.orbitals)
        if orb.ndim != 1 + self.grid.dim or orb.shape[1:] != self.grid.shape(1):
            raise StructuralError(f"orbitals shape {orb.shape} does not fit the grid")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (orb.shape[0],):
            raise StructuralError("one weight per orbital required")
        if np.any(w < -1e-14) or np.any(w > 1 + 1e-14):
            raise PauliBoundError("occupations must lie in [0, 1]")
        if abs(w.sum() - self.particle_count) > 1e-9 * max(1, self.particle_count):
            raise StructuralError(
                f"occupations sum to {w.sum():.12g}, expected N = {self.particle_count}")

    @property
    def count(self) -> int:
        return self.orbitals.shape[0]

    def flat(self) -> np.ndarray:
        return self.orbitals.reshape(self.count, -1)

    def gram(self) -> np.ndarray:
        f = self.flat()
        return f.conj() @ f.T * self.grid.cell(1)

    def orthonormality_defect(self) -> float:
        return float(np.abs(self.gram() - np.eye(self.count)).max())

    def density(self) -> np.ndarray:
        rho = np.einsum("j,j...->...", self.weights, np.abs(self.orbitals) ** 2)
        return rho / self.particle_count

    def gamma1(self) -> DensityMatrix:
        f = self.flat()
        mat = (f.T * self.weights) @ f.conj() / self.particle_count
        shape = self.grid.shape(1) * 2
        return DensityMatrix(self.grid, 1, mat.reshape(shape))

    def with_orbitals(self, orbitals) -> "OrbitalSet":
        return OrbitalSet(self.grid, np.asarray(orbitals), self.weights, self.particle_count, dict(self.meta))


def pauli_max(gamma1: DensityMatrix) -> float:
    return float(gamma1.eigenvalues().max())


def slater_marginals(orbs: OrbitalSet):
    """One- and two-particle marginals of the Slater determinant of ``orbs``."""
    if not np.allclose(orbs.weights, 1.0) or orbs.count != orbs.particle_count:
        raise StructuralError("slater_marginals needs N orbitals with unit occupations")
    if orbs.grid.dim != 1:
        raise StructuralError("grid marginals are implemented for dim = 1")
    N = orbs.particle_count
    if N < 2:
        raise ArityError("the two-particle marginal needs N >= 2")
    g1 = orbs.gamma1()
    return g1, quasifree_marginal(g1, 2, N, check_pauli=False)


def _det_kernel(g: np.ndarray, k: int) -> np.ndarray:
    """Pointwise ``det(g(x_i, y_j))`` on grid^(2k)."""
    n = g.shape[0]
    letters_x = "abc"[:k]
    letters_y = "def"[:k]
    out = np.zeros((n,) * (2 * k), dtype=complex)
    for perm in permutations(range(k)):
        sign = np.linalg.det(np.eye(k)[list(perm)])
        subs = ",".join(letters_x[i] + letters_y[perm[i]] for i in range(k))
        out = out + round(sign) * np.einsum(subs + "->" + letters_x + letters_y, *([g] * k))
    return out


def quasifree_marginal(gamma1: DensityMatrix, k: int, N: int, check_pauli: bool = True) -> DensityMatrix:
    """Wick-rule marginal ``N^k/(N(N-1)..(N-k+1)) det(gamma1(x_i, y_j))``."""
    if gamma1.rank != 1 or gamma1.grid.dim != 1:
        raise StructuralError("expects a rank-1 density matrix on a 1-d grid")
    if k > N:
        raise ArityError(f"k = {k} exceeds N = {N}")
    if k > 3 or k < 1:
        raise CapacityError("quasifree marginals are built on the grid for 1 <= k <= 3")
    if gamma1.grid.points ** (2 * k) > 2 ** 26:
        raise CapacityError("rank-k kernel exceeds the memory budget")
    if check_pauli:
        top = pauli_max(gamma1)
        if top > 1.0 / N + 1e-10:
            raise PauliBoundError(f"largest eigenvalue {top:.3e} exceeds 1/N = {1 / N:.3e}")
    if k == 1:
        return gamma1
    pref = float(N) ** k
    for j in range(k):
        pref /= (N - j)
    return DensityMatrix(gamma1.grid, k, pref * _det_kernel(gamma1.kernel, k))


def exchange_kernel(gamma1: DensityMatrix) -> np.ndarray:
    """Exchange part ``gamma1(x1, y2) gamma1(x2, y1)`` ordered (x1, x2, y1, y2)."""
    g = gamma1.kernel
    return np.einsum("ad,bc->abcd", g, g)


# ---------------------------------------------------------------- families

def plane_wave_modes(N: int, c: float = 0.5, closed_shell: bool = True) -> np.ndarray:
    """Integer modes of the d = 1 plane-wave family.

    ``closed_shell`` requires ``{k : |k| <= c N}`` to hold exactly ``N`` modes;
    otherwise the ``N`` lowest modes are taken in the order 0, 1, -1, 2, -2, ...
    """
    if closed_shell:
        R = c * N
        modes = np.arange(-int(np.floor(R + 1e-12)), int(np.floor(R + 1e-12)) + 1)
        if modes.size != N:
            raise ShellError(f"shell |k| <= {R:g} holds {modes.size} modes, not N = {N}")
        return modes
    order = [0]
    j = 1
    while len(order) < N:
        order.append(j)
        if len(order) < N:
            order.append(-j)
        j += 1
    return np.sort(np.array(order[:N]))


def plane_wave(N: int, c: float = 0.5, grid: Grid = None, closed_shell: bool = True) -> OrbitalSet:
    """Plane-wave family on the torus ``[-pi, pi)``: ``phi_k = (2 pi)^{-1/2} exp(i k x)``."""
    modes = plane_wave_modes(N, c, closed_shell)
    if grid is None:
        grid = Grid(max(64, int(2 ** np.ceil(np.log2(4 * (np.abs(modes).max() + 1))))), pi)
    if abs(grid.extent - pi) > 1e-12:
        raise StructuralError("plane-wave family lives on the box [-pi, pi)")
    if np.abs(modes).max() >= grid.points // 2:
        raise ResolutionError("plane-wave modes exceed the grid band")
    orb = np.exp(1j * np.outer(modes, grid.x)) / sqrt(2 * pi)
    return OrbitalSet(grid, orb, np.ones(N), N,
                      {"family": "plane_wave", "c": c, "modes": modes.tolist(), "epsilon": 1.0 / N})


def localized_envelope(z, sigma):
    """Gaussian envelope ``omega(z)`` with unit L2 norm."""
    return (2.0 / (pi * sigma ** 2)) ** 0.25 * np.exp(-np.asarray(z) ** 2 / sigma ** 2)


def lowdin(orbitals: np.ndarray, cell: float) -> np.ndarray:
    """Symmetric (Loewdin) orthonormalization."""
    f = orbitals.reshape(orbitals.shape[0], -1)
    S = f.conj() @ f.T * cell
    w, V = np.linalg.eigh(S)
    if w.min() <= 1e-12:
        raise ResolutionError("orbitals are linearly dependent")
    T = (V * w ** -0.5) @ V.conj().T
    return (T.T @ f).reshape(orbitals.shape)


def localized(N: int, sigma: float = 1.0 / 6, grid: Grid = None, extent: float = 1.0,
              orthonormalize: bool = True) -> OrbitalSet:
    """Localized family: ``phi_k(x) = eps^{-1/2} omega((x - k)/eps)`` at sites ``k`` in ``eps Z``.

    ``eps = 1/N``; the ``N`` sites are centered on the origin with spacing ``eps``.
    """
    eps = 1.0 / N
    sites = eps * (np.arange(N) - (N - 1) / 2)
    if grid is None:
        need = 4 * extent / (eps * sigma)
        grid = Grid(int(2 * np.ceil(need / 2)), extent)
    width = eps * sigma
    if grid.spacing > width / 2:
        raise ResolutionError(f"grid spacing {grid.spacing:.3g} does not resolve width {width:.3g}")
    x = grid.x
    orb = eps ** -0.5 * localized_envelope((x[None, :] - sites[:, None]) / eps, sigma)
    edge = np.abs(orb[:, [0, -1]]).max() / np.abs(orb).max()
    if edge > 1e-10:
        raise ResolutionError(f"envelope does not decay below 1e-10 at the box edge ({edge:.2e})")
    raw = orb.astype(complex)
    if orthonormalize:
        orb = lowdin(raw, grid.spacing)
    else:
        orb = raw
    return OrbitalSet(grid, orb, np.ones(N), N,
                      {"family": "localized", "sigma": sigma, "epsilon": eps, "sites": sites.tolist()})


def raw_overlaps(N: int, sigma: float = 1.0 / 6, grid: Grid = None, extent: float = 1.0) -> np.ndarray:
    """Gram matrix of the localized envelopes before orthonormalization."""
    fam = localized(N, sigma, grid, extent, orthonormalize=False)
    return fam.gram()


def shifted(base, beta: float = None):
    """Two-copy construction on the doubled torus.

    The base state lives on the first half ``[-2L, 0)`` of ``[-2L, 2L)``; the shift
    ``e = 2L`` identifies the two halves.  Returns ``(gamma_tilde, orbital_set)``
    where the orbital set holds ``psi_k = 2^{-1/2}[phi_k(x) + phi_k(x + e)]``
    (``None`` if ``base`` is a density matrix).
    """
    if isinstance(base, OrbitalSet):
        g = base.gamma1()
    elif isinstance(base, DensityMatrix) and base.rank == 1:
        g = base
    else:
        raise StructuralError("shifted() needs an OrbitalSet or a rank-1 DensityMatrix")
    grid = g.grid
    n = grid.points
    big = Grid(2 * n, 2 * grid.extent)
    K = np.zeros((2 * n, 2 * n), dtype=complex)
    K[:n, :n] = g.kernel
    # gamma(x+e, y), gamma(x, y+e), gamma(x+e, y+e) by rolling by half the doubled box
    terms = K + np.roll(K, n, axis=0) + np.roll(K, n, axis=1) + np.roll(np.roll(K, n, 0), n, 1)
    tr = np.trace(terms).real * big.spacing
    if beta is None:
        beta = 1.0 / tr
    gt = DensityMatrix(big, 1, beta * terms)
    orbs = None
    if isinstance(base, OrbitalSet):
        psi = np.zeros((base.count, 2 * n), dtype=complex)
        psi[:, :n] = base.orbitals
        psi = (psi + np.roll(psi, n, axis=1)) / sqrt(2)
        orbs = OrbitalSet(big, psi, base.weights, base.particle_count,
                          {**base.meta, "family": "shifted", "beta": beta})
    return gt, orbs


def example_family(variant: str, N: int, **kw):
    """Dispatch to ``plane_wave``, ``localized`` or ``shifted``."""
    if variant == "plane_wave":
        return plane_wave(N, **kw)
    if variant == "localized":
        return localized(N, **kw)
    if variant == "shifted":
        base = kw.pop("base", None) or plane_wave(N)
        return shifted(base, **kw)
    raise StructuralError(f"unknown family {variant!r}")


def gaussian_packet(grid: Grid, x0: float = 0.0, p0: float = 0.0, s: float = 0.5) -> np.ndarray:
    """``(pi s^2)^{-1/4} exp(-(x-x0)^2/(2 s^2) + i p0 x)`` on the grid."""
    x = grid.x
    return (pi * s ** 2) ** -0.25 * np.exp(-(x - x0) ** 2 / (2 * s ** 2) + 1j * p0 * x)


def random_slater(grid: Grid, N: int, seed: int, kmax: int = None) -> OrbitalSet:
    """Seeded Slater state of ``N`` band-limited random orbitals (|k| <= kmax lattice modes)."""
    rng = np.random.default_rng(seed)
    if kmax is None:
        kmax = max(N + 2, 4)
    if kmax >= grid.points // 2 - 1:
        raise ResolutionError("kmax too large for the grid band")
    modes = np.arange(-kmax, kmax + 1)
    coef = rng.normal(size=(N, modes.size)) + 1j * rng.normal(size=(N, modes.size))
    coef *= np.exp(-0.5 * (modes / (0.6 * kmax)) ** 2)
    q, _ = np.linalg.qr(coef.T)
    basis = np.exp(1j * np.outer(modes, grid.x)) / sqrt(2 * grid.extent)
    orb = q.T @ basis
    return OrbitalSet(grid, orb, np.ones(N), N, {"family": "random", "seed": seed, "kmax": kmax})


def random_packets(grid: Grid, N: int, seed: int, spread: float = 1.2, pmax: float = 3.0,
                   widths=(0.3, 0.6)) -> OrbitalSet:
    """Seeded Slater state of ``N`` Loewdin-orthonormalized Gaussian packets.

    Centres lie in ``[-spread, spread]`` so the kernel decays well inside the torus window.
    """
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-spread, spread, N)
    p0 = rng.uniform(-pmax, pmax, N)
    s = rng.uniform(*widths, N)
    raw = np.array([gaussian_packet(grid, a, b, c) for a, b, c in zip(x0, p0, s)])
    return OrbitalSet(grid, lowdin(raw, grid.spacing), np.ones(N), N, {"family": "packets", "seed": seed})


def orbital_set_from_gamma(gamma1: DensityMatrix, N: int, tol: float = 1e-12) -> OrbitalSet:
    """Eigen-decomposition ``gamma1 = N^{-1} sum a_j |phi_j><phi_j|``."""
    op = gamma1.operator()
    w, V = np.linalg.eigh(0.5 * (op + op.conj().T))
    keep = w > tol
    occ = np.clip(w[keep] * N, 0.0, 1.0)
    occ *= N / occ.sum()
    orb = (V[:, keep] / sqrt(gamma1.grid.spacing)).T
    return OrbitalSet(gamma1.grid, orb, occ, N, {"family": "from_gamma"})


# ---------------------------------------------------------------- momentum

def momentum_coefficients(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Coefficients ``c_p = <e_p, f>`` in the torus plane-wave basis, centered order."""
    c = np.fft.fftshift(np.fft.fft(values, axis=-1), axes=-1)
    phase = np.exp(1j * grid.k * grid.extent)  # e^{-ik x_0} with x_0 = -L
    return c * phase * grid.spacing / sqrt(2 * grid.extent)


def momentum_density(state, nu: float) -> Field:
    """Momentum density at scale ``nu``: ``rho_nu(v) = nu^{-1} rho(v/nu)``, unit mass.

    Returned on the velocity grid ``v_p = nu * k_p`` (spacing ``nu*pi/L``).
    """
    if isinstance(state, OrbitalSet):
        grid = state.grid
        c = momentum_coefficients(grid, state.orbitals)
        occ = np.einsum("j,jp->p", state.weights, np.abs(c) ** 2) / state.particle_count
    elif isinstance(state, DensityMatrix) and state.rank == 1:
        grid = state.grid
        A = momentum_coefficients(grid, state.kernel.T)      # A[y, p] = <e_p, gamma(., y)>
        B = momentum_coefficients(grid, A.conj().T)          # B[p, q] = <e_q, conj A[:, p]>
        occ = np.real(np.diagonal(B).conj())
    else:
        raise StructuralError("momentum_density expects an OrbitalSet or rank-1 DensityMatrix")
    if grid.dim != 1:
        raise StructuralError("momentum_density is implemented for dim = 1")
    dv = nu * grid.dual_spacing
    vgrid = Grid(grid.points, nu * pi / grid.spacing)
    return Field(vgrid, 1, np.asarray(occ, dtype=float) / dv, "position")


# ---------------------------------------------------------------- exchange pairing

@dataclass(frozen=True)
class ExpCosine:
    """``a(x) = prod_i exp(kappa cos x_i)``; coefficients ``prod_i I_{m_i}(kappa)``."""
    kappa: float = 1.0

    def coeff(self, m: np.ndarray) -> np.ndarray:
        m = np.atleast_2d(m)
        return np.prod(special.iv(m, self.kappa), axis=-1)

    def __call__(self, x):
        x = np.atleast_1d(x)
        return np.exp(self.kappa * np.cos(x))


@dataclass(frozen=True)
class FourierMode:
    """``a(x) = exp(i q.x)`` with integer ``q``."""
    q: tuple

    def coeff(self, m: np.ndarray) -> np.ndarray:
        m = np.atleast_2d(m)
        return np.all(m == np.asarray(self.q), axis=-1).astype(float)

    def __call__(self, x):
        return np.exp(1j * np.dot(np.atleast_2d(x), np.asarray(self.q, dtype=float)))


@dataclass(frozen=True)
class ConstantFactor:
    value: float = 1.0

    def coeff(self, m):
        m = np.atleast_2d(m)
        return self.value * np.all(m == 0, axis=-1).astype(float)

    def __call__(self, x):
        return self.value * np.ones(np.shape(np.atleast_1d(x))[:1])


@dataclass(frozen=True)
class GaussianVelocity:
    """``J2(v1, v2) = exp(-(|v1|^2 + |v2|^2)/(2 s^2))`` (or 1 when ``s`` is None)."""
    s: float = None

    def diagonal(self, v: np.ndarray) -> np.ndarray:
        if self.s is None:
            return np.ones(v.shape[0])
        return np.exp(-np.sum(v ** 2, axis=-1) / self.s ** 2)


@dataclass(frozen=True)
class FactoredObservable:
    """``J(x1, x2, v1, v2) = a(x1) b(x2) J2(v1, v2)`` with closed-form Fourier factors."""
    a: object
    b: object
    velocity: GaussianVelocity = GaussianVelocity()


@dataclass(frozen=True)
class CoulombKernel:
    """Pairing kernel ``|x1 - x2|^{-1}`` reduced by ``int exp(ikx)/|x| ~ |k|^{-2}``."""


@dataclass(frozen=True)
class PhaseSpaceGaussian:
    """One-slot observable ``j(x, v) = a(x) exp(-(v - v0)^2/(2 s^2))`` on a 1-d torus."""
    a: object
    s: float = 1.0
    v0: float = 0.0

    def weyl_matrix(self, grid: Grid, eps: float) -> np.ndarray:
        """Matrix ``K`` with ``<j, W> = Tr(gamma K)`` (operator form, includes dx^2)."""
        x = grid.x
        n = grid.points
        idx = np.arange(n)
        d = ((idx[:, None] - idx[None, :] + n // 2) % n - n // 2) * grid.spacing  # u - w, minimal image
        mid = x[None, :] + d / 2                                              # (u + w)/2
        y = d / eps
        ghat = self.s * sqrt(2 * pi) * np.exp(-0.5 * self.s ** 2 * y ** 2 - 1j * self.v0 * y)
        kern = self.a(mid.ravel()).reshape(n, n) * ghat / (2 * pi * eps)
        # <j, W> = sum_{u,w} gamma(u, w) kern[u, w] dx^2 = Tr(gamma_op K) with K[w, u]
        return kern.T * grid.spacing


@dataclass(frozen=True)
class PlaneWaveShell3D:
    """Plane-wave shell ``{k in Z^3 : |k| <= c N0^{1/3}}``; ``N`` is the realized count."""
    modes: np.ndarray = field(repr=False)
    c: float
    nominal: int

    @property
    def N(self) -> int:
        return int(self.modes.shape[0])

    @property
    def epsilon(self) -> float:
        return self.N ** (-1.0 / 3)

    @property
    def radius(self) -> float:
        return self.c * self.nominal ** (1.0 / 3)


def plane_wave_3d(N_nominal: int, c: float = None) -> PlaneWaveShell3D:
    if c is None:
        c = (3.0 / (4 * pi)) ** (1.0 / 3)
    R = c * N_nominal ** (1.0 / 3)
    r = int(np.floor(R))
    ax = np.arange(-r, r + 1)
    K = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    K = K[np.sum(K ** 2, axis=1) <= R ** 2 + 1e-9]
    return PlaneWaveShell3D(K, c, N_nominal)


def _ball_autocorrelation(shell: PlaneWaveShell3D):
    """Counts ``C(m) = #{k : k, k+m in shell}`` via FFT, with the offset lattice."""
    r = int(np.abs(shell.modes).max())
    size = 4 * r + 3
    box = np.zeros((size,) * 3)
    idx = shell.modes + r
    box[idx[:, 0], idx[:, 1], idx[:, 2]] = 1.0
    F = np.fft.rfftn(box)
    corr = np.fft.irfftn(F * F.conj(), s=box.shape, axes=tuple(range(box.ndim)))
    corr = np.rint(corr)
    ax = np.fft.fftfreq(size, d=1.0 / size).astype(int)
    M = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    return corr, M


def exchange_pairing(family, test_fn, chunk: int = 256) -> float:
    """Pairing ``<J, W_ex^(2)>`` of a test function with the exchange term.

    ``W_ex`` is the Wigner transform of ``gamma1(x1, y2) gamma1(x2, y1)`` (the
    ``N/(N-1)`` prefactor is not included).  Paths:

    * ``PlaneWaveShell3D`` with ``FactoredObservable``:
      ``N^{-2} sum_{k,l} ahat_{l-k} bhat_{k-l} J2(eps(k+l)/2, eps(k+l)/2)``.
    * ``PlaneWaveShell3D`` with ``CoulombKernel``: ``N^{-2} sum_{k != l} |k-l|^{-2}``.
    * 1-d ``OrbitalSet`` with a pair of ``PhaseSpaceGaussian``: ``Tr(gamma K1 gamma K2)``.
    """
    if isinstance(family, PlaneWaveShell3D):
        N = family.N
        if isinstance(test_fn, CoulombKernel):
            corr, M = _ball_autocorrelation(family)
            m2 = np.sum(M ** 2, axis=-1).astype(float)
            mask = m2 > 0
            return float(np.sum(corr[mask] / m2[mask]) / N ** 2)
        if isinstance(test_fn, FactoredObservable):
            for f in (test_fn.a, test_fn.b):
                if not hasattr(f, "coeff"):
                    raise UnsupportedObservable("factor without closed-form Fourier coefficients")
            K = family.modes
            eps = family.epsilon
            r = int(np.abs(K).max())
            span = 2 * r
            ax = np.arange(-span, span + 1)
            box = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
            w = 2 * span + 1
            # coefficient tables over all differences, indexed by (m + span) in mixed radix
            atab = test_fn.a.coeff(box)
            btab = test_fn.b.coeff(-box)
            code = (K + span) @ np.array([w * w, w, 1])
            total = 0.0
            for start in range(0, N, chunk):
                k = K[start:start + chunk]
                ck = (k + span) @ np.array([w * w, w, 1])
                diff = code[None, :] - ck[:, None] + (span * (w * w + w + 1))   # index of l - k
                prod = atab[diff] * btab[diff]
                v = 0.5 * eps * (K[None, :, :] + k[:, None, :]).reshape(-1, 3)
                total = total + np.sum(prod.ravel() * test_fn.velocity.diagonal(v))
            return float(np.real(total)) / N ** 2
        raise UnsupportedObservable(f"no closed-form reduction for {type(test_fn).__name__}")
    if isinstance(family, OrbitalSet):
        if not (isinstance(test_fn, tuple) and len(test_fn) == 2
                and all(isinstance(t, PhaseSpaceGaussian) for t in test_fn)):
            raise UnsupportedObservable("1-d pairing needs a pair of PhaseSpaceGaussian factors")
        eps = family.meta.get("epsilon", 1.0 / family.particle_count)
        G = family.gamma1().operator()
        K1 = test_fn[0].weyl_matrix(family.grid, eps)
        K2 = test_fn[1].weyl_matrix(family.grid, eps)
        return complex(np.trace(G @ K1 @ G @ K2))
    raise UnsupportedObservable(f"unsupported family {type(family).__name__}")


def one_body_pairing(family: OrbitalSet, j: PhaseSpaceGaussian, eps: float = None) -> complex:
    """``<j, W^(1)> = Tr(gamma1 K_j)``."""
    if eps is None:
        eps = family.meta.get("epsilon", 1.0 / family.particle_count)
    return complex(np.trace(family.gamma1().operator() @ j.weyl_matrix(family.grid, eps)))


def factorization_defect(family: OrbitalSet, j1: PhaseSpaceGaussian, j2: PhaseSpaceGaussian,
                         eps: float = None) -> float:
    """``|<j1 x j2, W^(2) - W^(1) x W^(1)>|`` for a Slater state."""
    if eps is None:
        eps = family.meta.get("epsilon", 1.0 / family.particle_count)
    N = family.particle_count
    G = family.gamma1().operator()
    K1 = j1.weyl_matrix(family.grid, eps)
    K2 = j2.weyl_matrix(family.grid, eps)
    t1 = np.trace(G @ K1)
    t2 = np.trace(G @ K2)
    ex = np.trace(G @ K1 @ G @ K2)
    w2 = N / (N - 1) * (t1 * t2 - ex)
    return float(abs(w2 - t1 * t2))


def projector(grid: Grid, psi: np.ndarray) -> DensityMatrix:
    """``|psi><psi| / ||psi||^2`` as a rank-1 density matrix."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.sum(np.abs(psi) ** 2) * grid.spacing
    return DensityMatrix(grid, 1, np.outer(psi, psi.conj()) / nrm)
