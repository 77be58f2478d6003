"""Periodic grids, the discrete Fourier pair, Gaussian kernels and pair potentials.

Conventions used everywhere in the package:

* A grid axis has ``n`` (even) points on the periodic box ``[-L, L)``, with
  ``x_j = -L + j*dx`` and ``dx = 2L/n``.
* Frequencies are the centered multiples ``k_m = m*pi/L``, ``m = -n/2..n/2-1``.
* ``fourier_pair`` realizes ``F(k) = (2 pi)^{-1/2} int f(x) exp(-i k x) dx`` by the
  rectangle rule, which is unitary between the ``dx`` and ``dk`` measures.
* Pair potentials follow ``U(x) = int Uhat(q) exp(i q x) dq`` so that
  ``||U||_m = int |Uhat(q)| |q|^m dq``.  On the torus the convolution
  ``U * rho`` acts as the Fourier multiplier ``m(k) = 2 pi Uhat(k)``.
"""

from dataclasses import dataclass, field
from math import factorial, gamma as gamma_fn, sqrt, pi, e

import numpy as np
from scipy import integrate

from .errors import StructuralError, ResolutionError, UnsupportedPotential


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^dim``."""

    points: int
    extent: float
    dim: int = 1

    def __post_init__(self):
        if int(self.points) != self.points or self.points <= 0 or self.points % 2:
            raise StructuralError(f"points_per_axis must be a positive even integer, got {self.points}")
        if not self.extent > 0:
            raise StructuralError(f"extent must be positive, got {self.extent}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise StructuralError(f"dim must be a positive integer, got {self.dim}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def dual_spacing(self) -> float:
        return pi / self.extent

    @property
    def x(self) -> np.ndarray:
        """Position samples along one axis."""
        return -self.extent + self.spacing * np.arange(self.points)

    @property
    def k(self) -> np.ndarray:
        """Centered frequency lattice along one axis."""
        return self.dual_spacing * (np.arange(self.points) - self.points // 2)

    @property
    def k_fft(self) -> np.ndarray:
        """Frequencies in numpy FFT order."""
        return 2.0 * pi * np.fft.fftfreq(self.points, d=self.spacing)

    def shape(self, rank: int = 1) -> tuple:
        return (self.points,) * (rank * self.dim)

    def cell(self, rank: int = 1) -> float:
        """Volume element of grid^(rank*dim)."""
        return self.spacing ** (rank * self.dim)

    def mesh_sq(self, rank: int = 1) -> np.ndarray:
        """Squared Euclidean norm |z|^2 sampled on grid^(rank*dim)."""
        axes = rank * self.dim
        x2 = self.x ** 2
        out = np.zeros(self.shape(rank))
        for a in range(axes):
            shape = [1] * axes
            shape[a] = self.points
            out = out + x2.reshape(shape)
        return out

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.points * factor, self.extent, self.dim)


SPACES = ("position", "fourier", "phase")


@dataclass(frozen=True)
class Field:
    """Complex or real samples on grid^(rank*dim)."""

    grid: Grid
    rank: int
    values: np.ndarray = field(repr=False)
    space: str = "position"

    def __post_init__(self):
        if self.space not in SPACES:
            raise StructuralError(f"unknown space {self.space!r}")
        expected = self.grid.shape(self.rank)
        if self.space != "phase" and tuple(np.shape(self.values)) != expected:
            raise StructuralError(
                f"values shape {np.shape(self.values)} does not match grid shape {expected}")

    def norm(self) -> float:
        measure = self.grid.cell(self.rank) if self.space == "position" else \
            self.grid.dual_spacing ** (self.rank * self.grid.dim)
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * measure))

    def integral(self) -> complex:
        return complex(np.sum(self.values) * self.grid.cell(self.rank))


def _sign_pattern(n: int) -> np.ndarray:
    m = np.arange(n) - n // 2
    return np.where(m % 2 == 0, 1.0, -1.0)


def _forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(values.ndim))
    out = np.fft.fftshift(np.fft.fftn(values, axes=axes), axes=axes)
    sign = _sign_pattern(grid.points)
    for a in axes:
        shape = [1] * values.ndim
        shape[a] = grid.points
        out = out * sign.reshape(shape)
    return out * (grid.spacing / sqrt(2 * pi)) ** values.ndim


def _inverse(values: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(values.ndim))
    sign = _sign_pattern(grid.points)
    out = np.array(values, dtype=complex)
    for a in axes:
        shape = [1] * values.ndim
        shape[a] = grid.points
        out = out * sign.reshape(shape)
    out = np.fft.ifftn(np.fft.ifftshift(out, axes=axes), axes=axes)
    return out / (grid.spacing / sqrt(2 * pi)) ** values.ndim


def fourier_pair(f: Field, direction: str = "forward") -> Field:
    """Unitary discrete Fourier transform on the grid, flipping ``space``."""
    if direction not in ("forward", "inverse"):
        raise StructuralError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    if f.space == "phase":
        raise StructuralError("phase-space fields are transformed with transforms.mu_transform")
    if direction == "forward" and f.space != "position":
        raise StructuralError("forward transform expects a position-space field")
    if direction == "inverse" and f.space != "fourier":
        raise StructuralError("inverse transform expects a Fourier-space field")
    if direction == "forward":
        return Field(f.grid, f.rank, _forward(np.asarray(f.values), f.grid), "fourier")
    return Field(f.grid, f.rank, _inverse(np.asarray(f.values), f.grid), "position")


def gaussian_kernel(grid: Grid, delta: float, rank: int = 1) -> Field:
    """Sampled ``G_delta(z) = (pi delta^2)^{-rank*dim/2} exp(-z^2/delta^2)``."""
    if not delta > 0:
        raise StructuralError("delta must be positive")
    if delta < 2 * grid.spacing:
        raise ResolutionError(
            f"delta={delta:.3g} is below twice the grid spacing {grid.spacing:.3g}")
    axes = rank * grid.dim
    vals = (pi * delta ** 2) ** (-axes / 2) * np.exp(-grid.mesh_sq(rank) / delta ** 2)
    return Field(grid, rank, vals.astype(complex), "position")


@dataclass(frozen=True)
class Potential:
    """Even, real pair potential in one dimension.

    ``gaussian``: ``U(x) = u0 exp(-x^2/(2 sigma^2))``.
    ``cosine``: ``U(x) = u0 cos(k0 x)`` (two-point spectrum at +-k0).
    ``coulomb``: ``u0/|x|``; only usable as a lattice-sum kernel.
    """

    kind: str
    u0: float = 1.0
    sigma: float = 1.0
    k0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "cosine", "coulomb"):
            raise StructuralError(f"unknown potential kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise StructuralError("sigma must be positive")

    @classmethod
    def gaussian(cls, u0=1.0, sigma=1.0):
        return cls("gaussian", u0=float(u0), sigma=float(sigma))

    @classmethod
    def cosine(cls, u0=1.0, k0=1.0):
        return cls("cosine", u0=float(u0), k0=float(k0))

    @classmethod
    def coulomb(cls, u0=1.0):
        return cls("coulomb", u0=float(u0))

    @classmethod
    def zero(cls):
        return cls("gaussian", u0=0.0, sigma=1.0)

    @property
    def is_zero(self) -> bool:
        return self.u0 == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return self.u0 * np.exp(-x ** 2 / (2 * self.sigma ** 2))
        if self.kind == "cosine":
            return self.u0 * np.cos(self.k0 * x)
        with np.errstate(divide="ignore"):
            return self.u0 / np.abs(x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return -self.u0 * x / self.sigma ** 2 * np.exp(-x ** 2 / (2 * self.sigma ** 2))
        if self.kind == "cosine":
            return -self.u0 * self.k0 * np.sin(self.k0 * x)
        raise UnsupportedPotential("Coulomb gradient is unbounded")

    def grad_sup(self) -> float:
        """``||U'||_inf``."""
        if self.kind == "gaussian":
            return abs(self.u0) / (self.sigma * sqrt(e))
        if self.kind == "cosine":
            return abs(self.u0) * self.k0
        raise UnsupportedPotential("Coulomb gradient is unbounded")

    def fourier(self, q):
        """Spectral density ``Uhat(q)`` for continuous-spectrum kinds."""
        q = np.asarray(q, dtype=float)
        if self.kind == "gaussian":
            return self.u0 * self.sigma / sqrt(2 * pi) * np.exp(-self.sigma ** 2 * q ** 2 / 2)
        if self.kind == "coulomb":
            with np.errstate(divide="ignore"):
                return self.u0 / (pi * q ** 2)
        raise StructuralError("cosine potential has a discrete spectrum; use modes()")

    def modes(self):
        """Discrete spectrum as ``[(q, weight)]`` (cosine only)."""
        if self.kind != "cosine":
            raise StructuralError("modes() is only defined for the cosine potential")
        return [(self.k0, self.u0 / 2), (-self.k0, self.u0 / 2)]

    def multiplier(self, k, extent: float):
        """Torus convolution multiplier ``m(k)`` on the lattice of a box ``[-L, L)``."""
        k = np.asarray(k, dtype=float)
        if self.kind == "gaussian":
            return 2 * pi * self.fourier(k)
        if self.kind == "cosine":
            ratio = self.k0 * extent / pi
            if abs(ratio - round(ratio)) > 1e-9:
                raise StructuralError("cosine wavenumber k0 is not on the box frequency lattice")
            hit = np.isclose(np.abs(k), self.k0, rtol=0, atol=1e-9 * max(1.0, self.k0))
            return np.where(hit, self.u0 * extent, 0.0)
        raise UnsupportedPotential("Coulomb potential is not a bounded torus multiplier")

    def weights(self, grid: Grid) -> np.ndarray:
        """Lattice weights ``w(q) = m(q)/(2L)`` on the centered frequencies.

        With these, ``(U * rho)(x) = sum_q w(q) mu(q, 0) exp(i q x)`` where
        ``mu(q, 0) = int rho(x) exp(-i q x) dx``.
        """
        return self.multiplier(grid.k, grid.extent) / (2 * grid.extent)

    def convolve(self, rho: np.ndarray, grid: Grid) -> np.ndarray:
        """Torus convolution ``U * rho`` along the last axis."""
        if self.is_zero:
            return np.zeros(np.shape(rho))
        mult = self.multiplier(grid.k_fft, grid.extent)
        out = np.fft.ifft(np.fft.fft(rho, axis=-1) * mult, axis=-1)
        return out.real if np.isrealobj(rho) else out

    def lattice_values(self, grid: Grid) -> np.ndarray:
        """Band-limited periodized potential at separations ``j*dx``, ``j = 0..n-1``."""
        if self.is_zero:
            return np.zeros(grid.points)
        mult = self.multiplier(grid.k_fft, grid.extent)
        return (np.fft.ifft(mult) / grid.spacing).real

    def pair_matrix(self, grid: Grid) -> np.ndarray:
        """Matrix ``U_per(x_i - x_j)`` on a one-dimensional grid."""
        lat = self.lattice_values(grid)
        idx = np.arange(grid.points)
        return lat[(idx[:, None] - idx[None, :]) % grid.points]

    def moment_norm_closed(self, m: int) -> float:
        """Closed-form ``||U||_m``."""
        if self.kind == "gaussian":
            s = self.sigma
            return abs(self.u0) * s / sqrt(2 * pi) * (2 / s ** 2) ** ((m + 1) / 2) * gamma_fn((m + 1) / 2)
        if self.kind == "cosine":
            return abs(self.u0) * self.k0 ** m
        raise UnsupportedPotential("moment norms of the Coulomb potential diverge")


def _moment_quadrature(pot: Potential, m: int) -> float:
    s = pot.sigma
    peak = sqrt(max(m, 0)) / s
    upper = peak + 60.0 / s
    integrand = lambda q: abs(pot.fourier(q)) * q ** m
    val, _ = integrate.quad(integrand, 0.0, upper, points=[peak] if peak > 0 else None,
                            epsabs=0.0, epsrel=1e-12, limit=400)
    return 2.0 * val


def potential_norms(pot: Potential, m_max: int):
    """Moment norms ``||U||_m`` for ``m = 0..m_max`` and the analyticity constant.

    ``kappa1 = max_{1<=m<=m_max} (||U||_m/m!)^{1/m}``, so that
    ``||U||_m <= kappa1^m m!`` for every tabulated ``m >= 1``.  The ``m = 0``
    entry is independent of ``kappa1``.
    """
    if m_max < 1:
        raise StructuralError("m_max must be at least 1")
    if pot.kind == "coulomb":
        raise UnsupportedPotential("||U||_m diverges for the Coulomb potential (Uhat ~ 1/q^2)")
    if pot.kind == "gaussian":
        norms = np.array([_moment_quadrature(pot, m) for m in range(m_max + 1)])
    else:
        # two-point spectrum: the integral is an exact two-term sum
        norms = np.array([sum(abs(w) * abs(q) ** m for q, w in pot.modes()) for m in range(m_max + 1)])
    ratios = [(norms[m] / factorial(m)) ** (1.0 / m) for m in range(1, m_max + 1)]
    kappa1 = float(max(ratios)) if ratios else 0.0
    return norms, kappa1
