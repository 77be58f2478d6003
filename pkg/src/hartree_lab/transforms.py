"""Rescaled Wigner transform on the torus, Husimi smoothing and the Fourier-side mu.

The Wigner transform of a rank-k density matrix is computed on a twice finer
position grid (band-limited interpolation, ``h = dx/2``).  With
``y_m = m dx/eps`` the defining integral over ``y`` is the exact sum over one
full period of the torus:

    W(x_J, v_r) = (2 pi)^{-1} (dx/eps) sum_m gamma(x_J + m h, x_J - m h) exp(-i v_r y_m)

on the velocity lattice ``v_r = r pi eps/(2L)`` with ``2n`` points per slot.
``mu(xi, eta) = int W exp(-i xi x - i eta v)`` lives on the dual lattice
``xi_a = a pi/L``, ``eta_b = b dx/eps``; the momentum representation
``mu(xi, eta) = sum_p gamma_hat(p; p - xi) exp(-i eps eta (p - xi/2))`` gives the
same numbers at any real ``eta``.
"""

from dataclasses import dataclass, field
from math import pi, sqrt

import numpy as np
from scipy import signal

from .errors import ArityError, CapacityError, ResolutionError, StructuralError
from .spectral import Grid
from .states import DensityMatrix, momentum_coefficients

RANK2_BUDGET = 2 ** 22


@dataclass(frozen=True)
class WignerFunction:
    grid: Grid              # coarse position grid of the source density matrix
    rank: int
    epsilon: float
    values: np.ndarray = field(repr=False)   # axes (x_1..x_k, v_1..v_k), 2n points each
    imag_residue: float = 0.0
    window_leak: float = 0.0                 # relative kernel size at separation >= L
    window: str = "torus"

    @property
    def xgrid(self) -> Grid:
        return Grid(2 * self.grid.points, self.grid.extent)

    @property
    def vgrid(self) -> Grid:
        return velocity_grid(self.grid, self.epsilon)

    @property
    def cell(self) -> float:
        return (self.xgrid.spacing * self.vgrid.spacing) ** self.rank

    def integral(self) -> float:
        return float(np.sum(self.values) * self.cell)

    def x(self):
        return self.xgrid.x

    def v(self):
        return self.vgrid.x


@dataclass(frozen=True)
class MuFunction:
    grid: Grid              # coarse position grid of the source
    rank: int
    epsilon: float
    xi: np.ndarray = field(repr=False)       # 1-d lattice per slot
    eta: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)   # axes (xi_1..xi_k, eta_1..eta_k)
    window: str = "torus"

    def at_origin(self) -> complex:
        idx = tuple([int(np.argmin(np.abs(self.xi)))] * self.rank + [int(np.argmin(np.abs(self.eta)))] * self.rank)
        return complex(self.values[idx])


@dataclass(frozen=True)
class PhaseField:
    """Real function on phase space (Husimi, Vlasov) sampled on ``xgrid x vgrid``."""
    xgrid: Grid
    vgrid: Grid
    values: np.ndarray = field(repr=False)
    rank: int = 1
    kind: str = "husimi"

    @property
    def cell(self) -> float:
        return (self.xgrid.spacing * self.vgrid.spacing) ** self.rank

    def integral(self) -> float:
        return float(np.sum(self.values) * self.cell)


def velocity_grid(grid: Grid, eps: float) -> Grid:
    """Velocity lattice of the Wigner transform: ``2n`` points, spacing ``pi eps/(2L)``."""
    return Grid(2 * grid.points, pi * eps / grid.spacing)


def upsample(kernel: np.ndarray, factor: int = 2) -> np.ndarray:
    """Band-limited (Fourier) interpolation along every axis."""
    out = np.asarray(kernel, dtype=complex)
    for ax in range(out.ndim):
        out = signal.resample(out, out.shape[ax] * factor, axis=ax)
    return out


def _check_eps(grid: Grid, eps: float):
    if grid.dim != 1:
        raise StructuralError("phase-space transforms are implemented for dim = 1")
    if eps < grid.spacing:
        raise ResolutionError(f"epsilon={eps:.3g} is below the grid spacing {grid.spacing:.3g}")


def _pair_indices(n2: int, k: int):
    """Broadcast index arrays (row..., col...) for gamma(x_J + m h, x_J - m h)."""
    J = np.arange(n2)
    rows, cols = [], []
    for s in range(k):
        shp_J = [1] * (2 * k)
        shp_m = [1] * (2 * k)
        shp_J[s] = n2
        shp_m[k + s] = n2
        Js = J.reshape(shp_J)
        ms = J.reshape(shp_m)
        rows.append((Js + ms) % n2)
        cols.append((Js - ms) % n2)
    return tuple(rows + cols)


def window_leak(gamma: DensityMatrix) -> float:
    """Largest ``|gamma(x, y)|`` with periodic separation ``>= L`` in some slot, relative to the max."""
    n = gamma.grid.points
    k = gamma.rank
    sep = np.abs((np.arange(n)[:, None] - np.arange(n)[None, :] + n // 2) % n - n // 2)
    far = np.zeros(gamma.kernel.shape, dtype=bool)
    for s in range(k):
        shp = [1] * (2 * k)
        shp[s] = n
        shp[k + s] = n
        far |= np.broadcast_to(np.moveaxis((sep >= n // 2).reshape(n, n, *[1] * (2 * k - 2)),
                                           [0, 1], [s, k + s]), far.shape)
    top = np.abs(gamma.kernel).max()
    return float(np.abs(gamma.kernel[far]).max() / top) if top > 0 and far.any() else 0.0


def wigner(gamma: DensityMatrix, eps: float, window: str = "torus") -> WignerFunction:
    """Rescaled Wigner transform of a rank-k density matrix.

    ``window='torus'`` is the exact transform of the periodic problem (the kernel
    need not decay).  ``window='line'`` approximates the transform on the line and
    requires the kernel to decay below 1e-10 before the ``y`` window closes.
    """
    _check_eps(gamma.grid, eps)
    leak = window_leak(gamma)
    if window == "line" and leak > 1e-10:
        raise ResolutionError(f"kernel does not decay inside the y-window (leak {leak:.2e})")
    if window not in ("torus", "line"):
        raise StructuralError(f"unknown window {window!r}")
    n = gamma.grid.points
    k = gamma.rank
    n2 = 2 * n
    if n2 ** (2 * k) > RANK2_BUDGET * (4 if k == 1 else 1):
        raise CapacityError(f"rank-{k} Wigner transform on {n} points exceeds the budget")
    G = upsample(gamma.kernel, 2)
    A = G[_pair_indices(n2, k)]
    if window == "line":
        # keep only the short-arc representative of every pair
        m = np.arange(n2)
        mc = np.abs((m + n) % n2 - n)
        for s in range(k):
            A = A * _along((mc < n // 2).astype(float), k + s, 2 * k)
    axes = tuple(range(k, 2 * k))
    F = np.fft.fftshift(np.fft.fftn(A, axes=axes), axes=axes)
    F *= ((gamma.grid.spacing / eps) / (2 * pi)) ** k
    resid = float(np.abs(F.imag).max()) if F.size else 0.0
    return WignerFunction(gamma.grid, k, eps, F.real.copy(), resid, leak, window)


def inverse_wigner(W: WignerFunction) -> DensityMatrix:
    """Recover the coarse kernel from a Wigner function."""
    n = W.grid.points
    n2 = 2 * n
    k = W.rank
    if W.values.shape != (n2,) * (2 * k):
        raise StructuralError("Wigner values do not match the source grid")
    axes = tuple(range(k, 2 * k))
    A = np.fft.ifftn(np.fft.ifftshift(W.values, axes=axes), axes=axes)
    A /= ((W.grid.spacing / W.epsilon) / (2 * pi)) ** k
    # coarse gamma[i; j] sits at J = i + j, m = i - j on the fine lattice
    i = np.arange(n)
    idxJ, idxm = [], []
    for s in range(k):
        shp_i = [1] * (2 * k)
        shp_j = [1] * (2 * k)
        shp_i[s] = n
        shp_j[k + s] = n
        a = i.reshape(shp_i)
        b = i.reshape(shp_j)
        d = a - b
        # short-arc representative: (J, m) = (a + b, a - b) or (a + b + n, a - b -+ n)
        wrap = np.abs(d) > n // 2
        idxJ.append((a + b + n * wrap) % n2)
        idxm.append((d - n * np.sign(d) * wrap) % n2)
    kern = A[tuple(idxJ + idxm)]
    return DensityMatrix(W.grid, k, kern)


# ---------------------------------------------------------------- mu

def dual_lattice(grid: Grid, eps: float):
    """``(xi, eta)`` lattices matching the fine phase-space grid (2n points each)."""
    n2 = 2 * grid.points
    m = np.arange(n2) - n2 // 2
    return m * grid.dual_spacing, m * grid.spacing / eps


def _phase_fft(values: np.ndarray, k: int, xgrid: Grid, vgrid: Grid, inverse: bool):
    """Continuous-normalized 2k-dimensional Fourier transform between (x, v) and (xi, eta)."""
    out = np.asarray(values, dtype=complex)
    grids = [xgrid] * k + [vgrid] * k
    for ax, g in enumerate(grids):
        n = g.points
        m = np.arange(n) - n // 2
        sign = np.where(m % 2 == 0, 1.0, -1.0)
        shp = [1] * out.ndim
        shp[ax] = n
        if not inverse:
            out = np.fft.fftshift(np.fft.fft(out, axis=ax), axes=ax) * sign.reshape(shp) * g.spacing
        else:
            out = np.fft.ifft(np.fft.ifftshift(out * sign.reshape(shp), axes=ax), axis=ax) / g.spacing
    return out


def mu_from_wigner(W: WignerFunction) -> MuFunction:
    xi, eta = dual_lattice(W.grid, W.epsilon)
    vals = _phase_fft(W.values, W.rank, W.xgrid, W.vgrid, inverse=False)
    return MuFunction(W.grid, W.rank, W.epsilon, xi, eta, vals, W.window)


def wigner_from_mu(mu: MuFunction) -> WignerFunction:
    xg = Grid(2 * mu.grid.points, mu.grid.extent)
    vg = velocity_grid(mu.grid, mu.epsilon)
    vals = _phase_fft(mu.values, mu.rank, xg, vg, inverse=True)
    return WignerFunction(mu.grid, mu.rank, mu.epsilon, vals.real.copy(),
                          float(np.abs(vals.imag).max()), window=mu.window)


def momentum_kernel(gamma: DensityMatrix) -> np.ndarray:
    """``gamma_hat(p_1..p_k; q_1..q_k) = <e_p, gamma e_q>`` in centered order."""
    k = gamma.rank
    out = np.asarray(gamma.kernel, dtype=complex)
    for ax in range(k):
        out = np.moveaxis(momentum_coefficients(gamma.grid, np.moveaxis(out, ax, -1)), -1, ax)
    for ax in range(k, 2 * k):
        out = np.moveaxis(momentum_coefficients(gamma.grid, np.moveaxis(out, ax, -1).conj()).conj(), -1, ax)
    return out


def mu_direct(gamma: DensityMatrix, eps: float, eta=None) -> MuFunction:
    """mu from the momentum representation, on the dual lattice or at given ``eta``."""
    grid = gamma.grid
    k = gamma.rank
    n = grid.points
    gh = momentum_kernel(gamma)
    xi_full, eta_full = dual_lattice(grid, eps)
    if eta is None:
        eta = eta_full
    eta = np.asarray(eta, dtype=float)
    p = grid.k
    # shifts a in [-n, n): gamma_hat(p; p - xi_a) is nonzero only if both inside the band
    shifts = np.arange(-n, n)
    if k == 1:
        vals = np.zeros((2 * n, eta.size), dtype=complex)
        for ia, a in enumerate(shifts):
            i = np.arange(n)
            j = i - a
            ok = (j >= 0) & (j < n)
            if not ok.any():
                continue
            i, j = i[ok], j[ok]
            mid = 0.5 * (p[i] + p[j])
            vals[ia] = np.exp(-1j * eps * np.outer(eta, mid)) @ gh[i, j]
        return MuFunction(grid, 1, eps, xi_full, eta, vals)
    if k == 2:
        if (2 * n) ** 2 * eta.size ** 2 * n ** 2 > 2 ** 31:
            raise CapacityError("rank-2 direct mu grid too large; use mu_points")
        vals = np.zeros((2 * n, 2 * n, eta.size, eta.size), dtype=complex)
        i = np.arange(n)
        for ia, a in enumerate(shifts):
            j1 = i - a
            ok1 = (j1 >= 0) & (j1 < n)
            if not ok1.any():
                continue
            i1, jj1 = i[ok1], j1[ok1]
            E1 = np.exp(-1j * eps * np.outer(eta, 0.5 * (p[i1] + p[jj1])))
            for ib, b in enumerate(shifts):
                j2 = i - b
                ok2 = (j2 >= 0) & (j2 < n)
                if not ok2.any():
                    continue
                i2, jj2 = i[ok2], j2[ok2]
                E2 = np.exp(-1j * eps * np.outer(eta, 0.5 * (p[i2] + p[jj2])))
                block = gh[np.ix_(i1, i2, jj1, jj2)]
                diag = block[np.arange(i1.size), :, np.arange(i1.size), :]
                diag = diag[:, np.arange(i2.size), np.arange(i2.size)]
                vals[ia, ib] = E1 @ diag @ E2.T
        return MuFunction(grid, 2, eps, xi_full, eta, vals)
    raise ArityError("mu_direct supports rank <= 2")


def mu_points(gh: np.ndarray, grid: Grid, eps: float, shift: int, eta, deriv: bool = False) -> np.ndarray:
    """Rank-1 ``mu(xi_a, eta)`` for one lattice shift ``a`` (``xi = a pi/L``) and real ``eta``.

    ``deriv=True`` returns ``d mu/d eta``.
    """
    n = grid.points
    p = grid.k
    i = np.arange(n)
    j = i - shift
    ok = (j >= 0) & (j < n)
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if not ok.any():
        return np.zeros(eta.shape, dtype=complex)
    i, j = i[ok], j[ok]
    mid = 0.5 * (p[i] + p[j])
    vals = gh[i, j] * (-1j * eps * mid) if deriv else gh[i, j]
    return np.exp(-1j * eps * np.multiply.outer(eta, mid)) @ vals


def free_evolve(gamma: DensityMatrix, eps: float, t: float) -> DensityMatrix:
    """Exact free flow ``e^{-itH} gamma e^{itH}``, ``H = -eps^2 Delta/2`` with ``i eps d_t = H``."""
    k2 = gamma.grid.k_fft ** 2
    ph = np.exp(-0.5j * eps * k2 * t)
    K = np.asarray(gamma.kernel, dtype=complex)
    r = gamma.rank
    for ax in range(r):
        K = np.fft.ifft(np.fft.fft(K, axis=ax) * _along(ph, ax, 2 * r), axis=ax)
        K = np.fft.fft(np.fft.ifft(K, axis=r + ax) * _along(ph.conj(), r + ax, 2 * r), axis=r + ax)
    return DensityMatrix(gamma.grid, r, K)


def _along(vec, ax, ndim):
    shp = [1] * ndim
    shp[ax] = vec.size
    return vec.reshape(shp)


def mu_transform(obj, eps: float = None, inverse: bool = False):
    """Forward: Wigner function or density matrix to mu.  Inverse: mu to Wigner."""
    if inverse:
        if not isinstance(obj, MuFunction):
            raise StructuralError("inverse mu_transform expects a MuFunction")
        return wigner_from_mu(obj)
    if isinstance(obj, WignerFunction):
        return mu_from_wigner(obj)
    if isinstance(obj, DensityMatrix):
        if eps is None:
            raise StructuralError("epsilon required for a density-matrix input")
        _check_eps(obj.grid, eps)
        return mu_direct(obj, eps)
    raise StructuralError(f"cannot transform {type(obj).__name__}")


def mu_restrict(mu: MuFunction, k: int) -> MuFunction:
    """Marginal by restriction: ``mu^(k)(xi, eta) = mu(xi, 0; eta, 0)``."""
    if k > mu.rank:
        raise ArityError(f"k = {k} exceeds rank {mu.rank}")
    i0 = int(np.argmin(np.abs(mu.xi)))
    j0 = int(np.argmin(np.abs(mu.eta)))
    idx = [slice(None)] * k + [i0] * (mu.rank - k) + [slice(None)] * k + [j0] * (mu.rank - k)
    return MuFunction(mu.grid, k, mu.epsilon, mu.xi, mu.eta, mu.values[tuple(idx)], mu.window)


def marginal(W: WignerFunction, k: int, path: str = "integrate") -> WignerFunction:
    """Integrate out the last ``rank - k`` slots (or restrict mu, ``path='mu'``)."""
    if k > W.rank:
        raise ArityError(f"k = {k} exceeds rank {W.rank}")
    if k == W.rank:
        return W
    if path == "mu":
        return wigner_from_mu(mu_restrict(mu_from_wigner(W), k))
    r = W.rank
    axes = tuple(range(k, r)) + tuple(range(r + k, 2 * r))
    vals = W.values.sum(axis=axes) * (W.xgrid.spacing * W.vgrid.spacing) ** (r - k)
    return WignerFunction(W.grid, k, W.epsilon, vals, W.imag_residue, W.window_leak, W.window)


# ---------------------------------------------------------------- Husimi

def husimi(W: WignerFunction, delta1: float, delta2: float, method: str = "auto") -> PhaseField:
    """``H = W *_x G_delta1 *_v G_delta2``.

    ``method='spectral'`` applies the Gaussian multiplier to mu,
    ``H = (2 pi)^{-2k} int mu exp(-delta1^2 xi^2/4 - delta2^2 eta^2/4 + i xi x + i eta v)``.
    ``method='coherent'`` (rank 1, ``delta1 delta2 >= eps``) splits the widths as
    ``a b = eps`` and computes the coherent-state core on the torus followed by
    nonnegative sampled Gaussian smoothing; it is nonnegative by construction.
    ``'auto'`` picks ``coherent`` whenever it applies.
    """
    xg, vg = W.xgrid, W.vgrid
    if delta1 < 2 * xg.spacing or delta2 < 2 * vg.spacing:
        raise ResolutionError(
            f"Husimi widths ({delta1:.3g}, {delta2:.3g}) below twice the spacings "
            f"({xg.spacing:.3g}, {vg.spacing:.3g})")
    eps = W.epsilon
    coherent_ok = W.rank == 1 and delta1 * delta2 >= eps * (1 - 1e-12)
    if method == "auto":
        method = "coherent" if coherent_ok else "spectral"
    if method == "coherent":
        if not coherent_ok:
            raise StructuralError("coherent route needs rank 1 and delta1 delta2 >= eps")
        a = sqrt(eps * delta1 / delta2)
        Q = coherent_husimi(inverse_wigner(W), eps, a, xg.x, vg.x)
        r1 = sqrt(max(delta1 ** 2 - a ** 2, 0.0))
        r2 = sqrt(max(delta2 ** 2 - (eps / a) ** 2, 0.0))
        Q = _circular_smooth(Q, r1, xg.spacing, axis=0)
        Q = _circular_smooth(Q, r2, vg.spacing, axis=1)
        return PhaseField(xg, vg, Q, 1, "husimi")
    mu = mu_from_wigner(W)
    k = W.rank
    vals = mu.values
    for s in range(k):
        shp = [1] * (2 * k)
        shp[s] = mu.xi.size
        vals = vals * np.exp(-delta1 ** 2 * mu.xi ** 2 / 4).reshape(shp)
        shp = [1] * (2 * k)
        shp[k + s] = mu.eta.size
        vals = vals * np.exp(-delta2 ** 2 * mu.eta ** 2 / 4).reshape(shp)
    H = _phase_fft(vals, k, xg, vg, inverse=True).real
    return PhaseField(xg, vg, H, k, "husimi")


def _circular_smooth(values: np.ndarray, width: float, spacing: float, axis: int) -> np.ndarray:
    """Circular convolution with the periodized sampled Gaussian, normalized to unit discrete mass."""
    if width <= 0:
        return values
    n = values.shape[axis]
    z = (np.arange(n) - n // 2) * spacing
    period = n * spacing
    images = int(np.ceil(6 * width / period))
    w = sum(np.exp(-(z + j * period) ** 2 / width ** 2) for j in range(-images, images + 1))
    w = np.fft.ifftshift(w / w.sum())
    shp = [1] * values.ndim
    shp[axis] = n
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * np.fft.fft(w).reshape(shp), axis=axis)
    return out.real


def coherent_husimi(gamma: DensityMatrix, eps: float, delta1: float, x=None, v=None) -> np.ndarray:
    """``(2 pi eps)^{-1} <f_{x,v}, gamma f_{x,v}>`` with periodized coherent states.

    ``f_{x,v}(z) = (pi delta1^2)^{-1/4} exp(-(z-x)^2/(2 delta1^2) + i v z/eps)``; equals the
    Husimi function at ``delta2 = eps/delta1``.
    """
    grid = gamma.grid
    if x is None:
        x = Grid(2 * grid.points, grid.extent).x
    if v is None:
        v = velocity_grid(grid, eps).x
    z = grid.x
    L2 = 2 * grid.extent
    d = (z[None, :] - np.asarray(x)[:, None] + grid.extent) % L2 - grid.extent
    env = np.zeros_like(d)
    for img in (-1, 0, 1):
        env = env + np.exp(-(d + img * L2) ** 2 / (2 * delta1 ** 2))
    env *= (pi * delta1 ** 2) ** -0.25
    G = gamma.matrix() * grid.spacing
    out = np.empty((len(x), len(v)))
    for iv, vv in enumerate(v):
        f = env * np.exp(1j * vv * z / eps)[None, :]             # rows: x
        out[:, iv] = np.real(np.sum((f.conj() @ G) * f, axis=1)) * grid.spacing
    return out / (2 * pi * eps)


def phase_export(field_values: np.ndarray, xg: Grid, vg: Grid, meta: dict):
    """Rows ``(x, v, value)`` and a JSON-ready header for plot-ready CSV output."""
    X, V = np.meshgrid(xg.x, vg.x, indexing="ij")
    rows = np.column_stack([X.ravel(), V.ravel(), np.asarray(field_values).ravel()])
    return rows, dict(meta, x_points=xg.points, v_points=vg.points)
