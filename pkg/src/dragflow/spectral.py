"""Periodic spectral grid, symbols, Leray projection, cut-offs and dealiasing.

Fields are stored as full ``fftn`` coefficient arrays normalised so that

    f(x) = sum_k fhat[k] * exp(i xi_k . x),   fhat = fftn(f) / n**3,

which makes ``||f||_{L^2}^2 = L**3 * sum |fhat|**2`` on the box ``[0, L)^3``.
Scalar fields have shape ``(n, n, n)``; vector fields ``(3, n, n, n)``.

Odd-order symbols (gradient, divergence, Leray) use wavenumbers with the
Nyquist component set to zero, so ``xi(-k) = -xi(k)`` holds on every mode and
all symbols map real fields to real fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft


class ConfigurationError(ValueError):
    """Raised for invalid grid, cut-off or run parameters."""


@dataclass(frozen=True)
class SpectralGrid:
    """Wavenumber lattice of the periodic box ``[0, L)^3`` with ``n`` modes per axis."""

    n: int
    box_length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ConfigurationError(f"n_per_axis must be an even integer >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ConfigurationError(f"box_length must be positive, got {self.box_length}")

    @cached_property
    def k_int(self) -> np.ndarray:
        """Integer mode indices per axis, in FFT order, covering [-n/2, n/2)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @cached_property
    def k_axes(self) -> np.ndarray:
        """Integer lattice coordinates, shape (3, n, n, n)."""
        return np.array(np.meshgrid(self.k_int, self.k_int, self.k_int, indexing="ij"))

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.box_length

    @cached_property
    def xi(self) -> np.ndarray:
        """Wavenumbers 2*pi*k/L of every mode, shape (3, n, n, n)."""
        return self.dk * self.k_axes.astype(float)

    @cached_property
    def xi_sym(self) -> np.ndarray:
        """Wavenumbers used by odd symbols: Nyquist component zeroed."""
        out = self.xi.copy()
        out[self.k_axes == -self.n // 2] = 0.0
        return out

    @cached_property
    def xi_mag(self) -> np.ndarray:
        """|xi| built from the symbol wavenumbers (consistent with Leray and kernel)."""
        return np.sqrt(np.sum(self.xi_sym**2, axis=0))

    @cached_property
    def xi_mag_sq(self) -> np.ndarray:
        return np.sum(self.xi_sym**2, axis=0)

    @cached_property
    def xi_unit(self) -> np.ndarray:
        """xi/|xi| on the symbol wavenumbers, zero at xi = 0."""
        out = np.zeros_like(self.xi_sym)
        nz = self.xi_mag > 0
        out[:, nz] = self.xi_sym[:, nz] / self.xi_mag[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.abs(self.k_axes) <= self.n / 3.0
        return np.all(keep, axis=0)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def volume(self) -> float:
        return self.box_length**3

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        """Physical sample coordinates, shape (3, n, n, n)."""
        x1 = np.arange(self.n) * self.dx
        return np.array(np.meshgrid(x1, x1, x1, indexing="ij"))

    def mode_set(self) -> set[tuple[float, float, float]]:
        """All lattice wavenumbers as a set of rounded triples."""
        pts = self.xi.reshape(3, -1).T
        return {tuple(np.round(p, 12)) for p in pts}


def build_grid(n_per_axis: int, box_length: float) -> SpectralGrid:
    return SpectralGrid(int(n_per_axis), float(box_length))


# --- transforms -----------------------------------------------------------

def to_spectral(f: np.ndarray) -> np.ndarray:
    """Physical samples -> normalised coefficients (transforms the last three axes)."""
    n = f.shape[-1]
    return sfft.fftn(f, axes=(-3, -2, -1)) / n**3


def to_physical(fhat: np.ndarray) -> np.ndarray:
    """Normalised coefficients -> real physical samples."""
    n = fhat.shape[-1]
    return sfft.ifftn(fhat * n**3, axes=(-3, -2, -1)).real


def hermitian_symmetrize(fhat: np.ndarray) -> np.ndarray:
    """Project coefficients onto the spectra of real fields."""
    return to_spectral(to_physical(fhat))


def hermitian_defect(fhat: np.ndarray) -> float:
    """max |fhat(-k) - conj(fhat(k))| over all modes."""
    flipped = np.roll(np.flip(fhat, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))
    return float(np.max(np.abs(flipped - np.conj(fhat)), initial=0.0))


# --- symbols --------------------------------------------------------------

def gradient(grid: SpectralGrid, fhat: np.ndarray) -> np.ndarray:
    return 1j * grid.xi_sym * fhat


def partial(grid: SpectralGrid, fhat: np.ndarray, i: int) -> np.ndarray:
    return 1j * grid.xi_sym[i] * fhat


def divergence(grid: SpectralGrid, vhat: np.ndarray) -> np.ndarray:
    return 1j * np.sum(grid.xi_sym * vhat, axis=0)


def curl(grid: SpectralGrid, vhat: np.ndarray) -> np.ndarray:
    return 1j * np.cross(grid.xi_sym, vhat, axis=0)


def lambda_power(grid: SpectralGrid, fhat: np.ndarray, p: float) -> np.ndarray:
    """Apply Lambda^p (symbol |xi|^p); for p < 0 the zero mode maps to 0."""
    if p == 0:
        return fhat.copy()
    mag = grid.xi_mag
    if p > 0:
        return mag**p * fhat
    sym = np.zeros_like(mag)
    nz = mag > 0
    sym[nz] = mag[nz] ** p
    return sym * fhat


def inverse_neg_laplacian(grid: SpectralGrid, fhat: np.ndarray) -> np.ndarray:
    return lambda_power(grid, fhat, -2)


def spectral_derivative(grid: SpectralGrid, fhat: np.ndarray, symbol: str, arg=None):
    """Dispatch on a symbol name.

    ``symbol`` is one of ``"gradient"`` (component ``arg`` or all three when
    ``arg`` is None), ``"divergence"``, ``"curl"`` or ``"lambda"`` (power ``arg``).
    """
    if symbol == "gradient":
        return gradient(grid, fhat) if arg is None else partial(grid, fhat, int(arg))
    if symbol == "divergence":
        return divergence(grid, fhat)
    if symbol == "curl":
        return curl(grid, fhat)
    if symbol == "lambda":
        return lambda_power(grid, fhat, float(arg))
    raise ValueError(f"unknown symbol {symbol!r}")


def unit_xi(grid: SpectralGrid) -> np.ndarray:
    """xi/|xi|, zero at xi = 0."""
    return grid.xi_unit


def leray_project(grid: SpectralGrid, vhat: np.ndarray) -> np.ndarray:
    """Apply the symbol I - xi xi^t/|xi|^2 (identity at xi = 0)."""
    e = unit_xi(grid)
    return vhat - e * np.sum(e * vhat, axis=0)


def longitudinal_part(grid: SpectralGrid, vhat: np.ndarray) -> np.ndarray:
    """Apply xi xi^t/|xi|^2 (zero at xi = 0)."""
    e = unit_xi(grid)
    return e * np.sum(e * vhat, axis=0)


# --- frequency splitting --------------------------------------------------

def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(s, 0.0, 1.0)
    a = np.zeros_like(s)
    b = np.zeros_like(s)
    pos = s > 0
    a[pos] = np.exp(-1.0 / s[pos])
    neg = s < 1
    b[neg] = np.exp(-1.0 / (1.0 - s[neg]))
    return a / (a + b)


@dataclass(frozen=True)
class FrequencyCutoff:
    """Low-pass profile chi_1(|xi|): 1 on [0, r0], 0 on [R0, inf)."""

    r0: float = 0.25
    R0: float = 1.0
    sharp: bool = False

    def __post_init__(self):
        if not (0 < self.r0 < self.R0):
            raise ConfigurationError(f"need 0 < r0 < R0, got r0={self.r0}, R0={self.R0}")

    def profile(self, xi_mag) -> np.ndarray:
        xi_mag = np.asarray(xi_mag, dtype=float)
        if self.sharp:
            # Indicator variant; the step sits at r0 so both orderings hold with r0 = R0.
            return (xi_mag <= self.r0).astype(float)
        return 1.0 - _smooth_step((xi_mag - self.r0) / (self.R0 - self.r0))

    @property
    def low_radius(self) -> float:
        """Largest |xi| in the low part's support."""
        return self.r0 if self.sharp else self.R0

    @property
    def high_radius(self) -> float:
        """Smallest |xi| in the high part's support."""
        return self.r0


def cutoff_split(grid: SpectralGrid, fhat: np.ndarray, cut: FrequencyCutoff):
    chi = cut.profile(grid.xi_mag)
    low = chi * fhat
    return low, fhat - low


def dealias(grid: SpectralGrid, fhat: np.ndarray) -> np.ndarray:
    """Two-thirds rule: zero every mode with some |k_i| > n/3."""
    return fhat * grid.dealias_mask


# --- state ----------------------------------------------------------------

@dataclass
class State:
    """Perturbation (phi, u, v) in spectral form at time ``t`` with drag constant ``c``.

    ``phi`` is the log-density perturbation a - a_*, ``c = rho_* = exp(a_*)``.
    """

    grid: SpectralGrid
    phi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0
    c: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shp = self.grid.shape
        if self.phi.shape != shp or self.u.shape != (3, *shp) or self.v.shape != (3, *shp):
            raise ConfigurationError("phi, u and v must live on the state's grid")
        if not self.c > 0:
            raise ConfigurationError(f"c must be positive, got {self.c}")

    @classmethod
    def zeros(cls, grid: SpectralGrid, c: float = 1.0, t: float = 0.0) -> "State":
        z = np.zeros(grid.shape, dtype=complex)
        return cls(grid, z, np.zeros((3, *grid.shape), complex), np.zeros((3, *grid.shape), complex), t, c)

    def copy(self, **changes) -> "State":
        kw = dict(grid=self.grid, phi=self.phi.copy(), u=self.u.copy(), v=self.v.copy(),
                  t=self.t, c=self.c, meta=dict(self.meta))
        kw.update(changes)
        return State(**kw)

    def stacked(self) -> np.ndarray:
        """All seven coefficient arrays, shape (7, n, n, n)."""
        return np.concatenate([self.phi[None], self.u, self.v])

    @classmethod
    def from_stacked(cls, grid, arr, t=0.0, c=1.0, meta=None) -> "State":
        return cls(grid, arr[0], arr[1:4], arr[4:7], t, c, dict(meta or {}))

    def divergence_defect(self) -> float:
        """max_k |xi . vhat| relative to max |vhat| (0 for v = 0)."""
        scale = np.max(np.abs(self.v))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(np.sum(self.grid.xi_sym * self.v, axis=0))) / (scale * max(1.0, np.max(self.grid.xi_mag))))
