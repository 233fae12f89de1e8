"""Constructors for small initial states and for the radial lower-bound spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .radial import ProfileSet, RadialProfile
from .spectral import (ConfigurationError, SpectralGrid, State, _smooth_step, dealias,
                       hermitian_symmetrize, leray_project, to_physical)

KINDS = ("generic-gaussian", "lower-bound", "single-mode", "zero")
MAX_AMPLITUDE = 0.1


@dataclass
class DataSpec:
    """Initial-data recipe; ``metadata`` is filled by the constructors."""

    kind: str = "generic-gaussian"
    amplitude: float = 1e-2
    width: float = 5.0
    seed: int = 0
    c: float = 1.0
    s: int = 3
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"data.kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 <= self.amplitude <= MAX_AMPLITUDE:
            raise ConfigurationError(f"data.amplitude must lie in [0, {MAX_AMPLITUDE}], got {self.amplitude}")
        if not self.width > 0:
            raise ConfigurationError(f"data.width must be positive, got {self.width}")
        if not self.c > 0:
            raise ConfigurationError(f"c must be positive, got {self.c}")


def upsample(fhat: np.ndarray, n_new: int) -> np.ndarray:
    """Zero-pad coefficients to an ``n_new`` lattice (Nyquist modes dropped)."""
    n = fhat.shape[-1]
    if n_new < n:
        raise ValueError("n_new must not be smaller than the current size")
    k = np.fft.fftfreq(n, 1.0 / n).astype(int)
    keep = np.abs(k) < n // 2
    idx = np.where(keep)[0]
    tgt = k[keep] % n_new
    out = np.zeros(fhat.shape[:-3] + (n_new,) * 3, dtype=complex)
    out[..., tgt[:, None, None], tgt[None, :, None], tgt[None, None, :]] = \
        fhat[..., idx[:, None, None], idx[None, :, None], idx[None, None, :]]
    return out


def _gaussian_hat(grid: SpectralGrid, width: float, center) -> np.ndarray:
    """Coefficients of the periodised exp(-|x - center|^2 / (2 width^2))."""
    norm = (2 * np.pi * width**2) ** 1.5 / grid.volume
    phase = np.exp(-1j * np.tensordot(np.asarray(center), grid.xi_sym, axes=(0, 0)))
    return norm * np.exp(-0.5 * width**2 * grid.xi_mag_sq) * phase


def generic_gaussian(spec: DataSpec, grid: SpectralGrid) -> State:
    """Seven randomly placed and signed Gaussian bumps, v projected, scaled so ||.||_{H^s} = amplitude."""
    rng = np.random.default_rng(spec.seed)
    comps = []
    for _ in range(7):
        center = grid.box_length * (0.5 + 0.1 * rng.standard_normal(3))
        width = spec.width * (1.0 + 0.1 * rng.uniform(-1, 1))
        comps.append(rng.standard_normal() * _gaussian_hat(grid, width, center))
    U = dealias(grid, hermitian_symmetrize(np.array(comps)))
    U[4:7] = leray_project(grid, U[4:7])
    from .diagnostics import hs_norm_sq, l1_norm

    size = np.sqrt(hs_norm_sq(grid, U, spec.s))
    U = U * (spec.amplitude / size) if size > 0 else U
    state = State.from_stacked(grid, U, 0.0, spec.c)
    state.meta.update(kind=spec.kind, amplitude=spec.amplitude, seed=spec.seed,
                      width=spec.width, I0=l1_norm(state, refine=1))
    spec.metadata.update(state.meta)
    return state


def smooth_indicator(r0: float, c0: float = 1.0):
    """c0 on [0, r0/2], C-infinity ramp to 0 on [r0/2, r0]."""
    def f(r):
        r = np.asarray(r, float)
        return c0 * (1.0 - _smooth_step((r - 0.5 * r0) / (0.5 * r0)))
    return f


def lower_bound_profiles(c0: float = 1.0, r0: float = 0.25, cone_half_angle: float = np.pi / 12) -> ProfileSet:
    """Radial spectra with |phi0_hat| = c0 near 0, gradient u0 and cone-bounded solenoidal v0.

    u0_hat = i xi g(|xi|) is a pure gradient, so the solenoidal u sector is absent.
    v0_hat = (I - xi xi^t/|xi|^2) w0 h(|xi|) has modulus h sin(angle(xi, w0)),
    bounded below by c0 sin(a) outside the cone of half-angle a around w0.
    """
    if not c0 > 0 or not r0 > 0:
        raise ConfigurationError("c0 and r0 must be positive")
    if not 0 <= cone_half_angle < np.pi / 2:
        raise ConfigurationError("cone_half_angle must lie in [0, pi/2)")
    ind = smooth_indicator(r0, c0)
    return ProfileSet(
        density=RadialProfile(ind, "density", r0),
        curl_free=RadialProfile(lambda r: np.asarray(r) * ind(r), "curl_free", r0),
        solenoidal_u=None,
        solenoidal_v=RadialProfile(ind, "solenoidal_v", r0),
        xi_max=r0,
        cone_half_angle=cone_half_angle,
    )


def single_mode(grid: SpectralGrid, kind: str, k, amplitude: float, polarization=(0.0, 0.0, 1.0), c: float = 1.0) -> State:
    """State with ``amplitude * cos(xi_k . x)`` (times ``polarization`` for u, v) and all else zero."""
    k = np.asarray(k, dtype=int)
    if k.shape != (3,) or np.any(np.abs(k) >= grid.n // 2):
        raise ConfigurationError(f"mode {tuple(k)} is not an interior lattice mode")
    if kind not in ("phi", "u", "v"):
        raise ConfigurationError(f"single-mode kind must be phi, u or v, got {kind!r}")
    state = State.zeros(grid, c)
    pol = np.asarray(polarization, float)
    xi = grid.dk * k
    if kind == "v":
        if np.any(k):
            pol = pol - xi * (xi @ pol) / (xi @ xi)
        if np.linalg.norm(pol) < 1e-12:
            raise ConfigurationError("v polarisation parallel to the wave vector cannot be solenoidal")
    n = grid.n
    i, j = tuple(k % n), tuple(-k % n)
    coeff = amplitude if not np.any(k) else 0.5 * amplitude
    if kind == "phi":
        state.phi[i] += coeff
        if np.any(k):
            state.phi[j] += coeff
    else:
        arr = state.u if kind == "u" else state.v
        arr[(slice(None),) + i] += coeff * pol
        if np.any(k):
            arr[(slice(None),) + j] += coeff * pol
    return state


def make_state(spec: DataSpec, grid: SpectralGrid, mode=(1, 0, 0), field_kind: str = "phi") -> State:
    if spec.kind == "zero" or spec.amplitude == 0:
        return State.zeros(grid, spec.c)
    if spec.kind == "generic-gaussian":
        return generic_gaussian(spec, grid)
    if spec.kind == "single-mode":
        return single_mode(grid, field_kind, mode, spec.amplitude, c=spec.c)
    raise ConfigurationError("lower-bound data is radial; use lower_bound_profiles")


def physical_fields(state: State):
    return to_physical(state.phi), to_physical(state.u), to_physical(state.v)
