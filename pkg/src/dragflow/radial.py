"""Whole-space L^2 norms of the linear evolution by 1-D radial quadrature.

Initial spectra are radially structured:

* density-like:   phi0_hat(xi) = a(|xi|)
* curl-free u:    u0_hat(xi)   = i (xi/|xi|) b(|xi|)
* solenoidal u,v: u0_hat = h_u(|xi|) e(xi),  v0_hat = h_v(|xi|) e(xi),
  with e(xi) = (I - xi xi^t/|xi|^2) w0 for a fixed unit vector w0.

The Green matrix preserves this structure, so every L^2 norm reduces to
``int_0^Xi r^{2j} |amplitude(r, t)|^2 r^2 dr`` times an exact angular factor:
4 pi for the scalar and curl-free sectors, and ``int sin^2(theta) dOmega`` for
the solenoidal sector (optionally over directions outside a cone around w0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernel import kernel_weights

CHANNELS = ("phi", "u", "v", "u_minus_v", "total", "v_cone")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    """Amplitude ``f(|xi|)`` of one sector, zero beyond ``support``."""

    amplitude: Callable[[np.ndarray], np.ndarray]
    tag: str
    support: float = np.inf

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.asarray(self.amplitude(r), dtype=complex)
        return np.where(r <= self.support, out, 0.0)


@dataclass(frozen=True)
class ProfileSet:
    density: Optional[RadialProfile] = None
    curl_free: Optional[RadialProfile] = None
    solenoidal_u: Optional[RadialProfile] = None
    solenoidal_v: Optional[RadialProfile] = None
    xi_max: float = 10.0
    # half-angle (radians) of the excluded cone around the polarisation w0
    cone_half_angle: float = 0.0

    def amplitudes(self, r):
        def ev(p):
            return np.zeros(np.shape(r), complex) if p is None else p(r)
        return ev(self.density), ev(self.curl_free), ev(self.solenoidal_u), ev(self.solenoidal_v)


def solenoidal_angular_factor(cone_half_angle: float = 0.0) -> float:
    """int sin^2(theta) dOmega over theta in [a, pi - a]."""
    ca = np.cos(cone_half_angle)
    return 4.0 * np.pi * (ca - ca**3 / 3.0)


def gaussian_profile(tag: str, amplitude: float, width: float, tol: float = 1e-13) -> RadialProfile:
    """amplitude * exp(-width^2 r^2 / 2), cut where it drops below ``tol`` relative."""
    support = np.sqrt(-2.0 * np.log(tol)) / width
    return RadialProfile(lambda r: amplitude * np.exp(-0.5 * (width * r) ** 2), tag, support)


def evolve_amplitudes(profiles: ProfileSet, r, t: float, c: float):
    """Radial amplitudes of (phi, curl-free u, solenoidal u, v) at time ``t``."""
    a, b, hu, hv = profiles.amplitudes(r)
    w = kernel_weights(r, t, c)
    phi = w.E1 * a + w.D1 * r * b
    ucf = -r * w.D1 * a + w.F1 * b
    usol = w.E2 * hu + w.D2 * hv
    v = c * w.D2 * hu + w.F2 * hv
    return phi, ucf, usol, v


def _integrand(profiles, r, t, c, js):
    """Channel integrands, shape (len(js), len(CHANNELS), len(r))."""
    phi, ucf, usol, v = evolve_amplitudes(profiles, r, t, c)
    sol = solenoidal_angular_factor(0.0)
    cone = solenoidal_angular_factor(profiles.cone_half_angle)
    p2, cf2, us2, v2 = abs(phi) ** 2, abs(ucf) ** 2, abs(usol) ** 2, abs(v) ** 2
    d2 = abs(usol - v) ** 2
    base = np.stack([
        4 * np.pi * p2,
        4 * np.pi * cf2 + sol * us2,
        sol * v2,
        4 * np.pi * cf2 + sol * d2,
        4 * np.pi * (p2 + cf2) + sol * (us2 + v2),
        cone * v2,
    ]) * r**2
    return np.stack([base * r ** (2 * j) for j in js])


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _gauss_panels(f, a, b):
    """Gauss-Legendre on many panels at once; f maps (m, 20) nodes -> (..., m, 20)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = f(nodes)
    return np.sum(vals * _GL_W, axis=-1) * half


def adaptive_gauss(f, breaks, rtol: float = 1e-11, max_rounds: int = 40):
    """Adaptive composite Gauss-Legendre of a vector-valued integrand.

    Each panel is accepted when its 20-point value agrees with the sum over its
    two halves to ``rtol`` relative to the running total.
    """
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1], breaks[1:]
    total = 0.0
    for _ in range(max_rounds):
        whole = _gauss_panels(f, a, b)
        m = 0.5 * (a + b)
        left = _gauss_panels(f, a, m)
        right = _gauss_panels(f, m, b)
        halves = left + right
        err = np.abs(whole - halves)
        scale = np.abs(total + np.sum(halves, axis=-1))
        scale = np.where(scale > 0, scale, 1.0)
        ok = np.all(err <= rtol * scale[..., None] / max(len(a), 1) + 1e-300, axis=tuple(range(err.ndim - 1)))
        total = total + np.sum(halves[..., ok], axis=-1)
        if np.all(ok):
            return total
        a, b = np.concatenate([a[~ok], m[~ok]]), np.concatenate([m[~ok], b[~ok]])
    raise DomainError("adaptive quadrature did not converge; integrand may not be integrable")


def _breakpoints(profiles: ProfileSet, t: float, r0: float = 0.25):
    xmax = profiles.xi_max
    s = 1.0 / np.sqrt(1.0 + t)
    pts = {0.0, xmax, 0.5, r0}
    pts.update(s * 2.0 ** k for k in range(-4, 8))
    for p in (profiles.density, profiles.curl_free, profiles.solenoidal_u, profiles.solenoidal_v):
        if p is not None and np.isfinite(p.support):
            pts.add(p.support)
    return np.array(sorted(x for x in pts if 0.0 <= x <= xmax))


def radial_channels(profiles: ProfileSet, t: float, c: float, js=(0,)) -> dict:
    """L^2 norms of grad^j of every channel at time ``t``: {(channel, j): norm}."""
    if not np.isfinite(profiles.xi_max) or profiles.xi_max <= 0:
        raise DomainError("xi_max must be finite and positive")
    js = tuple(int(j) for j in js)
    if any(j < 0 or j > 6 for j in js):
        raise DomainError("derivative order must lie in 0..6")
    with np.errstate(all="ignore"):
        probe = _integrand(profiles, np.array([profiles.xi_max]), 0.0, c, (0,))
    if not np.all(np.isfinite(probe)):
        raise DomainError("profile is not finite on [0, xi_max]")
    vals = adaptive_gauss(lambda r: _integrand(profiles, r, t, c, js), _breakpoints(profiles, t))
    return {(ch, j): float(np.sqrt(max(vals[i, k], 0.0)))
            for i, j in enumerate(js) for k, ch in enumerate(CHANNELS)}


def radial_norm(profiles: ProfileSet, t: float, j: int, c: float, channel: str = "total") -> float:
    return radial_channels(profiles, t, c, (j,))[(channel, j)]


def radial_series(profiles: ProfileSet, times, c: float, js=(0, 1, 2)) -> dict:
    """{(channel, j): array of norms over ``times``}."""
    out = {}
    for t in times:
        for key, val in radial_channels(profiles, float(t), c, js).items():
            out.setdefault(key, []).append(val)
    return {k: np.array(v) for k, v in out.items()}


def lattice_norms(profiles: ProfileSet, t: float, c: float, spacing: float, extent: float,
                  w0=(0.0, 0.0, 1.0), j: int = 0) -> dict:
    """Brute-force 3-D Riemann sum of the same norms (validation oracle).

    Builds the full 7-component spectrum on a cubic xi-lattice, propagates it
    mode by mode and sums squared moduli.
    """
    from .kernel import propagate_modes

    m = int(round(2 * extent / spacing))
    g = (np.arange(m) - 0.5 * (m - 1)) * spacing
    X = np.array(np.meshgrid(g, g, g, indexing="ij"))
    r = np.sqrt(np.sum(X * X, axis=0))
    e = np.divide(X, r, out=np.zeros_like(X), where=r > 0)
    w0 = np.asarray(w0, float) / np.linalg.norm(w0)
    pol = w0[:, None, None, None] - e * np.tensordot(w0, e, axes=(0, 0))
    a, b, hu, hv = profiles.amplitudes(r)
    U = np.concatenate([a[None], 1j * e * b + pol * hu, pol * hv])
    out = propagate_modes(X, U, t, c)
    weight = r ** (2 * j) * spacing**3
    phi2 = np.sum(abs(out[0]) ** 2 * weight)
    u2 = np.sum(np.sum(abs(out[1:4]) ** 2, axis=0) * weight)
    v2 = np.sum(np.sum(abs(out[4:7]) ** 2, axis=0) * weight)
    d2 = np.sum(np.sum(abs(out[1:4] - out[4:7]) ** 2, axis=0) * weight)
    return {"phi": np.sqrt(phi2), "u": np.sqrt(u2), "v": np.sqrt(v2),
            "u_minus_v": np.sqrt(d2), "total": np.sqrt(phi2 + u2 + v2)}
