"""Closed-form Fourier propagator of the linearised Euler/Navier-Stokes drag system.

The linear operator splits, per wavenumber, into an acoustic pair
(phi, Lambda^{-1} div u) with eigenvalues solving ``l^2 + l + |xi|^2 = 0`` and a
solenoidal pair (P u, v) with eigenvalues solving
``l^2 + (c + 1 + |xi|^2) l + |xi|^2 = 0``.  Every entry of the Green matrix is
one of six real weights built from those roots; see :func:`kernel_weights`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .spectral import SpectralGrid, State

CONFLUENT_BAND = 1e-6


class PreconditionError(ValueError):
    """Input violates an operation's precondition (e.g. non-solenoidal v)."""


class OracleFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenQuadruple:
    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda3: np.ndarray
    lambda4: np.ndarray
    xi_mag: np.ndarray
    c: float
    # lambda1 - lambda2 and lambda3 - lambda4, computed without cancellation
    gap1: np.ndarray
    gap2: np.ndarray


def eigenvalues(xi_mag, c: float) -> EigenQuadruple:
    """Roots of both dispersion quadratics; broadcasts over ``xi_mag``.

    The large-magnitude root comes from the quadratic formula and the small
    one from the product of roots, so lambda1 and lambda3 keep full relative
    accuracy as |xi| -> 0.
    """
    r = np.asarray(xi_mag, dtype=float)
    r2 = r * r
    s1 = np.sqrt((1.0 - 4.0 * r2).astype(complex))
    lam2 = (-1.0 - s1) / 2.0
    lam1 = r2 / lam2
    b = c + 1.0 + r2
    s2 = np.sqrt(((r - 1.0) ** 2 + c) * ((r + 1.0) ** 2 + c))
    lam4 = (-b - s2) / 2.0
    lam3 = r2 / lam4
    return EigenQuadruple(lam1, lam2, lam3, lam4, r, float(c), s1, s2)


def _expm1(z):
    """expm1 for complex arguments, accurate near 0."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2 + 1j * np.exp(x) * np.sin(y)


def _phi1(z):
    """(e^z - 1)/z with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    # short series near 0 (truncation < 1e-21); also avoids dividing by subnormals
    out = 1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0
    big = np.abs(z) >= 1e-5
    out[big] = _expm1(z[big]) / z[big]
    return out


@dataclass(frozen=True)
class KernelWeights:
    E1: np.ndarray
    D1: np.ndarray
    F1: np.ndarray
    E2: np.ndarray
    D2: np.ndarray
    F2: np.ndarray

    def as_tuple(self):
        return (self.E1, self.D1, self.F1, self.E2, self.D2, self.F2)

    def as_dict(self):
        return asdict(self)


def kernel_weights(xi_mag, t, c: float, return_imag: bool = False):
    """Six real weights of the Green matrix at (|xi|, t, c); broadcasts.

    D = (e^{l1 t} - e^{l2 t})/(l1 - l2) is evaluated as t e^{l1 t} phi1(-(l1-l2) t)
    with Re(l1) >= Re(l2), and the remaining weights follow from D without
    subtractive cancellation:

        E1 = e^{l1 t} - l1 D1          F1 = e^{l2 t} + l1 D1
        E2 = e^{l4 t} - (l4 + 1) D2    F2 = e^{l4 t} + (l3 + 1) D2

    Inside ``|l1 - l2| < 1e-6`` the acoustic weights use the confluent limits
    at l = -1/2.  With ``return_imag`` the largest discarded imaginary part is
    returned as well.
    """
    r, t = np.broadcast_arrays(np.asarray(xi_mag, float), np.asarray(t, float))
    shape = r.shape
    r, t = r.ravel(), t.ravel()
    ev = eigenvalues(r, c)
    l1, l2, l3, l4 = ev.lambda1, ev.lambda2, ev.lambda3, ev.lambda4

    e1 = np.exp(l1 * t)
    D1 = t * e1 * _phi1(-ev.gap1 * t)
    E1 = e1 - l1 * D1
    F1 = np.exp(l2 * t) + l1 * D1

    band = np.abs(ev.gap1) < CONFLUENT_BAND
    if np.any(band):
        tb = t[band]
        eb = np.exp(-0.5 * tb)
        D1[band] = tb * eb
        E1[band] = (1.0 + 0.5 * tb) * eb
        F1[band] = (1.0 - 0.5 * tb) * eb

    e3 = np.exp(l3 * t)
    e4 = np.exp(l4 * t)
    D2 = t * e3 * _phi1(-ev.gap2 * t).real
    E2 = e4 - (l4 + 1.0) * D2
    F2 = e4 + (l3 + 1.0) * D2

    imag = float(max(np.max(np.abs(np.imag(D1)), initial=0.0),
                     np.max(np.abs(np.imag(E1)), initial=0.0),
                     np.max(np.abs(np.imag(F1)), initial=0.0)))
    w = KernelWeights(*(np.reshape(x, shape) for x in (E1.real, D1.real, F1.real, E2, D2, F2)))
    return (w, imag) if return_imag else w


def kernel_weights_trig(xi_mag, t):
    """Acoustic weights on |xi| > 1/2 in real trigonometric form (cross-check)."""
    r, t = np.broadcast_arrays(np.asarray(xi_mag, float), np.asarray(t, float))
    om = np.sqrt(4.0 * r * r - 1.0) / 2.0
    damp = np.exp(-0.5 * t)
    cs, sn = np.cos(om * t), np.sin(om * t)
    return damp * (cs + sn / (2 * om)), damp * sn / om, damp * (cs - sn / (2 * om))


# --- 7x7 mode matrices ----------------------------------------------------

def _projectors(xi):
    xi = np.asarray(xi, dtype=float)
    mag = np.linalg.norm(xi)
    if mag == 0:
        return np.eye(3), np.zeros((3, 3))
    e = xi / mag
    Q = np.outer(e, e)
    return np.eye(3) - Q, Q


def symbol_matrix(xi, c: float) -> np.ndarray:
    """Fourier symbol B(xi) of the linear operator, so that dU/dt = -B U."""
    xi = np.asarray(xi, dtype=float)
    P, _ = _projectors(xi)
    B = np.zeros((7, 7), dtype=complex)
    B[0, 1:4] = 1j * xi
    B[1:4, 0] = 1j * xi
    B[1:4, 1:4] = np.eye(3)
    B[1:4, 4:7] = -np.eye(3)
    B[4:7, 1:4] = -c * P
    B[4:7, 4:7] = (c + xi @ xi) * np.eye(3)
    return B


def green_hat(xi, t: float, c: float) -> np.ndarray:
    """Assembled 7x7 Green matrix at wavenumber ``xi`` and time ``t``.

    The v-columns carry D2 I and F2 I as written for solenoidal data; on
    non-solenoidal v the matrix is not the semigroup (see :func:`admissible_projector`).
    """
    xi = np.asarray(xi, dtype=float)
    P, Q = _projectors(xi)
    w = kernel_weights(np.linalg.norm(xi), t, c)
    E1, D1, F1, E2, D2, F2 = (float(x) for x in w.as_tuple())
    G = np.zeros((7, 7), dtype=complex)
    G[0, 0] = E1
    G[0, 1:4] = -1j * xi * D1
    G[1:4, 0] = -1j * xi * D1
    G[1:4, 1:4] = E2 * P + F1 * Q
    G[1:4, 4:7] = D2 * np.eye(3)
    G[4:7, 1:4] = c * D2 * P
    G[4:7, 4:7] = F2 * np.eye(3)
    return G


def admissible_projector(xi) -> np.ndarray:
    """diag(1, I, P): restricts the v-input to solenoidal vectors."""
    P, _ = _projectors(xi)
    out = np.eye(7, dtype=complex)
    out[4:7, 4:7] = P
    return out


def expm_oracle(xi, t: float, c: float) -> np.ndarray:
    """exp(-t B(xi)) by scaling and squaring."""
    return expm(-t * symbol_matrix(xi, c))


def mode_ode_oracle(xi, t: float, c: float, rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Integrate dX/dt = -B(xi) X, X(0) = I with an adaptive 8th-order RK."""
    if t == 0:
        return np.eye(7, dtype=complex)
    B = symbol_matrix(xi, c)
    # real 2x-size form keeps the integrator on real arithmetic
    A = np.block([[-B.real, B.imag], [-B.imag, -B.real]])
    X0 = np.vstack([np.eye(7), np.zeros((7, 7))]).ravel()

    def rhs(_, y):
        return (A @ y.reshape(14, 7)).ravel()

    sol = solve_ivp(rhs, (0.0, t), X0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise OracleFailure(f"mode ODE oracle failed at t={t}: {sol.message}")
    Y = sol.y[:, -1].reshape(14, 7)
    return Y[:7] + 1j * Y[7:]


# --- lattice propagation --------------------------------------------------

def propagate_modes(xi, U, t, c: float, weights: KernelWeights | None = None) -> np.ndarray:
    """Apply the Green matrix mode by mode.

    ``xi`` has shape (3, ...) and ``U`` shape (7, ...); the trailing shapes
    broadcast.  v is assumed solenoidal.
    """
    xi = np.asarray(xi, dtype=float)
    mag = np.sqrt(np.sum(xi * xi, axis=0))
    if weights is None:
        weights = kernel_weights(mag, t, c)
    E1, D1, F1, E2, D2, F2 = weights.as_tuple()
    e = np.zeros_like(xi)
    nz = mag > 0
    e[:, nz] = xi[:, nz] / mag[nz]

    phi, u, v = U[0], U[1:4], U[4:7]
    div_u = 1j * np.sum(xi * u, axis=0)
    u_long = e * np.sum(e * u, axis=0)
    u_perp = u - u_long
    out = np.empty(np.broadcast_shapes(U.shape, (7,) + mag.shape), dtype=complex)
    out[0] = E1 * phi - D1 * div_u
    out[1:4] = -1j * xi * (D1 * phi) + F1 * u_long + E2 * u_perp + D2 * v
    out[4:7] = (c * D2) * u_perp + F2 * v
    return out


class Propagator:
    """Green-matrix weights on a grid at fixed ``dt``, reusable across steps."""

    def __init__(self, grid: SpectralGrid, dt: float, c: float):
        self.grid, self.dt, self.c = grid, float(dt), float(c)
        self.weights = kernel_weights(grid.xi_mag, dt, c)

    def __call__(self, U: np.ndarray) -> np.ndarray:
        return propagate_modes(self.grid.xi_sym, U, self.dt, self.c, self.weights)


def apply_propagator(state: State, t: float, tol: float = 1e-10) -> State:
    """Homogeneous evolution e^{-tL} of ``state`` over time ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    defect = state.divergence_defect()
    if defect > tol:
        raise PreconditionError(f"v is not solenoidal (relative divergence {defect:.3e})")
    out = propagate_modes(state.grid.xi_sym, state.stacked(), t, state.c)
    return State.from_stacked(state.grid, out, state.t + t, state.c, state.meta)


# --- asymptotics ----------------------------------------------------------

def asymptotics_report(c: float = 1.0, xi_range=(0.25, 8.0), r0: float = 0.25,
                       small: float = 0.05, samples: int = 4001) -> dict:
    """Low-frequency expansion constants and the high-frequency spectral gap.

    Fitted constants are ``max |lambda_i - expansion_i| / |xi|^4`` over
    ``(0, small]``; the gap is ``R = -max_i Re lambda_i`` over ``xi_range``.
    """
    r = np.linspace(small / samples, small, samples)
    ev = eigenvalues(r, c)
    r2, r4 = r * r, r**4
    consts = {
        "C_lambda1": np.max(np.abs(ev.lambda1 + r2) / r4),
        "C_lambda2": np.max(np.abs(ev.lambda2 + 1.0 - r2) / r4),
        "C_lambda3": np.max(np.abs(ev.lambda3 + r2 / (c + 1.0)) / r4),
        "C_lambda4": np.max(np.abs(ev.lambda4 + (c + 1.0) + c * r2 / (c + 1.0)) / r4),
    }
    lo, hi = max(xi_range[0], r0), xi_range[1]
    rr = np.linspace(lo, hi, 20001)
    evh = eigenvalues(rr, c)
    re_max = np.max(np.stack([evh.lambda1.real, evh.lambda2.real,
                              evh.lambda3.real, evh.lambda4.real]), axis=0)
    i = int(np.argmax(re_max))
    R = float(-re_max[i])
    return {
        "c": float(c),
        "small_xi_max": float(small),
        **{k: float(v) for k, v in consts.items()},
        "gap_range": [float(lo), float(hi)],
        "R": R,
        "R_argmin_xi": float(rr[i]),
        "gap_positive": bool(R > 0),
    }
