"""Pseudo-spectral time stepping of the nonlinear perturbation system.

The linear part is propagated exactly by the Green matrix; the quadratic and
drag nonlinearities enter through an exponential trapezoidal rule

    U*      = G(dt) (U + dt F(U))
    U_{n+1} = G(dt) U + dt/2 (G(dt) F(U) + F(U*)).

Products are formed on the physical grid from two-thirds dealiased fields.
The pressure never enters the evolution (the v-equation is Leray projected);
``recover_pressure`` rebuilds it for diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .diagnostics import DecaySeries, channel_norms, energy_functionals, momentum, momentum_scale
from .kernel import Propagator, eigenvalues
from .spectral import (ConfigurationError, SpectralGrid, State, dealias, leray_project,
                       to_physical, to_spectral)

CHECKPOINT_VERSION = 1


class BlowUpError(RuntimeError):
    """Non-finite values or a degenerate density; carries the failure time and partial output."""

    def __init__(self, message: str, t: float, series: Optional[DecaySeries] = None):
        super().__init__(f"{message} at t = {t:.6g}")
        self.t = t
        self.series = series


@dataclass(frozen=True)
class NonlinearTerms:
    f1: np.ndarray   # -u . grad phi
    f2: np.ndarray   # -u . grad u
    f3: np.ndarray   # J(-v . grad v + c (e^phi - 1)(u - v))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.f1[None], self.f2, self.f3])


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    dealias: bool = True
    cadence: int = 1
    # None evaluates e^phi - 1 with expm1; an integer p >= 3 truncates its Taylor series at phi^p/p!
    exp_order: Optional[int] = None
    linear_only: bool = False
    energy_s: int = 3

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"stepper.dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ConfigurationError(f"stepper.t_end must be positive, got {self.t_end}")
        if int(self.cadence) != self.cadence or self.cadence < 1:
            raise ConfigurationError(f"stepper.cadence must be a positive integer, got {self.cadence}")
        if self.exp_order is not None and (int(self.exp_order) != self.exp_order or self.exp_order < 3):
            raise ConfigurationError(f"stepper.exp_order must be an integer >= 3, got {self.exp_order}")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))

    @property
    def dt_effective(self) -> float:
        """dt shrunk slightly so an integer number of steps lands on t_end."""
        return self.t_end / self.n_steps


STABILITY_LIMIT = 4.0
CFL_LIMIT = 0.5


def stability_number(grid: SpectralGrid, dt: float, c: float) -> float:
    """dt * max |Re lambda| over the lattice."""
    ev = eigenvalues(grid.xi_mag.max(), c)
    # the most negative real part sits at the largest |xi| (lambda_4 branch)
    return dt * max(abs(ev.lambda4.real), abs(ev.lambda2.real))


def cfl_number(state: State, dt: float) -> float:
    u = to_physical(state.u)
    v = to_physical(state.v)
    speed = max(np.sqrt(np.sum(u**2, 0)).max(), np.sqrt(np.sum(v**2, 0)).max())
    return dt * speed * state.grid.xi_mag.max()


def check_stability(state: State, dt: float):
    s = stability_number(state.grid, dt, state.c)
    if s > STABILITY_LIMIT:
        raise ConfigurationError(f"stepper.dt too large: dt*max|Re lambda| = {s:.3g} > {STABILITY_LIMIT}")
    q = cfl_number(state, dt)
    if q > CFL_LIMIT:
        raise ConfigurationError(f"stepper.dt too large: nonlinear CFL number {q:.3g} > {CFL_LIMIT}")


# --- nonlinear terms ------------------------------------------------------

def exp_minus_one(phi: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """e^phi - 1 pointwise, either with expm1 or a Taylor polynomial of degree ``order``."""
    if order is None:
        return np.expm1(phi)
    out = np.zeros_like(phi)
    for k in range(order, 0, -1):
        out = phi / k * (1.0 + out)
    return out


def _convective(grid: SpectralGrid, a_phys: np.ndarray, fhat: np.ndarray) -> np.ndarray:
    """Physical samples of (a . grad) f for a scalar or vector spectral field f."""
    grads = to_physical(1j * grid.xi_sym * fhat[..., None, :, :, :])
    return np.sum(a_phys * grads, axis=-4)


def _pieces(state: State, dealiased: bool = True, exp_order: Optional[int] = None):
    """Spectral f1, f2 and N = v . grad v - c (e^phi - 1)(u - v) before projection."""
    g = state.grid
    filt = (lambda f: dealias(g, f)) if dealiased else (lambda f: f)
    phi_h, u_h, v_h = filt(state.phi), filt(state.u), filt(state.v)
    phi = to_physical(phi_h)
    u = to_physical(u_h)
    v = to_physical(v_h)
    f1 = -_convective(g, u, phi_h)
    f2 = -_convective(g, u, u_h)
    N = _convective(g, v, v_h) - state.c * exp_minus_one(phi, exp_order) * (u - v)
    return filt(to_spectral(f1)), filt(to_spectral(f2)), filt(to_spectral(N))


def nonlinear_rhs(state: State, dealiased: bool = True, exp_order: Optional[int] = None) -> NonlinearTerms:
    f1, f2, N = _pieces(state, dealiased, exp_order)
    return NonlinearTerms(f1, f2, -leray_project(state.grid, N))


def recover_pressure(state: State, dealiased: bool = True) -> np.ndarray:
    """Pressure coefficients with zero mean, from the divergence of the v-equation."""
    g = state.grid
    _, _, N = _pieces(state, dealiased)
    src = -state.c * np.sum(1j * g.xi_sym * (state.u - state.v), axis=0) + np.sum(1j * g.xi_sym * N, axis=0)
    out = np.zeros_like(src)
    nz = g.xi_mag_sq > 0
    out[nz] = src[nz] / g.xi_mag_sq[nz]
    return out


def v_equation_rhs(state: State, pressure: np.ndarray, dealiased: bool = True) -> np.ndarray:
    """Unprojected right side of the v-equation with -grad P included."""
    g = state.grid
    _, _, N = _pieces(state, dealiased)
    return (-N - state.c * state.v + state.c * state.u - g.xi_mag_sq * state.v
            - 1j * g.xi_sym * pressure)


# --- time stepping --------------------------------------------------------

class Integrator:
    """Exponential trapezoidal stepper with cached Green weights."""

    def __init__(self, grid: SpectralGrid, cfg: StepperConfig, c: float, dt: Optional[float] = None):
        self.grid, self.cfg, self.c = grid, cfg, float(c)
        self.dt = float(cfg.dt if dt is None else dt)
        self.G = Propagator(grid, self.dt, self.c)
        self.last_linear = None   # G(dt) U of the most recent step

    def rhs(self, U: np.ndarray, t: float) -> np.ndarray:
        state = State.from_stacked(self.grid, U, t, self.c)
        return nonlinear_rhs(state, self.cfg.dealias, self.cfg.exp_order).stacked()

    def step(self, state: State) -> State:
        U, dt = state.stacked(), self.dt
        GU = self.G(U)
        if self.cfg.linear_only:
            new = GU.copy()
        else:
            F0 = self.rhs(U, state.t)
            GF0 = self.G(F0)
            F1 = self.rhs(GU + dt * GF0, state.t + dt)
            new = GU + 0.5 * dt * (GF0 + F1)
        self.last_linear = GU
        new[4:7] = leray_project(self.grid, new[4:7])
        t_new = state.t + dt
        if not np.all(np.isfinite(new)):
            raise BlowUpError("non-finite coefficients", t_new)
        out = State.from_stacked(self.grid, new, t_new, self.c, state.meta)
        if np.max(np.abs(to_physical(out.phi))) >= 1.0:
            raise BlowUpError("|phi| >= 1: density left the small-perturbation regime", t_new)
        return out


def step(state: State, cfg: StepperConfig) -> State:
    check_stability(state, cfg.dt)
    return Integrator(state.grid, cfg, state.c).step(state)


def default_hook(state: State) -> dict:
    out = channel_norms(state, js=(0, 1, 2))
    uv = np.sqrt(out[("u", 0)] ** 2 + out[("v", 0)] ** 2)
    out[("relax_ratio", 0)] = out[("u_minus_v", 0)] / uv if uv > 0 else 0.0
    return out


@dataclass
class SimulationResult:
    series: DecaySeries
    state: State
    monitors: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.series
        yield self.state


def simulate(data: State, cfg: StepperConfig, hooks: Iterable[Callable[[State], dict]] = (default_hook,),
             monitor: bool = True) -> SimulationResult:
    """Run to ``cfg.t_end`` sampling ``hooks`` every ``cfg.cadence`` steps.

    With ``monitor`` set, the plain H^s energy, its dissipation balance, the
    divergence of v and the momentum are tracked at every step.
    """
    hooks = tuple(hooks)
    dt = cfg.dt_effective
    check_stability(data, dt)
    integ = Integrator(data.grid, cfg, data.c, dt)
    series = DecaySeries()
    mon = {"steps": 0, "dt": dt, "max_energy_increase": 0.0, "max_div_defect": 0.0,
           "max_momentum_drift": 0.0, "energy_s": cfg.energy_s}

    def sample(st):
        vals = {}
        for h in hooks:
            vals.update(h(st))
        series.append(st.t, vals)

    state = data.copy()
    state.t = float(data.t)
    sample(state)
    if monitor:
        rep = energy_functionals(state, cfg.energy_s, 0.0)
        e_prev, d_prev = rep.energy, rep.dissipation
        mon["max_dissipation_margin"] = 0.0
        p0 = momentum(state)
        p_scale = momentum_scale(state)
        mon["max_div_defect"] = state.divergence_defect()
    for i in range(1, cfg.n_steps + 1):
        try:
            state = integ.step(state)
        except BlowUpError as err:
            err.series = series
            raise
        if i == cfg.n_steps:
            state.t = data.t + cfg.t_end
        if monitor:
            rep = energy_functionals(state, cfg.energy_s, 0.0)
            e, d = rep.energy, rep.dissipation
            if e_prev > 0:
                mon["max_energy_increase"] = max(mon["max_energy_increase"], (e - e_prev) / e_prev)
            # the exact linear step dissipates; the nonlinear share is measured against it
            lin = State.from_stacked(state.grid, integ.last_linear, state.t, state.c)
            e_lin = energy_functionals(lin, cfg.energy_s, 0.0).energy
            d_mean = 0.5 * (d + d_prev)
            if d_mean > 0:
                margin = (e - e_lin) / (dt * d_mean)
                mon["max_dissipation_margin"] = max(mon["max_dissipation_margin"], abs(margin))
            e_prev, d_prev = e, d
            mon["max_div_defect"] = max(mon["max_div_defect"], state.divergence_defect())
            if p_scale > 0:
                drift = float(np.max(np.abs(momentum(state) - p0)) / p_scale)
                mon["max_momentum_drift"] = max(mon["max_momentum_drift"], drift)
        mon["steps"] = i
        if i % cfg.cadence == 0 or i == cfg.n_steps:
            sample(state)
    return SimulationResult(series, state, mon)


def reconstruct_physical(state: State):
    """(rho, u, v) on the physical grid with rho = c e^phi."""
    phi = to_physical(state.phi)
    if not np.all(np.isfinite(phi)) or np.max(np.abs(phi)) >= 1.0:
        raise BlowUpError("|phi| >= 1: density reconstruction refused", state.t)
    return state.c * np.exp(phi), to_physical(state.u), to_physical(state.v)


# --- checkpoints ----------------------------------------------------------

def save_checkpoint(state: State, path):
    """npz with grid metadata and the (7, n, n, n) coefficients in k-lexicographic order.

    Axis index ``i`` holds mode ``k = i - n/2``, so each axis runs from -n/2 to n/2 - 1.
    """
    coeffs = np.fft.fftshift(state.stacked(), axes=(-3, -2, -1))
    np.savez(path, version=CHECKPOINT_VERSION, n=state.grid.n, box_length=state.grid.box_length,
             c=state.c, t=state.t, coeffs=coeffs)


def load_checkpoint(path) -> State:
    with np.load(path) as z:
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise ConfigurationError(f"unsupported checkpoint version {int(z['version'])}")
        grid = SpectralGrid(int(z["n"]), float(z["box_length"]))
        U = np.fft.ifftshift(z["coeffs"], axes=(-3, -2, -1))
        return State.from_stacked(grid, U, float(z["t"]), float(z["c"]))


def self_convergence(data: State, t_end: float, dts: Iterable[float], **cfg_kw) -> dict:
    """Errors of runs at the given steps against a Richardson-extrapolated reference.

    The reference combines runs at dt_min/2 and dt_min/4 assuming second order.
    """
    dts = sorted((float(d) for d in dts), reverse=True)
    finals = {}
    for dt in dts + [dts[-1] / 2, dts[-1] / 4]:
        cfg = StepperConfig(dt=dt, t_end=t_end, cadence=10**9, **cfg_kw)
        finals[dt] = simulate(data, cfg, hooks=(), monitor=False).state.stacked()
    fine, finer = finals[dts[-1] / 2], finals[dts[-1] / 4]
    ref = finer + (finer - fine) / 3.0
    errs = [float(np.sqrt(np.sum(np.abs(finals[d] - ref) ** 2))) for d in dts]
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    orders = [math.log2(r) for r in ratios]
    return {"dts": dts, "errors": errs, "ratios": ratios, "orders": orders}
