"""Norms, energy functionals, conserved quantities and decay-rate fitting."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import FrequencyCutoff, SpectralGrid, State, cutoff_split, to_physical


class DomainError(ValueError):
    pass


# --- norms ----------------------------------------------------------------

def field_norm(grid: SpectralGrid, fhat: np.ndarray, j: int = 0) -> float:
    """||grad^j f||_{L^2} of a scalar (n,n,n) or vector (3,n,n,n) field."""
    w = grid.xi_mag_sq**j if j else 1.0
    return float(np.sqrt(grid.volume * np.sum(w * np.abs(fhat) ** 2)))


def physical_l2(grid: SpectralGrid, f: np.ndarray) -> float:
    """L^2 norm of physical samples by the periodic rectangle rule."""
    return float(np.sqrt(np.sum(f**2) * grid.dx**3))


def sobolev_norms(state: State, s: int) -> dict[int, float]:
    """{j: ||grad^j (phi, u, v)||_{L^2}} for j = 0..s."""
    if not 0 <= s <= 6:
        raise DomainError("s must lie in 0..6")
    U = state.stacked()
    return {j: field_norm(state.grid, U, j) for j in range(s + 1)}


def hs_norm_sq(grid: SpectralGrid, fhat: np.ndarray, s: int, start: int = 0) -> float:
    """sum_{k=start..s} ||grad^k f||^2."""
    w = sum(grid.xi_mag_sq**k for k in range(start, s + 1))
    return float(grid.volume * np.sum(w * np.abs(fhat) ** 2))


def hs_norm(state: State, s: int) -> float:
    return float(np.sqrt(hs_norm_sq(state.grid, state.stacked(), s)))


def channel_norms(state: State, js=(0,)) -> dict[tuple[str, int], float]:
    """Per-field norms matching the channels of the radial quadrature."""
    g = state.grid
    out = {}
    for j in js:
        out[("phi", j)] = field_norm(g, state.phi, j)
        out[("u", j)] = field_norm(g, state.u, j)
        out[("v", j)] = field_norm(g, state.v, j)
        out[("u_minus_v", j)] = field_norm(g, state.u - state.v, j)
        out[("total", j)] = field_norm(g, state.stacked(), j)
    return out


# --- energy functionals ---------------------------------------------------

@dataclass
class EnergyReport:
    E: dict            # j -> sum_{k=j..s} ||grad^k (phi,u,v)||^2
    energy: float      # 1/2 (||phi||^2_{H^s} + ||u||^2_{H^s} + ||v||^2_{H^s}/c)
    lyapunov: float    # energy + gamma1 * sum_k int grad^{k-1} u . grad^k phi
    cross: float
    dissipation: float  # ||u - v||^2_{H^s} + ||grad v||^2_{H^s}/c
    M: float           # running sup of (1+t)^{3/4} ||(phi,u,v)||_{H^s}
    gamma1: float
    s: int


def _cross_term(grid: SpectralGrid, phi: np.ndarray, u: np.ndarray, s: int) -> float:
    """sum_{k=1..s} int grad^{k-1} u . grad^k phi dx."""
    grad_phi = 1j * grid.xi_sym * phi
    pair = np.real(np.sum(np.conj(u) * grad_phi, axis=0))
    w = sum(grid.xi_mag_sq ** (k - 1) for k in range(1, s + 1))
    return float(grid.volume * np.sum(w * pair))


def energy_functionals(state: State, s: int = 3, gamma1: float = 0.05, m_prev: float = 0.0) -> EnergyReport:
    g, c = state.grid, state.c
    U = state.stacked()
    E = {j: hs_norm_sq(g, U, s, start=j) for j in range(s + 1)}
    energy = 0.5 * (hs_norm_sq(g, state.phi, s) + hs_norm_sq(g, state.u, s) + hs_norm_sq(g, state.v, s) / c)
    cross = _cross_term(g, state.phi, state.u, s)
    diss = hs_norm_sq(g, state.u - state.v, s) + hs_norm_sq(g, state.v, s + 1, start=1) / c
    M = max(m_prev, (1.0 + state.t) ** 0.75 * np.sqrt(E[0]))
    return EnergyReport(E, energy, energy + gamma1 * cross, cross, diss, float(M), gamma1, s)


def lyapunov_bracket(report: EnergyReport) -> tuple[float, float]:
    """Bounds [(1 - 2 gamma1) energy, (1 + 2 gamma1) energy] valid for gamma1 <= 1/4."""
    g = report.gamma1
    return (1 - 2 * g) * report.energy, (1 + 2 * g) * report.energy


# --- frequency split, conserved quantities -------------------------------

def split_norms(state: State, cut: FrequencyCutoff, j: int = 0) -> tuple[float, float]:
    low, high = cutoff_split(state.grid, state.stacked(), cut)
    return field_norm(state.grid, low, j), field_norm(state.grid, high, j)


def momentum(state: State) -> np.ndarray:
    """int (c e^phi u + v) dx by the rectangle rule on the physical grid."""
    phi = to_physical(state.phi)
    u = to_physical(state.u)
    v = to_physical(state.v)
    dens = state.c * np.exp(phi)
    return np.sum(dens * u + v, axis=(1, 2, 3)) * state.grid.dx**3


def momentum_scale(state: State) -> float:
    """int (|c e^phi u| + |v|) dx, the normalisation for relative drift."""
    phi = to_physical(state.phi)
    u = to_physical(state.u)
    v = to_physical(state.v)
    dens = state.c * np.exp(phi)
    mag = np.sqrt(np.sum((dens * u) ** 2, axis=0)) + np.sqrt(np.sum(v**2, axis=0))
    return float(np.sum(mag) * state.grid.dx**3)


def l1_norm(state: State, refine: int = 1) -> float:
    """||phi||_{L^1} + ||u||_{L^1} + ||v||_{L^1} on a grid refined ``refine`` times."""
    from .initial_data import upsample

    g = state.grid
    n = g.n * refine
    fields = [upsample(state.phi, n), upsample(state.u, n), upsample(state.v, n)]
    phi, u, v = (to_physical(f) for f in fields)
    dx3 = (g.box_length / n) ** 3
    return float((np.sum(np.abs(phi)) + np.sum(np.sqrt(np.sum(u**2, 0))) + np.sum(np.sqrt(np.sum(v**2, 0)))) * dx3)


# --- time series ----------------------------------------------------------

@dataclass
class DecaySeries:
    """Sampled diagnostics: ``values[(channel, j)]`` aligned with ``times``."""

    times: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def append(self, t: float, sample: dict):
        if self.times and not t > self.times[-1]:
            raise DomainError("sample times must be strictly increasing")
        self.times.append(float(t))
        for key, val in sample.items():
            self.values.setdefault(key, []).append(val)

    def get(self, channel: str, j: int = 0) -> np.ndarray:
        return np.asarray(self.values[(channel, j)], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @classmethod
    def from_arrays(cls, times, arrays: dict) -> "DecaySeries":
        return cls(list(map(float, times)), {k: list(map(float, v)) for k, v in arrays.items()})

    def rows(self):
        for i, t in enumerate(self.times):
            for (ch, j), vals in self.values.items():
                val = vals[i]
                if np.ndim(val) == 0:
                    yield t, ch, j, float(val)


def write_series_csv(series: DecaySeries, path, header_comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "channel", "j", "value"])
        for t, ch, j, val in series.rows():
            w.writerow([f"{t:.15g}", ch, j, f"{val:.15g}"])


def read_series_csv(path) -> DecaySeries:
    times, data = [], {}
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        t = float(row["t"])
        if not times or times[-1] != t:
            times.append(t)
        data.setdefault((row["channel"], int(row["j"])), []).append(float(row["value"]))
    return DecaySeries(times, data)


# --- fitting --------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    window: tuple

    def to_json(self, channel: str, j: int) -> str:
        return json.dumps({"channel": channel, "j": j, "slope": self.slope,
                           "residual": self.residual, "window": list(self.window)})


def _window(times, values, window):
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    lo, hi = window if window is not None else (t[-1] / 100.0, t[-1])
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    return t[sel], y[sel], (float(lo), float(hi))


def decay_fit(times, values, window=None, min_samples: int = 8) -> FitResult:
    """Least-squares slope of log(norm) against log(1 + t) inside ``window``."""
    t, y, win = _window(times, values, window)
    if len(t) < min_samples:
        raise DomainError(f"need at least {min_samples} samples in window, got {len(t)}")
    if np.any(y <= 0):
        raise DomainError("norms must be positive inside the fit window")
    X, Y = np.log1p(t), np.log(y)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = float(np.max(np.abs(Y - (slope * X + intercept))))
    return FitResult(float(slope), float(intercept), resid, win)


def lower_bound_check(times, values, j: int = 0, window=None, spread: float = 10.0) -> dict:
    """Compensated norm (1+t)^{3/4 + j/2} ||.|| must stay in a band of width ``spread``."""
    t, y, win = _window(times, values, window)
    comp = (1.0 + t) ** (0.75 + 0.5 * j) * y
    lo, hi = float(np.min(comp)), float(np.max(comp))
    ratio = hi / lo if lo > 0 else np.inf
    return {"j": j, "window": list(win), "min": lo, "max": hi, "spread": ratio,
            "passed": bool(lo > 0 and ratio <= spread)}


def report_json(obj) -> str:
    def conv(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        raise TypeError(type(o))
    return json.dumps(obj, indent=2, default=conv, sort_keys=True)
