"""The six batch experiments, each returning a JSON-ready report with a ``passed`` flag."""

from __future__ import annotations

import numpy as np

from .diagnostics import DecaySeries, decay_fit, lower_bound_check, split_norms
from .initial_data import DataSpec, generic_gaussian, lower_bound_profiles
from .kernel import (admissible_projector, asymptotics_report, expm_oracle, green_hat,
                     kernel_weights, mode_ode_oracle)
from .radial import ProfileSet, RadialProfile, gaussian_profile, radial_series
from .solver import StepperConfig, default_hook, simulate
from .spectral import FrequencyCutoff, build_grid

DECAY_TARGETS = {  # (channel, j): (low, high) accepted slope interval
    ("total", 0): (-0.80, -0.70),
    ("total", 1): (-1.30, -1.20),
    ("total", 2): (-1.82, -1.68),
    ("phi", 0): (-0.80, -0.70),
    ("u_minus_v", 0): (-np.inf, -1.15),
}


def _random_unit(rng):
    w = rng.standard_normal(3)
    return w / np.linalg.norm(w)


def validate_kernel(samples: int = 100, xi_max: float = 8.0, t_max: float = 10.0,
                    cs=(0.5, 1.0, 2.0), tol: float = 1e-9, seed: int = 0,
                    jump_tol: float = 1e-5, semigroup_tol: float = 1e-10) -> dict:
    """Closed-form Green matrix against both oracles, continuity at |xi| = 1/2, semigroup law."""
    rng = np.random.default_rng(seed)
    err_expm = err_ode = 0.0
    worst = None
    for i in range(samples):
        r = xi_max * rng.uniform() if i else 0.0
        xi = r * _random_unit(rng)
        t = t_max * rng.uniform()
        c = float(cs[i % len(cs)])
        Pi = admissible_projector(xi)
        G = green_hat(xi, t, c) @ Pi
        e1 = float(np.max(np.abs(G - expm_oracle(xi, t, c) @ Pi)))
        e2 = float(np.max(np.abs(G - mode_ode_oracle(xi, t, c) @ Pi)))
        if max(e1, e2) > max(err_expm, err_ode):
            worst = {"xi_mag": r, "t": t, "c": c}
        err_expm, err_ode = max(err_expm, e1), max(err_ode, e2)

    jump = 0.0
    for c in cs:
        for t in (0.1, 1.0, 5.0, 10.0):
            lo = np.array(kernel_weights(0.5 - 1e-7, t, c).as_tuple())
            hi = np.array(kernel_weights(0.5 + 1e-7, t, c).as_tuple())
            jump = max(jump, float(np.max(np.abs(hi - lo))))

    semi = 0.0
    for i in range(samples // 2):
        xi = xi_max * rng.uniform() * _random_unit(rng)
        t, s = t_max * rng.uniform(size=2) / 2
        c = float(cs[i % len(cs)])
        Pi = admissible_projector(xi)
        lhs = green_hat(xi, t + s, c) @ Pi
        rhs = green_hat(xi, t, c) @ green_hat(xi, s, c) @ Pi
        semi = max(semi, float(np.max(np.abs(lhs - rhs))))

    max_error = max(err_expm, err_ode)
    return {
        "experiment": "validate-kernel", "samples": samples,
        "max_error": max_error, "max_error_expm": err_expm, "max_error_ode": err_ode,
        "worst_sample": worst, "continuity_jump": jump, "semigroup_error": semi,
        "thresholds": {"max_error": tol, "continuity_jump": jump_tol, "semigroup_error": semigroup_tol},
        "passed": bool(max_error <= tol and jump <= jump_tol and semi <= semigroup_tol),
    }


def asymptotics(c: float = 1.0, small: float = 0.05, xi_range=(0.25, 8.0), bound: float = 2.0) -> dict:
    rep = asymptotics_report(c=c, xi_range=xi_range, small=small)
    rep["experiment"] = "asymptotics"
    rep["thresholds"] = {"C_lambda1": bound, "C_lambda3": bound, "R": "> 0"}
    rep["passed"] = bool(rep["C_lambda1"] <= bound and rep["C_lambda3"] <= bound and rep["gap_positive"])
    return rep


def generic_profiles(width: float = 1.0, xi_max: float = 10.0) -> ProfileSet:
    """Gaussian spectra in all four sectors (smooth, integrable physical data)."""
    return ProfileSet(
        density=gaussian_profile("density", 1.0, width),
        curl_free=gaussian_profile("curl_free", 1.0, width),
        solenoidal_u=gaussian_profile("solenoidal_u", 1.0, width),
        solenoidal_v=gaussian_profile("solenoidal_v", 1.0, width),
        xi_max=xi_max,
    )


def _series(profiles, times, c, js) -> DecaySeries:
    return DecaySeries.from_arrays(times, radial_series(profiles, times, c, js))


def kernel_decay(c: float = 1.0, t_min: float = 1e2, t_max: float = 1e4, samples: int = 25,
                 width: float = 1.0, xi_max: float = 10.0, js=(0, 1, 2), targets=None) -> tuple[dict, DecaySeries]:
    targets = DECAY_TARGETS if targets is None else targets
    times = np.geomspace(t_min, t_max, samples)
    series = _series(generic_profiles(width, xi_max), times, c, js)
    fits, ok = [], True
    for (ch, j), (lo, hi) in targets.items():
        if j not in js:
            continue
        fit = decay_fit(series.times, series.get(ch, j), (t_min, t_max))
        good = lo <= fit.slope <= hi
        ok &= good
        fits.append({"channel": ch, "j": j, "slope": fit.slope, "residual": fit.residual,
                     "window": list(fit.window), "accepted": [lo, hi], "passed": bool(good)})
    return {"experiment": "kernel-decay", "c": c, "fits": fits, "passed": bool(ok)}, series


def lower_bound(c: float = 1.0, c0: float = 1.0, r0: float = 0.25, cone_half_angle: float = np.pi / 12,
                t_min: float = 1e2, t_max: float = 1e4, samples: int = 25, spread: float = 10.0) -> tuple[dict, DecaySeries]:
    times = np.geomspace(t_min, t_max, samples)
    series = _series(lower_bound_profiles(c0, r0, cone_half_angle), times, c, (0,))
    win = (t_min, t_max)
    checks = {
        "phi": lower_bound_check(series.times, series.get("phi", 0), 0, win, spread),
        "v_cone": lower_bound_check(series.times, series.get("v_cone", 0), 0, win, spread),
    }
    # Density spectrum vanishing at xi = 0 violates the data condition: reported, not asserted.
    violating = ProfileSet(density=RadialProfile(lambda r: r * r * np.exp(-0.5 * r * r), "density", 12.0),
                           xi_max=12.0)
    other = _series(violating, times, c, (0,))
    checks_generic = {"phi": lower_bound_check(other.times, other.get("phi", 0), 0, win, spread)}
    return {"experiment": "lower-bound", "c": c, "c0": c0, "r0": r0,
            "cone_half_angle": cone_half_angle, "checks": checks,
            "violating_data_reported_only": checks_generic,
            "passed": bool(all(ch["passed"] for ch in checks.values()))}, series


def ratio_decreasing(series: DecaySeries, t_start: float = 5.0) -> bool:
    t = series.t
    r = series.get("relax_ratio", 0)
    return bool(np.all(np.diff(r[t >= t_start]) < 0))


def run_simulation(n: int = 32, box_length: float = 16 * np.pi, c: float = 1.0,
                   data: DataSpec | None = None, stepper: StepperConfig | None = None,
                   div_tol: float = 1e-12, momentum_tol: float = 1e-8,
                   energy_tol: float = 1e-10, ratio_after: float = 5.0,
                   cutoff: FrequencyCutoff | None = None):
    grid = build_grid(n, box_length)
    data = data or DataSpec(amplitude=1e-2, c=c)
    stepper = stepper or StepperConfig(dt=0.1, t_end=50.0, cadence=10)
    state = generic_gaussian(data, grid)
    cutoff = cutoff or FrequencyCutoff(0.25, 1.0)

    def split_hook(st):
        low, high = split_norms(st, cutoff, 0)
        return {("low", 0): low, ("high", 0): high}

    res = simulate(state, stepper, hooks=(default_hook, split_hook))
    m = res.monitors
    checks = {
        "divergence": m["max_div_defect"] <= div_tol,
        "momentum": m["max_momentum_drift"] <= momentum_tol,
        "energy": m["max_energy_increase"] <= energy_tol,
        "relaxation_ratio": ratio_decreasing(res.series, ratio_after),
    }
    report = {"experiment": "simulate", "n": n, "box_length": box_length, "c": c,
              "data": {k: v for k, v in state.meta.items()}, "monitors": m,
              "thresholds": {"divergence": div_tol, "momentum": momentum_tol,
                             "energy": energy_tol, "ratio_after": ratio_after},
              "checks": {k: bool(v) for k, v in checks.items()},
              "passed": bool(all(checks.values()))}
    return report, res
