"""Experiment runners used by the command-line interface.

Each runner takes a validated :class:`ExperimentConfig` and returns the
tables it produced and the checks it evaluated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import classical, nslit, pathint, records, scatter, validation
from ..core import Units, WaveFunction, make_grid
from ..errors import ConfigError, PathMeasError
from ..validation import Check, Metric

__all__ = ["Result", "RUNNERS", "run_experiment"]


@dataclass
class Result:
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)


def _units(cfg):
    return Units(hbar=cfg.units.hbar, mass=cfg.units.mass)


def _potential(cfg):
    return cfg.potential.build(cfg.units.mass)


def _kicks(spec, key):
    if len(spec.times) != len(spec.kicks):
        raise ConfigError(f"{key}: times and kicks differ in length", key=key)
    if not spec.times:
        return pathint.KickSchedule.empty()
    try:
        return pathint.KickSchedule(spec.times, spec.kicks)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from exc


def _steps(t_final, dt, key):
    n = int(round(t_final / dt))
    if n < 1 or abs(n * dt - t_final) > 1e-9 * t_final:
        raise ConfigError(f"{key}: t_final must be a whole number of dt steps", key=key)
    return n


def _check(cid, name, metrics):
    return Check(cid, name, metrics)


def run_propagate(cfg) -> Result:
    p = cfg.propagate
    grid = make_grid(1, [(cfg.grid.lower, cfg.grid.upper)], cfg.grid.n_points)
    psi0 = WaveFunction.gaussian(grid, p.x0, p.sigma, p.k0)
    kicks = _kicks(p.kicks, "propagate.kicks")
    psi = pathint.kicked_evolution(psi0, kicks, _potential(cfg), p.t_final, p.n_steps, _units(cfg))
    x = grid.axis(0)
    a = psi.amplitudes
    rows = [[xi, z.real, z.imag, abs(z) ** 2] for xi, z in zip(x, a)]
    check = _check(0, "propagate", [Metric.within("norm", psi.norm(), 1.0, 1e-6)])
    return Result({"wavefunction": (["x", "re", "im", "density"], rows)}, [check])


def run_zfunctional(cfg) -> Result:
    z = cfg.zfunctional
    grid = make_grid(1, [(cfg.grid.lower, cfg.grid.upper)], cfg.grid.n_points)
    kicks = _kicks(z.kicks, "zfunctional.kicks")
    V, u = _potential(cfg), _units(cfg)
    value = pathint.z_functional(z.x_i, z.x_f, z.t_final, kicks, V, z.n_steps, grid=grid, units=u,
                                 method=z.method)
    rows = [[z.method, value.real, value.imag, abs(value), float(np.angle(value))]]
    metrics = [Metric.flag("finite", np.isfinite(value))]
    try:
        sc = pathint.semiclassical_z(z.x_i, z.x_f, z.t_final, kicks, V, u)
    except PathMeasError:
        sc = None
    if sc is not None:
        rows.append(["semiclassical", sc.real, sc.imag, abs(sc), float(np.angle(sc))])
        metrics.append(Metric("modulus ratio to semiclassical", abs(value) / abs(sc), 1.0, 0.0,
                              True, "report"))
    return Result({"z": (["method", "re", "im", "abs", "phase"], rows)},
                  [_check(0, "zfunctional", metrics)])


def run_joint_amplitude(cfg) -> Result:
    j = cfg.joint_amplitude
    V, u = _potential(cfg), _units(cfg)
    n = _steps(j.t_final, j.dt, "joint_amplitude.dt")
    path = classical.solve_bvp(V, j.x_i, j.x_f, j.t_final, n, units=u)
    tau = path.times[1:]
    if len(j.offset) != 3:
        raise ConfigError("joint_amplitude.offset must have three entries", key="joint_amplitude.offset")
    readouts = path.as_vectors()[1:] + np.asarray(j.offset, dtype=float)
    if j.noise:
        ens = records.sample_records(path, j.alpha, j.dt, 1, cfg.seed)
        readouts = readouts + ens.residuals[0]
    rec = scatter.ProbeRecord(tau, readouts, j.alpha, j.dt)
    amp = scatter.joint_amplitude(rec, j.x_i, j.x_f, j.t_final, V, j.alpha, u, route=j.route, n_steps=n)
    factors = scatter.probe_weight_factorization(rec, path)
    dr = readouts - path.as_vectors()[1:]
    probes = [[t, *d, f] for t, d, f in zip(tau, dr, factors)]
    v = amp.value
    summary = [["prefactor_re", amp.prefactor.real], ["prefactor_im", amp.prefactor.imag],
               ["action_phase", amp.action_phase], ["log_weight", amp.log_weight],
               ["value_re", v.real], ["value_im", v.imag],
               ["dropped_log_modulus", amp.dropped_log_modulus], ["dropped_phase", amp.dropped_phase]]
    summary += [[k, val] for k, val in amp.diagnostics.items()]
    rebuilt = amp.prefactor * np.exp(1j * amp.action_phase) * np.exp(amp.log_weight)
    metrics = [Metric.flag("log_weight <= 0", amp.log_weight <= 0),
               Metric.below("decomposition error", abs(rebuilt - v) / max(abs(v), 1e-300), 1e-12)]
    return Result({"probes": (["time", "dx", "dy", "dz", "log_factor"], probes),
                   "amplitude": (["quantity", "value"], summary)},
                  [_check(0, "joint-amplitude", metrics)])


def _detectors(spec, n):
    if spec.kind == "identical":
        return nslit.DetectorSet.identical(n)
    if spec.kind == "orthonormal":
        return nslit.DetectorSet.orthonormal(n)
    if n != 2:
        raise ConfigError("nslit.detectors.kind: overlap detectors need n_slits = 2",
                          key="nslit.detectors.kind")
    return nslit.DetectorSet.two_overlap(spec.overlap)


def run_nslit(cfg) -> Result:
    s = cfg.nslit
    config = nslit.SlitConfig.regular(s.n_slits, s.separation, s.screen_distance, s.wavelength,
                                      units=_units(cfg))
    x = np.linspace(s.screen_lower, s.screen_upper, s.screen_points)
    phi = nslit.slit_amplitudes(config, x, equal_weights=s.equal_weights)
    det = _detectors(s.detectors, s.n_slits)
    free = nslit.intensity_unmeasured(phi)
    avg = nslit.averaged_pattern(phi, det)
    cond = np.stack([nslit.conditional_pattern(phi, det, m) for m in range(det.n_outcomes)], axis=1)
    header = ["x", "unmeasured", "averaged"] + [f"outcome_{m}" for m in range(det.n_outcomes)]
    rows = [[xi, a, b, *c] for xi, a, b, c in zip(x, free, avg, cond)]
    scale = max(float(np.max(np.abs(avg))), 1e-300)
    metrics = [Metric.flag("patterns nonnegative", np.min([free.min(), avg.min(), cond.min()]) >= -1e-14),
               Metric.below("sum of conditionals vs averaged",
                            np.max(np.abs(cond.sum(axis=1) - avg)) / scale, 1e-12)]
    try:
        metrics.append(Metric("visibility", nslit.visibility(avg), 0.0, 0.0, True, "report"))
    except PathMeasError:
        pass
    return Result({"pattern": (header, rows)}, [_check(0, "nslit", metrics)])


def run_records(cfg) -> Result:
    r = cfg.records
    V, u = _potential(cfg), _units(cfg)
    n = _steps(r.t_final, r.dt, "records.dt")
    path = classical.solve_ivp(V, r.x0, r.p0, r.t_final, n, u)
    ens = records.sample_records(path, r.alpha, r.dt, r.n_records, cfg.seed)
    st = records.record_statistics(ens)
    sigma2 = records.noise_variance(r.alpha, r.dt)
    stats = [[t, *m, *v] for t, m, v in zip(ens.times, st.mean, st.variance)]
    tables = {
        "stats": (["time", "mean_x", "mean_y", "mean_z", "var_x", "var_y", "var_z"], stats),
        "autocorrelation": (["lag", "value"], [[k, a] for k, a in enumerate(st.autocorrelation)]),
    }
    metrics = [
        Metric.within("mean variance / sigma^2", st.variance.mean() / sigma2, 1.0, 0.05, relative=True),
        Metric.below("max |autocorrelation| lag>=1", np.max(np.abs(st.autocorrelation[1:])),
                     st.whiteness_bound),
        Metric.within("E[-log |Phi|^2] / (3 n_bins / 2)", np.mean(-ens.log_densities()) / (1.5 * ens.n_bins),
                      1.0, 0.05, relative=True),
    ]
    if ens.n_bins >= r.window:
        rep = records.redundancy_report(ens, r.fractions, r.window, cfg.seed)
        tables["redundancy"] = (["fraction", "rms_error", "expected_error"],
                                [list(v) for v in zip(rep.fractions, rep.rms_error, rep.expected_error)])
        metrics.append(Metric.below("disjoint halves z rms", rep.halves_z_rms, 4.0))
    if r.export_records:
        tables["records"] = ens.to_table()
    return Result(tables, [_check(0, "records", metrics)])


def run_validate(cfg) -> Result:
    checks = validation.run_checks(cfg.validate_.checks, seed=cfg.seed)
    rows = [[c.id, c.name, m.name, m.value, m.reference, m.tolerance, m.comparison, m.passed]
            for c in checks for m in c.metrics]
    header = ["check", "name", "metric", "value", "reference", "tolerance", "comparison", "passed"]
    return Result({"checks": (header, rows)}, checks)


def run_scan(cfg) -> Result:
    s = cfg.scan
    grid = make_grid(1, [(s.lower, s.upper)], s.n_points)
    V = _potential(cfg)
    hbars = sorted(s.hbar, reverse=True)
    frac = [pathint.stationary_dominance(s.x_i, s.x_f, s.t_final, s.n_steps, grid, V,
                                         Units(hbar=h, mass=cfg.units.mass)) for h in hbars]
    increasing = bool(np.all(np.diff(frac) > 0))
    metrics = [Metric.flag("dominance increases as hbar decreases", increasing)]
    return Result({"scan": (["hbar", "dominance"], [[h, f] for h, f in zip(hbars, frac)])},
                  [_check(6, "stationary dominance scan", metrics)])


RUNNERS = {
    "propagate": run_propagate,
    "zfunctional": run_zfunctional,
    "joint-amplitude": run_joint_amplitude,
    "nslit": run_nslit,
    "records": run_records,
    "validate": run_validate,
    "scan": run_scan,
}


def run_experiment(cfg) -> Result:
    return RUNNERS[cfg.experiment](cfg)
