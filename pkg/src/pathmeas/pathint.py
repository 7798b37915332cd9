"""Discrete path-integral engine.

Grid propagation (split-step Fourier), brute-force lattice path sums,
filter-function measurements and momentum-kick evolution. Kicks enter as
the phase exp(-i dK x) at the instant of scattering, applied after
propagating to that instant.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import classical
from .core import TOL, Potential, SpatialGrid, Units, WaveFunction
from .errors import BoundaryLeak, TooLarge

__all__ = [
    "KickSchedule",
    "FilterSpec",
    "short_time_kernel",
    "grid_propagate",
    "lattice_path_sum",
    "transfer_matrix_sum",
    "filtered_amplitude",
    "kicked_evolution",
    "z_functional",
    "semiclassical_z",
    "stationary_dominance",
]

_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class KickSchedule:
    """Momentum transfers dK(tau_j) (wavenumber units) at times tau_j."""

    times: np.ndarray
    kicks: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        k = np.array(self.kicks, dtype=float)
        if k.ndim == 0:
            k = k.reshape(1)
        if len(k) != len(t):
            raise ValueError("times and kicks must have equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("kick times must be strictly increasing")
        if not np.all(np.isfinite(k)):
            raise ValueError("kicks must be finite")
        t.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "kicks", k)

    @classmethod
    def empty(cls) -> "KickSchedule":
        return cls(np.zeros(0), np.zeros(0))

    def __len__(self):
        return len(self.times)

    def scaled(self, factor: float) -> "KickSchedule":
        return KickSchedule(self.times, self.kicks * factor)

    def merged(self, other: "KickSchedule") -> "KickSchedule":
        """Union of two schedules; kicks at coincident times add."""
        acc: dict[float, np.ndarray] = {}
        for t, k in itertools.chain(zip(self.times, self.kicks), zip(other.times, other.kicks)):
            acc[float(t)] = acc.get(float(t), 0.0) + np.asarray(k)
        times = sorted(acc)
        return KickSchedule(np.array(times), np.array([acc[t] for t in times]))

    def check_interval(self, t_final: float):
        if len(self) and (self.times[0] < 0 or self.times[-1] > t_final * (1 + 1e-12)):
            raise ValueError(f"kick times must lie in [0, {t_final}]")


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """Measurement filter Upsilon(xbar - x) and the record it is applied with.

    kind: "none", "gaussian" (``width`` is the standard deviation of
    |Upsilon|^2), "tophat" (``width`` is the half-width) or "phase"
    (Upsilon = exp(i k (xbar - x)) with ``k = wavenumber``).
    """

    kind: str = "none"
    record: np.ndarray = ()
    width: float = 1.0
    wavenumber: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "tophat", "phase"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind in ("gaussian", "tophat") and not self.width > 0:
            raise ValueError("filter width must be positive")
        rec = np.array(self.record, dtype=float).reshape(-1)
        rec.setflags(write=False)
        object.__setattr__(self, "record", rec)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "none":
            return np.ones_like(u, dtype=complex)
        if self.kind == "gaussian":
            return np.exp(-(u ** 2) / (4.0 * self.width ** 2)).astype(complex)
        if self.kind == "tophat":
            return (np.abs(u) <= self.width).astype(complex)
        return np.exp(1j * self.wavenumber * u)


def short_time_kernel(x_to, x_from, dt: float, potential: Potential, units: Units = Units(),
                      dim: int = 1):
    """Short-time propagator <x_to| exp(-i H dt / hbar) |x_from>.

    (m / 2 pi i hbar dt)^(d/2) exp[i m (x_to - x_from)^2 / (2 hbar dt)
    - i V(x_to) dt / hbar]. Broadcasts over array arguments; for
    ``dim > 1`` the last axis holds the components. Accepts complex
    positions when V = 0 (used for contour-rotated quadrature).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    m, hbar = units.mass, units.hbar
    x_to = np.asarray(x_to)
    x_from = np.asarray(x_from)
    diff = x_to - x_from
    if dim == 1:
        sq = diff ** 2
        pot = 0.0 if potential.kind == "free" else potential(np.real(x_to))
    else:
        sq = np.sum(diff ** 2, axis=-1)
        pot = 0.0 if potential.kind == "free" else potential.on_vectors(np.real(x_to))
    pref = (m / (2j * np.pi * hbar * dt)) ** (dim / 2)
    return pref * np.exp(1j * m * sq / (2 * hbar * dt) - 1j * pot * dt / hbar)


# ---------------------------------------------------------------------------
# split-step machinery

def _wavenumbers(grid: SpatialGrid):
    ks = [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(grid.shape, grid.spacing)]
    if grid.dim == 1:
        return ks[0] ** 2
    mesh = np.meshgrid(*ks, indexing="ij")
    return sum(k ** 2 for k in mesh)


def _potential_on(grid: SpatialGrid, potential: Potential):
    if potential.kind == "free":
        return np.zeros(grid.shape)
    if grid.dim == 1:
        return potential(grid.points)
    return potential.on_vectors(grid.points)


def _kick_phase(grid: SpatialGrid, kick):
    x = grid.points
    if grid.dim == 1:
        return np.exp(-1j * float(np.sum(kick)) * x)
    return np.exp(-1j * (x @ np.broadcast_to(np.asarray(kick, dtype=float), (3,))))


def _check_edges(grid: SpatialGrid, psi):
    peak = np.max(np.abs(psi))
    if peak == 0:
        return
    a = np.abs(psi)
    if grid.dim == 1:
        edge = max(a[0], a[-1])
    else:
        edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max(),
                   a[:, :, 0].max(), a[:, :, -1].max())
    if edge > TOL.boundary_amplitude * peak:
        raise BoundaryLeak(f"edge amplitude {edge:.3e} exceeds {TOL.boundary_amplitude:.0e} "
                           f"of the peak {peak:.3e}; widen the grid")


def _strang(psi, v_half, kin, n):
    """n Strang steps: half potential, kinetic, half potential (halves merged)."""
    if n == 0:
        return psi
    psi = v_half * psi
    axes = tuple(range(psi.ndim))
    for i in range(n):
        psi = np.fft.ifftn(kin * np.fft.fftn(psi, axes=axes), axes=axes)
        psi = (v_half * v_half * psi) if i < n - 1 else v_half * psi
    return psi


def _evolve(psi, grid, potential, events, t_final, n_steps, units, check_boundary):
    """Propagate ``psi`` from 0 to t_final, applying multipliers at event times.

    ``events`` is a list of (time, multiplier array) sorted by time. Each
    segment between events gets round(duration / dt) Strang steps (at least
    one) with dt = t_final / n_steps, so event times need not lie on the
    nominal step grid.
    """
    psi = np.array(psi, dtype=complex)
    if n_steps == 0 or t_final == 0:
        for _, mult in events:
            psi = psi * mult
        return psi
    dt_nom = t_final / n_steps
    k2 = _wavenumbers(grid)
    vgrid = _potential_on(grid, potential)
    cache = {}

    def ops(dt):
        key = round(dt / dt_nom, 12)
        if key not in cache:
            cache[key] = (np.exp(-0.5j * vgrid * dt / units.hbar),
                          np.exp(-0.5j * units.hbar * k2 * dt / units.mass))
        return cache[key]

    t_prev = 0.0
    for t_ev, mult in list(events) + [(t_final, None)]:
        duration = t_ev - t_prev
        if duration > 1e-14 * max(1.0, t_final):
            n = max(1, int(round(duration / dt_nom)))
            v_half, kin = ops(duration / n)
            psi = _strang(psi, v_half, kin, n)
            if check_boundary:
                _check_edges(grid, psi)
        if mult is not None:
            psi = psi * mult
        t_prev = t_ev
    return psi


def grid_propagate(psi0: WaveFunction, potential: Potential, t_final: float, n_steps: int,
                   units: Units = Units(), check_boundary: bool = True) -> WaveFunction:
    """Evolve a state on its grid with second-order split-step Fourier.

    Unitary to rounding error. Raises BoundaryLeak if the packet reaches
    the grid edge (relative amplitude above 1e-8).
    """
    if check_boundary:
        _check_edges(psi0.grid, psi0.amplitudes)
    out = _evolve(psi0.amplitudes, psi0.grid, potential, [], t_final, n_steps, units, check_boundary)
    return psi0.with_amplitudes(out)


def kicked_evolution(psi0: WaveFunction, kick_schedule: KickSchedule, potential: Potential,
                     t_final: float, n_steps: int, units: Units = Units(),
                     check_boundary: bool = True) -> WaveFunction:
    """Propagation interrupted by the phases exp(-i dK_j x) at each kick.

    Each kick translates the momentum distribution by -dK_j.
    """
    kick_schedule.check_interval(t_final)
    events = [(float(t), _kick_phase(psi0.grid, k))
              for t, k in zip(kick_schedule.times, kick_schedule.kicks)]
    out = _evolve(psi0.amplitudes, psi0.grid, potential, events, t_final, n_steps, units,
                  check_boundary)
    return psi0.with_amplitudes(out)


def filtered_amplitude(psi0: WaveFunction, filter_spec: FilterSpec, measurement_times,
                       potential: Potential, t_final: float, n_steps: int = 1000,
                       units: Units = Units(), check_boundary: bool = True) -> WaveFunction:
    """Conditional amplitude for a measurement record.

    Propagation alternates with pointwise multiplication by
    Upsilon(xbar_q - x) at each measurement time. The result is left
    unnormalized: its squared norm is the record's probability density
    under this filter (no normalization of the record measure is imposed).
    """
    times = np.asarray(measurement_times, dtype=float).reshape(-1)
    if len(times) and (times[0] <= 0 or times[-1] > t_final * (1 + 1e-12) or np.any(np.diff(times) <= 0)):
        raise ValueError("measurement times must be increasing and lie in (0, t_final]")
    events = []
    if filter_spec.kind != "none":
        if len(filter_spec.record) != len(times):
            raise ValueError("filter record needs one value per measurement time")
        x = psi0.grid.points
        events = [(float(t), filter_spec(xbar - x)) for t, xbar in zip(times, filter_spec.record)]
    out = _evolve(psi0.amplitudes, psi0.grid, potential, events, t_final, n_steps, units,
                  check_boundary)
    return psi0.with_amplitudes(out)


# ---------------------------------------------------------------------------
# lattice sums

def _kick_indices(kicks: KickSchedule | None, t_final, n_steps):
    """Map kick times to step indices 0..n_steps; returns {index: total kick}."""
    out: dict[int, float] = {}
    if kicks is None:
        return out
    kicks.check_interval(t_final)
    dt = t_final / n_steps
    for t, k in zip(kicks.times, kicks.kicks):
        j = int(round(t / dt))
        if abs(j * dt - t) > 1e-9 * max(1.0, t_final):
            raise ValueError(f"kick time {t} is not on the lattice time grid (dt = {dt})")
        out[j] = out.get(j, 0.0) + float(np.sum(k))
    return out


def _guard(grid: SpatialGrid, n_steps: int):
    if grid.dim != 1:
        raise ValueError("lattice sums are one-dimensional")
    n = grid.shape[0]
    if float(n) ** n_steps > TOL.enumeration_limit:
        raise TooLarge(f"{n}^{n_steps} paths exceeds the enumeration limit "
                       f"{TOL.enumeration_limit:.0e}")


def _path_chunks(x_i, x_f, grid: SpatialGrid, n_steps: int):
    """Yield arrays of full lattice paths, shape (chunk, n_steps + 1), in a fixed order."""
    pts = grid.points
    n_inner = n_steps - 1
    total = pts.size ** n_inner
    shape = (pts.size,) * n_inner
    for start in range(0, total, _CHUNK):
        ids = np.arange(start, min(total, start + _CHUNK))
        X = np.empty((len(ids), n_steps + 1))
        X[:, 0] = x_i
        X[:, -1] = x_f
        if n_inner:
            X[:, 1:-1] = pts[np.stack(np.unravel_index(ids, shape), axis=1)]
        yield X


def lattice_path_sum(x_i: float, x_f: float, t_final: float, n_steps: int, grid: SpatialGrid,
                     potential: Potential, kicks: KickSchedule | None = None,
                     units: Units = Units()) -> complex:
    """Brute-force sum over every lattice path from x_i to x_f.

    Each path contributes the product of short-time kernels, the
    quadrature weight h per intermediate point, and exp(-i dK_j x_j) for
    each kick. Intermediate points run over the grid; the endpoints are
    fixed. This is the reference oracle for :func:`transfer_matrix_sum`.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    _guard(grid, n_steps)
    dt = t_final / n_steps
    h = grid.h
    kidx = _kick_indices(kicks, t_final, n_steps)
    total = 0.0 + 0.0j
    for X in _path_chunks(x_i, x_f, grid, n_steps):
        amp = np.ones(len(X), dtype=complex)
        for j in range(1, n_steps + 1):
            amp = amp * short_time_kernel(X[:, j], X[:, j - 1], dt, potential, units)
        for j, k in kidx.items():
            amp = amp * np.exp(-1j * k * X[:, j])
        total += np.sum(amp)
    return complex(total * h ** (n_steps - 1))


def transfer_matrix_sum(x_i: float, x_f: float, t_final: float, n_steps: int,
                        grid: SpatialGrid, potential: Potential,
                        kicks: KickSchedule | None = None, units: Units = Units()) -> complex:
    """Same lattice discretization as :func:`lattice_path_sum`, summed by
    repeated kernel-matrix products instead of enumeration."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if grid.dim != 1:
        raise ValueError("lattice sums are one-dimensional")
    dt = t_final / n_steps
    x = grid.points
    h = grid.h
    kidx = _kick_indices(kicks, t_final, n_steps)

    def phase(j, pos):
        return np.exp(-1j * kidx[j] * pos) if j in kidx else 1.0

    start = phase(0, x_i)
    if n_steps == 1:
        return complex(start * short_time_kernel(x_f, x_i, dt, potential, units) * phase(1, x_f))
    v = start * short_time_kernel(x, x_i, dt, potential, units) * phase(1, x)
    T = short_time_kernel(x[:, None], x[None, :], dt, potential, units) * h
    for j in range(2, n_steps):
        v = (T @ v) * phase(j, x)
    last = short_time_kernel(x_f, x, dt, potential, units) * h
    return complex(np.sum(last * v) * phase(n_steps, x_f))


def z_functional(x_i: float, x_f: float, t_final: float, kick_schedule: KickSchedule | None,
                 potential: Potential, n_steps: int, *, grid: SpatialGrid,
                 units: Units = Units(), method: str = "split-step") -> complex:
    """Kicked propagator <x_f| U_kicked |x_i> on a grid.

    method="split-step" starts from the single-point state delta_{j,i}/h at
    the grid point nearest x_i, evolves it with :func:`kicked_evolution`
    and reads the amplitude at the grid point nearest x_f. The indicator
    state is band-limited, so the result carries a discretization bias of
    order 1 / (k_max sqrt(2 pi hbar t / m)) with k_max = pi / h.

    method="transfer" evaluates the lattice discretization exactly (kernel
    matrices, endpoints taken as given) and agrees with
    :func:`lattice_path_sum` to rounding error.
    """
    kicks = kick_schedule if kick_schedule is not None else KickSchedule.empty()
    if method == "transfer":
        return transfer_matrix_sum(x_i, x_f, t_final, n_steps, grid, potential, kicks, units)
    if method != "split-step":
        raise ValueError(f"unknown method {method!r}")
    if grid.dim != 1:
        raise ValueError("z_functional is one-dimensional")
    amps = np.zeros(grid.shape, dtype=complex)
    amps[grid.index(x_i)] = 1.0 / grid.h
    psi = kicked_evolution(WaveFunction(grid, amps), kicks, potential, t_final, n_steps, units,
                           check_boundary=False)
    return complex(psi.amplitudes[grid.index(x_f)])


def semiclassical_z(x_i: float, x_f: float, t_final: float, kick_schedule: KickSchedule | None,
                    potential: Potential, units: Units = Units(), n_steps: int = 2000,
                    initial_guess: float | None = None) -> complex:
    """Semiclassical kicked propagator.

    prefactor * exp(i S_cl / hbar) * exp(-i sum_j dK_j x_cl(tau_j)), with
    x_cl the unperturbed classical path between the endpoints. Kicks are
    impulses, so the kick integral is the sum over the schedule.
    Propagates FocalPoint and NoConvergence from the classical module.
    """
    path = classical.solve_bvp(potential, x_i, x_f, t_final, n_steps, initial_guess, units)
    pref = classical.van_vleck_prefactor(potential, path, units)
    s_cl = classical.action(path, potential).value
    kick_phase = 0.0
    if kick_schedule is not None and len(kick_schedule):
        kick_schedule.check_interval(t_final)
        x_at = np.asarray(path.at(kick_schedule.times)).reshape(-1)
        kick_phase = float(np.sum(np.sum(np.asarray(kick_schedule.kicks).reshape(len(x_at), -1), axis=1) * x_at))
    return complex(pref.value * np.exp(1j * s_cl / units.hbar) * np.exp(-1j * kick_phase))


def lattice_actions(x_i: float, x_f: float, t_final: float, n_steps: int, grid: SpatialGrid,
                    potential: Potential, units: Units = Units()) -> np.ndarray:
    """Discrete action of every lattice path, in enumeration order.

    S = sum_j [m (x_j - x_{j-1})^2 / (2 dt) - V(x_j) dt], the phase of the
    kernel product times hbar.
    """
    _guard(grid, n_steps)
    dt = t_final / n_steps
    out = []
    for X in _path_chunks(x_i, x_f, grid, n_steps):
        kin = 0.5 * units.mass * np.sum(np.diff(X, axis=1) ** 2, axis=1) / dt
        pot = np.zeros(len(X)) if potential.kind == "free" else np.sum(potential(X[:, 1:]), axis=1) * dt
        out.append(kin - pot)
    return np.concatenate(out)


def stationary_dominance(x_i: float, x_f: float, t_final: float, n_steps: int,
                         grid: SpatialGrid, potential: Potential,
                         units: Units = Units()) -> float:
    """Share of the lattice amplitude carried by near-stationary paths.

    |sum over paths with |S - S_min| <= pi hbar| / |sum over all paths|.
    The ratio is not bounded by one: partial sums of oscillating terms can
    exceed the total.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    S = lattice_actions(x_i, x_f, t_final, n_steps, grid, potential, units)
    phases = np.exp(1j * (S - S.min()) / units.hbar)
    window = np.abs(S - S.min()) <= np.pi * units.hbar
    total = abs(np.sum(phases))
    if total == 0:
        return float("inf")
    return float(abs(np.sum(phases[window])) / total)
