"""Probe-scattering measurement model and the joint record amplitude.

Plane-wave probes scatter elastically and isotropically off the system.
Integrating each probe's final direction gives a sinc factor per probe;
with the per-probe wavelength lambda = alpha / sqrt(dt) the product of
these factors tends to a Gaussian weight on the deviation of the record
from the classical path,

    log weight = -(2 pi^2 / 3 alpha^2) * integral |r_p - r_cl|^2 dtau.

Per-probe constants 4 pi exp(-i k d.dr) do not converge in the continuum
limit and are dropped; the discrete route reports them for audit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import classical
from .core import TOL, Potential, Trajectory, Units
from .errors import SeriesDiverges

__all__ = [
    "ProbeSpec",
    "ProbeRecord",
    "JointAmplitude",
    "ProductWeight",
    "s_matrix_element",
    "angular_distribution",
    "angular_kick_integral",
    "angular_kick_quadrature",
    "zeta_even",
    "probe_wavelength",
    "log_product_weight",
    "continuum_weight",
    "discrete_product_weight",
    "probe_weight_factorization",
    "joint_amplitude",
]

WEIGHT_COEFFICIENT = 2.0 * np.pi ** 2 / 3.0  # = 4 zeta(2)

_Z_HAT = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class ProbeSpec:
    wavelength: float
    direction: np.ndarray = field(default_factory=lambda: _Z_HAT.copy())

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("probe wavelength must be positive")
        d = np.array(self.direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("probe direction must be a unit vector")
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def momentum(self) -> np.ndarray:
        """Initial probe wavevector K_i."""
        return self.wavenumber * self.direction


@dataclass(frozen=True, eq=False)
class ProbeRecord:
    """Probe readouts r_p(tau_j), one 3-vector per probe.

    Each probe stands for the interval of length ``dt`` ending at its
    time, so a record of M probes covers a duration M * dt.
    """

    times: np.ndarray
    readouts: np.ndarray
    alpha: float
    dt: float | None = None

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        r = np.array(self.readouts, dtype=float)
        if r.ndim == 1:
            r = r.reshape(-1, 1)
        if r.shape[0] != len(t) or r.shape[1] > 3:
            raise ValueError("readouts must have shape (n_probes, <=3)")
        if r.shape[1] < 3:
            r = np.pad(r, ((0, 0), (0, 3 - r.shape[1])))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        dt = self.dt
        if dt is None:
            if len(t) < 2:
                raise ValueError("a single-probe record needs an explicit dt")
            dt = (t[-1] - t[0]) / (len(t) - 1)
        if len(t) > 1:
            steps = np.diff(t)
            if np.any(steps <= 0) or np.max(np.abs(steps - dt)) > 1e-9 * dt:
                raise ValueError("record times must be uniform with step dt")
        if not dt > 0:
            raise ValueError("dt must be positive")
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "readouts", r)
        object.__setattr__(self, "dt", float(dt))

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return len(self.times) * self.dt

    @property
    def wavelength(self) -> float:
        """Per-probe wavelength alpha / sqrt(dt)."""
        return probe_wavelength(self.alpha, self.dt)

    @classmethod
    def along(cls, r_cl: Trajectory, alpha: float, offset=None) -> "ProbeRecord":
        """Record that follows ``r_cl`` at its samples after the first, plus ``offset``."""
        times = r_cl.times[1:]
        r = r_cl.as_vectors()[1:]
        if offset is not None:
            r = r + np.asarray(offset, dtype=float)
        return cls(times, r, alpha, r_cl.dt)


@dataclass(frozen=True)
class JointAmplitude:
    """prefactor * exp(i action_phase) * exp(log_weight)."""

    prefactor: complex
    action_phase: float
    log_weight: float
    route: str = "continuum"
    dropped_log_modulus: float = 0.0
    dropped_phase: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def value(self) -> complex:
        return complex(self.prefactor * np.exp(1j * self.action_phase) * np.exp(self.log_weight))

    @property
    def semiclassical_propagator(self) -> complex:
        return complex(self.prefactor * np.exp(1j * self.action_phase))


@dataclass(frozen=True)
class ProductWeight:
    """Log of the probe product with the divergent per-probe constant split off."""

    log_weight: float
    dropped_log_modulus: float
    dropped_phase: float


def s_matrix_element(K_f, K_i) -> complex:
    """Elastic, isotropic S-matrix element.

    delta(|K_f| - |K_i|) f(theta, phi) / (|K_f|^2 sin theta) with
    f = sin theta / sqrt(4 pi). The delta is realized as a modulus
    equality test (relative tolerance 1e-9); on shell the value is
    1 / (sqrt(4 pi) |K_f|^2), independent of direction.
    """
    kf = float(np.linalg.norm(K_f))
    ki = float(np.linalg.norm(K_i))
    if not (np.isfinite(kf) and np.isfinite(ki)):
        raise ValueError("momenta must be finite")
    if kf == 0 or abs(kf - ki) > TOL.elastic * max(kf, ki):
        return 0j
    return complex(1.0 / (np.sqrt(4 * np.pi) * kf ** 2))


def angular_distribution(theta, phi=0.0):
    """f(theta, phi) = sin(theta) / sqrt(4 pi)."""
    return np.sin(theta) / np.sqrt(4 * np.pi) + 0.0 * np.asarray(phi)


def angular_kick_integral(delta_r, wavelength, direction=_Z_HAT):
    """Closed form of the probe-direction integral.

    I = int sin(theta) dtheta dphi exp(i dK . dr)
      = 4 pi exp(-i k d.dr) sinc(k |dr|),  k = 2 pi / wavelength,

    with dK = k (n - d) for final direction n and initial direction d.
    Broadcasts over the leading axes of ``delta_r`` (last axis: 3).
    """
    dr = np.asarray(delta_r, dtype=float)
    k = 2 * np.pi / np.asarray(wavelength, dtype=float)
    rho = np.linalg.norm(dr, axis=-1)
    proj = dr @ np.asarray(direction, dtype=float)
    return 4 * np.pi * np.exp(-1j * k * proj) * np.sinc(k * rho / np.pi)


def angular_kick_quadrature(delta_r, wavelength, n_theta: int = 96, n_phi: int = 96):
    """Direct 2D quadrature of the same integral (probe along +z).

    Gauss-Legendre in theta on [0, pi], periodic trapezoid in phi.
    Independent of :func:`angular_kick_integral`; used as its oracle.
    """
    dr = np.atleast_2d(np.asarray(delta_r, dtype=float))
    k = np.broadcast_to(2 * np.pi / np.asarray(wavelength, dtype=float), dr.shape[:1])
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * np.pi * (u + 1)
    w_theta = 0.5 * np.pi * wu
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    weights = (w_theta[:, None] * np.sin(th)) * (2 * np.pi / n_phi)
    nx, ny, nz = np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)
    out = np.empty(len(dr), dtype=complex)
    for i, (d, kk) in enumerate(zip(dr, k)):
        arg = kk * (nx * d[0] + ny * d[1] + (nz - 1.0) * d[2])
        out[i] = np.sum(weights * np.exp(1j * arg))
    return out if np.ndim(delta_r) > 1 else out[0]


# Bernoulli numbers B_2 .. B_20 for the Euler-Maclaurin tail
_BERNOULLI = [Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30),
              Fraction(5, 66), Fraction(-691, 2730), Fraction(7, 6), Fraction(-3617, 510),
              Fraction(43867, 798), Fraction(-174611, 330)]


def zeta_even(m: int, n_terms: int = 24) -> float:
    """Riemann zeta at an even argument, zeta(2m).

    Partial sum of k^(-2m) for k < N plus the Euler-Maclaurin tail
    (integral term, half term and Bernoulli corrections). With N = 24 the
    remaining error is far below 1e-14 for every m >= 1.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    s = 2 * int(m)
    N = int(n_terms)
    k = np.arange(N - 1, 0, -1, dtype=float)  # small terms first
    head = float(np.sum(k ** -s))
    tail = N ** (1 - s) / (s - 1) + 0.5 * N ** -s
    rising = float(s)
    fact = 2.0
    for j, b in enumerate(_BERNOULLI, start=1):
        term = float(b) / fact * rising * N ** (-s - 2 * j + 1)
        tail += term
        if abs(term) < 1e-18 * head:
            break
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        fact *= (2 * j + 1) * (2 * j + 2)
    return head + tail


def probe_wavelength(alpha: float, dt: float) -> float:
    """Per-step wavelength lambda(dt) = alpha / sqrt(dt)."""
    return float(alpha / np.sqrt(dt))


def _offsets(record: ProbeRecord, r_cl) -> np.ndarray:
    """dr_j = r_p(tau_j) - r_cl(tau_j), shape (M, 3)."""
    if isinstance(r_cl, Trajectory):
        if len(r_cl) == len(record) and np.allclose(r_cl.times, record.times, rtol=0, atol=1e-12):
            ref = r_cl.as_vectors()
        else:
            pos = np.asarray(r_cl.at(record.times))
            ref = pos.reshape(len(record), -1)
            ref = np.pad(ref, ((0, 0), (0, 3 - ref.shape[1])))
    else:
        ref = np.asarray(r_cl, dtype=float)
        if ref.ndim == 1:
            ref = ref.reshape(-1, 1)
        ref = np.pad(ref, ((0, 0), (0, 3 - ref.shape[1])))
        if ref.shape[0] != len(record):
            raise ValueError("r_cl samples must match the record")
    return record.readouts - ref


def _scaled_offsets(record, r_cl, alpha):
    """x_j = |dr_j|^2 / lambda^2 = |dr_j|^2 dt / alpha^2."""
    dr = _offsets(record, r_cl)
    alpha = record.alpha if alpha is None else alpha
    return dr, np.sum(dr ** 2, axis=1) * record.dt / alpha ** 2


def _check_series(x):
    if len(x) == 0:
        return
    worst = int(np.argmax(x))
    if 4 * x[worst] >= 1:
        raise SeriesDiverges(f"4|dr|^2/lambda^2 = {4 * x[worst]:.3f} >= 1 at probe {worst}; "
                             "the sinc expansion does not converge", index=worst)


def log_product_weight(record: ProbeRecord, r_cl, m_max: int, alpha: float | None = None,
                       coefficients: str = "plain") -> float:
    """Truncated zeta series for the log of the probe product.

    -sum_j sum_{m=1}^{m_max} c_m 4^m zeta(2m) (|dr_j|^2 / lambda^2)^m.
    coefficients="plain" uses c_m = 1; coefficients="log-sinc" uses
    c_m = 1/m, the exact Taylor series of log sinc, whose infinite sum
    equals the discrete product. The m = 1 terms agree.

    Raises SeriesDiverges unless 4 |dr_j|^2 / lambda^2 < 1 for all j.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if coefficients not in ("plain", "log-sinc"):
        raise ValueError(f"unknown coefficients {coefficients!r}")
    _, x = _scaled_offsets(record, r_cl, alpha)
    _check_series(x)
    total = 0.0
    for m in range(m_max, 0, -1):  # small terms first
        c = 1.0 if coefficients == "plain" else 1.0 / m
        total += c * 4.0 ** m * zeta_even(m) * float(np.sum(x ** m))
    return -total


def continuum_weight(record: ProbeRecord, r_cl, alpha: float | None = None,
                     rule: str = "rectangle") -> float:
    """Continuum log-weight -(2 pi^2 / 3 alpha^2) * int |r_p - r_cl|^2 dtau.

    rule="rectangle" sums dt |dr_j|^2 over probes (each probe covers its
    own interval; matches the m = 1 term of the probe product exactly).
    rule="trapezoid" applies the trapezoid rule on the record times.
    """
    dr = _offsets(record, r_cl)
    alpha = record.alpha if alpha is None else alpha
    sq = np.sum(dr ** 2, axis=1)
    if rule == "rectangle":
        integral = float(np.sum(sq) * record.dt)
    elif rule == "trapezoid":
        integral = float(np.trapezoid(sq, record.times))
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return -WEIGHT_COEFFICIENT * integral / alpha ** 2


def discrete_product_weight(record: ProbeRecord, r_cl, alpha: float | None = None) -> ProductWeight:
    """Log of prod_j I_j with I_j from :func:`angular_kick_integral` at
    lambda = alpha / sqrt(dt), after dividing out 4 pi exp(-i k dr_3).

    The divided-out constants are returned as ``dropped_log_modulus``
    (M log 4 pi) and ``dropped_phase`` (-sum_j k dr_3,j).
    """
    dr = _offsets(record, r_cl)
    alpha = record.alpha if alpha is None else alpha
    lam = probe_wavelength(alpha, record.dt)
    k = 2 * np.pi / lam
    _check_series(np.sum(dr ** 2, axis=1) / lam ** 2)
    integrals = angular_kick_integral(dr, lam)
    phase = -k * dr[:, 2]
    reduced = integrals / (4 * np.pi * np.exp(1j * phase))
    return ProductWeight(float(np.sum(np.log(reduced.real))),
                         float(len(dr) * np.log(4 * np.pi)),
                         float(np.sum(phase)))


def probe_weight_factorization(record: ProbeRecord, r_cl, alpha: float | None = None) -> np.ndarray:
    """Per-probe log factors -(2 pi^2 dt / 3 alpha^2) |dr_j|^2.

    Each factor depends only on its own probe's deviation; their sum is
    :func:`continuum_weight` (rectangle rule).
    """
    dr = _offsets(record, r_cl)
    alpha = record.alpha if alpha is None else alpha
    return -WEIGHT_COEFFICIENT * record.dt / alpha ** 2 * np.sum(dr ** 2, axis=1)


def joint_amplitude(record: ProbeRecord, x_i: float, x_f: float, t_final: float,
                    potential: Potential, alpha: float | None = None, units: Units = Units(),
                    route: str = "continuum", n_steps: int = 2000, m_max: int = 8,
                    initial_guess: float | None = None) -> JointAmplitude:
    """Joint amplitude of the system propagator and a probe record.

    The prefactor and action come from the classical path between x_i and
    x_f (embedded along the first axis); the record weight is computed by

    * route="continuum": :func:`continuum_weight`,
    * route="discrete": :func:`discrete_product_weight`,
    * route="series": :func:`log_product_weight` with log-sinc coefficients.

    ``diagnostics`` holds S_cl / hbar and, where V'' != 0 on the path, the
    ratio of the per-probe wavelength to the largest packet width.
    """
    alpha = record.alpha if alpha is None else alpha
    if len(record) and (record.times[0] < 0 or record.times[-1] > t_final * (1 + 1e-12)):
        raise ValueError("record times must lie in [0, t_final]")
    path = classical.solve_bvp(potential, x_i, x_f, t_final, n_steps, initial_guess, units)
    pref = classical.van_vleck_prefactor(potential, path, units)
    s_cl = classical.action(path, potential).value
    dropped_mod = dropped_phase = 0.0
    if route == "continuum":
        logw = continuum_weight(record, path, alpha)
    elif route == "discrete":
        pw = discrete_product_weight(record, path, alpha)
        logw, dropped_mod, dropped_phase = pw.log_weight, pw.dropped_log_modulus, pw.dropped_phase
    elif route == "series":
        logw = log_product_weight(record, path, m_max, alpha, coefficients="log-sinc")
    else:
        raise ValueError(f"unknown route {route!r}")
    diagnostics = {"action_over_hbar": s_cl / units.hbar}
    curv = np.abs(potential(path.positions, 2))
    if np.min(curv) > TOL.flat_curvature:
        sigma_max = float(np.max(np.sqrt(units.hbar / (2 * np.sqrt(units.mass * curv)))))
        diagnostics["wavelength_over_width"] = probe_wavelength(alpha, record.dt) / sigma_max
    return JointAmplitude(pref.value, s_cl / units.hbar, logw, route, dropped_mod, dropped_phase,
                          diagnostics)
