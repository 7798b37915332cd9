"""N-slit interference with which-path detectors.

Each slit k contributes a stationary free-particle amplitude phi_k(x_s)
at screen point x_s. A detector left in state |D_k> by passage through
slit k suppresses the cross terms by the overlaps <D_j|D_k>. Patterns are
reported unnormalized (relative intensity).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TOL, Units
from .errors import BadOutcome, FlatPattern

__all__ = [
    "SlitConfig",
    "DetectorSet",
    "slit_amplitudes",
    "intensity_unmeasured",
    "gram_matrix",
    "conditional_pattern",
    "averaged_pattern",
    "visibility",
]


@dataclass(frozen=True, eq=False)
class SlitConfig:
    """Slit geometry and beam.

    The flight time to the screen is T = D / v with the nominal speed
    v = 2 pi hbar / (m lambda_dB). ``slit_width`` is carried for reference;
    slits are treated as point sources.
    """

    positions: np.ndarray
    screen_distance: float
    wavelength: float
    slit_width: float = 1e-3
    units: Units = Units()

    def __post_init__(self):
        x = np.array(self.positions, dtype=float).reshape(-1)
        if len(x) < 1:
            raise ValueError("need at least one slit")
        if len(np.unique(x)) != len(x):
            raise ValueError("slit positions must be distinct")
        for name in ("screen_distance", "wavelength", "slit_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)

    @property
    def n_slits(self) -> int:
        return len(self.positions)

    @property
    def speed(self) -> float:
        return 2 * np.pi * self.units.hbar / (self.units.mass * self.wavelength)

    @property
    def flight_time(self) -> float:
        return self.screen_distance / self.speed

    @classmethod
    def regular(cls, n_slits: int, separation: float, screen_distance: float,
                wavelength: float, **kw) -> "SlitConfig":
        """``n_slits`` slits centred on 0 with spacing ``separation``."""
        pos = (np.arange(n_slits) - (n_slits - 1) / 2) * separation
        return cls(pos, screen_distance, wavelength, **kw)


@dataclass(frozen=True, eq=False)
class DetectorSet:
    """Detector states |D_k> = sum_n C[k, n] |n> over a complementary basis.

    Rows of ``coefficients`` are normalized on construction.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("coefficients must be a nonempty 2D array")
        norms = np.linalg.norm(c, axis=1)
        if np.any(norms < TOL.zero_norm):
            raise ValueError("detector states must be nonzero")
        c = c / norms[:, None]
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def n_detectors(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.coefficients.shape[1]

    @classmethod
    def identical(cls, n: int, n_outcomes: int | None = None) -> "DetectorSet":
        """Every slit leaves the detector in the same state: no which-path information."""
        m = n if n_outcomes is None else n_outcomes
        return cls(np.ones((n, m)))

    @classmethod
    def orthonormal(cls, n: int) -> "DetectorSet":
        """Perfectly distinguishing detectors."""
        return cls(np.eye(n))

    @classmethod
    def two_overlap(cls, c: float) -> "DetectorSet":
        """Rows (1, 0) and (c, sqrt(1 - c^2)); overlap <D_1|D_2> = c."""
        if not 0 <= c <= 1:
            raise ValueError("overlap must lie in [0, 1]")
        return cls(np.array([[1.0, 0.0], [c, np.sqrt(1 - c * c)]]))

    @classmethod
    def from_phases(cls, phases) -> "DetectorSet":
        """|D_k> proportional to sum_n exp(i phases[k, n]) |n>; complex phases allowed."""
        return cls(np.exp(1j * np.asarray(phases, dtype=complex)))

    def with_row_phases(self, angles) -> "DetectorSet":
        return DetectorSet(self.coefficients * np.exp(1j * np.asarray(angles))[:, None])


def slit_amplitudes(config: SlitConfig, x_s, equal_weights: bool = False) -> np.ndarray:
    """Free-particle amplitudes from each slit to screen points.

    phi_k(x_s) = A exp(i m (x_s - x_k)^2 / (2 hbar T)) with the free
    propagator prefactor A = sqrt(m / (2 pi i hbar T)), or A = 1 when
    ``equal_weights``. A is common to all slits.

    Returns an array of shape ``x_s.shape + (n_slits,)``.
    """
    u = config.units
    T = config.flight_time
    x = np.asarray(x_s, dtype=float)[..., None]
    phase = u.mass * (x - config.positions) ** 2 / (2 * u.hbar * T)
    amp = 1.0 if equal_weights else np.sqrt(u.mass / (2j * np.pi * u.hbar * T))
    return amp * np.exp(1j * phase)


def intensity_unmeasured(amplitudes) -> np.ndarray:
    """Pattern without detectors, (1/N) |sum_k phi_k|^2.

    Equal to (1/N)(sum_k |phi_k|^2 + 2 sum_{i<j} Re(phi_i* phi_j)).
    The last axis of ``amplitudes`` runs over slits.
    """
    phi = np.asarray(amplitudes, dtype=complex)
    if phi.shape[-1] == 0:
        raise ValueError("need at least one amplitude")
    return np.abs(np.sum(phi, axis=-1)) ** 2 / phi.shape[-1]


def gram_matrix(detectors: DetectorSet) -> np.ndarray:
    """G[j, k] = <D_j|D_k>."""
    c = detectors.coefficients
    return np.conj(c) @ c.T


def _check_sizes(phi, detectors):
    if phi.shape[-1] != detectors.n_detectors:
        raise ValueError(f"{phi.shape[-1]} amplitudes but {detectors.n_detectors} detectors")


def conditional_pattern(amplitudes, detectors: DetectorSet, outcome: int) -> np.ndarray:
    """Pattern jointly with detector outcome n = ``outcome``.

    |(1/sqrt(N)) sum_k <n|D_k> phi_k|^2. Summed over all outcomes it gives
    :func:`averaged_pattern`.

    Raises
    ------
    BadOutcome
        If ``outcome`` does not index the complementary basis.
    """
    phi = np.asarray(amplitudes, dtype=complex)
    _check_sizes(phi, detectors)
    if not (isinstance(outcome, (int, np.integer)) and 0 <= outcome < detectors.n_outcomes):
        raise BadOutcome(f"outcome {outcome} outside 0..{detectors.n_outcomes - 1}")
    col = detectors.coefficients[:, outcome]
    return np.abs(phi @ col) ** 2 / phi.shape[-1]


def averaged_pattern(amplitudes, detectors: DetectorSet) -> np.ndarray:
    """Pattern averaged over detector outcomes.

    (1/N) sum_{j,k} phi_j* G[j, k] phi_k; orthonormal detectors give
    (1/N) sum |phi_j|^2 and identical ones the full interference pattern.
    """
    phi = np.asarray(amplitudes, dtype=complex)
    _check_sizes(phi, detectors)
    G = gram_matrix(detectors)
    val = np.einsum("...j,jk,...k->...", np.conj(phi), G, phi)
    return val.real / phi.shape[-1]


def visibility(pattern) -> float:
    """(P_max - P_min) / (P_max + P_min) over a sampled stretch of pattern.

    Raises FlatPattern when P_max + P_min < 1e-14.
    """
    p = np.asarray(pattern, dtype=float)
    hi, lo = float(np.max(p)), float(np.min(p))
    if hi + lo < TOL.flat_pattern:
        raise FlatPattern(f"pattern is identically zero (P_max + P_min = {hi + lo:.3e})")
    return (hi - lo) / (hi + lo)
