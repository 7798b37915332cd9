"""Shared domain types: units, grids, potentials, wavefunctions, trajectories.

Everything here is immutable after construction. Arrays held by the
dataclasses are flagged read-only so they can be shared between threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicHermiteSpline

from .errors import InvalidBounds, TooFewPoints, UnsupportedOrder, ZeroNorm

__all__ = [
    "Tolerances",
    "TOL",
    "Units",
    "SpatialGrid",
    "Potential",
    "WaveFunction",
    "Trajectory",
    "make_grid",
    "eval_potential",
    "normalize",
]

MAX_DERIVATIVE_ORDER = 4


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used across the package."""

    zero_norm: float = 1e-14
    uniform_time: float = 1e-12
    normalized: float = 1e-10
    boundary_amplitude: float = 1e-8
    bvp_residual: float = 1e-8
    bvp_max_iter: int = 100
    focal: float = 1e-10
    flat_curvature: float = 1e-12
    elastic: float = 1e-9
    flat_pattern: float = 1e-14
    enumeration_limit: int = 10_000_000


TOL = Tolerances()


@dataclass(frozen=True)
class Units:
    """Action and mass units. Natural units (hbar = m = 1) by default."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and np.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not (self.mass > 0 and np.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid in 1 or 3 dimensions.

    ``axes`` holds one ``(min, max, n_points)`` triple per dimension.
    """

    axes: tuple

    def __post_init__(self):
        if len(self.axes) not in (1, 3):
            raise ValueError("grid dimension must be 1 or 3")
        for lo, hi, n in self.axes:
            if not (hi > lo):
                raise InvalidBounds(f"max ({hi}) must exceed min ({lo})")
            if int(n) < 2:
                raise TooFewPoints(f"need at least 2 points per axis, got {n}")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(int(n) for _, _, n in self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for lo, hi, n in self.axes])

    @property
    def h(self) -> float:
        """Spacing of the first axis (the only one in 1D)."""
        return float(self.spacing[0])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_total(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, i: int = 0) -> np.ndarray:
        lo, hi, n = self.axes[i]
        return np.linspace(lo, hi, int(n))

    @property
    def points(self) -> np.ndarray:
        """Coordinates: shape (n,) in 1D, (n0, n1, n2, 3) in 3D."""
        if self.dim == 1:
            return self.axis(0)
        mesh = np.meshgrid(*(self.axis(i) for i in range(3)), indexing="ij")
        return np.stack(mesh, axis=-1)

    def coordinate(self, index):
        """Coordinate of an integer grid index (tuple of indices in 3D)."""
        index = np.atleast_1d(index)
        lo = np.array([a[0] for a in self.axes])
        out = lo + index * self.spacing
        return float(out[0]) if self.dim == 1 else out

    def index(self, coordinate):
        """Nearest grid index of a coordinate."""
        coordinate = np.atleast_1d(np.asarray(coordinate, dtype=float))
        lo = np.array([a[0] for a in self.axes])
        idx = np.rint((coordinate - lo) / self.spacing).astype(int)
        hi = np.array(self.shape) - 1
        idx = np.clip(idx, 0, hi)
        return int(idx[0]) if self.dim == 1 else tuple(int(i) for i in idx)


def make_grid(dim: int, bounds, n_points) -> SpatialGrid:
    """Build a uniform grid.

    Parameters
    ----------
    dim : int
        1 or 3.
    bounds : sequence
        ``(min, max)`` shared by every axis, or one pair per axis.
    n_points : int or sequence of int
        Points per axis.
    """
    if dim not in (1, 3):
        raise ValueError(f"dim must be 1 or 3, got {dim}")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape == (2,):
        bounds = np.tile(bounds, (dim, 1))
    if bounds.shape != (dim, 2):
        raise InvalidBounds(f"bounds must be a pair or {dim} pairs")
    if np.ndim(n_points) == 0:
        n_points = [int(n_points)] * dim
    if len(n_points) != dim:
        raise TooFewPoints(f"expected {dim} point counts")
    return SpatialGrid(tuple((float(lo), float(hi), int(n))
                             for (lo, hi), n in zip(bounds, n_points)))


@dataclass(frozen=True, eq=False)
class Potential:
    """One-dimensional potential V(x) with derivatives up to fourth order.

    Analytic families are stored as polynomial coefficients and
    differentiated exactly. Tabulated potentials use second-order finite
    differences on the table and linear interpolation between nodes.
    In more than one dimension the potential acts separably,
    V(r) = sum_c V(r_c).
    """

    kind: str
    params: tuple = ()
    coefficients: np.ndarray | None = None
    table_x: np.ndarray | None = None
    table_derivatives: np.ndarray | None = None

    @classmethod
    def free(cls) -> "Potential":
        return cls("free", (), _frozen([0.0]))

    @classmethod
    def harmonic(cls, omega: float, mass: float = 1.0) -> "Potential":
        """V = m omega^2 x^2 / 2."""
        return cls("harmonic", (omega, mass), _frozen([0.0, 0.0, 0.5 * mass * omega ** 2]))

    @classmethod
    def quartic(cls, a: float, b: float = 0.0) -> "Potential":
        """V = a x^4 + b x^2."""
        return cls("quartic", (a, b), _frozen([0.0, 0.0, b, 0.0, a]))

    @classmethod
    def double_well(cls, a: float, b: float) -> "Potential":
        """V = a (x^2 - b^2)^2, minima at x = +-b."""
        return cls("double_well", (a, b),
                   _frozen([a * b ** 4, 0.0, -2.0 * a * b ** 2, 0.0, a]))

    @classmethod
    def tabulated(cls, x, values) -> "Potential":
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or len(x) < 5:
            raise ValueError("tabulated potential needs matching 1D arrays of >= 5 nodes")
        if not np.all(np.diff(x) > 0):
            raise ValueError("tabulated nodes must be strictly increasing")
        ders = [values]
        for _ in range(MAX_DERIVATIVE_ORDER):
            ders.append(np.gradient(ders[-1], x, edge_order=2))
        return cls("tabulated", (), None, _frozen(x), _frozen(np.stack(ders)))

    def __post_init__(self):
        if self.coefficients is not None:
            p = Polynomial(self.coefficients)
            ders = tuple(tuple(float(c) for c in p.deriv(k).coef)
                         for k in range(MAX_DERIVATIVE_ORDER + 1))
            object.__setattr__(self, "derivative_coefficients", ders)

    @property
    def is_analytic(self) -> bool:
        return self.coefficients is not None

    def __call__(self, x, order: int = 0):
        return eval_potential(self, x, order)

    def on_vectors(self, r, order: int = 0):
        """Separable evaluation over the last axis of ``r``."""
        r = np.asarray(r, dtype=float)
        return np.sum(eval_potential(self, r, order), axis=-1)


def _horner(coeffs, x):
    out = coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * x + c
    return out


def eval_potential(potential: Potential, x, order: int = 0):
    """V or its ``order``-th derivative at ``x`` (scalar or array)."""
    if order not in range(MAX_DERIVATIVE_ORDER + 1):
        raise UnsupportedOrder(f"derivative order must be 0..{MAX_DERIVATIVE_ORDER}, got {order}")
    if potential.is_analytic:
        if isinstance(x, float):
            return float(_horner(potential.derivative_coefficients[order], x))
        x = np.asarray(x, dtype=float)
        out = _horner(potential.derivative_coefficients[order], x) + np.zeros_like(x)
    else:
        x = np.asarray(x, dtype=float)
        out = np.interp(x, potential.table_x, potential.table_derivatives[order])
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: SpatialGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != self.grid.shape:
            raise ValueError(f"amplitudes shape {amps.shape} != grid shape {self.grid.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_volume))

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def with_amplitudes(self, amplitudes) -> "WaveFunction":
        return WaveFunction(self.grid, amplitudes)

    @classmethod
    def gaussian(cls, grid: SpatialGrid, x0: float, sigma: float, k0: float = 0.0) -> "WaveFunction":
        """Normalized 1D Gaussian packet; ``sigma`` is the std of |psi|^2."""
        x = grid.points
        amps = (2 * np.pi * sigma ** 2) ** -0.25 * np.exp(-((x - x0) ** 2) / (4 * sigma ** 2) + 1j * k0 * x)
        return cls(grid, amps)


def normalize(wavefunction: WaveFunction) -> WaveFunction:
    """Rescale to unit L2 norm under the grid measure."""
    n = wavefunction.norm()
    if not n >= TOL.zero_norm:
        raise ZeroNorm(f"cannot normalize a state with norm {n:.3e}")
    # already unit norm up to rounding: return as is so normalize is idempotent
    if abs(n - 1.0) <= 4 * np.finfo(float).eps:
        return wavefunction
    return wavefunction.with_amplitudes(wavefunction.amplitudes / n)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Classical path sampled on a uniform time grid.

    ``positions`` and ``momenta`` have shape (n,) in 1D or (n, d).
    """

    times: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        t = _frozen(self.times)
        x = _frozen(self.positions)
        p = _frozen(self.momenta)
        if t.ndim != 1 or len(t) < 1:
            raise ValueError("times must be a nonempty 1D array")
        if len(x) != len(t) or len(p) != len(t):
            raise ValueError("times, positions and momenta must have equal length")
        if len(t) > 1:
            dt = np.diff(t)
            if not np.all(dt > 0):
                raise ValueError("times must be strictly increasing")
            step = (t[-1] - t[0]) / (len(t) - 1)
            if np.max(np.abs(dt - step)) > TOL.uniform_time * max(abs(step), abs(t[-1])):
                raise ValueError("times must be uniformly spaced")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "momenta", p)

    def __len__(self):
        return len(self.times)

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float((self.times[-1] - self.times[0]) / (len(self.times) - 1))

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def velocities(self) -> np.ndarray:
        return self.momenta / self.mass

    def at(self, tau):
        """Position at arbitrary time(s) by cubic Hermite interpolation.

        Uses the stored momenta as slopes, so the interpolant is fourth
        order accurate when the samples come from a smooth path.
        """
        if len(self.times) == 1:
            return np.broadcast_to(self.positions[0], np.shape(tau) + self.positions.shape[1:]).copy()
        spline = CubicHermiteSpline(self.times, self.positions, self.velocities, axis=0)
        return spline(tau)

    def as_vectors(self, dim: int = 3) -> np.ndarray:
        """Positions padded with zeros to ``dim`` components, shape (n, dim).

        A 1D path is embedded along the first axis.
        """
        x = self.positions.reshape(len(self.times), -1)
        if x.shape[1] > dim:
            raise ValueError(f"trajectory has {x.shape[1]} components, more than {dim}")
        out = np.zeros((len(self.times), dim))
        out[:, : x.shape[1]] = x
        return out
