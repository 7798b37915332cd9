"""Classical paths and the quantities evaluated along them.

Initial- and boundary-value trajectories, the discrete action, the
Gel'fand-Yaglom fluctuation factor, and the packet-width / anharmonicity
diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TOL, Potential, Trajectory, Units
from .errors import FlatPotential, FocalPoint, NoConvergence, NonFinite

__all__ = [
    "ActionValue",
    "SemiclassicalPrefactor",
    "solve_ivp",
    "solve_bvp",
    "action",
    "van_vleck_prefactor",
    "packet_width",
    "classicality_ratio",
]

# the fluctuation equation is integrated with at least this many steps
_MIN_GY_STEPS = 4096


@dataclass(frozen=True, eq=False)
class ActionValue:
    value: float
    path: Trajectory

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True, eq=False)
class SemiclassicalPrefactor:
    """sqrt(m / (2 pi i hbar f(t))) with its Gel'fand-Yaglom solution f.

    ``gy_solution`` is sampled on the trajectory's time grid;
    ``maslov_index`` counts sign changes of f (0 before the first focal
    point).
    """

    value: complex
    gy_solution: np.ndarray
    maslov_index: int = 0


def _rk4(potential: Potential, x0, p0, t_final, n_steps, mass, variational=False):
    """Fixed-step RK4 for m x'' = -V'(x), optionally with m f'' = -V''(x) f.

    Returns arrays of x, p and (if requested) f, g = m f'.
    """
    dt = t_final / n_steps

    def rhs(s):
        x, p, f, g = s
        d = [p / mass, -potential(x, 1), 0.0, 0.0]
        if variational:
            d[2] = g / mass
            d[3] = -potential(x, 2) * f
        return np.array(d)

    out = np.empty((n_steps + 1, 4))
    s = np.array([x0, p0, 0.0, mass], dtype=float)
    out[0] = s
    for i in range(n_steps):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * dt * k1)
        k3 = rhs(s + 0.5 * dt * k2)
        k4 = rhs(s + dt * k3)
        s = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(s)):
            raise NonFinite(f"trajectory became non-finite at step {i + 1}", step=i + 1)
        out[i + 1] = s
    return out


def solve_ivp(potential: Potential, x0: float, p0: float, t_final: float, n_steps: int,
              units: Units = Units()) -> Trajectory:
    """Integrate m x'' = -V'(x) from (x0, p0) with classical RK4.

    Global error is O(dt^4). Raises NonFinite with the first bad step if
    the solution blows up.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    out = _rk4(potential, x0, p0, t_final, n_steps, units.mass)
    times = np.linspace(0.0, t_final, n_steps + 1)
    return Trajectory(times, out[:, 0], out[:, 1], units.mass)


def solve_bvp(potential: Potential, x_i: float, x_f: float, t_final: float, n_steps: int,
              initial_guess: float | None = None, units: Units = Units(),
              max_iter: int = TOL.bvp_max_iter) -> Trajectory:
    """Classical path from x_i to x_f in time t_final by Newton shooting.

    ``initial_guess`` is the starting initial momentum (default: the free
    particle value). Newton converges to the branch nearest the guess.
    The shooting Jacobian dx(T)/dp0 = f(T)/m comes from the fluctuation
    equation; when it vanishes (focal time) no nearby solution can be
    reached and NoConvergence is raised.
    """
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    m = units.mass
    p0 = m * (x_f - x_i) / t_final if initial_guess is None else float(initial_guess)
    residual = np.inf
    for _ in range(max_iter + 1):
        try:
            out = _rk4(potential, x_i, p0, t_final, n_steps, m, variational=True)
        except NonFinite as exc:
            raise NoConvergence(f"shooting diverged: {exc}", residual=residual) from exc
        residual = out[-1, 0] - x_f
        if abs(residual) < TOL.bvp_residual:
            times = np.linspace(0.0, t_final, n_steps + 1)
            return Trajectory(times, out[:, 0], out[:, 1], m)
        slope = out[-1, 2] / m
        if abs(out[-1, 2]) < 1e-8 * t_final:
            raise NoConvergence(
                f"shooting Jacobian vanishes at t={t_final} (focal time); residual {residual:.3e}",
                residual=abs(residual))
        p0 = p0 - residual / slope
    raise NoConvergence(f"no convergence after {max_iter} iterations; residual {abs(residual):.3e}",
                        residual=abs(residual))


def action(trajectory: Trajectory, potential: Potential) -> ActionValue:
    """Discrete action sum_j [m v_j^2 / 2 - V(x_mid)] dt (midpoint rule)."""
    x = trajectory.positions
    if len(trajectory) < 2:
        return ActionValue(0.0, trajectory)
    dt = trajectory.dt
    dx = np.diff(x, axis=0)
    mid = 0.5 * (x[1:] + x[:-1])
    if x.ndim == 1:
        kinetic = 0.5 * trajectory.mass * dx ** 2 / dt ** 2
        pot = potential(mid)
    else:
        kinetic = 0.5 * trajectory.mass * np.sum(dx ** 2, axis=-1) / dt ** 2
        pot = potential.on_vectors(mid)
    return ActionValue(float(np.sum(kinetic - pot) * dt), trajectory)


def van_vleck_prefactor(potential: Potential, trajectory: Trajectory,
                        units: Units = Units()) -> SemiclassicalPrefactor:
    """Semiclassical amplitude from the Gel'fand-Yaglom equation.

    Solves m f'' = -V''(x_cl) f with f(0) = 0, f'(0) = 1 along the path
    and returns sqrt(m / (2 pi i hbar f(T))). The branch is continued from
    t -> 0+, where it reduces to the free-particle value; every sign change
    of f adds a phase of -pi/2.

    Raises
    ------
    FocalPoint
        If |f(T)| < 1e-10 (caustic).
    """
    if trajectory.positions.ndim != 1:
        raise ValueError("van_vleck_prefactor needs a 1D trajectory")
    n = len(trajectory) - 1
    if n < 1:
        raise ValueError("trajectory needs at least two samples")
    sub = -(-_MIN_GY_STEPS // n)
    out = _rk4(potential, trajectory.positions[0], trajectory.momenta[0],
               trajectory.duration, n * sub, units.mass, variational=True)
    f = out[:, 2]
    f_end = f[-1]
    if abs(f_end) < TOL.focal:
        raise FocalPoint(f"Gel'fand-Yaglom solution vanishes at t={trajectory.duration} "
                         f"(f = {f_end:.3e})")
    signs = np.sign(f[1:])
    signs = signs[signs != 0]
    maslov = int(np.count_nonzero(np.diff(signs)))
    modulus = np.sqrt(units.mass / (2 * np.pi * units.hbar * abs(f_end)))
    value = modulus * np.exp(-0.25j * np.pi - 0.5j * np.pi * maslov)
    return SemiclassicalPrefactor(complex(value), f[::sub].copy(), maslov)


def _curvature_at(potential, trajectory, tau):
    x = float(np.asarray(trajectory.at(tau)).reshape(-1)[0])
    c = potential(x, 2)
    if abs(c) < TOL.flat_curvature:
        raise FlatPotential(f"|V''| = {abs(c):.3e} at x = {x}: packet width undefined")
    return x, c


def packet_width(potential: Potential, trajectory: Trajectory, tau: float,
                 units: Units = Units()) -> float:
    """Zero-point width (hbar / (2 sqrt(m |V''(x_cl(tau))|)))^(1/2).

    A heuristic diagnostic; nothing else in the package consumes it.
    """
    _, c = _curvature_at(potential, trajectory, tau)
    return float(np.sqrt(units.hbar / (2.0 * np.sqrt(units.mass * abs(c)))))


def classicality_ratio(potential: Potential, trajectory: Trajectory, tau: float, n: int,
                       units: Units = Units()) -> float:
    """Size of the n-th order potential change relative to the second order.

    (|V^(n)| / |V''|) * (hbar / sqrt(m |V''|))^(n/2 - 1) at x_cl(tau);
    much less than one means the quadratic expansion holds.
    """
    if n not in (3, 4):
        raise ValueError(f"n must be 3 or 4, got {n}")
    x, c = _curvature_at(potential, trajectory, tau)
    higher = abs(potential(x, n))
    scale = units.hbar / np.sqrt(units.mass * abs(c))
    return float(higher / abs(c) * scale ** (n / 2 - 1))
