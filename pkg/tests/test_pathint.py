import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathmeas import pathint
from pathmeas.core import Potential, Units, WaveFunction, make_grid
from pathmeas.errors import BoundaryLeak, TooLarge
from pathmeas.pathint import FilterSpec, KickSchedule

FREE = Potential.free()
HO = Potential.harmonic(1.0)


def free_propagator(xf, xi, t, m=1.0, hbar=1.0):
    return np.sqrt(m / (2j * np.pi * hbar * t)) * np.exp(1j * m * (xf - xi) ** 2 / (2 * hbar * t))


def rotated_quadrature(f, center, n=40):
    """int f(y) dy along y = center + exp(i pi/4) s (Gauss-Hermite in s)."""
    s, w = np.polynomial.hermite.hermgauss(n)
    rot = np.exp(0.25j * np.pi)
    y = center + rot * s
    return np.sum(w * np.exp(s ** 2) * f(y)) * rot


class TestKernel:
    def test_modulus(self):
        k = pathint.short_time_kernel(0.3, 0.3, 1.0, FREE)
        assert k == pytest.approx((2j * np.pi) ** -0.5, rel=1e-14)
        assert abs(k) == pytest.approx(0.3989422804014327, abs=1e-12)

    def test_kinetic_phase(self):
        k0 = pathint.short_time_kernel(0.0, 0.0, 1.0, FREE)
        k1 = pathint.short_time_kernel(1.0, 0.0, 1.0, FREE)
        assert np.angle(k1 / k0) == pytest.approx(0.5, abs=1e-14)

    def test_potential_phase(self):
        k = pathint.short_time_kernel(2.0, 2.0, 0.1, HO)
        k0 = pathint.short_time_kernel(2.0, 2.0, 0.1, FREE)
        assert np.angle(k / k0) == pytest.approx(-2.0 * 0.1, abs=1e-14)

    def test_semigroup(self):
        xi, xf, dt = -0.4, 0.9, 1.0

        def integrand(y):
            return (pathint.short_time_kernel(xf, y, dt, FREE)
                    * pathint.short_time_kernel(y, xi, dt, FREE))

        val = rotated_quadrature(integrand, 0.5 * (xi + xf))
        assert abs(val - pathint.short_time_kernel(xf, xi, 2 * dt, FREE)) < 1e-6

    def test_three_dim_prefactor(self):
        k = pathint.short_time_kernel(np.zeros(3), np.zeros(3), 1.0, FREE, dim=3)
        assert k == pytest.approx((2j * np.pi) ** -1.5, rel=1e-14)


def packet_grid():
    return make_grid(1, (-40.0, 40.0), 2048)


class TestGridPropagate:
    def test_free_spreading(self):
        g = packet_grid()
        psi = pathint.grid_propagate(WaveFunction.gaussian(g, 0.0, 1.0), FREE, 1.0, 200)
        d = psi.density() * g.h
        mean = np.sum(d * g.points)
        width2 = np.sum(d * (g.points - mean) ** 2)
        assert width2 == pytest.approx(1.0 + 0.25, abs=1e-4)

    def test_coherent_state_period(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 3.0, np.sqrt(0.5))
        psi = pathint.grid_propagate(psi0, HO, 2 * np.pi, 2000)
        l2 = np.sqrt(np.sum((psi.density() - psi0.density()) ** 2) * g.h)
        assert l2 < 1e-4

    def test_zero_steps_identity(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 1.0)
        np.testing.assert_array_equal(pathint.grid_propagate(psi0, HO, 1.0, 0).amplitudes,
                                      psi0.amplitudes)

    @pytest.mark.parametrize("V", [FREE, HO, Potential.quartic(0.05, 0.2),
                                   Potential.double_well(0.1, 2.0)],
                             ids=["free", "harmonic", "quartic", "double_well"])
    @pytest.mark.parametrize("n_steps", [100, 333])
    def test_unitary(self, V, n_steps):
        g = packet_grid()
        psi = pathint.grid_propagate(WaveFunction.gaussian(g, 0.5, 1.0, 0.3), V, 1.0, n_steps)
        assert psi.norm() == pytest.approx(1.0, abs=1e-6)

    def test_boundary_leak(self):
        g = make_grid(1, (-5.0, 5.0), 256)
        with pytest.raises(BoundaryLeak):
            pathint.grid_propagate(WaveFunction.gaussian(g, 0.0, 1.0, 5.0), FREE, 2.0, 100)


class TestLattice:
    def test_single_step(self):
        g = make_grid(1, (-1, 1), 5)
        z = pathint.lattice_path_sum(-0.5, 0.7, 0.3, 1, g, HO)
        assert z == pytest.approx(pathint.short_time_kernel(0.7, -0.5, 0.3, HO), rel=1e-14)

    def test_kick_reweights_each_path(self):
        g = make_grid(1, (-1, 1), 3)
        dk = 1.7
        kicks = KickSchedule([0.5], [dk])
        dt, h = 0.5, g.h
        manual = 0j
        for (y,) in itertools.product(g.points, repeat=1):
            amp = (pathint.short_time_kernel(y, -1.0, dt, HO)
                   * pathint.short_time_kernel(1.0, y, dt, HO))
            manual += amp * np.exp(-1j * dk * y) * h
        z = pathint.lattice_path_sum(-1.0, 1.0, 1.0, 2, g, HO, kicks)
        assert z == pytest.approx(manual, rel=1e-13)

    def test_matches_transfer(self):
        g = make_grid(1, (-1, 1), 5)
        kicks = KickSchedule([0.25, 0.75], [0.4, -1.1])
        a = pathint.lattice_path_sum(-1.0, 0.5, 1.0, 4, g, HO, kicks)
        b = pathint.z_functional(-1.0, 0.5, 1.0, kicks, HO, 4, grid=g, method="transfer")
        assert abs(a - b) < 1e-10

    def test_guard(self):
        g = make_grid(1, (-1, 1), 11)
        with pytest.raises(TooLarge):
            pathint.lattice_path_sum(0.0, 0.0, 1.0, 8, g, FREE)

    def test_kick_off_grid_time(self):
        g = make_grid(1, (-1, 1), 5)
        with pytest.raises(ValueError):
            pathint.lattice_path_sum(0.0, 0.0, 1.0, 4, g, FREE, KickSchedule([0.3], [1.0]))

    def test_dominance_single_path(self):
        g = make_grid(1, (-1, 1), 5)
        assert pathint.stationary_dominance(0.0, 1.0, 1.0, 1, g, FREE) == 1.0

    def test_dominance_reported(self):
        g = make_grid(1, (-2, 3), 11)
        r = pathint.stationary_dominance(0.0, 1.0, 1.0, 3, g, FREE, Units(hbar=1.0))
        assert np.isfinite(r) and r > 0

    def test_lattice_actions_count(self):
        g = make_grid(1, (-1, 1), 4)
        assert pathint.lattice_actions(0.0, 0.0, 1.0, 3, g, FREE).shape == (16,)


class TestKicks:
    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            KickSchedule([0.5, 0.2], [1.0, 1.0])
        with pytest.raises(ValueError):
            KickSchedule([0.5], [np.inf])

    def test_zero_kicks_is_plain(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 1.0)
        a = pathint.kicked_evolution(psi0, KickSchedule.empty(), HO, 1.0, 100)
        b = pathint.grid_propagate(psi0, HO, 1.0, 100)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)

    def test_momentum_shift(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 2.0)
        dk = 3.0
        psi = pathint.kicked_evolution(psi0, KickSchedule([0.5], [dk]), FREE, 1.0, 100)
        k = 2 * np.pi * np.fft.fftfreq(g.shape[0], g.h)
        peak = k[np.argmax(np.abs(np.fft.fft(psi.amplitudes)))]
        dk_cell = 2 * np.pi / (g.shape[0] * g.h)
        assert abs(peak - (-dk)) <= dk_cell

    def test_coincident_kicks_add(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 1.0)
        one = KickSchedule([0.4], [0.7])
        double = one.merged(one)
        np.testing.assert_allclose(double.kicks, [1.4])
        a = pathint.kicked_evolution(psi0, double, HO, 1.0, 100)
        b = pathint.kicked_evolution(psi0, one.scaled(2.0), HO, 1.0, 100)
        np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-15)


class TestFilters:
    def test_none_is_plain(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 1.0)
        a = pathint.filtered_amplitude(psi0, FilterSpec(), [0.5], HO, 1.0, 100)
        b = pathint.grid_propagate(psi0, HO, 1.0, 100)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)

    def test_wide_gaussian_is_plain(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 1.0)
        f = FilterSpec("gaussian", [0.0], width=1e6)
        a = pathint.filtered_amplitude(psi0, f, [0.5], HO, 1.0, 100)
        b = pathint.grid_propagate(psi0, HO, 1.0, 100)
        err = np.sqrt(np.sum(np.abs(a.amplitudes / a.norm() - b.amplitudes) ** 2) * g.h)
        assert err < 1e-6

    def test_filter_suppresses_far_peak(self):
        g = packet_grid()
        a = 4.0
        amps = (WaveFunction.gaussian(g, a, 0.3).amplitudes
                + WaveFunction.gaussian(g, -a, 0.3).amplitudes)
        psi0 = WaveFunction(g, amps)
        f = FilterSpec("gaussian", [a], width=a / 4)
        psi = pathint.filtered_amplitude(psi0, f, [1e-3], FREE, 1e-3, 1)
        near = abs(psi.amplitudes[g.index(a)])
        far = abs(psi.amplitudes[g.index(-a)])
        assert far <= np.exp(-8) * near

    def test_tophat(self):
        f = FilterSpec("tophat", [0.0], width=1.0)
        np.testing.assert_array_equal(f(np.array([-1.0, 0.5, 1.5])), [1, 1, 0])

    def test_bad_times(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 1.0)
        with pytest.raises(ValueError):
            pathint.filtered_amplitude(psi0, FilterSpec("gaussian", [0.0]), [0.0], FREE, 1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 3.0), st.floats(0.1, 0.99), st.floats(-6.0, 6.0))
    def test_narrower_filter_never_larger(self, width, shrink, xbar):
        g = make_grid(1, (-10.0, 10.0), 256)
        psi0 = WaveFunction.gaussian(g, 0.0, 2.0)
        wide = pathint.filtered_amplitude(psi0, FilterSpec("gaussian", [xbar], width=width),
                                          [0.5], FREE, 0.5, 10, check_boundary=False)
        narrow = pathint.filtered_amplitude(psi0, FilterSpec("gaussian", [xbar], width=width * shrink),
                                            [0.5], FREE, 0.5, 10, check_boundary=False)
        far = np.abs(g.points - xbar) > width
        assert np.all(np.abs(narrow.amplitudes[far]) <= np.abs(wide.amplitudes[far]) + 1e-300)

    def test_phase_filter_is_a_kick(self):
        g = packet_grid()
        psi0 = WaveFunction.gaussian(g, 0.0, 1.0)
        k, xbar = 1.3, 0.8
        a = pathint.filtered_amplitude(psi0, FilterSpec("phase", [xbar], wavenumber=k), [0.4], HO, 1.0, 100)
        b = pathint.kicked_evolution(psi0, KickSchedule([0.4], [k]), HO, 1.0, 100)
        np.testing.assert_allclose(a.amplitudes, np.exp(1j * k * xbar) * b.amplitudes, atol=1e-14)


BIG = make_grid(1, (-102.4, 102.35), 4096)


class TestZFunctional:
    def test_free(self):
        z = pathint.z_functional(0.0, 1.0, 1.0, None, FREE, 100, grid=BIG)
        exact = free_propagator(1.0, 0.0, 1.0)
        assert abs(z) == pytest.approx(abs(exact), rel=0.02)
        assert abs(np.angle(z / exact)) < 0.02

    def test_free_one_kick(self):
        xi, xf, t, tau, dk = -0.5, 0.5, 1.0, 0.4, 1.5
        # exact: free propagator times exp(-i dk x_cl(tau) - i dk^2 tau (t - tau) / (2 t))
        x_cl = xi + (xf - xi) * tau / t
        exact = free_propagator(xf, xi, t) * np.exp(-1j * dk * x_cl - 0.5j * dk ** 2 * tau * (t - tau) / t)

        def integrand(y):
            return (pathint.short_time_kernel(xf, y, t - tau, FREE) * np.exp(-1j * dk * y)
                    * pathint.short_time_kernel(y, xi, tau, FREE))

        assert abs(rotated_quadrature(integrand, x_cl, 80) - exact) < 1e-10
        # the kick shifts the band-limited spectrum of the point source; resolve it finely
        fine = make_grid(1, (-204.8, 204.8 - 0.0125), 32768)
        z = pathint.z_functional(xi, xf, t, KickSchedule([tau], [dk]), FREE, 100, grid=fine)
        assert abs(z) == pytest.approx(abs(exact), rel=0.02)
        assert abs(np.angle(z / exact)) < 0.02

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            pathint.z_functional(0.0, 1.0, 1.0, None, FREE, 10, grid=BIG, method="magic")


class TestSemiclassicalZ:
    def test_free_exact(self):
        z = pathint.semiclassical_z(0.2, 1.1, 0.7, None, FREE)
        assert z == pytest.approx(free_propagator(1.1, 0.2, 0.7), rel=1e-9)

    def test_kick_factor_one_on_resting_path(self):
        kicks = KickSchedule([0.3, 0.6], [2.0, -5.0])
        a = pathint.semiclassical_z(0.0, 0.0, 1.0, kicks, FREE)
        b = pathint.semiclassical_z(0.0, 0.0, 1.0, None, FREE)
        assert a == pytest.approx(b, rel=1e-14)

    def test_kick_phase_linear(self):
        kicks = KickSchedule([0.3, 0.6], [0.2, 0.1])
        base = pathint.semiclassical_z(0.0, 1.0, 1.0, None, HO)
        one = pathint.semiclassical_z(0.0, 1.0, 1.0, kicks, HO)
        two = pathint.semiclassical_z(0.0, 1.0, 1.0, kicks.scaled(2.0), HO)
        assert np.angle(two / base) == pytest.approx(2 * np.angle(one / base), abs=1e-12)

    def test_harmonic_vs_grid(self):
        a = 4.05
        zs = pathint.semiclassical_z(-a, a, 1.0, None, HO)
        zg = pathint.z_functional(-a, a, 1.0, None, HO, 5000, grid=BIG)
        assert abs(zg) == pytest.approx(abs(zs), rel=0.03)
        assert abs(np.angle(zg / zs)) < 0.05
