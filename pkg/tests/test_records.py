import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from pathmeas import records, scatter
from pathmeas.core import Trajectory
from pathmeas.errors import EmptyFragment
from pathmeas.records import WindowedTrajectoryEstimator


def path(n=64, t=1.0):
    times = np.linspace(0, t, n + 1)
    return Trajectory(times, np.sin(2 * times), 2 * np.cos(2 * times))


def scaled(ens, factor):
    new = ens.reference + factor * ens.residuals
    return dataclasses.replace(ens, records=new)


class TestSampling:
    def test_shapes_and_times(self):
        ens = records.sample_records(path(), 0.5, 1 / 64, 5)
        assert ens.records.shape == (5, 64, 3)
        np.testing.assert_allclose(ens.times, np.arange(1, 65) / 64)
        np.testing.assert_allclose(ens.reference[:, 0], np.sin(2 * ens.times), atol=1e-12)
        assert not ens.records.flags.writeable

    def test_deterministic(self):
        a = records.sample_records(path(), 0.5, 1 / 64, 4, seed=11)
        b = records.sample_records(path(), 0.5, 1 / 64, 4, seed=11)
        c = records.sample_records(path(), 0.5, 1 / 64, 4, seed=12)
        np.testing.assert_array_equal(a.records, b.records)
        assert not np.array_equal(a.records, c.records)

    def test_record_streams_independent_of_count(self):
        a = records.sample_records(path(), 0.5, 1 / 64, 3, seed=5)
        b = records.sample_records(path(), 0.5, 1 / 64, 6, seed=5)
        np.testing.assert_array_equal(a.records, b.records[:3])

    def test_alpha_to_zero(self):
        tiny = records.sample_records(path(), 1e-9, 1 / 64, 3, seed=8)
        unit = records.sample_records(path(), 1.0, 1 / 64, 3, seed=8)
        # same streams: residuals are proportional to alpha
        np.testing.assert_allclose(tiny.residuals, 1e-9 * unit.residuals, rtol=1e-6, atol=1e-22)
        assert np.max(np.abs(tiny.residuals)) < 1e-8

    def test_noise_variance(self):
        assert records.noise_variance(0.5, 0.01) == pytest.approx(3 * 0.25 / (8 * np.pi ** 2 * 0.01))

    def test_interpolated_reference(self):
        ens = records.sample_records(path(40), 0.5, 1 / 64, 2)
        np.testing.assert_allclose(ens.reference[:, 0], np.sin(2 * ens.times), atol=1e-6)

    def test_errors(self):
        with pytest.raises(ValueError):
            records.sample_records(path(), 0.0, 0.1, 2)
        with pytest.raises(ValueError):
            records.sample_records(path(), 0.5, 0.1, 0)
        with pytest.raises(ValueError):
            records.sample_records(path(), 0.5, 5.0, 2)

    def test_record_is_probe_record(self):
        ens = records.sample_records(path(), 0.5, 1 / 64, 2)
        rec = ens.record(1)
        assert isinstance(rec, scatter.ProbeRecord)
        assert rec.dt == pytest.approx(1 / 64)
        assert scatter.continuum_weight(rec, ens.r_cl) == pytest.approx(ens.log_weights()[1], rel=1e-12)

    def test_table(self):
        ens = records.sample_records(path(8, 1.0), 0.5, 0.25, 2)
        header, rows = ens.to_table()
        assert header == ["record", "time", "x", "y", "z"]
        assert len(rows) == 8
        assert rows[5][:2] == [1, 0.5]
        assert rows[5][2:] == list(ens.records[1, 1])


class TestStatistics:
    def test_moments(self):
        ens = records.sample_records(path(), 0.5, 1 / 64, 10000, seed=3)
        st_ = records.record_statistics(ens)
        sigma2 = records.noise_variance(0.5, 1 / 64)
        se_mean = np.sqrt(sigma2 / 10000)
        assert np.max(np.abs(st_.mean - ens.reference)) < 5 * se_mean
        assert np.mean(st_.variance / sigma2) == pytest.approx(1.0, abs=0.005)
        assert np.all(np.abs(st_.autocorrelation[1:]) < st_.whiteness_bound)
        assert st_.autocorrelation[0] == 1.0

    def test_log_density_mean(self):
        ens = records.sample_records(path(), 0.5, 1 / 64, 10000, seed=4)
        # -log |Phi|^2 is chi-square with 3 M degrees of freedom over two
        m = ens.n_bins
        assert np.mean(-ens.log_densities()) == pytest.approx(1.5 * m, rel=0.01)
        assert np.all(ens.log_weights() <= 0)

    def test_duplicated_records_zero_variance(self):
        ens = records.sample_records(path(), 0.5, 1 / 64, 1)
        dup = dataclasses.replace(ens, records=np.repeat(ens.records, 4, axis=0))
        assert np.all(records.record_statistics(dup).variance == 0)

    def test_scaled_residuals(self):
        ens = records.sample_records(path(), 0.5, 1 / 64, 50)
        a = records.record_statistics(ens)
        b = records.record_statistics(scaled(ens, 2.0))
        np.testing.assert_allclose(b.variance, 4 * a.variance, rtol=1e-10)
        np.testing.assert_allclose(b.autocorrelation, a.autocorrelation, atol=1e-12)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            records.record_statistics(records.sample_records(path(), 0.5, 1 / 64, 1))

    @pytest.mark.parametrize("dt", [1 / 32, 1 / 128])
    def test_dt_scaling(self, dt):
        ens = records.sample_records(path(), 0.5, dt, 4000, seed=7)
        v = np.mean(records.record_statistics(ens).variance)
        assert v * dt == pytest.approx(3 * 0.25 / (8 * np.pi ** 2), rel=0.02)


class TestRedundancy:
    def test_error_scaling(self):
        ens = records.sample_records(path(256), 0.5, 1 / 4096, 50, seed=1)
        rep = records.redundancy_report(ens, (1.0, 0.5, 0.25), 64)
        np.testing.assert_allclose(rep.rms_error, rep.expected_error, rtol=0.05)
        ratio = rep.rms_error[0] / rep.rms_error
        np.testing.assert_allclose(ratio, np.sqrt([1.0, 0.5, 0.25]), rtol=0.07)
        assert rep.halves_z_rms == pytest.approx(1.0, abs=0.05)

    def test_single_record_source(self):
        r = path(256)
        ens = records.sample_records(r, 0.5, 1 / 4096, 1, seed=2)
        rep = records.redundancy_report((ens.record(0), r), (1.0, 0.5), 64)
        assert rep.rms_error[0] == pytest.approx(rep.expected_error[0], rel=0.2)

    def test_full_fraction_deterministic(self):
        ens = records.sample_records(path(), 0.5, 1 / 256, 4)
        a = records.redundancy_report(ens, (1.0,), 32, seed=0)
        b = records.redundancy_report(ens, (1.0,), 32, seed=9)
        assert a.rms_error[0] == b.rms_error[0]

    def test_empty_fragment(self):
        ens = records.sample_records(path(), 0.5, 1 / 256, 2)
        with pytest.raises(EmptyFragment):
            records.redundancy_report(ens, (0.001,), 32)
        with pytest.raises(EmptyFragment):
            records.redundancy_report(ens, (1.0,), 1)

    def test_bad_arguments(self):
        ens = records.sample_records(path(), 0.5, 1 / 256, 2)
        with pytest.raises(ValueError):
            records.redundancy_report(ens, (1.5,), 32)
        with pytest.raises(ValueError):
            records.redundancy_report(ens, (1.0,), 1000)


class TestEstimator:
    def test_recovers_trajectory(self):
        r = path(256)
        ens = records.sample_records(r, 0.5, 1 / 4096, 1, seed=3)
        est = WindowedTrajectoryEstimator(window=64).fit(ens.times[:, None], ens.records[0])
        assert est.estimates_.shape == (64, 3)
        pred = est.predict(est.centers_[:, None])
        truth = ens.reference.reshape(64, 64, 3).mean(axis=1)
        err = np.sqrt(np.mean((pred - truth) ** 2))
        assert err == pytest.approx(ens.sigma / 8, rel=0.2)

    def test_1d_target(self):
        t = np.linspace(0, 1, 10)
        est = WindowedTrajectoryEstimator(window=5).fit(t[:, None], t)
        out = est.predict(np.array([[0.0], [1.0]]))
        assert out.shape == (2,)
        np.testing.assert_allclose(out, [t[:5].mean(), t[5:].mean()])

    def test_clone_and_params(self):
        est = WindowedTrajectoryEstimator(window=7)
        twin = clone(est)
        assert twin.get_params() == {"window": 7}
        assert twin is not est

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            WindowedTrajectoryEstimator().predict(np.zeros((3, 1)))

    def test_score_is_r2(self):
        t = np.linspace(0, 1, 400)
        y = np.sin(6 * t)
        est = WindowedTrajectoryEstimator(window=4).fit(t[:, None], y)
        assert est.score(t[:, None], y) > 0.99

    @settings(max_examples=30)
    @given(st.integers(1, 20), st.integers(1, 60))
    def test_constant_signal(self, window, n):
        t = np.arange(n, dtype=float)
        est = WindowedTrajectoryEstimator(window=window).fit(t[:, None], np.full(n, 2.5))
        np.testing.assert_allclose(est.predict(t[:, None]), 2.5)
        assert len(est.centers_) == -(-n // window)
