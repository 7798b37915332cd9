"""Measurement records sampled from the joint-amplitude weight.

|Phi|^2 is proportional to exp(-(4 pi^2 / 3 alpha^2) int |r_p - r_cl|^2 dtau),
which factorizes over probes and components. Each scalar readout is
therefore an independent Gaussian around r_cl(tau_j) with variance

    sigma^2 = 3 alpha^2 / (8 pi^2 dt).

Streams: record i draws from PCG64 seeded by SeedSequence(seed).spawn()[i],
so each record is reproducible on its own and ensembles are bit-identical
for equal seeds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .core import Trajectory
from .errors import EmptyFragment
from .scatter import WEIGHT_COEFFICIENT, ProbeRecord

__all__ = [
    "RecordEnsemble",
    "RecordStats",
    "RedundancyReport",
    "noise_variance",
    "sample_records",
    "record_statistics",
    "redundancy_report",
    "WindowedTrajectoryEstimator",
]


def noise_variance(alpha: float, dt: float) -> float:
    """Per-component readout variance 3 alpha^2 / (8 pi^2 dt)."""
    return 3.0 * alpha ** 2 / (8.0 * np.pi ** 2 * dt)


def _reference(r_cl: Trajectory, times) -> np.ndarray:
    if len(times) == len(r_cl) - 1 and np.allclose(r_cl.times[1:], times, rtol=0, atol=1e-12):
        return r_cl.as_vectors()[1:]
    pos = np.asarray(r_cl.at(times)).reshape(len(times), -1)
    return np.pad(pos, ((0, 0), (0, 3 - pos.shape[1])))


@dataclass(frozen=True, eq=False)
class RecordEnsemble:
    """``records[i, j]`` is the readout of probe j in record i (3-vector)."""

    records: np.ndarray
    times: np.ndarray
    reference: np.ndarray
    r_cl: Trajectory
    alpha: float
    dt: float
    seed: int | None

    @property
    def n_records(self) -> int:
        return self.records.shape[0]

    @property
    def n_bins(self) -> int:
        return self.records.shape[1]

    @property
    def sigma(self) -> float:
        return float(np.sqrt(noise_variance(self.alpha, self.dt)))

    @property
    def residuals(self) -> np.ndarray:
        return self.records - self.reference

    def record(self, i: int) -> ProbeRecord:
        return ProbeRecord(self.times, self.records[i], self.alpha, self.dt)

    def log_weights(self) -> np.ndarray:
        """Continuum log-weight of every record (rectangle rule)."""
        sq = np.sum(self.residuals ** 2, axis=(1, 2))
        return -WEIGHT_COEFFICIENT * self.dt / self.alpha ** 2 * sq

    def log_densities(self) -> np.ndarray:
        """log |Phi|^2 relative to the classical record, i.e. 2 * log_weights."""
        return 2.0 * self.log_weights()

    def to_table(self):
        """Long-format rows (record, time, x, y, z) for CSV export."""
        n, m = self.n_records, self.n_bins
        idx = np.repeat(np.arange(n), m)
        t = np.tile(self.times, n)
        r = self.records.reshape(-1, 3)
        header = ["record", "time", "x", "y", "z"]
        return header, [[int(i), float(tt), *map(float, rr)] for i, tt, rr in zip(idx, t, r)]


@dataclass(frozen=True)
class RecordStats:
    mean: np.ndarray
    variance: np.ndarray
    autocorrelation: np.ndarray
    n_records: int
    n_bins: int

    @property
    def whiteness_bound(self) -> float:
        """Four-sigma band 4 / sqrt(n_records * n_bins) for lags >= 1."""
        return 4.0 / np.sqrt(self.n_records * self.n_bins)


@dataclass(frozen=True)
class RedundancyReport:
    fractions: np.ndarray
    rms_error: np.ndarray
    expected_error: np.ndarray
    window: int
    halves_z_rms: float
    halves_max_z: float


def sample_records(r_cl: Trajectory, alpha: float, dt: float, n_records: int,
                   seed: int | None = 0) -> RecordEnsemble:
    """Draw ``n_records`` records at tau_j = j dt, j = 1..round(T / dt).

    Readout = r_cl(tau_j) + N(0, 3 alpha^2 / (8 pi^2 dt)) per component.
    """
    if not alpha > 0 or not dt > 0:
        raise ValueError("alpha and dt must be positive")
    if n_records < 1:
        raise ValueError("n_records must be >= 1")
    m = int(round(r_cl.duration / dt))
    if m < 1:
        raise ValueError("dt exceeds the trajectory duration")
    times = r_cl.times[0] + dt * np.arange(1, m + 1)
    ref = _reference(r_cl, times)
    sigma = np.sqrt(noise_variance(alpha, dt))
    children = np.random.SeedSequence(seed).spawn(n_records)
    out = np.empty((n_records, m, 3))
    for i, child in enumerate(children):
        out[i] = np.random.Generator(np.random.PCG64(child)).standard_normal((m, 3))
    out = ref + sigma * out
    out.setflags(write=False)
    return RecordEnsemble(out, times, ref, r_cl, float(alpha), float(dt), seed)


def record_statistics(ensemble: RecordEnsemble, max_lag: int = 10) -> RecordStats:
    """Per-bin mean and variance, and the pooled residual autocorrelation.

    The autocorrelation at lag k is sum(e_t e_{t+k}) / sum(e_t^2) over all
    records and components, with residuals e = r_p - r_cl.
    """
    if ensemble.n_records < 2:
        raise ValueError("need at least two records")
    rec = ensemble.records
    mean = rec.mean(axis=0)
    var = rec.var(axis=0, ddof=1)
    e = ensemble.residuals
    denom = float(np.sum(e * e))
    lags = min(max_lag, ensemble.n_bins - 1)
    acf = np.empty(lags + 1)
    acf[0] = 1.0
    for k in range(1, lags + 1):
        acf[k] = float(np.sum(e[:, k:] * e[:, :-k])) / denom if denom > 0 else 0.0
    return RecordStats(mean, var, acf, ensemble.n_records, ensemble.n_bins)


def _window_means(values, reference, mask, window):
    """Per-window mean of selected values minus the mean of r_cl at them."""
    n_win = values.shape[-2] // window
    v = values[..., : n_win * window, :].reshape(*values.shape[:-2], n_win, window, 3)
    r = reference[: n_win * window].reshape(n_win, window, 3)
    w = mask[..., : n_win * window].reshape(*mask.shape[:-1], n_win, window, 1)
    count = w.sum(axis=-2)
    return ((v - r) * w).sum(axis=-2) / count, count[..., 0]


def redundancy_report(source, fractions=(1.0, 0.5, 0.25), window: int = 64,
                      seed: int | None = 0, alpha: float | None = None) -> RedundancyReport:
    """Trajectory-estimate error from fragments of the probe environment.

    Readouts are grouped into consecutive windows of ``window`` probes. For
    each fraction f a random round(f * window) of probes is kept in every
    window, their mean is compared with the mean of r_cl at the kept
    times, and the RMS error over windows, components and records is
    reported. Independent per-probe noise makes the error scale as
    sigma / sqrt(f * window).

    ``halves_z_rms`` compares estimates from two disjoint random halves:
    the RMS of their difference in units of the pooled standard error
    (about 1 for independent fragments).

    Parameters
    ----------
    source : RecordEnsemble or (ProbeRecord, Trajectory)
    """
    if isinstance(source, RecordEnsemble):
        values, ref, sigma = source.records, source.reference, source.sigma
    else:
        record, r_cl = source
        values = record.readouts[None]
        ref = _reference(r_cl, record.times)
        sigma = float(np.sqrt(noise_variance(record.alpha if alpha is None else alpha, record.dt)))
    fr = np.asarray(fractions, dtype=float).reshape(-1)
    if np.any(fr <= 0) or np.any(fr > 1):
        raise ValueError("fractions must lie in (0, 1]")
    if window < 1 or values.shape[1] < window:
        raise ValueError("window must be between 1 and the number of probes")
    n_rec, n_bins = values.shape[:2]
    n_win = n_bins // window
    rng = np.random.default_rng(seed)

    def random_mask(keep):
        scores = rng.random((n_rec, n_win, window))
        order = np.argsort(np.argsort(scores, axis=-1), axis=-1)
        mask = np.zeros((n_rec, n_bins), dtype=float)
        mask[:, : n_win * window] = (order < keep).reshape(n_rec, -1)
        return mask, order

    rms = np.empty(len(fr))
    expected = np.empty(len(fr))
    for i, f in enumerate(fr):
        keep = int(round(f * window))
        if keep == 0:
            raise EmptyFragment(f"fraction {f} keeps no probes in windows of {window}")
        mask, _ = random_mask(keep)
        est, _ = _window_means(values, ref, mask, window)
        rms[i] = float(np.sqrt(np.mean(est ** 2)))
        expected[i] = sigma / np.sqrt(keep)
    if window < 2:
        raise EmptyFragment("a window of one probe cannot be split into halves")
    half = window // 2
    mask_a, order = random_mask(half)
    mask_b = np.zeros_like(mask_a)
    mask_b[:, : n_win * window] = ((order >= half) & (order < 2 * half)).reshape(n_rec, -1)
    est_a, _ = _window_means(values, ref, mask_a, window)
    est_b, _ = _window_means(values, ref, mask_b, window)
    z = (est_a - est_b) / (sigma * np.sqrt(2.0 / half))
    return RedundancyReport(fr, rms, expected, int(window),
                            float(np.sqrt(np.mean(z ** 2))), float(np.max(np.abs(z))))


class WindowedTrajectoryEstimator(RegressorMixin, BaseEstimator):
    """Estimate a trajectory by averaging probe readouts in time windows.

    Parameters
    ----------
    window : int
        Number of consecutive probes averaged per estimate.

    Attributes
    ----------
    centers_ : ndarray of shape (n_windows,)
    estimates_ : ndarray of shape (n_windows, n_outputs)

    Examples
    --------
    >>> est = WindowedTrajectoryEstimator(window=4).fit(times[:, None], readouts)
    >>> est.predict(times[:, None])  # doctest: +SKIP
    """

    def __init__(self, window: int = 16):
        self.window = window

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        t = X.reshape(len(X), -1)[:, 0]
        y2 = y.reshape(len(y), -1)
        if len(t) != len(y2):
            raise ValueError("X and y lengths differ")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        order = np.argsort(t, kind="stable")
        t, y2 = t[order], y2[order]
        n_win = max(1, int(np.ceil(len(t) / self.window)))
        edges = np.minimum(np.arange(n_win + 1) * self.window, len(t))
        self.centers_ = np.array([t[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
        self.estimates_ = np.array([y2[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
        self.n_outputs_ = y2.shape[1]
        self._single = y.ndim == 1
        return self

    def predict(self, X):
        check_is_fitted(self, "estimates_")
        t = np.asarray(X, dtype=float).reshape(len(X), -1)[:, 0]
        idx = np.abs(t[:, None] - self.centers_[None, :]).argmin(axis=1)
        out = self.estimates_[idx]
        return out[:, 0] if self._single else out
