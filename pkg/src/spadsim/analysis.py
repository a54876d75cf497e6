"""Characterization analyses over instrument outputs.

Each function turns a histogram or scan result into one detector figure of
merit: dead time, afterpulse probability and trap lifetime, twilight
transition curve, delay shift and jitter versus pulse spacing, pulsed-mode
distinguishability, heralding efficiency, and the channel key rate.

Curve results serialize to CSV with an `x,y` or `x,y,err` header; scalar
results are plain floats for the caller's JSON summary.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .instruments import FWHM_PER_SIGMA, Histogram, gaussian_fit, InstrumentError

__all__ = [
    "AnalysisError",
    "AfterpulseResult",
    "TwilightCurve",
    "ShiftJitterCurve",
    "KeyRateInputs",
    "estimate_dead_time",
    "afterpulse_spectroscopy",
    "twilight_curve",
    "shift_and_jitter_vs_dt",
    "distinguishability",
    "heralding_efficiency",
    "secret_key_rate",
]


class AnalysisError(Exception):
    """An analysis could not extract its quantity from the data."""


def estimate_dead_time(h: Histogram) -> float:
    """Dead time (ps) from an interarrival histogram.

    The dead time shows up as an empty gap from zero to the onset of
    detection probability. The onset bin is the first of two consecutive
    bins exceeding 10% of the plateau level (median of the upper half of
    the range); the two-bin requirement keeps isolated stray counts below
    the onset from triggering. The estimate is then refined to sub-bin
    precision by interpolating where the rising edge crosses half of its
    local maximum.
    """
    counts = h.counts.astype(np.float64)
    n = counts.size
    if n < 4:
        raise AnalysisError(f"histogram too short to locate an onset ({n} bins)")
    plateau = float(np.median(counts[n // 2 :]))
    if plateau <= 0:
        raise AnalysisError("no post-onset plateau: upper-half median is zero")
    thr = 0.1 * plateau
    above = (counts[:-1] > thr) & (counts[1:] > thr)
    hits = np.nonzero(above)[0]
    if hits.size == 0:
        raise AnalysisError(f"no sustained rise above the onset threshold {thr:.3g}")
    j = int(hits[0])
    # Climb to the top of the rising edge, then interpolate the half-max
    # crossing on its left flank.
    while j + 1 < n and counts[j + 1] > counts[j]:
        j += 1
    half = counts[j] / 2.0
    k = j
    while k >= 0 and counts[k] >= half:
        k -= 1
    if k < 0:
        raise AnalysisError("rising edge extends to the histogram origin")
    center_k = h.origin_ps + (k + 0.5) * h.bin_width_ps
    frac = (half - counts[k]) / (counts[k + 1] - counts[k])
    return float(center_k + frac * h.bin_width_ps)


@dataclass(frozen=True)
class AfterpulseResult:
    """Afterpulse probability and trap lifetime from interval spectroscopy."""

    p_afterpulse: float
    tau_trap_ps: float
    residual: float


def _exp_bg(t, a, tau):
    return a * np.exp(-t / tau)


def afterpulse_spectroscopy(
    h: Histogram,
    tau_dead_ps: float,
    *,
    tau_trap_guess_ps: float = 32000.0,
    bg_cut_ps: float | None = None,
    skip_ps: float = 2000.0,
) -> AfterpulseResult:
    """Extract afterpulse probability and trap lifetime from an interarrival
    histogram.

    The interval distribution just past the dead time is the Poisson
    background plus an excess of trap-release events. The background
    exponential is fitted beyond bg_cut (default tau_dead + 5 guessed
    lifetimes, where the excess has decayed away) and extrapolated under the
    peak; the excess is then fitted with B*exp(-(t - tau_dead)/tau_trap).
    The first skip_ps past the dead time is excluded so held twilight pulses
    do not bias the fit. p_afterpulse integrates the fitted excess and
    normalizes by the total event count.
    """
    if tau_dead_ps <= 0:
        raise ValueError(f"tau_dead_ps must be > 0, got {tau_dead_ps}")
    if tau_trap_guess_ps <= 0:
        raise ValueError(f"tau_trap_guess_ps must be > 0, got {tau_trap_guess_ps}")
    if bg_cut_ps is None:
        bg_cut_ps = tau_dead_ps + 5.0 * tau_trap_guess_ps
    t = h.bin_centers
    c = h.counts.astype(np.float64)
    bw = float(h.bin_width_ps)

    bg_mask = t >= bg_cut_ps
    n_bg = int(np.count_nonzero(bg_mask))
    if n_bg < 5:
        raise AnalysisError(
            f"only {n_bg} bins beyond the background cut at {bg_cut_ps:.0f} ps; "
            "widen the histogram or lower bg_cut_ps"
        )
    t_bg = t[bg_mask]
    c_bg = c[bg_mask]
    sig_bg = np.sqrt(np.maximum(c_bg, 1.0))
    if c_bg.sum() <= 0:
        raise AnalysisError("background region is empty, cannot fit the tail")
    t_mean = float(np.sum(t_bg * c_bg) / c_bg.sum())
    tau0 = max(t_mean - bg_cut_ps, bw)
    a0 = float(c_bg.mean()) * math.exp(min(t_mean / tau0, 700.0))
    try:
        (a_bg, tau_bg), _ = curve_fit(
            _exp_bg,
            t_bg,
            c_bg,
            p0=(a0, tau0),
            sigma=sig_bg,
            absolute_sigma=True,
            bounds=([0.0, bw * 1e-3], [np.inf, np.inf]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise AnalysisError(f"background tail fit failed: {exc}") from exc

    ex_mask = (t >= tau_dead_ps + skip_ps) & (t < bg_cut_ps)
    n_ex = int(np.count_nonzero(ex_mask))
    if n_ex < 3:
        raise AnalysisError(
            f"only {n_ex} bins between the dead time and the background cut; "
            "need at least 3 for the excess fit"
        )
    t_ex = t[ex_mask]
    excess = c[ex_mask] - _exp_bg(t_ex, a_bg, tau_bg)
    sig_ex = np.sqrt(np.maximum(c[ex_mask], 1.0))
    total_excess = float(excess.sum())
    total_sigma = float(np.sqrt(np.sum(sig_ex**2)))
    if total_excess < -3.0 * total_sigma:
        raise AnalysisError(
            f"excess over background is negative ({total_excess:.1f} counts, "
            f"-{abs(total_excess) / total_sigma:.1f} sigma); background model "
            "does not describe the tail"
        )

    def _exp_excess(tt, b, tau):
        return b * np.exp(-(tt - tau_dead_ps) / tau)

    b0 = max(float(excess[0]), 1.0)
    try:
        (b_fit, tau_fit), _ = curve_fit(
            _exp_excess,
            t_ex,
            excess,
            p0=(b0, tau_trap_guess_ps),
            sigma=sig_ex,
            absolute_sigma=True,
            bounds=([0.0, bw * 1e-3], [np.inf, np.inf]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise AnalysisError(f"excess fit failed: {exc}") from exc
    chi2 = float(np.sum(((excess - _exp_excess(t_ex, b_fit, tau_fit)) / sig_ex) ** 2))
    residual = chi2 / max(n_ex - 2, 1)
    p = float(b_fit * tau_fit / (bw * h.total))
    return AfterpulseResult(p_afterpulse=p, tau_trap_ps=float(tau_fit), residual=residual)


@dataclass(frozen=True)
class TwilightCurve:
    """Relative second-photon efficiency vs pair spacing; NaN marks missing."""

    delta_ts: np.ndarray
    ratios: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y\n")
        for dt, r in zip(self.delta_ts.tolist(), self.ratios.tolist()):
            buf.write(f"{dt},{r:.10g}\n")
        return buf.getvalue()


def twilight_curve(points) -> TwilightCurve:
    """Relative efficiency for the second photon of a pair, per spacing.

    Each point supplies (delta_t_ps, n_pairs, n_first, n_both): pair slots
    offered, first-slot detections, and pairs with both slots detected. The
    ratio is P(second | first) normalized by the unconditional single-slot
    efficiency n_first/n_pairs, so a fully recovered detector sits at 1.
    Points with zero first detections are kept but marked NaN.
    """
    dts = []
    ratios = []
    for delta_t, n_pairs, n_first, n_both in points:
        if n_pairs <= 0:
            raise ValueError("n_pairs must be > 0 for every point")
        dts.append(int(delta_t))
        if n_first == 0:
            ratios.append(float("nan"))
            continue
        p_first = n_first / n_pairs
        p_second_given_first = n_both / n_first
        ratios.append(p_second_given_first / p_first)
    return TwilightCurve(
        delta_ts=np.asarray(dts, dtype=np.int64), ratios=np.asarray(ratios, dtype=np.float64)
    )


@dataclass(frozen=True)
class ShiftJitterCurve:
    """Mean delay shift and interval FWHM vs pair spacing."""

    delta_ts: np.ndarray
    shifts: np.ndarray
    fwhms: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y,err\n")
        for dt, s, f in zip(self.delta_ts.tolist(), self.shifts.tolist(), self.fwhms.tolist()):
            buf.write(f"{dt},{s:.10g},{f:.10g}\n")
        return buf.getvalue()


def shift_and_jitter_vs_dt(
    points, *, min_pairs: int = 1000, fit_bin_ps: int = 25
) -> ShiftJitterCurve:
    """Per pair spacing: mean(measured interval - delta_t) and interval FWHM.

    Each point supplies (delta_t_ps, intervals) with intervals the measured
    out-time differences of both-detected pairs. Points with fewer than
    min_pairs intervals are marked NaN. The FWHM comes from a Gaussian fit
    of the interval histogram; if the fit window is degenerate (fewer than
    five populated bins, e.g. a jitter-free detector) the sample standard
    deviation is converted to FWHM instead.
    """
    dts = []
    shifts = []
    fwhms = []
    for delta_t, intervals in points:
        iv = np.asarray(intervals, dtype=np.int64)
        dts.append(int(delta_t))
        if iv.size < min_pairs:
            shifts.append(float("nan"))
            fwhms.append(float("nan"))
            continue
        shifts.append(float(iv.mean() - delta_t))
        std = float(iv.std())
        if std == 0.0:
            fwhms.append(0.0)
            continue
        lo = int(iv.min())
        hi = int(iv.max())
        span = (hi - lo) // fit_bin_ps + 1
        hist = _histogram_around(iv, lo, span, fit_bin_ps)
        try:
            fwhms.append(gaussian_fit(hist).fwhm_ps)
        except InstrumentError:
            fwhms.append(FWHM_PER_SIGMA * std)
    return ShiftJitterCurve(
        delta_ts=np.asarray(dts, dtype=np.int64),
        shifts=np.asarray(shifts, dtype=np.float64),
        fwhms=np.asarray(fwhms, dtype=np.float64),
    )


def _histogram_around(values: np.ndarray, origin: int, n_bins: int, bin_width: int) -> Histogram:
    idx = (values - origin) // bin_width
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    return Histogram(bin_width_ps=bin_width, origin_ps=origin, counts=counts)


def distinguishability(
    ac: Histogram, period_ps: float, *, min_lag_ps: float | None = None
) -> float:
    """Visibility of the pulse-period structure in an autocorrelation.

    Averages the counts of the bins containing multiples of the period
    (peaks) and half-period offsets (valleys), restricted to lags past the
    dead-time notch, and returns (P - V)/(P + V). When min_lag_ps is not
    given, the notch edge is taken as the left edge of the first bin
    reaching 20% of the histogram maximum.
    """
    if period_ps < 2 * ac.bin_width_ps:
        raise AnalysisError(
            f"period {period_ps} ps needs at least 2 bins, bin width is {ac.bin_width_ps} ps"
        )
    counts = ac.counts.astype(np.float64)
    if counts.max() <= 0:
        raise AnalysisError("autocorrelation is empty")
    if min_lag_ps is None:
        above = np.nonzero(counts >= 0.2 * counts.max())[0]
        min_lag_ps = float(ac.origin_ps + int(above[0]) * ac.bin_width_ps)
    span_end = ac.origin_ps + ac.n_bins * ac.bin_width_ps
    m = max(1, math.ceil(min_lag_ps / period_ps))
    peaks = []
    valleys = []
    while True:
        valley_lag = (m + 0.5) * period_ps
        if valley_lag >= span_end:
            break
        peak_bin = int((m * period_ps - ac.origin_ps) // ac.bin_width_ps)
        valley_bin = int((valley_lag - ac.origin_ps) // ac.bin_width_ps)
        peaks.append(counts[peak_bin])
        valleys.append(counts[valley_bin])
        m += 1
    if not peaks:
        raise AnalysisError(
            f"autocorrelation span leaves no full period beyond lag {min_lag_ps:.0f} ps"
        )
    p_mean = float(np.mean(peaks))
    v_mean = float(np.mean(valleys))
    if p_mean + v_mean == 0.0:
        raise AnalysisError("peak and valley bins are all empty")
    return (p_mean - v_mean) / (p_mean + v_mean)


def heralding_efficiency(coincidences: int, singles_a: int, singles_b: int) -> float:
    """Coincidences over total singles; 1/2 for a lossless pair source."""
    if singles_a < 0 or singles_b < 0 or coincidences < 0:
        raise ValueError("counts must be non-negative")
    if singles_a + singles_b == 0:
        raise AnalysisError("no singles recorded, heralding efficiency undefined")
    return coincidences / (singles_a + singles_b)


@dataclass(frozen=True)
class KeyRateInputs:
    """Inputs of the multi-channel key-rate formula."""

    m_channels: int
    eta: float
    n_mean: float
    xi: float
    bin_width_ps: float

    def validate(self) -> None:
        if self.m_channels < 0:
            raise ValueError(f"m_channels must be >= 0, got {self.m_channels}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.n_mean < 0:
            raise ValueError(f"n_mean must be >= 0, got {self.n_mean}")
        if self.xi < 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if self.bin_width_ps <= 0:
            raise ValueError(f"bin_width_ps must be > 0, got {self.bin_width_ps}")


def secret_key_rate(k: KeyRateInputs) -> float:
    """Key rate in bits/s: m * eta^2 * n_mean * xi / bin_width.

    Multilinear in every factor; the squared eta charges the channel
    efficiency once per photon of the pair.
    """
    k.validate()
    return k.m_channels * k.eta**2 * k.n_mean * k.xi / (k.bin_width_ps * 1e-12)
