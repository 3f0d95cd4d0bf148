"""Time-series measurement and parameter sweeps.

Estimators accept raw (times, values) arrays or the package's series
objects, with the observable chosen by context: population traces back
the stationary-value and decay readings, the sigma_x coherence backs
the oscillation-frequency readings.
"""

import cmath
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import find_peaks

from .chainmap import chain_length_for, map_to_chain
from .model import ModelParams, spectral_density
from .mps import EvolutionConfig, TimeSeries
from .mps import evolve as mps_evolve
from .rwa import AmplitudeSeries, CoherenceTrace, chain_evolve, rwa_coherence

__all__ = [
    "PoleRegime",
    "PoleEstimate",
    "StationaryEstimate",
    "SweepResult",
    "oscillation_frequency",
    "zero_crossing_frequency",
    "stationary_value",
    "decay_rate",
    "rwa_pole_estimates",
    "crossover_scan",
]


def _coherence_signal(ts):
    """(times, values) carrying the oscillating coherence."""
    if isinstance(ts, TimeSeries):
        return ts.times, ts.sigma_x.real
    if isinstance(ts, CoherenceTrace):
        return ts.times, np.asarray(ts.sigma_x, dtype=float)
    if isinstance(ts, AmplitudeSeries):
        return ts.times, ts.population()
    times, values = ts
    return np.asarray(times, dtype=float), np.asarray(values, dtype=float)


def _population_signal(ts):
    """(times, values) carrying the excited population."""
    if isinstance(ts, TimeSeries):
        return ts.times, ts.pop_excited
    if isinstance(ts, AmplitudeSeries):
        return ts.times, ts.population()
    if isinstance(ts, CoherenceTrace):
        return ts.times, np.asarray(ts.sigma_x, dtype=float)
    times, values = ts
    return np.asarray(times, dtype=float), np.asarray(values, dtype=float)


def _dominant_peak(times, values):
    """FFT peak (angular frequency, bin index); raises when absent.

    Detrends by the taper-weighted mean (which zeroes the DC bin
    exactly; a tail mean is phase-biased when the tail holds under a
    period), applies a Hann taper, zero-pads 8x, and refines the
    dominant bin with parabolic interpolation on the log magnitude.
    Bins below two cycles per window are excluded: no peak there could
    ever satisfy the three-period precondition, and the skirt of any
    residual slow trend lands exactly there.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 8:
        raise ValueError("no dominant peak: series too short")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-6, atol=1e-12 * abs(dt)):
        # estimators assume a uniform grid; resample linearly
        uniform = np.linspace(times[0], times[-1], times.size)
        values = np.interp(uniform, times, values)
        times = uniform
        dt = times[1] - times[0]
    n = times.size
    window = np.hanning(n)
    resid = values - np.sum(values * window) / np.sum(window)
    scale = np.max(np.abs(resid))
    if scale < 1e-13 * max(1.0, np.max(np.abs(values))):
        raise ValueError("no dominant peak: series is constant")
    spec = np.abs(np.fft.rfft(resid * window, n=8 * n))
    freqs = 2.0 * math.pi * np.arange(spec.size) / (8 * n * dt)
    span = times[-1] - times[0]
    spec[freqs < 2.0 * (2.0 * math.pi / span)] = 0.0
    k = int(np.argmax(spec))
    if k == 0 or spec[k] < 3.0 * np.median(spec):
        raise ValueError("no dominant peak: prominence below 3x spectral median")
    if 0 < k < spec.size - 1 and spec[k - 1] > 0 and spec[k + 1] > 0:
        la, lb, lc = np.log(spec[k - 1: k + 2])
        denom = la - 2.0 * lb + lc
        shift = 0.5 * (la - lc) / denom if denom != 0.0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    omega = 2.0 * math.pi * (k + shift) / (8 * n * dt)
    return omega, k


def oscillation_frequency(ts) -> float:
    """Dominant angular frequency of the coherence oscillation.

    Requires at least three full periods inside the window and a peak
    standing 3x above the spectral median.
    """
    times, values = _coherence_signal(ts)
    omega, _ = _dominant_peak(times, values)
    span = times[-1] - times[0]
    if span * omega < 3.0 * 2.0 * math.pi:
        raise ValueError(
            f"insufficient periods: window holds {span * omega / (2 * math.pi):.2f} "
            f"cycles of the detected oscillation, need >= 3")
    return omega


def zero_crossing_frequency(ts) -> float:
    """Cross-check estimator: pi over the mean zero-crossing spacing."""
    times, values = _coherence_signal(ts)
    w = np.hanning(values.size)
    resid = values - np.sum(values * w) / np.sum(w)
    sign = np.sign(resid)
    idx = np.nonzero((sign[:-1] != sign[1:]) & (sign[:-1] != 0))[0]
    if idx.size < 2:
        raise ValueError("insufficient periods: fewer than two zero crossings")
    t1, t2 = times[idx], times[idx + 1]
    v1, v2 = resid[idx], resid[idx + 1]
    crossings = t1 - v1 * (t2 - t1) / (v2 - v1)
    return math.pi / float(np.mean(np.diff(crossings)))


class StationaryEstimate(float):
    """Mean of the final 10% of a series; float with drift diagnostics."""

    def __new__(cls, value, drift_slope, nonstationary):
        obj = super().__new__(cls, value)
        obj.drift_slope = drift_slope
        obj.nonstationary = nonstationary
        return obj


def stationary_value(ts) -> StationaryEstimate:
    """Plateau estimate from the final 10% of the window.

    The tail-drift slope is reported alongside; the estimate is flagged
    non-stationary when the extrapolated drift over the whole window
    exceeds 0.05.  Errors out if a resolved oscillation (>= 3 cycles)
    has fewer than 10 periods in the window.
    """
    times, values = _population_signal(ts)
    span = times[-1] - times[0]
    try:
        omega = oscillation_frequency((times, values))
    except ValueError:
        omega = None
    if omega is not None and span < 10.0 * 2.0 * math.pi / omega:
        raise ValueError(
            "window shorter than ten periods of the detected oscillation")
    n_tail = max(times.size // 10, 2)
    t_tail, v_tail = times[-n_tail:], values[-n_tail:]
    slope = float(np.polyfit(t_tail, v_tail, 1)[0])
    return StationaryEstimate(float(v_tail.mean()), slope,
                              abs(slope) * span > 0.05)


def decay_rate(ts) -> float:
    """Envelope decay rate from a log-linear fit.

    Oscillating signals are fitted through their envelope peaks; a
    monotone decay is fitted over the stretch one to three e-folds below
    its maximum.  Either way the envelope must fall by at least a factor
    e across the fitted stretch.  For amplitude series the decaying
    quantity is |A(t)| itself, whose golden-rule rate is J(delta) at
    leading order; population series are fitted as given.
    """
    if isinstance(ts, AmplitudeSeries):
        times, values = ts.times, np.abs(ts.values)
    else:
        times, values = _population_signal(ts)
    resid = np.abs(values - values[-max(values.size // 10, 1):].mean())
    peaks, _ = find_peaks(resid)
    peaks = peaks[resid[peaks] > 1e-12 * resid.max()]
    if peaks.size >= 3:
        t_p, v_p = times[peaks], resid[peaks]
    else:
        # no oscillation to take an envelope of: fit the decay itself,
        # skipping the first e-fold (short-time transient) and stopping
        # three e-folds down (before any long-time power-law plateau)
        start = int(np.argmax(resid))
        top = resid[start]
        sel = slice(start, None)
        keep = (resid[sel] < top * math.exp(-1.0)) \
            & (resid[sel] > top * math.exp(-3.0))
        t_p, v_p = times[sel][keep], resid[sel][keep]
        if t_p.size < 8:
            raise ValueError("insufficient decay: too few points in the "
                             "fit window")
    if v_p[0] < math.e * v_p[-1]:
        raise ValueError(
            f"insufficient decay: envelope falls only by {v_p[0] / v_p[-1]:.2f}x, "
            f"need >= e")
    slope = np.polyfit(t_p, np.log(v_p), 1)[0]
    return float(-slope)


class PoleRegime(str, Enum):
    DELTA_TO_ZERO = "delta_to_zero"
    SMALL_FINITE = "small_finite"
    LARGE = "large"


@dataclass(frozen=True)
class PoleEstimate:
    """Asymptotic resolvent-pole locations of the weak-coupling theory.

    |Im s| is the oscillation frequency, |Re s| the damping rate (the
    large-splitting formula is kept with its printed positive sign).
    """

    regime: PoleRegime
    s_plus: complex
    s_minus: complex
    gamma: float | None = None  # golden-rule rate, large regime only


def rwa_pole_estimates(p: ModelParams) -> PoleEstimate:
    """Pole asymptotics in the regime selected by the splitting size.

    Regime thresholds (ours): the environment scale is
    E = max(w_b, alpha*sqrt(w0/pi)); delta < 0.1 w_b -> delta_to_zero,
    delta > 3 E -> large, else small_finite.
    """
    e_env = p.alpha * math.sqrt(p.omega0 / math.pi)
    scale = max(p.omega_b, e_env)
    if p.delta > 3.0 * scale:
        s_plus = 1j * p.delta + p.alpha * math.sqrt(p.delta)
        s_minus = -1j * p.delta + p.alpha * math.sqrt(p.delta)
        return PoleEstimate(PoleRegime.LARGE, s_plus, s_minus,
                            gamma=spectral_density(p, np.array([p.delta]))[0])
    if p.delta < 0.1 * p.omega_b:
        w = p.alpha * (math.sqrt(p.omega0 / math.pi)
                       - p.alpha * math.sqrt(p.omega_b))
        return PoleEstimate(PoleRegime.DELTA_TO_ZERO, 1j * w, -1j * w)
    root = cmath.sqrt(complex(p.delta - p.omega_b, 0.0))
    s_plus = 1j * (p.delta - e_env + p.alpha * root)
    return PoleEstimate(PoleRegime.SMALL_FINITE, s_plus, -s_plus)


@dataclass
class SweepResult:
    """Per-delta measurements of a crossover scan; NaN marks absent or
    failed entries, with the reason kept in the point's manifest."""

    delta_grid: np.ndarray
    stationary_pop_rwa: np.ndarray
    stationary_pop_full: np.ndarray
    freq_rwa: np.ndarray
    freq_full: np.ndarray
    decay_rates: np.ndarray
    manifests: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(np.diff(self.delta_grid) <= 0):
            raise ValueError("delta_grid must be strictly increasing")


def _scan_point(delta, base_params, methods, cfgs):
    """One sweep point; returns (delta, row dict, manifest dict)."""
    p = dataclasses.replace(base_params, delta=delta)
    row = {k: math.nan for k in ("stationary_pop_rwa", "stationary_pop_full",
                                 "freq_rwa", "freq_full", "decay_rwa")}
    manifest = {"delta": delta, "methods": sorted(methods), "failures": {}}

    if "rwa" in methods:
        rc = dict(cfgs.get("rwa", {}))
        t_max = rc.get("t_max", 30.0 / max(base_params.omega_s, 1e-12))
        samples = rc.get("samples", 2001)
        manifest["rwa"] = {"t_max": t_max, "samples": samples}
        try:
            n = chain_length_for(p, t_max)
            series = chain_evolve(map_to_chain(p, n), delta, t_max,
                                  samples=samples)
            manifest["rwa"]["chain_sites"] = n
            try:
                row["stationary_pop_rwa"] = float(stationary_value(series))
            except ValueError as err:
                manifest["failures"]["stationary_pop_rwa"] = str(err)
            try:
                row["freq_rwa"] = oscillation_frequency(rwa_coherence(series))
            except ValueError as err:
                manifest["failures"]["freq_rwa"] = str(err)
            try:
                row["decay_rwa"] = decay_rate(series)
            except ValueError as err:
                manifest["failures"]["decay_rwa"] = str(err)
        except (ValueError, RuntimeError) as err:
            manifest["failures"]["rwa"] = str(err)

    if "full" in methods:
        fc = cfgs.get("full")
        if not isinstance(fc, EvolutionConfig):
            raise ValueError("cfgs['full'] must be an EvolutionConfig "
                             "when the full method is requested")
        observables = cfgs.get("full_observables", ("population", "coherence"))
        manifest["full"] = {"t_max": fc.t_max, "d_b": fc.d_b,
                            "chi_max": fc.chi_max, "dt": fc.dt,
                            "observables": sorted(observables)}
        try:
            n = chain_length_for(p, fc.t_max)
            c = map_to_chain(p, n)
            manifest["full"]["chain_sites"] = n
            if "population" in observables:
                ts = mps_evolve(c, fc, "excited", delta)
                try:
                    row["stationary_pop_full"] = float(stationary_value(ts))
                except ValueError as err:
                    manifest["failures"]["stationary_pop_full"] = str(err)
            if "coherence" in observables:
                ts = mps_evolve(c, fc, "plus_superposition", delta)
                try:
                    row["freq_full"] = oscillation_frequency(ts)
                except ValueError as err:
                    manifest["failures"]["freq_full"] = str(err)
        except (ValueError, RuntimeError) as err:
            manifest["failures"]["full"] = str(err)

    return delta, row, manifest


def crossover_scan(delta_grid, methods, base_params: ModelParams,
                   cfgs=None, prior: SweepResult | None = None,
                   jobs=1) -> SweepResult:
    """Sweep the emitter splitting and measure each point.

    methods: subset of {"rwa", "full"}.  cfgs: {"rwa": {t_max, samples},
    "full": EvolutionConfig, "full_observables": (...)}.  Points already
    present in ``prior`` (matched by delta) are reused, so an interrupted
    sweep can resume.  Per-point failures are recorded in the manifest
    and leave NaN entries; the scan continues.
    """
    cfgs = cfgs or {}
    unknown = set(methods) - {"rwa", "full"}
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    grid = np.asarray(sorted(float(d) for d in delta_grid))
    if grid.size == 0:
        return SweepResult(grid, *(np.empty(0) for _ in range(5)))

    done = {}
    if prior is not None:
        for i, d in enumerate(prior.delta_grid):
            done[float(d)] = (
                {"stationary_pop_rwa": prior.stationary_pop_rwa[i],
                 "stationary_pop_full": prior.stationary_pop_full[i],
                 "freq_rwa": prior.freq_rwa[i],
                 "freq_full": prior.freq_full[i],
                 "decay_rwa": prior.decay_rates[i]},
                prior.manifests[i] if i < len(prior.manifests) else
                {"delta": float(d), "resumed": True},
            )

    todo = [d for d in grid if d not in done]
    results = dict(done)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_scan_point, d, base_params, methods, cfgs)
                       for d in todo]
            for fut in futures:
                d, row, manifest = fut.result()
                results[d] = (row, manifest)
    else:
        for d in todo:
            d, row, manifest = _scan_point(d, base_params, methods, cfgs)
            results[d] = (row, manifest)

    rows = [results[float(d)][0] for d in grid]
    manifests = [results[float(d)][1] for d in grid]
    return SweepResult(
        delta_grid=grid,
        stationary_pop_rwa=np.array([r["stationary_pop_rwa"] for r in rows]),
        stationary_pop_full=np.array([r["stationary_pop_full"] for r in rows]),
        freq_rwa=np.array([r["freq_rwa"] for r in rows]),
        freq_full=np.array([r["freq_full"] for r in rows]),
        decay_rates=np.array([r["decay_rwa"] for r in rows]),
        manifests=manifests,
    )
