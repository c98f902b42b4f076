"""Analysis pipeline for heralded two-photon tag streams.

Consumes tag files (or in-memory streams) with a herald channel, two
interferometer detectors and an optional sync channel, and reduces them to
the published observables: micro-time histograms per detector, the
pseudo-time coincidence histogram whose central/side peak areas yield the
coalescence probability, temporal post-selection, and model fits for the
emitter lifetime and coherence time.

The pseudo-time axis concatenates heralded periods: one repetition period
of pseudo time separates one herald from the next, however far apart they
were in real time.  Side peaks therefore pair detection events from
different heralded periods and normalize the central peak.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import erfc, erfcx

from .coherence import qd_coherence
from .errors import FitConvergenceError, ValidationError
from .grids import TimeGrid
from .hom import HomModelCurve, coincidence_density, matched_phase_pulse
from .presets import DEFAULT_QD_LINEWIDTH_GHZ, stretcher_filter
from .simkit import D1_CHANNEL, D2_CHANNEL, HERALD_CHANNEL, TagStream

_FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))

# Time windows for the paper-style post-selection start this many bins
# before the per-detector pulse maximum (mode of the micro histogram).
# Calibrated so the default three-bin windows keep early, coherence-heavy
# detections at the published selection efficiency.
DEFAULT_WINDOW_OFFSET_BINS = -2
DEFAULT_WINDOW_BINS = 3


# ----------------------------------------------------------------------
# histograms


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Counted events on uniform bins with Poisson errors."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.ndim != 1 or edges.size != counts.size + 1:
            raise ValidationError("need n+1 bin edges for n counts")
        if np.any(counts < 0):
            raise ValidationError("counts must be nonnegative")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(self.counts.astype(float))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValidationError("histograms must share bin edges to add")
        return CoincidenceHistogram(self.bin_edges, self.counts + other.counts)

    def to_csv(self, path) -> None:
        data = np.column_stack([self.centers, self.counts, self.errors])
        np.savetxt(path, data, delimiter=",", header="bin_center_ps,counts,error",
                   comments="", fmt=("%.1f", "%d", "%.3f"))


def _histogram(values: np.ndarray, edges: np.ndarray) -> CoincidenceHistogram:
    counts, _ = np.histogram(values, bins=edges)
    return CoincidenceHistogram(edges, counts)


# ----------------------------------------------------------------------
# heralded events


@dataclass(frozen=True)
class HeraldedEvent:
    """One heralded period carrying at least one interferometer click."""

    macro_index: int
    kind: str  # "double" or "triple"
    d1_micro: tuple[float, ...]
    d2_micro: tuple[float, ...]


class HeraldedEvents:
    """Columnar set of heralded coincidence events from one stream.

    Only heralded periods with at least one D1/D2 click are materialized;
    clickless heralds still advance the pseudo-time clock, so the total
    herald count and the herald ordinal of every event are kept.  Click
    micro times are stored CSR-style (offsets into flat value arrays),
    which keeps periods with two clicks on one detector exact.
    """

    def __init__(self, rep_period: int, n_heralds: int, ordinals: np.ndarray,
                 macros: np.ndarray, d1_offsets: np.ndarray, d1_values: np.ndarray,
                 d2_offsets: np.ndarray, d2_values: np.ndarray):
        self.rep_period = int(rep_period)
        self.n_heralds = int(n_heralds)
        self.ordinals = np.asarray(ordinals, dtype=np.int64)
        self.macros = np.asarray(macros, dtype=np.int64)
        self.d1_offsets = np.asarray(d1_offsets, dtype=np.int64)
        self.d1_values = np.asarray(d1_values, dtype=np.int64)
        self.d2_offsets = np.asarray(d2_offsets, dtype=np.int64)
        self.d2_values = np.asarray(d2_values, dtype=np.int64)
        n = self.ordinals.size
        if self.macros.size != n or self.d1_offsets.size != n + 1 or self.d2_offsets.size != n + 1:
            raise ValidationError("inconsistent heralded-event arrays")
        if self.d1_offsets[-1] != self.d1_values.size or self.d2_offsets[-1] != self.d2_values.size:
            raise ValidationError("offsets do not match click arrays")

    def __len__(self) -> int:
        return self.ordinals.size

    def d1_counts(self) -> np.ndarray:
        return np.diff(self.d1_offsets)

    def d2_counts(self) -> np.ndarray:
        return np.diff(self.d2_offsets)

    def triple_mask(self) -> np.ndarray:
        return (self.d1_counts() > 0) & (self.d2_counts() > 0)

    def n_triples(self) -> int:
        return int(np.sum(self.triple_mask()))

    def n_doubles(self) -> int:
        return len(self) - self.n_triples()

    def __getitem__(self, i: int) -> HeraldedEvent:
        d1 = tuple(float(v) for v in
                   self.d1_values[self.d1_offsets[i]:self.d1_offsets[i + 1]])
        d2 = tuple(float(v) for v in
                   self.d2_values[self.d2_offsets[i]:self.d2_offsets[i + 1]])
        kind = "triple" if (d1 and d2) else "double"
        return HeraldedEvent(int(self.macros[i]), kind, d1, d2)

    def __iter__(self) -> Iterator[HeraldedEvent]:
        return (self[i] for i in range(len(self)))

    def flat_clicks(self, detector: int) -> tuple[np.ndarray, np.ndarray]:
        """(herald ordinal, micro time) per click of one detector."""
        if detector == D1_CHANNEL:
            offsets, values = self.d1_offsets, self.d1_values
        elif detector == D2_CHANNEL:
            offsets, values = self.d2_offsets, self.d2_values
        else:
            raise ValidationError(f"detector must be 1 or 2, got {detector}")
        return np.repeat(self.ordinals, np.diff(offsets)), values


def herald_select(stream: TagStream, rep_period: int | None = None) -> HeraldedEvents:
    """Group D1/D2 clicks by their heralded laser period.

    Streams block by block with a bounded working set: only the (possibly
    split) trailing period of each block is carried over.  Clicks in
    periods without a herald are dropped, matching the conditioning of the
    measurement.
    """
    rep = int(rep_period) if rep_period is not None else int(stream.rep_ps)
    if rep <= 0:
        raise ValidationError("rep_period must be positive (none in stream header)")

    herald_macros: list[np.ndarray] = []
    click_macros: list[np.ndarray] = []
    click_chans: list[np.ndarray] = []
    click_micros: list[np.ndarray] = []
    carry_ch = np.empty(0, dtype=np.int64)
    carry_ts = np.empty(0, dtype=np.int64)

    def consume(ch: np.ndarray, ts: np.ndarray) -> None:
        if ch.size == 0:
            return
        macro = ts // rep
        h = ch == HERALD_CHANNEL
        heralds = np.unique(macro[h])
        herald_macros.append(heralds)
        c = (ch == D1_CHANNEL) | (ch == D2_CHANNEL)
        if heralds.size:
            idx = np.searchsorted(heralds, macro[c])
            ok = (idx < heralds.size) & (heralds[np.minimum(idx, heralds.size - 1)] == macro[c])
        else:
            ok = np.zeros(int(np.sum(c)), dtype=bool)
        click_macros.append(macro[c][ok])
        click_chans.append(ch[c][ok])
        click_micros.append((ts[c] - macro[c] * rep)[ok])

    for ch, ts in stream.blocks():
        ch = np.concatenate([carry_ch, np.asarray(ch, dtype=np.int64)])
        ts = np.concatenate([carry_ts, np.asarray(ts, dtype=np.int64)])
        if ts.size == 0:
            continue
        # hold back the last period: the next block may continue it
        boundary = np.searchsorted(ts, (ts[-1] // rep) * rep, side="left")
        consume(ch[:boundary], ts[:boundary])
        carry_ch, carry_ts = ch[boundary:], ts[boundary:]
    consume(carry_ch, carry_ts)

    heralds = np.concatenate(herald_macros) if herald_macros else np.empty(0, dtype=np.int64)
    cm = np.concatenate(click_macros) if click_macros else np.empty(0, dtype=np.int64)
    cc = np.concatenate(click_chans) if click_chans else np.empty(0, dtype=np.int64)
    cv = np.concatenate(click_micros) if click_micros else np.empty(0, dtype=np.int64)

    click_ordinal = np.searchsorted(heralds, cm)
    event_ordinals = np.unique(click_ordinal)
    event_index = np.searchsorted(event_ordinals, click_ordinal)
    n_events = event_ordinals.size

    order = np.lexsort((cv, cc, event_index))
    event_index = event_index[order]
    cc = cc[order]
    cv = cv[order]

    offsets = {}
    values = {}
    for chan in (D1_CHANNEL, D2_CHANNEL):
        m = cc == chan
        counts = np.bincount(event_index[m], minlength=n_events)
        offsets[chan] = np.concatenate([[0], np.cumsum(counts)])
        values[chan] = cv[m]
    return HeraldedEvents(
        rep_period=rep,
        n_heralds=heralds.size,
        ordinals=event_ordinals,
        macros=heralds[event_ordinals] if n_events else np.empty(0, dtype=np.int64),
        d1_offsets=offsets[D1_CHANNEL], d1_values=values[D1_CHANNEL],
        d2_offsets=offsets[D2_CHANNEL], d2_values=values[D2_CHANNEL],
    )


# ----------------------------------------------------------------------
# micro-time histograms


@dataclass(frozen=True)
class MicroHistograms:
    """Per-detector micro-time histograms, split by coincidence kind."""

    d1_doubles: CoincidenceHistogram
    d1_triples: CoincidenceHistogram
    d2_doubles: CoincidenceHistogram
    d2_triples: CoincidenceHistogram

    def detector_total(self, detector: int) -> CoincidenceHistogram:
        if detector == D1_CHANNEL:
            return self.d1_doubles + self.d1_triples
        if detector == D2_CHANNEL:
            return self.d2_doubles + self.d2_triples
        raise ValidationError(f"detector must be 1 or 2, got {detector}")

    def combined(self) -> CoincidenceHistogram:
        return self.detector_total(D1_CHANNEL) + self.detector_total(D2_CHANNEL)


def micro_histograms(events: HeraldedEvents, bin_ps: float = 128.0) -> MicroHistograms:
    """Detection-time histograms relative to the laser pulse."""
    if bin_ps <= 0:
        raise ValidationError("bin_ps must be positive")
    n_bins = int(events.rep_period // bin_ps)
    if n_bins < 1:
        raise ValidationError("bin_ps exceeds the repetition period")
    edges = np.arange(n_bins + 1) * float(bin_ps)
    triple = events.triple_mask()
    out = {}
    for chan, key in ((D1_CHANNEL, "d1"), (D2_CHANNEL, "d2")):
        ordinals, micros = events.flat_clicks(chan)
        is_triple = np.repeat(triple, np.diff(
            events.d1_offsets if chan == D1_CHANNEL else events.d2_offsets))
        out[f"{key}_doubles"] = _histogram(micros[~is_triple], edges)
        out[f"{key}_triples"] = _histogram(micros[is_triple], edges)
    return MicroHistograms(**out)


# ----------------------------------------------------------------------
# pseudo-time correlation


@dataclass(frozen=True)
class PeakAreas:
    """Integrated peak contents of the pseudo-time histogram."""

    ks: np.ndarray          # peak index in units of the repetition period
    areas: np.ndarray
    errors: np.ndarray      # Poisson

    def central(self) -> tuple[float, float]:
        i = int(np.flatnonzero(self.ks == 0)[0])
        return float(self.areas[i]), float(self.errors[i])

    def side_mean(self) -> tuple[float, float]:
        m = self.ks != 0
        if not m.any():
            raise ValidationError("no side peaks requested")
        mean = float(np.mean(self.areas[m]))
        err = float(np.sqrt(np.sum(self.areas[m])) / np.sum(m))
        return mean, err


def _paired_differences(events: HeraldedEvents, n_side: int):
    """Yield (k, d2_micro - d1_micro) for herald-ordinal distance k."""
    d1_ord, d1_micro = events.flat_clicks(D1_CHANNEL)
    d2_ord, d2_micro = events.flat_clicks(D2_CHANNEL)
    for k in range(-n_side, n_side + 1):
        left = np.searchsorted(d2_ord, d1_ord + k, side="left")
        right = np.searchsorted(d2_ord, d1_ord + k, side="right")
        counts = right - left
        total = int(counts.sum())
        if total == 0:
            yield k, np.empty(0, dtype=np.int64)
            continue
        d1_idx = np.repeat(np.arange(counts.size), counts)
        within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        d2_idx = left[d1_idx] + within
        yield k, d2_micro[d2_idx] - d1_micro[d1_idx]


def pseudo_time_histogram(
    events: HeraldedEvents,
    rep_period: int | None = None,
    n_side_peaks: int = 6,
    bin_ps: float = 128.0,
) -> tuple[CoincidenceHistogram, PeakAreas]:
    """D2-D1 correlation on the concatenated-herald pseudo-time axis.

    The central peak collects same-period (triple) coincidences; side peak
    k pairs a D1 click with a D2 click k heralds later.  Peak areas
    integrate +-T_L/2 around each nominal center.
    """
    if n_side_peaks < 1:
        raise ValidationError("need at least one side peak")
    rep = int(rep_period) if rep_period is not None else events.rep_period
    half = 0.5 * rep
    lo = -(n_side_peaks + 0.5) * rep
    n_bins = int(np.ceil((2 * n_side_peaks + 1) * rep / bin_ps))
    edges = lo + np.arange(n_bins + 1) * float(bin_ps)

    deltas = []
    ks = np.arange(-n_side_peaks, n_side_peaks + 1)
    areas = np.zeros(ks.size)
    for i, (k, diff) in enumerate(_paired_differences(events, n_side_peaks)):
        areas[i] = int(np.sum(np.abs(diff) <= half))
        deltas.append(diff.astype(float) + k * rep)
    hist = _histogram(np.concatenate(deltas), edges)
    return hist, PeakAreas(ks=ks, areas=areas, errors=np.sqrt(areas))


# ----------------------------------------------------------------------
# temporal post-selection


def time_window_filter(
    events: HeraldedEvents,
    window_bins,
    bin_ps: float = 128.0,
) -> tuple[HeraldedEvents, float]:
    """Keep clicks inside per-detector micro-time windows.

    window_bins maps detector channel (1, 2) to an iterable of micro bin
    indices.  The selection efficiency is the fraction of triples that are
    still triples afterwards.  Doubles are windowed too (they feed the side
    peaks) but do not enter the efficiency.
    """
    try:
        windows = {D1_CHANNEL: np.asarray(sorted(set(window_bins[D1_CHANNEL])), dtype=np.int64),
                   D2_CHANNEL: np.asarray(sorted(set(window_bins[D2_CHANNEL])), dtype=np.int64)}
    except (KeyError, IndexError, TypeError):
        raise ValidationError("window_bins must map detectors 1 and 2 "
                              "to micro bin indices") from None
    n_bins = int(events.rep_period // bin_ps)
    for chan, bins in windows.items():
        if bins.size == 0:
            raise ValidationError(f"empty window for detector {chan}")
        if bins.min() < 0 or bins.max() >= n_bins:
            raise ValidationError(
                f"window bins for detector {chan} must lie in [0, {n_bins})")

    kept_offsets = {}
    kept_values = {}
    for chan, (offsets, values) in ((D1_CHANNEL, (events.d1_offsets, events.d1_values)),
                                    (D2_CHANNEL, (events.d2_offsets, events.d2_values))):
        keep = np.isin(values // int(bin_ps), windows[chan])
        event_idx = np.repeat(np.arange(len(events)), np.diff(offsets))
        counts = np.bincount(event_idx[keep], minlength=len(events))
        kept_offsets[chan] = np.concatenate([[0], np.cumsum(counts)])
        kept_values[chan] = values[keep]

    total_triples = events.n_triples()
    keep_event = (np.diff(kept_offsets[D1_CHANNEL]) + np.diff(kept_offsets[D2_CHANNEL])) > 0
    idx = np.flatnonzero(keep_event)

    def reindex(offsets, values):
        counts = np.diff(offsets)[idx]
        starts = offsets[:-1][idx]
        total = int(counts.sum())
        within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        sel = np.repeat(starts, counts) + within
        return np.concatenate([[0], np.cumsum(counts)]), values[sel]

    d1_off, d1_val = reindex(kept_offsets[D1_CHANNEL], kept_values[D1_CHANNEL])
    d2_off, d2_val = reindex(kept_offsets[D2_CHANNEL], kept_values[D2_CHANNEL])
    filtered = HeraldedEvents(
        rep_period=events.rep_period,
        n_heralds=events.n_heralds,
        ordinals=events.ordinals[idx],
        macros=events.macros[idx],
        d1_offsets=d1_off, d1_values=d1_val,
        d2_offsets=d2_off, d2_values=d2_val,
    )
    efficiency = filtered.n_triples() / total_triples if total_triples else 0.0
    return filtered, efficiency


def mode_window(events: HeraldedEvents, bin_ps: float = 128.0,
                n_bins: int = DEFAULT_WINDOW_BINS,
                offset_bins: int = DEFAULT_WINDOW_OFFSET_BINS) -> dict:
    """Per-detector windows anchored at the micro-histogram mode.

    The mode of the pulse-arrival histogram stands in for the fitted pulse
    arrival; offset_bins shifts the window start relative to it.
    """
    if n_bins < 1:
        raise ValidationError("need at least one window bin")
    hists = micro_histograms(events, bin_ps)
    out = {}
    for chan in (D1_CHANNEL, D2_CHANNEL):
        total = hists.detector_total(chan)
        if total.total() == 0:
            raise ValidationError(f"no clicks on detector {chan} to anchor a window")
        anchor = int(np.argmax(total.counts))
        start = anchor + offset_bins
        n_micro = total.counts.size
        start = min(max(start, 0), max(n_micro - n_bins, 0))
        out[chan] = list(range(start, start + n_bins))
    return out


# ----------------------------------------------------------------------
# coalescence


def coalescence(central_orthogonal: tuple[float, float],
                central_parallel: tuple[float, float]) -> tuple[float, float]:
    """P_C = (A_perp - A_par) / A_perp with first-order Poisson propagation."""
    a_perp, s_perp = central_orthogonal
    a_par, s_par = central_parallel
    if a_perp <= 0:
        raise ValidationError("orthogonal central-peak area must be positive")
    p_c = (a_perp - a_par) / a_perp
    sigma = np.hypot(a_par / a_perp ** 2 * s_perp, s_par / a_perp)
    return float(p_c), float(sigma)


# ----------------------------------------------------------------------
# model fits


def _two_sided_emg(x: np.ndarray, t1: float, sigma: float) -> np.ndarray:
    """Symmetric exponential (decay time t1 each side) blurred by a gaussian.

    Branches between the erfcx and erfc forms so neither tail overflows.
    """
    def one_sided(t):
        b = sigma / (np.sqrt(2.0) * t1) - t / (np.sqrt(2.0) * sigma)
        out = np.empty_like(b)
        pos = b >= 0.0
        out[pos] = erfcx(b[pos]) * np.exp(-t[pos] ** 2 / (2.0 * sigma ** 2))
        # b < 0 implies t > sigma^2/t1, so the exponent below is negative
        out[~pos] = np.exp(sigma ** 2 / (2.0 * t1 ** 2) - t[~pos] / t1) * erfc(b[~pos])
        return out

    x = np.asarray(x, dtype=float)
    return (one_sided(x) + one_sided(-x)) / (4.0 * t1)


def _effective_sigma(jitter_fwhm: float, bin_ps: float) -> float:
    # timestamp quantization of both detectors adds a triangular kernel;
    # its variance is folded into the gaussian
    return float(np.sqrt((jitter_fwhm / _FWHM_TO_SIGMA) ** 2 + bin_ps ** 2 / 6.0))


@dataclass(frozen=True)
class LifetimeFit:
    t1_ps: float
    t1_sigma: float
    amplitude: float
    center_ps: float
    covariance: np.ndarray

    def model_counts(self, x: np.ndarray, jitter_fwhm: float, bin_ps: float) -> np.ndarray:
        sigma = _effective_sigma(jitter_fwhm, bin_ps)
        return self.amplitude * bin_ps * _two_sided_emg(
            np.asarray(x, dtype=float) - self.center_ps, self.t1_ps, sigma)


def fit_lifetime(histogram: CoincidenceHistogram, jitter_fwhm: float,
                 bin_ps: float, tail_min_ps: float | None = None) -> LifetimeFit:
    """Fit a two-sided exponential peak convolved with detector response.

    Poisson (Neyman) weights; raises FitConvergenceError when the solver
    stalls or the covariance is unusable.  With tail_min_ps set, bins closer
    than that to the peak are excluded: past the detector response only the
    exponential tails survive, so the decay time stays unbiased even when
    the peak core contains extra (non-exponential) coincidences.
    """
    populated = histogram.counts > 0
    if int(np.sum(populated)) < 10:
        raise ValidationError("need at least 10 populated bins to fit")
    x = histogram.centers
    y = histogram.counts.astype(float)
    if tail_min_ps is not None:
        center_est = float(np.sum(x * y) / max(y.sum(), 1.0))
        m = np.abs(x - center_est) >= tail_min_ps
        if int(np.sum((y > 0) & m)) < 10:
            raise ValidationError("tail_min_ps leaves fewer than 10 populated bins")
        x, y = x[m], y[m]
    w = np.sqrt(np.maximum(y, 1.0))
    sigma_k = _effective_sigma(jitter_fwhm, bin_ps)

    def model(xx, amplitude, t1, center):
        return amplitude * bin_ps * _two_sided_emg(xx - center, t1, sigma_k)

    total = float(y.sum())
    center0 = float(np.sum(x * y) / max(total, 1.0))
    spread = np.sqrt(np.sum((x - center0) ** 2 * y) / max(total, 1.0))
    t1_0 = max(float(spread) / np.sqrt(2.0), bin_ps)
    try:
        popt, pcov = curve_fit(
            model, x, y, p0=[total, t1_0, center0], sigma=w, absolute_sigma=True,
            bounds=([0.0, 1.0, x[0]], [np.inf, 1.0e6, x[-1]]), maxfev=5000)
    except (RuntimeError, ValueError) as exc:
        raise FitConvergenceError(f"lifetime fit did not converge: {exc}") from exc
    if not np.all(np.isfinite(pcov)):
        resid = float(np.sum(((y - model(x, *popt)) / w) ** 2))
        raise FitConvergenceError(
            f"lifetime fit degenerate (chi2={resid:.1f} over {x.size} bins)")
    return LifetimeFit(t1_ps=float(popt[1]), t1_sigma=float(np.sqrt(pcov[1, 1])),
                       amplitude=float(popt[0]), center_ps=float(popt[2]),
                       covariance=pcov)


class _HomPeakModel:
    """Central-peak model: interference of the emitter and the SPDC pulse.

    Precomputes the detection-time-difference marginals of the orthogonal
    (base) and the dephasing-free interference components; pure dephasing
    then only multiplies the interference term by exp(-Gd |tau|), so fit
    iterations stay cheap.
    """

    def __init__(self, t1_ps: float, jitter_fwhm: float, bin_ps: float,
                 pulse_delay_ps: float = 12.0,
                 line_ghz: float = DEFAULT_QD_LINEWIDTH_GHZ):
        self.t1_ps = float(t1_ps)
        self.bin_ps = float(bin_ps)
        lead, dt = 600.0, 2.0
        n = int(np.ceil((lead + 12.0 * t1_ps) / dt))
        grid = TimeGrid(t0=-lead, dt=dt, n=n)
        qd0 = qd_coherence(t1_ps, 2.0 * t1_ps, grid)  # no pure dephasing
        pulse = matched_phase_pulse(stretcher_filter(), line_ghz, grid)
        orth = coincidence_density(qd0, pulse, "orthogonal", pulse_delay_ps)
        par0 = coincidence_density(qd0, pulse, "parallel", pulse_delay_ps)
        self.tau, self.base = orth.tau_marginal()
        _, par0_marginal = par0.tau_marginal()
        self.interference = self.base - par0_marginal
        self.dt = float(self.tau[1] - self.tau[0])
        sigma = _effective_sigma(jitter_fwhm, bin_ps)
        half = int(np.ceil(6.0 * sigma / self.dt))
        kx = np.arange(-half, half + 1) * self.dt
        kernel = np.exp(-kx ** 2 / (2.0 * sigma ** 2))
        self._kernel = kernel / kernel.sum()

    def gamma_d(self, t2_ps: float) -> float:
        return 1.0 / t2_ps - 1.0 / (2.0 * self.t1_ps)

    def density(self, visibility: float, gamma_d: float) -> np.ndarray:
        return self.base - visibility * np.exp(-gamma_d * np.abs(self.tau)) * self.interference

    def smeared_counts(self, x: np.ndarray, amplitude: float, center: float,
                       visibility: float, gamma_d: float) -> np.ndarray:
        dens = np.convolve(self.density(visibility, gamma_d), self._kernel, mode="same")
        # orthogonal branch carries half the pair probability; normalize so
        # `amplitude` is the central-peak area of the orthogonal histogram
        norm = np.sum(self.base) * self.dt
        return amplitude * self.bin_ps / norm * np.interp(
            x - center, self.tau, dens, left=0.0, right=0.0)


@dataclass(frozen=True)
class HomPeakFit:
    t2_ps: float
    t2_sigma: float
    visibility: float
    visibility_sigma: float
    amplitude: float
    center_ps: float
    curves: dict

    def summary(self) -> str:
        return (f"T2 = {self.t2_ps:.1f} +- {self.t2_sigma:.1f} ps, "
                f"interference amplitude {self.visibility:.3f} "
                f"+- {self.visibility_sigma:.3f}")


def fit_hom_peak(hist_perp: CoincidenceHistogram, hist_par: CoincidenceHistogram,
                 t1_ps: float, jitter_fwhm: float, *,
                 amplitude_ratio: float = 1.0,
                 pulse_delay_ps: float = 12.0) -> HomPeakFit:
    """Two-stage central-peak fit: scale on the orthogonal peak, then the
    interference amplitude and coherence time on the parallel peak.

    amplitude_ratio rescales the orthogonal amplitude for the parallel
    data set (side-peak normalization between runs).  Emits smeared and
    jitter-free model curves for both configurations.
    """
    if hist_perp.bin_width != hist_par.bin_width:
        raise ValidationError("histogram binnings differ")
    bin_ps = hist_perp.bin_width
    model = _HomPeakModel(t1_ps, jitter_fwhm, bin_ps, pulse_delay_ps)

    def fit(hist, fun, p0, bounds, label):
        x, y = hist.centers, hist.counts.astype(float)
        w = np.sqrt(np.maximum(y, 1.0))
        try:
            popt, pcov = curve_fit(fun, x, y, p0=p0, sigma=w, absolute_sigma=True,
                                   bounds=bounds, maxfev=5000)
        except (RuntimeError, ValueError) as exc:
            raise FitConvergenceError(f"{label} fit did not converge: {exc}") from exc
        if not np.all(np.isfinite(pcov)):
            raise FitConvergenceError(f"{label} fit degenerate")
        return popt, pcov

    area0 = float(hist_perp.counts.sum())
    center0 = float(np.sum(hist_perp.centers * hist_perp.counts) / max(area0, 1.0))
    (a_fit, c_fit), _ = fit(
        hist_perp,
        lambda x, a, c: model.smeared_counts(x, a, c, 0.0, 0.0),
        p0=[area0, center0],
        bounds=([0.0, center0 - 2000.0], [np.inf, center0 + 2000.0]),
        label="orthogonal peak")

    gd0 = max(model.gamma_d(0.66 * t1_ps), 1.0e-5)
    (v_fit, gd_fit), pcov = fit(
        hist_par,
        lambda x, v, gd: model.smeared_counts(
            x, amplitude_ratio * a_fit, c_fit, v, gd),
        p0=[1.0, gd0],
        bounds=([-0.5, 0.0], [1.5, 1.0]),
        label="parallel peak")

    t2 = 1.0 / (gd_fit + 1.0 / (2.0 * t1_ps))
    t2_sigma = float(np.sqrt(pcov[1, 1])) * t2 ** 2
    curves = {
        "parallel_smeared": HomModelCurve(
            model.tau + c_fit,
            amplitude_ratio * a_fit * model.bin_ps / (np.sum(model.base) * model.dt)
            * np.convolve(model.density(v_fit, gd_fit), model._kernel, mode="same"),
            jitter_fwhm=jitter_fwhm),
        "parallel_jitter_free": HomModelCurve(
            model.tau + c_fit,
            amplitude_ratio * a_fit * model.bin_ps / (np.sum(model.base) * model.dt)
            * model.density(v_fit, gd_fit)),
        "orthogonal_smeared": HomModelCurve(
            model.tau + c_fit,
            a_fit * model.bin_ps / (np.sum(model.base) * model.dt)
            * np.convolve(model.base, model._kernel, mode="same"),
            jitter_fwhm=jitter_fwhm),
        "orthogonal_jitter_free": HomModelCurve(
            model.tau + c_fit,
            a_fit * model.bin_ps / (np.sum(model.base) * model.dt) * model.base),
    }
    return HomPeakFit(t2_ps=float(t2), t2_sigma=t2_sigma,
                      visibility=float(v_fit),
                      visibility_sigma=float(np.sqrt(pcov[0, 0])),
                      amplitude=float(a_fit), center_ps=float(c_fit),
                      curves=curves)


def peak_slice(hist: CoincidenceHistogram, k: int, rep_period: int) -> CoincidenceHistogram:
    """Bins of the pseudo-time histogram within +-T_L/2 of peak k, recentered."""
    centers = hist.centers - k * rep_period
    m = np.abs(centers) <= 0.5 * rep_period
    if not m.any():
        raise ValidationError(f"no bins inside peak {k}")
    i0, i1 = np.flatnonzero(m)[[0, -1]]
    edges = hist.bin_edges[i0:i1 + 2] - k * rep_period
    return CoincidenceHistogram(edges, hist.counts[m])


# ----------------------------------------------------------------------
# full pipeline


@dataclass
class AnalysisResult:
    """Everything cmd_analyze reports: scalars plus plot-ready histograms."""

    a_perp: float
    a_par: float
    p_c: float
    sigma_p_c: float
    a_perp_filtered: float
    a_par_filtered: float
    p_c_filtered: float
    sigma_p_c_filtered: float
    selection_efficiency: float
    t1_ps: float
    t1_sigma: float
    t2_ps: float
    t2_sigma: float
    visibility: float
    window_d1: list
    window_d2: list
    micro_perp: MicroHistograms = field(repr=False)
    micro_par: MicroHistograms = field(repr=False)
    pseudo_perp: CoincidenceHistogram = field(repr=False)
    pseudo_par: CoincidenceHistogram = field(repr=False)
    pseudo_perp_filtered: CoincidenceHistogram = field(repr=False)
    pseudo_par_filtered: CoincidenceHistogram = field(repr=False)
    peaks_perp: PeakAreas = field(repr=False)
    peaks_par: PeakAreas = field(repr=False)
    fit_curves: dict = field(repr=False)

    def report_text(self) -> str:
        lines = [
            f"A_perp={self.a_perp:.0f}",
            f"A_par={self.a_par:.0f}",
            f"P_C={self.p_c:.4f}",
            f"sigma_P_C={self.sigma_p_c:.4f}",
            f"T1_ps={self.t1_ps:.1f}",
            f"T2_ps={self.t2_ps:.1f}",
            f"selection_efficiency={self.selection_efficiency:.4f}",
            f"sigma_T1_ps={self.t1_sigma:.1f}",
            f"sigma_T2_ps={self.t2_sigma:.1f}",
            f"A_perp_filtered={self.a_perp_filtered:.0f}",
            f"A_par_filtered={self.a_par_filtered:.0f}",
            f"P_C_filtered={self.p_c_filtered:.4f}",
            f"sigma_P_C_filtered={self.sigma_p_c_filtered:.4f}",
            f"visibility={self.visibility:.4f}",
            f"window_d1={','.join(str(b) for b in self.window_d1)}",
            f"window_d2={','.join(str(b) for b in self.window_d2)}",
        ]
        return "\n".join(lines) + "\n"

    def write_report(self, sink) -> None:
        if isinstance(sink, (str, Path)):
            Path(sink).write_text(self.report_text())
        else:
            sink.write(self.report_text())


def analyze_pair(
    perp: TagStream,
    par: TagStream,
    *,
    window_bins: int = DEFAULT_WINDOW_BINS,
    window_offset_bins: int = DEFAULT_WINDOW_OFFSET_BINS,
    n_side_peaks: int = 6,
    detector_jitter_fwhm_ps: float = 169.7,
    pulse_delay_ps: float = 12.0,
) -> AnalysisResult:
    """The full published pipeline on an orthogonal/parallel stream pair."""
    if perp.bin_ps != par.bin_ps or perp.rep_ps != par.rep_ps:
        raise ValidationError("stream pair must share rep_ps and bin_ps")
    bin_ps = float(perp.bin_ps)
    rep = int(perp.rep_ps)
    diff_jitter = detector_jitter_fwhm_ps * np.sqrt(2.0)

    ev_perp = herald_select(perp)
    ev_par = herald_select(par)
    micro_perp = micro_histograms(ev_perp, bin_ps)
    micro_par = micro_histograms(ev_par, bin_ps)

    pseudo_perp, peaks_perp = pseudo_time_histogram(ev_perp, rep, n_side_peaks, bin_ps)
    pseudo_par, peaks_par = pseudo_time_histogram(ev_par, rep, n_side_peaks, bin_ps)
    p_c, sigma_p_c = coalescence(peaks_perp.central(), peaks_par.central())

    windows = mode_window(ev_par, bin_ps, window_bins, window_offset_bins)
    filt_perp, _ = time_window_filter(ev_perp, windows, bin_ps)
    filt_par, efficiency = time_window_filter(ev_par, windows, bin_ps)
    pseudo_perp_f, peaks_perp_f = pseudo_time_histogram(filt_perp, rep, n_side_peaks, bin_ps)
    pseudo_par_f, peaks_par_f = pseudo_time_histogram(filt_par, rep, n_side_peaks, bin_ps)
    p_c_f, sigma_p_c_f = coalescence(peaks_perp_f.central(), peaks_par_f.central())

    # T1 from a side peak (uncorrelated pairs, two-sided exponential); the
    # difference-level jitter is sqrt(2) of the per-detector value.  The
    # core mixes in pulse-pulse coincidences, so only the tails are fitted.
    side = peak_slice(pseudo_perp, 1, rep)
    t1_fit = fit_lifetime(side, diff_jitter, bin_ps, tail_min_ps=450.0)

    ratio = peaks_par.side_mean()[0] / max(peaks_perp.side_mean()[0], 1.0)
    hom_fit = fit_hom_peak(
        peak_slice(pseudo_perp, 0, rep), peak_slice(pseudo_par, 0, rep),
        t1_fit.t1_ps, diff_jitter, amplitude_ratio=ratio,
        pulse_delay_ps=pulse_delay_ps)

    return AnalysisResult(
        a_perp=peaks_perp.central()[0],
        a_par=peaks_par.central()[0],
        p_c=p_c, sigma_p_c=sigma_p_c,
        a_perp_filtered=peaks_perp_f.central()[0],
        a_par_filtered=peaks_par_f.central()[0],
        p_c_filtered=p_c_f, sigma_p_c_filtered=sigma_p_c_f,
        selection_efficiency=efficiency,
        t1_ps=t1_fit.t1_ps, t1_sigma=t1_fit.t1_sigma,
        t2_ps=hom_fit.t2_ps, t2_sigma=hom_fit.t2_sigma,
        visibility=hom_fit.visibility,
        window_d1=list(windows[D1_CHANNEL]), window_d2=list(windows[D2_CHANNEL]),
        micro_perp=micro_perp, micro_par=micro_par,
        pseudo_perp=pseudo_perp, pseudo_par=pseudo_par,
        pseudo_perp_filtered=pseudo_perp_f, pseudo_par_filtered=pseudo_par_f,
        peaks_perp=peaks_perp, peaks_par=peaks_par,
        fit_curves=hom_fit.curves,
    )
