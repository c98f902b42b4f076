"""Two-photon interference at a beamsplitter.

Coincidence densities, coalescence probabilities, delay-optimized
indistinguishability bounds and detector-smeared correlation peaks for
photons described by two-time coherence kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coherence import (
    GHZ_TO_CYC_PER_PS,
    SpectralFilter,
    TemporalAmplitude,
    TwoTimeCoherence,
    pure_state_coherence,
    qd_coherence,
    transform_limited_pulse,
)
from .errors import ValidationError
from .fourier import conjugate_freq_grid, freq_to_time
from .grids import TimeGrid, causal_time_grid

POLARIZATIONS = ("parallel", "orthogonal")


def _check_polarization(pol: str) -> str:
    if pol not in POLARIZATIONS:
        raise ValidationError(f"polarization must be one of {POLARIZATIONS}, got {pol!r}")
    return pol


def _as_kernel(state) -> TwoTimeCoherence:
    if isinstance(state, TwoTimeCoherence):
        return state
    if isinstance(state, TemporalAmplitude):
        return pure_state_coherence(state)
    raise ValidationError(f"expected a coherence kernel or wavepacket, got {type(state).__name__}")


def _shift_kernel(values: np.ndarray, cells: int) -> np.ndarray:
    """Shift G(t, t') -> G(t - d, t' - d), zero-filling what enters the grid."""
    if cells == 0:
        return values
    n = values.shape[0]
    if abs(cells) >= n:
        return np.zeros_like(values)
    out = np.zeros_like(values)
    if cells > 0:
        out[cells:, cells:] = values[:-cells, :-cells]
    else:
        out[:cells, :cells] = values[-cells:, -cells:]
    return out


@dataclass(frozen=True)
class CoincidenceDensity:
    """Joint detection density p(t1, t2) behind the beamsplitter.

    `port="split"` is the cross-coincidence density (one photon per output);
    `port="same"` is the bunched density for the two photons leaving through
    a common output.
    """

    grid: TimeGrid
    values: np.ndarray
    polarization: str
    port: str = "split"

    def total(self) -> float:
        """Integrated probability of the configuration."""
        return float(np.sum(self.values) * self.grid.dt ** 2)

    def tau_marginal(self) -> tuple[np.ndarray, np.ndarray]:
        """Density of the detection-time difference tau = t2 - t1."""
        n = self.grid.n
        dt = self.grid.dt
        tau = (np.arange(2 * n - 1) - (n - 1)) * dt
        vals = np.empty(2 * n - 1)
        for j in range(-(n - 1), n):
            vals[j + n - 1] = np.trace(self.values, offset=j) * dt
        return tau, vals


def coincidence_density(
    a,
    b,
    polarization: str = "parallel",
    delay_ps: float = 0.0,
    reflectivity: float = 0.5,
    port: str = "split",
) -> CoincidenceDensity:
    """Two-photon detection density for inputs a and b on a beamsplitter.

    b is delayed by `delay_ps` (rounded to whole grid cells).  For parallel
    polarization the interference term 2 Re[Ga(t1,t2) Gb(t2,t1)] is active;
    for orthogonal polarization it drops out.
    """
    _check_polarization(polarization)
    if port not in ("split", "same"):
        raise ValidationError(f"port must be 'split' or 'same', got {port!r}")
    if not 0.0 < reflectivity < 1.0:
        raise ValidationError("reflectivity must lie strictly between 0 and 1")
    ka = _as_kernel(a)
    kb = _as_kernel(b)
    if ka.grid != kb.grid:
        raise ValidationError("input states must share one time grid")
    grid = ka.grid
    cells = int(round(delay_ps / grid.dt))
    gb = _shift_kernel(kb.values, cells)
    ga = ka.values

    da = np.real(np.diag(ga))
    db = np.real(np.diag(gb))
    direct_a = np.outer(da, db)
    direct_b = np.outer(db, da)
    refl = reflectivity
    trans = 1.0 - reflectivity
    if polarization == "parallel":
        interference = np.real(ga * gb.T)
    else:
        interference = 0.0
    if port == "split":
        vals = trans ** 2 * direct_a + refl ** 2 * direct_b - 2.0 * refl * trans * interference
    else:
        vals = refl * trans * (direct_a + direct_b + 2.0 * interference)
    floor = -1e-12 * max(float(vals.max(initial=0.0)), 1.0)
    if vals.min() < floor:
        raise ValidationError("coincidence density came out negative beyond rounding noise")
    np.clip(vals, 0.0, None, out=vals)
    return CoincidenceDensity(grid, vals, polarization, port)


def coalescence_probability(a, b, delay_ps: float = 0.0) -> float:
    """Overlap Tr(rho_a rho_b): 1 minus the ratio of parallel to orthogonal
    coincidence totals for a 50:50 splitter."""
    ka = _as_kernel(a)
    kb = _as_kernel(b)
    if ka.grid != kb.grid:
        raise ValidationError("input states must share one time grid")
    cells = int(round(delay_ps / ka.grid.dt))
    gb = _shift_kernel(kb.values, cells)
    val = float(np.real(np.sum(ka.values * gb.T))) * ka.grid.dt ** 2
    return min(max(val, 0.0), 1.0)


# ----------------------------------------------------------------------
# delay-optimized indistinguishability bounds
# ----------------------------------------------------------------------

def _emitter_scale_ps(qd_linewidth_ghz: float | None, dephasing) -> float:
    if dephasing is not None:
        return float(dephasing[0])
    if qd_linewidth_ghz is None:
        raise ValidationError("need a QD linewidth or (T1, T2) dephasing pair")
    return 1.0 / (2.0 * np.pi * qd_linewidth_ghz * GHZ_TO_CYC_PER_PS)


def _bound_grid(filt: SpectralFilter, scale_ps: float) -> TimeGrid:
    # slow emitters only need coarse sampling; keeps the kernel matrix small
    base_dt = 2.0 if scale_ps <= 600.0 else 4.0
    dt = min(base_dt, 0.04 / (filt.fwhm_ghz * GHZ_TO_CYC_PER_PS))
    pulse_w = filt.impulse_width_ps()
    lead_ps = 6.0 * pulse_w
    span = lead_ps + 10.0 * scale_ps + 12.0 * pulse_w
    lead = int(np.ceil(lead_ps / dt))
    grid = causal_time_grid(span, dt, lead=lead)
    if grid.n > 6000:
        raise ValidationError("bound grid too large; widen dt or shrink the problem")
    return grid


def matched_phase_pulse(
    filt: SpectralFilter,
    line_ghz: float,
    grid: TimeGrid,
) -> TemporalAmplitude:
    """Pulse with the filter's spectral magnitude and the phase of a causal
    Lorentzian emission line of the given FWHM.

    This is the best pulse a given filter spectrum can offer an exponential
    emitter: flat-phase pulses leave the emitter's dispersion uncompensated.
    """
    fgrid = conjugate_freq_grid(grid)
    mag = np.abs(filt.flat_phase_profile(fgrid.frequencies, cell_ghz=fgrid.dnu))
    rate = np.pi * line_ghz * GHZ_TO_CYC_PER_PS
    line = 1.0 / (rate - 2j * np.pi * fgrid.frequencies * GHZ_TO_CYC_PER_PS)
    spec = mag * line / np.abs(line)
    return TemporalAmplitude(grid, freq_to_time(spec, fgrid, tgrid=grid))


def coalescence_vs_delay(
    qd_linewidth_ghz: float | None,
    filt: SpectralFilter,
    spdc_pulse: TemporalAmplitude | None = None,
    dephasing: tuple[float, float] | None = None,
    spectral_phase: str = "flat",
) -> tuple[np.ndarray, np.ndarray]:
    """Coalescence of a QD photon with a filtered SPDC photon versus their
    relative delay.

    The SPDC photon defaults to the flat-phase transform-limited pulse the
    filter carves out of a broadband input; spectral_phase="matched" gives
    it the causal phase of the QD line instead (same spectrum, better
    overlap).  With `dephasing=(T1, T2)` the QD photon is the dephased
    kernel and the result is Tr(rho_QD rho_SPDC); without it the QD photon
    is the lifetime-limited exponential wavepacket of the given linewidth
    and the result is |<psi_QD|psi_SPDC>|^2.
    """
    if spectral_phase not in ("flat", "matched"):
        raise ValidationError("spectral_phase must be 'flat' or 'matched'")
    scale = _emitter_scale_ps(qd_linewidth_ghz, dephasing)
    if spdc_pulse is not None:
        grid = spdc_pulse.grid
        pulse = spdc_pulse
    elif spectral_phase == "matched":
        if qd_linewidth_ghz is None:
            raise ValidationError("matched phase needs the QD linewidth")
        grid = _bound_grid(filt, scale)
        pulse = matched_phase_pulse(filt, qd_linewidth_ghz, grid)
    else:
        grid = _bound_grid(filt, scale)
        pulse = transform_limited_pulse(filt, grid=grid)
    dt = grid.dt
    n = grid.n
    # candidate placements of the pulse peak: the optimum sits within a few
    # pulse widths of the emission onset and decays like exp(-delay/T1) after
    pulse_w = filt.impulse_width_ps()
    lo = max(-int(round(2.0 * pulse_w / dt)), -(n - 1))
    hi = min(int(round((3.0 * scale + 2.0 * pulse_w) / dt)), n - 1)
    shifts = np.arange(lo, hi + 1)

    if dephasing is None:
        psi_q = _exponential_samples(grid, scale)
        s = pulse.samples
        vals = np.empty(shifts.size)
        for k, cells in enumerate(shifts):
            vals[k] = abs(np.vdot(psi_q, _shift_samples(s, cells)) * dt) ** 2
        return shifts * dt, vals

    t1_ps, t2_ps = dephasing
    kernel = qd_coherence(t1_ps, t2_ps, grid=grid)
    g = kernel.values
    s = pulse.samples
    coarse = shifts[:: max(1, int(round(16.0 / dt)))]
    vals_c = np.array([_sandwich(g, _shift_samples(s, c), dt) for c in coarse])
    best = coarse[np.argmax(vals_c)]
    window = int(round(24.0 / dt))
    fine = np.arange(max(lo, best - window), min(hi, best + window) + 1)
    vals_f = np.array([_sandwich(g, _shift_samples(s, c), dt) for c in fine])
    return fine * dt, vals_f


def _exponential_samples(grid: TimeGrid, t1_ps: float) -> np.ndarray:
    t = grid.times
    amp = np.where(t >= 0.0, np.exp(-np.maximum(t, 0.0) / (2.0 * t1_ps)), 0.0)
    return amp / np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dt)


def _shift_samples(samples: np.ndarray, cells: int) -> np.ndarray:
    if cells == 0:
        return samples
    out = np.zeros_like(samples)
    if abs(cells) >= samples.size:
        return out
    if cells > 0:
        out[cells:] = samples[:-cells]
    else:
        out[:cells] = samples[-cells:]
    return out


def _sandwich(g: np.ndarray, v: np.ndarray, dt: float) -> float:
    return float(np.real(np.vdot(v, g @ v))) * dt ** 2


def max_theoretical_coalescence(
    qd_linewidth_ghz: float | None,
    filt: SpectralFilter,
    spdc_pulse: TemporalAmplitude | None = None,
    dephasing: tuple[float, float] | None = None,
    spectral_phase: str = "flat",
) -> float:
    """Best achievable coalescence over the relative delay."""
    _, vals = coalescence_vs_delay(qd_linewidth_ghz, filt, spdc_pulse,
                                   dephasing, spectral_phase)
    return float(vals.max())


def optimal_delay_ps(
    qd_linewidth_ghz: float | None,
    filt: SpectralFilter,
    spdc_pulse: TemporalAmplitude | None = None,
    dephasing: tuple[float, float] | None = None,
    spectral_phase: str = "flat",
) -> float:
    """Relative delay that maximizes the coalescence."""
    delays, vals = coalescence_vs_delay(qd_linewidth_ghz, filt, spdc_pulse,
                                        dephasing, spectral_phase)
    return float(delays[np.argmax(vals)])


# ----------------------------------------------------------------------
# signal-idler interference of one pair
# ----------------------------------------------------------------------

def hom_dip_curve(jsa, delays_ps, post_bs_filter: SpectralFilter | None = None):
    """Coincidence rate versus signal-idler delay for one photon pair.

    An optional filter sits in one beamsplitter output, acting on whichever
    photon reaches that detector.  Returns (HomModelCurve, visibility) with
    visibility = 1 - min(curve)/baseline against the distinguishable-photon
    baseline.
    """
    delays_ps = np.asarray(delays_ps, dtype=float)
    if delays_ps.size == 0:
        raise ValidationError("need at least one delay")
    if jsa.signal_grid != jsa.idler_grid:
        raise ValidationError("interfering arms need one shared frequency grid")
    grid = jsa.signal_grid
    nu = grid.frequencies
    dnu = grid.dnu
    if post_bs_filter is not None:
        w1 = np.abs(post_bs_filter.amplitude_transfer(nu, cell_ghz=dnu)) ** 2
    else:
        w1 = np.ones(grid.n)
    f = jsa.values
    inten = np.abs(f) ** 2
    baseline = 0.25 * float(np.sum(w1[:, None] * (inten + inten.T))) * dnu ** 2
    cross = w1[:, None] * f * f.conj().T  # (nu1, nu2) interference kernel

    values = np.empty(delays_ps.size)
    for k, tau in enumerate(delays_ps):
        u = np.exp(-2j * np.pi * GHZ_TO_CYC_PER_PS * nu * tau)
        interference = float(np.real(u @ cross @ u.conj())) * dnu ** 2
        values[k] = baseline - 0.5 * interference
    if values.min() < -1e-9 * max(baseline, 1e-30):
        raise ValidationError("coincidence rate came out negative")
    np.clip(values, 0.0, None, out=values)
    visibility = 1.0 - float(values.min()) / baseline
    curve = HomModelCurve(delays_ps, values,
                          components={"baseline": baseline})
    return curve, visibility


# ----------------------------------------------------------------------
# detector-smeared model peaks
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HomModelCurve:
    """Model coincidence counts versus detection-time difference."""

    delays: np.ndarray
    values: np.ndarray
    jitter_fwhm: float = 0.0
    components: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.delays, self.values]),
                   delimiter=",", header="tau_ps,value", comments="")


def smear_with_detector(
    tau_ps: np.ndarray,
    density: np.ndarray,
    jitter_fwhm: float,
    bin_ps: float,
) -> HomModelCurve:
    """Convolve a tau density with the detectors' gaussian response and
    integrate it over timing bins.

    Returns counts per bin on bin centers; total counts are conserved.
    """
    tau_ps = np.asarray(tau_ps, dtype=float)
    density = np.asarray(density, dtype=float)
    if jitter_fwhm < 0.0:
        raise ValidationError("jitter_fwhm must be >= 0")
    if bin_ps <= 0.0:
        raise ValidationError("bin_ps must be > 0")
    if tau_ps.size < 2:
        raise ValidationError("need at least two tau samples")
    dt = float(tau_ps[1] - tau_ps[0])
    if not np.allclose(np.diff(tau_ps), dt, rtol=1e-9, atol=1e-9):
        raise ValidationError("tau axis must be uniform")
    per_bin = bin_ps / dt
    if abs(per_bin - round(per_bin)) > 1e-9:
        raise ValidationError("bin_ps must be an integer multiple of the tau spacing")
    per_bin = int(round(per_bin))

    counts = density * dt
    if jitter_fwhm > 0.0:
        sigma = jitter_fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        half = int(np.ceil(8.0 * sigma / dt))
        x = np.arange(-half, half + 1) * dt
        kern = np.exp(-0.5 * (x / sigma) ** 2)
        kern /= kern.sum()
        counts = np.convolve(counts, kern, mode="full")
        start = tau_ps[0] - half * dt
    else:
        start = tau_ps[0]

    pad = (-counts.size) % per_bin
    if pad:
        counts = np.concatenate([counts, np.zeros(pad)])
    binned = counts.reshape(-1, per_bin).sum(axis=1)
    centers = start + (np.arange(binned.size) + 0.5) * per_bin * dt - 0.5 * dt
    return HomModelCurve(centers, binned, jitter_fwhm=jitter_fwhm)
