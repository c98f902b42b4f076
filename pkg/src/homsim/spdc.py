"""Joint spectral amplitude of a pulsed type-II downconversion source.

The two-photon amplitude is a gaussian pump envelope in the sum frequency
times a sinc phase-matching profile whose axis is tilted slightly away from
the sum-frequency direction; the tilt (``asymmetry``) makes the idler
marginal wider than the signal marginal and limits the signal-idler
exchange symmetry that two-photon interference relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .coherence import (
    GAUSSIAN_TBP,
    RECT_TBP,
    SpectralFilter,
    TwoTimeCoherence,
)
from .errors import FilterRejectionError, GridError, ValidationError
from .grids import GHZ_TO_CYC_PER_PS, FreqGrid, TimeGrid


def pump_spectral_fwhm_ghz(pump_fwhm_time_ps: float) -> float:
    """Spectral intensity FWHM of a transform-limited gaussian pump pulse."""
    if pump_fwhm_time_ps <= 0:
        raise ValidationError("pump duration must be positive")
    return GAUSSIAN_TBP / (pump_fwhm_time_ps * GHZ_TO_CYC_PER_PS)


@dataclass(frozen=True)
class PhasematchParams:
    """Phenomenological phase-matching profile of the crystal.

    pm_bandwidth_ghz is the intensity FWHM of the sinc profile along the
    sum-frequency axis.  asymmetry is the relative weight of the idler
    detuning inside the sinc argument; values below 1 make the idler
    marginal the wider one.  Center wavelengths are bookkeeping for the
    non-degenerate operating point and do not enter the detuning grids.
    """

    pm_bandwidth_ghz: float = 54.7
    asymmetry: float = 0.580
    signal_center_nm: float = 919.6
    idler_center_nm: float = 920.4

    def __post_init__(self):
        if self.pm_bandwidth_ghz <= 0:
            raise ValidationError("pm_bandwidth_ghz must be positive")
        if self.asymmetry <= 0:
            raise ValidationError("asymmetry must be positive")
        for name in ("signal_center_nm", "idler_center_nm"):
            value = getattr(self, name)
            if not 918.0 < value < 922.0:
                raise ValidationError(f"{name} must lie in (918, 922) nm, got {value}")

    @property
    def sinc_scale_ghz(self) -> float:
        """First-zero scale of the sinc in (nu_s + asymmetry * nu_i)."""
        return self.pm_bandwidth_ghz * (1.0 + self.asymmetry) / (2.0 * RECT_TBP)


@dataclass(frozen=True)
class JointSpectralAmplitude:
    """Two-photon amplitude f(nu_s, nu_i) on detuning grids in GHz."""

    signal_grid: FreqGrid
    idler_grid: FreqGrid
    values: np.ndarray
    pump_fwhm_time: float
    phasematch: PhasematchParams

    def __post_init__(self):
        if self.values.shape != (self.signal_grid.n, self.idler_grid.n):
            raise ValidationError("values shape must match (signal, idler) grids")
        norm = np.sum(np.abs(self.values) ** 2) * self.signal_grid.dnu * self.idler_grid.dnu
        if abs(norm - 1.0) > 1e-6:
            raise ValidationError(f"joint amplitude must be normalized, got {norm}")

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def to_csv(self, path, stride: int = 1) -> None:
        """Write (nu_signal, nu_idler, intensity) rows, optionally strided."""
        nu_s = self.signal_grid.frequencies[::stride]
        nu_i = self.idler_grid.frequencies[::stride]
        inten = self.intensity()[::stride, ::stride]
        rows = np.column_stack([
            np.repeat(nu_s, nu_i.size),
            np.tile(nu_i, nu_s.size),
            inten.ravel(),
        ])
        np.savetxt(path, rows, delimiter=",",
                   header="nu_signal_ghz,nu_idler_ghz,intensity", comments="")


@dataclass(frozen=True)
class MarginalSpectrum:
    """Single-arm intensity spectrum traced over the partner photon."""

    frequencies: np.ndarray
    intensity: np.ndarray
    fwhm_ghz: float
    arm: str

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.frequencies, self.intensity]),
                   delimiter=",", header="nu_ghz,intensity", comments="")


def _half_max_width(x: np.ndarray, y: np.ndarray) -> float:
    y = y / y.max()
    above = np.flatnonzero(y >= 0.5)
    if above.size < 2:
        raise GridError("spectrum is unresolved on this grid")
    i0, i1 = above[0], above[-1]
    if i0 == 0 or i1 == y.size - 1:
        raise GridError("spectrum does not fall to half maximum inside the grid")
    lo = x[i0 - 1] + (0.5 - y[i0 - 1]) * (x[i0] - x[i0 - 1]) / (y[i0] - y[i0 - 1])
    hi = x[i1] + (y[i1] - 0.5) * (x[i1 + 1] - x[i1]) / (y[i1] - y[i1 + 1])
    return float(hi - lo)


def default_jsa_grids(
    pump_fwhm_time_ps: float,
    pm: PhasematchParams,
    dnu_ghz: float | None = None,
) -> tuple[FreqGrid, FreqGrid]:
    """Shared square detuning grids sized from the model's expected widths.

    The marginal scale is set by the phase-matching width divided by the
    sum-axis tilt (1 - asymmetry) plus the pump-limited ridge length; the
    grid reaches past 6x the wider (idler) estimate.
    """
    a = pm.asymmetry
    if a >= 1.0:
        # widths swap roles; use the symmetric worst case
        a = 1.0 / a
    w_pump = pump_spectral_fwhm_ghz(pump_fwhm_time_ps)
    x = pm.sinc_scale_ghz
    est_signal = (RECT_TBP * x + pm.asymmetry * w_pump) / (1.0 - a)
    est_idler = (RECT_TBP * x + w_pump / pm.asymmetry) / (1.0 - a)
    half = 3.25 * max(est_signal, est_idler)
    if dnu_ghz is None:
        dnu_ghz = max(2.0 * half / 1400.0, 0.75)
    n = int(np.ceil(2.0 * half / dnu_ghz))
    n += n % 2
    grid = FreqGrid(nu0=-0.5 * n * dnu_ghz, dnu=dnu_ghz, n=n)
    return grid, grid


def build_jsa(
    pump_fwhm_time_ps: float,
    pm: PhasematchParams | None = None,
    grids: tuple[FreqGrid, FreqGrid] | None = None,
) -> JointSpectralAmplitude:
    """Construct the normalized joint spectral amplitude.

    f(nu_s, nu_i) = alpha(nu_s + nu_i) * sinc((nu_s + a * nu_i) / scale)
    with a transform-limited gaussian pump envelope alpha.  Grids that cut
    into the pump ridge or that leave less than 6x a marginal FWHM of span
    are rejected.
    """
    pm = pm or PhasematchParams()
    if grids is None:
        grids = default_jsa_grids(pump_fwhm_time_ps, pm)
    sgrid, igrid = grids
    w_pump = pump_spectral_fwhm_ghz(pump_fwhm_time_ps)
    nu_s = sgrid.frequencies
    nu_i = igrid.frequencies
    total = nu_s[:, None] + nu_i[None, :]
    pump = np.exp(-2.0 * np.log(2.0) * (total / w_pump) ** 2)
    vals = pump * np.sinc((nu_s[:, None] + pm.asymmetry * nu_i[None, :]) / pm.sinc_scale_ghz)
    norm = np.sum(np.abs(vals) ** 2) * sgrid.dnu * igrid.dnu
    if norm <= 0.0:
        raise GridError("grids do not intersect the two-photon amplitude")
    vals = vals.astype(complex) / np.sqrt(norm)

    # pump tail beyond the reachable sum-frequency range
    s_max = max(abs(nu_s[0]), abs(nu_s[-1])) + max(abs(nu_i[0]), abs(nu_i[-1]))
    sigma = w_pump / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    clipped = erfc(s_max / (sigma * 2.0))  # intensity-weighted two-sided tail
    if clipped > 1e-4:
        raise GridError("grids clip the pump envelope; widen the frequency span")

    jsa = JointSpectralAmplitude(sgrid, igrid, vals, pump_fwhm_time_ps, pm)
    for arm, grid in (("signal", sgrid), ("idler", igrid)):
        fwhm = marginal_spectrum(jsa, arm).fwhm_ghz
        if grid.span < 6.0 * fwhm:
            raise GridError(f"{arm} grid span {grid.span:.0f} GHz is below 6x "
                            f"the marginal FWHM {fwhm:.0f} GHz")
    return jsa


def marginal_spectrum(jsa: JointSpectralAmplitude, arm: str) -> MarginalSpectrum:
    """Unit-area intensity spectrum of one arm, partner traced out."""
    if arm not in ("signal", "idler"):
        raise ValidationError(f"arm must be 'signal' or 'idler', got {arm!r}")
    inten = jsa.intensity()
    if arm == "signal":
        grid = jsa.signal_grid
        spec = np.sum(inten, axis=1) * jsa.idler_grid.dnu
    else:
        grid = jsa.idler_grid
        spec = np.sum(inten, axis=0) * jsa.signal_grid.dnu
    area = np.sum(spec) * grid.dnu
    spec = spec / area
    return MarginalSpectrum(grid.frequencies, spec,
                            _half_max_width(grid.frequencies, spec), arm)


def _filter_weights(
    jsa: JointSpectralAmplitude,
    signal_filter: SpectralFilter | None,
    idler_filter: SpectralFilter | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Signal amplitude transfer and idler power transmission on the grids."""
    if signal_filter is not None:
        amp_s = signal_filter.amplitude_transfer(
            jsa.signal_grid.frequencies, cell_ghz=jsa.signal_grid.dnu)
    else:
        amp_s = np.ones(jsa.signal_grid.n, dtype=complex)
    if idler_filter is not None:
        amp_i = idler_filter.amplitude_transfer(
            jsa.idler_grid.frequencies, cell_ghz=jsa.idler_grid.dnu)
        pow_i = np.abs(amp_i) ** 2
    else:
        pow_i = np.ones(jsa.idler_grid.n)
    return amp_s, pow_i


def heralded_signal_state(
    jsa: JointSpectralAmplitude,
    signal_filter: SpectralFilter | None = None,
    idler_filter: SpectralFilter | None = None,
    baseline_efficiency: float = 0.092,
    path_transmission: float = 1.0,
    time_grid: TimeGrid | None = None,
) -> tuple[TwoTimeCoherence, float]:
    """Reduced signal state given an idler herald, and the heralding efficiency.

    The efficiency is baseline_efficiency (the unfiltered optical/geometric
    collection probability) times the spectral fraction of heralded signal
    photons passing the filter, times path_transmission (extra insertion
    throughput of the filtering setup, calibrated per configuration).
    """
    if not 0.0 < baseline_efficiency <= 1.0:
        raise ValidationError("baseline_efficiency must be in (0, 1]")
    if path_transmission <= 0.0:
        raise ValidationError("path_transmission must be positive")
    amp_s, pow_i = _filter_weights(jsa, signal_filter, idler_filter)
    inten = jsa.intensity()
    dnu_s = jsa.signal_grid.dnu
    dnu_i = jsa.idler_grid.dnu

    herald_mass = float(np.sum(pow_i[None, :] * inten)) * dnu_s * dnu_i
    pow_s = np.abs(amp_s) ** 2
    kept_mass = float(np.sum(pow_s[:, None] * pow_i[None, :] * inten)) * dnu_s * dnu_i
    if herald_mass <= 0.0:
        raise FilterRejectionError("idler filter removes every herald")
    fraction = kept_mass / herald_mass
    efficiency = baseline_efficiency * fraction * path_transmission
    if efficiency < 1e-9:
        raise FilterRejectionError("heralding efficiency underflow; filter too narrow")

    # rho(nu, nu') of the kept signal photon, restricted to the filter support
    keep = np.flatnonzero(pow_s > 1e-18 * pow_s.max())
    nu_kept = jsa.signal_grid.frequencies[keep]
    g = amp_s[keep, None] * jsa.values[keep]
    rho = (g * pow_i[None, :]) @ g.conj().T * dnu_i
    spectrum = np.real(np.diag(rho))
    grid = time_grid or _heralded_time_grid(nu_kept, spectrum, dnu_s)
    phase = np.exp(-2j * np.pi * GHZ_TO_CYC_PER_PS
                   * np.outer(grid.times, nu_kept)) * dnu_s
    kernel = phase @ rho @ phase.conj().T
    return TwoTimeCoherence(grid, kernel, normalize=True), efficiency


def _heralded_time_grid(nu: np.ndarray, spectrum: np.ndarray, dnu: float) -> TimeGrid:
    peak = float(spectrum.max())
    if peak <= 0.0:
        raise FilterRejectionError("filtered spectrum is empty")
    occupied = np.flatnonzero(spectrum >= 1e-9 * peak)
    nu_max = max(abs(nu[occupied[0]]), abs(nu[occupied[-1]]))
    dt_target = min(2.0, 0.25 / (nu_max * GHZ_TO_CYC_PER_PS))
    # Sampling the spectrum at spacing dnu makes the time kernel periodic
    # with period 1/dnu.  A grid covering exactly one period turns the
    # frequency-to-time map into a unitary DFT, so trace and purity carry
    # over from the spectral state instead of depending on where slow
    # pulse tails get truncated.
    n = int(np.ceil(1.0 / (dnu * GHZ_TO_CYC_PER_PS * dt_target)))
    n += n % 2
    if n > 4000:
        raise GridError("heralded state needs too fine a time grid; "
                        "narrow the frequency grid or pass time_grid")
    dt = 1.0 / (dnu * GHZ_TO_CYC_PER_PS * n)
    return TimeGrid(t0=-0.5 * n * dt, dt=dt, n=n)


def schmidt_purity(
    jsa: JointSpectralAmplitude,
    signal_filter: SpectralFilter | None = None,
    idler_filter: SpectralFilter | None = None,
) -> float:
    """Tr(rho^2) of the filtered reduced signal state from singular values."""
    amp_s, pow_i = _filter_weights(jsa, signal_filter, idler_filter)
    m = amp_s[:, None] * jsa.values * np.sqrt(pow_i)[None, :]
    sv = np.linalg.svd(m, compute_uv=False)
    s2 = sv ** 2
    total = float(np.sum(s2))
    if total <= 0.0:
        raise FilterRejectionError("filters remove the entire amplitude")
    return float(np.sum(s2 ** 2) / total ** 2)
