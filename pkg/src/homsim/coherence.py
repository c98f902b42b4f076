"""Single-photon states as temporal amplitudes and two-time coherence kernels.

A pure wavepacket is a complex amplitude psi(t) with unit L2 norm.  A mixed
single-photon state is the first-order coherence kernel

    G(t, t') = <a_dag(t') a(t)>  /  (mean photon number)

sampled on a uniform time grid.  G is Hermitian, positive semidefinite and
trace normalized: sum_i G(t_i, t_i) * dt = 1.  Purity is Tr(G^2) * dt^2 and
equals 1 exactly for a pure wavepacket.

The emitter model used throughout is a two-level radiative cascade with
lifetime T1 and total coherence time T2 (1/T2 = 1/(2*T1) + gamma_dephasing):

    G(t, t') = (1/T1) * exp(-(t + t')/(2*T1)) * exp(-gamma_d * |t - t'|)

for t, t' >= 0, with gamma_d = 1/T2 - 1/(2*T1).  Its purity is T2/(2*T1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import FilterRejectionError, GridError, ValidationError
from .fourier import conjugate_freq_grid, freq_to_time, time_to_freq
from .grids import GHZ_TO_CYC_PER_PS, TimeGrid, centered_time_grid

# Intensity FWHM time-bandwidth products for transform-limited pulses.
GAUSSIAN_TBP = 2.0 * np.log(2.0) / np.pi       # 0.4413, gaussian spectrum
RECT_TBP = 0.8858929                            # sinc^2 FWHM for a rect spectrum
LORENTZIAN_TBP = np.log(2.0) / np.pi            # two-sided exponential pulse

FILTER_SHAPES = ("rect-slit", "lorentzian-cavity", "gaussian-grating")
_SHAPE_ALIASES = {
    "rect": "rect-slit",
    "slit": "rect-slit",
    "lorentzian": "lorentzian-cavity",
    "cavity": "lorentzian-cavity",
    "gaussian": "gaussian-grating",
    "grating": "gaussian-grating",
}


def _rect_coverage(x: np.ndarray, fwhm: float, cell: float) -> np.ndarray:
    """Fraction of each frequency cell inside the band |x| <= fwhm/2."""
    if cell <= 0:
        return (np.abs(x) <= 0.5 * fwhm).astype(float)
    return np.clip((0.5 * fwhm - np.abs(x) + 0.5 * cell) / cell, 0.0, 1.0)


def canonical_shape(shape: str) -> str:
    s = shape.strip().lower()
    s = _SHAPE_ALIASES.get(s, s)
    if s not in FILTER_SHAPES:
        raise ValidationError(f"unknown filter shape {shape!r}; expected one of {FILTER_SHAPES}")
    return s


@dataclass(frozen=True)
class SpectralFilter:
    """Passive spectral filter.

    fwhm is the FWHM of the intensity transmission |H(nu)|^2 in GHz;
    center_detuning shifts the passband relative to the photon's carrier.

    edge_resolution_ghz (rect-slit only) smears the slit edges with a
    gaussian optical response of that FWHM, as for a slit in the Fourier
    plane of a grating stretcher with a finite spot size.  With nonzero
    smearing, fwhm_ghz is the geometric slit width; the half-power width
    of |H|^2 comes out somewhat smaller.
    """

    shape: str
    fwhm_ghz: float
    center_detuning_ghz: float = 0.0
    edge_resolution_ghz: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "shape", canonical_shape(self.shape))
        if self.fwhm_ghz <= 0:
            raise ValidationError(f"filter fwhm must be positive, got {self.fwhm_ghz}")
        if self.edge_resolution_ghz < 0:
            raise ValidationError("edge_resolution_ghz must be >= 0")
        if self.edge_resolution_ghz > 0 and self.shape != "rect-slit":
            raise ValidationError("edge smearing only applies to rect-slit filters")

    def _slit_profile(self, x: np.ndarray, cell_ghz: float) -> np.ndarray:
        f = self.fwhm_ghz
        res = self.edge_resolution_ghz
        if res == 0.0:
            return _rect_coverage(x, f, cell_ghz)
        s = res / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        return 0.5 * (erf((x + 0.5 * f) / (s * np.sqrt(2.0)))
                      - erf((x - 0.5 * f) / (s * np.sqrt(2.0))))

    def amplitude_transfer(self, nu_ghz: np.ndarray, cell_ghz: float = 0.0) -> np.ndarray:
        """Amplitude transfer H(nu).

        rect-slit and gaussian-grating are real (zero phase).  The
        lorentzian-cavity transfer 1/(1 - 2i(nu-c)/f) carries the causal
        cavity phase; its impulse response is a one-sided exponential with
        amplitude decay time 1/(pi*f).

        cell_ghz, when given, is the width of the frequency cell each sample
        represents; rect band edges then get sqrt(coverage) weights so that
        transmitted power is grid-phase independent.
        """
        x = np.asarray(nu_ghz, dtype=float) - self.center_detuning_ghz
        f = self.fwhm_ghz
        if self.shape == "rect-slit":
            if self.edge_resolution_ghz > 0.0:
                return self._slit_profile(x, cell_ghz).astype(complex)
            return np.sqrt(_rect_coverage(x, f, cell_ghz)).astype(complex)
        if self.shape == "gaussian-grating":
            return np.exp(-2.0 * np.log(2.0) * (x / f) ** 2).astype(complex)
        return 1.0 / (1.0 - 2j * x / f)

    def flat_phase_profile(self, nu_ghz: np.ndarray, cell_ghz: float = 0.0) -> np.ndarray:
        """Real spectral profile used for the transform-limited pulse the
        filter carves out of a broadband input.

        For rect and gaussian this is the (already real) amplitude transfer.
        For the lorentzian shape the conventional flat-phase partner of a
        Lorentzian line is used, the Lorentzian function itself, whose
        Fourier transform is the two-sided exponential exp(-pi*f*|t|); the
        square root of the transfer magnitude would transform to a pulse
        with a log-divergent peak and no usable FWHM.
        """
        x = np.asarray(nu_ghz, dtype=float) - self.center_detuning_ghz
        f = self.fwhm_ghz
        if self.shape == "rect-slit":
            # Linear edge coverage: cell-averaged amplitude, so the inverse
            # transform reproduces the continuous sinc pulse.
            return self._slit_profile(x, cell_ghz)
        if self.shape == "gaussian-grating":
            return np.exp(-2.0 * np.log(2.0) * (x / f) ** 2)
        return 1.0 / (1.0 + (2.0 * x / f) ** 2)

    def impulse_width_ps(self) -> float:
        """Characteristic duration of the impulse response, for grid sizing."""
        f = self.fwhm_ghz
        if self.shape == "rect-slit":
            return RECT_TBP / (f * GHZ_TO_CYC_PER_PS)
        if self.shape == "gaussian-grating":
            return GAUSSIAN_TBP / (f * GHZ_TO_CYC_PER_PS)
        return 1.0 / (np.pi * f * GHZ_TO_CYC_PER_PS)


@dataclass
class TemporalAmplitude:
    """Pure-state wavepacket psi(t) on a uniform grid, unit L2 norm."""

    grid: TimeGrid
    samples: np.ndarray
    normalize: bool = True

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != (self.grid.n,):
            raise ValidationError("sample count does not match grid")
        if self.normalize:
            n2 = self.norm_squared
            if n2 <= 0:
                raise ValidationError("cannot normalize a null wavepacket")
            self.samples = self.samples / np.sqrt(n2)

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def shifted(self, delay_ps: float) -> "TemporalAmplitude":
        """Delay by a whole number of grid cells (nearest to delay_ps)."""
        k = self.grid.shift_index(delay_ps)
        out = np.zeros_like(self.samples)
        if k >= 0:
            out[k:] = self.samples[: self.grid.n - k]
        else:
            out[:k] = self.samples[-k:]
        return TemporalAmplitude(self.grid, out, normalize=False)

    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """(frequencies_ghz, spectral amplitude) on the conjugate grid."""
        fgrid = conjugate_freq_grid(self.grid)
        return fgrid.frequencies, time_to_freq(self.samples, self.grid)


@dataclass
class TwoTimeCoherence:
    """Mixed single-photon state G(t, t') on a uniform grid."""

    grid: TimeGrid
    values: np.ndarray
    normalize: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        n = self.grid.n
        if self.values.shape != (n, n):
            raise ValidationError("kernel shape does not match grid")
        if self.normalize:
            tr = self.trace
            if tr <= 0:
                raise ValidationError("cannot normalize a traceless kernel")
            self.values = self.values / tr

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.values)) * self.grid.dt)

    @property
    def diagonal_intensity(self) -> np.ndarray:
        return np.real(np.diag(self.values))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))

    def min_eigenvalue_ratio(self, max_dim: int = 512) -> float:
        """min(eig)/max(eig) on a principal submatrix (PSD check helper)."""
        step = max(1, self.grid.n // max_dim)
        sub = self.values[::step, ::step]
        w = np.linalg.eigvalsh(0.5 * (sub + sub.conj().T))
        return float(w[0] / max(w[-1], 1e-300))


def pure_state_coherence(psi: TemporalAmplitude) -> TwoTimeCoherence:
    """Rank-one kernel |psi><psi|."""
    return TwoTimeCoherence(psi.grid, np.outer(psi.samples, np.conj(psi.samples)),
                            normalize=False)


def mixture(states: list[TwoTimeCoherence], weights: list[float]) -> TwoTimeCoherence:
    if len(states) != len(weights) or not states:
        raise ValidationError("need matching, non-empty states and weights")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValidationError("mixture weights must be non-negative")
    w = w / w.sum()
    vals = sum(wi * s.values for wi, s in zip(w, states))
    return TwoTimeCoherence(states[0].grid, vals, normalize=True)


def purity(state: TwoTimeCoherence) -> float:
    """Tr(G^2) * dt^2; 1 for pure states, T2/(2*T1) for the emitter model."""
    return float(np.sum(np.abs(state.values) ** 2) * state.grid.dt**2)


def default_emitter_grid(t1_ps: float, dt: float = 2.0) -> TimeGrid:
    """Causal grid reaching 16*T1 with a small negative lead."""
    n = int(np.ceil(16.0 * t1_ps / dt))
    n += n % 2
    return TimeGrid(t0=-8 * dt, dt=dt, n=n + 8)


def qd_coherence(t1_ps: float, t2_ps: float, grid: TimeGrid | None = None) -> TwoTimeCoherence:
    """Coherence kernel of a dephased two-level emitter.

    t1_ps is the radiative lifetime, t2_ps the coherence time with
    0 < T2 <= 2*T1 (T2 = 2*T1 is the radiative limit).  The grid must cover
    [0, 8*T1]; by default a 16*T1 span at 2 ps resolution is used.
    """
    if not (0 < t2_ps <= 2.0 * t1_ps):
        raise ValidationError(f"need 0 < T2 <= 2*T1, got T1={t1_ps}, T2={t2_ps}")
    if grid is None:
        grid = default_emitter_grid(t1_ps)
    t = grid.times
    if grid.t0 > 0 or t[-1] < 8.0 * t1_ps:
        raise GridError("grid must cover [0, 8*T1] for the emitter kernel")
    gamma_d = 1.0 / t2_ps - 0.5 / t1_ps  # pure dephasing rate (1/ps)
    causal = (t >= 0).astype(float)
    envelope = causal * np.exp(-np.maximum(t, 0.0) / (2.0 * t1_ps))
    vals = (1.0 / t1_ps) * np.outer(envelope, envelope) \
        * np.exp(-gamma_d * np.abs(t[:, None] - t[None, :]))
    return TwoTimeCoherence(grid, vals, normalize=True)


def exponential_wavepacket(grid: TimeGrid, lifetime_ps: float | None = None,
                           linewidth_ghz: float | None = None) -> TemporalAmplitude:
    """Causal one-sided exponential wavepacket.

    Specify either the intensity lifetime T1 (amplitude rate 1/(2*T1)) or
    the Lorentzian FWHM linewidth in GHz (amplitude rate pi * linewidth).
    """
    if (lifetime_ps is None) == (linewidth_ghz is None):
        raise ValidationError("specify exactly one of lifetime_ps, linewidth_ghz")
    if lifetime_ps is not None:
        rate = 0.5 / lifetime_ps
    else:
        rate = np.pi * linewidth_ghz * GHZ_TO_CYC_PER_PS
    t = grid.times
    amp = np.where(t >= 0, np.exp(-rate * np.maximum(t, 0.0)), 0.0)
    return TemporalAmplitude(grid, amp)


def _auto_filter_grid(filt: SpectralFilter, spans: float = 16.0) -> TimeGrid:
    width = filt.impulse_width_ps()
    dt = min(2.0, 0.02 / (filt.fwhm_ghz * GHZ_TO_CYC_PER_PS))
    return centered_time_grid(spans * width, dt)


def filter_amplitude_response(filt: SpectralFilter, grid: TimeGrid | None = None) -> TemporalAmplitude:
    """Impulse response of the filter as a unit-norm wavepacket.

    rect-slit gives a sinc, gaussian-grating a gaussian, lorentzian-cavity a
    causal one-sided exponential.  Requires dt <= 0.05 / fwhm.
    """
    if grid is None:
        grid = _auto_filter_grid(filt)
    if grid.dt > 0.05 / (filt.fwhm_ghz * GHZ_TO_CYC_PER_PS):
        raise GridError("grid.dt too coarse for this filter bandwidth")
    fgrid = conjugate_freq_grid(grid)
    h = filt.amplitude_transfer(fgrid.frequencies, cell_ghz=fgrid.dnu)
    samples = freq_to_time(h, fgrid, tgrid=grid)
    return TemporalAmplitude(grid, samples)


def transform_limited_pulse(filt: SpectralFilter, grid: TimeGrid | None = None) -> TemporalAmplitude:
    """Flat-phase pulse with the filter's spectral profile (see
    SpectralFilter.flat_phase_profile for the lorentzian convention)."""
    if grid is None:
        grid = _auto_filter_grid(filt)
    if grid.dt > 0.05 / (filt.fwhm_ghz * GHZ_TO_CYC_PER_PS):
        raise GridError("grid.dt too coarse for this filter bandwidth")
    fgrid = conjugate_freq_grid(grid)
    prof = filt.flat_phase_profile(fgrid.frequencies, cell_ghz=fgrid.dnu).astype(complex)
    samples = freq_to_time(prof, fgrid, tgrid=grid)
    return TemporalAmplitude(grid, samples)


def intensity_fwhm(psi: TemporalAmplitude) -> float:
    """FWHM of |psi(t)|^2, half-maximum crossings by linear interpolation."""
    return _fwhm(psi.grid.times, psi.intensity)


def _fwhm(x: np.ndarray, y: np.ndarray) -> float:
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    left = np.nonzero(y[: i + 1] < half)[0]
    right = np.nonzero(y[i:] < half)[0]
    if left.size == 0 or right.size == 0:
        raise ValidationError("half maximum not bracketed on the grid")
    l0 = left[-1]
    x_l = np.interp(half, [y[l0], y[l0 + 1]], [x[l0], x[l0 + 1]])
    r0 = i + right[0]
    x_r = np.interp(half, [y[r0], y[r0 - 1]], [x[r0], x[r0 - 1]])
    return float(x_r - x_l)


def transform_limit(fwhm_ghz: float, shape: str) -> float:
    """Intensity-FWHM duration (ps) of the transform-limited pulse whose
    spectrum has the given shape and FWHM.

    Measured numerically from the synthesized pulse; the analytic products
    are 0.441 (gaussian), 0.886 (rect/sinc) and ln(2)/pi (lorentzian /
    two-sided exponential) in (bandwidth * duration) units.
    """
    filt = SpectralFilter(shape, fwhm_ghz)
    return intensity_fwhm(transform_limited_pulse(filt))


def apply_filter(state, filt: SpectralFilter):
    """Pass a state through a spectral filter.

    Returns (filtered_state, transmitted_fraction).  The filtered state is
    renormalized; the fraction is the transmitted probability (trace or L2
    norm ratio).  Raises FilterRejectionError when everything is rejected.
    """
    if isinstance(state, TemporalAmplitude):
        fgrid = conjugate_freq_grid(state.grid)
        spec = time_to_freq(state.samples, state.grid)
        h = filt.amplitude_transfer(fgrid.frequencies, cell_ghz=fgrid.dnu)
        before = np.sum(np.abs(spec) ** 2)
        out = spec * h
        after = np.sum(np.abs(out) ** 2)
        fraction = float(after / before)
        if fraction < 1e-12:
            raise FilterRejectionError("filter rejected the whole wavepacket")
        samples = freq_to_time(out, fgrid, tgrid=state.grid)
        return TemporalAmplitude(state.grid, samples), fraction
    if isinstance(state, TwoTimeCoherence):
        tgrid = state.grid
        fgrid = conjugate_freq_grid(tgrid)
        ket = time_to_freq(state.values, tgrid, axis=0)
        mat = np.conj(time_to_freq(np.conj(ket), tgrid, axis=1))
        h = filt.amplitude_transfer(fgrid.frequencies, cell_ghz=fgrid.dnu)
        before = np.real(np.trace(mat))
        mat *= np.outer(h, np.conj(h))
        after = np.real(np.trace(mat))
        fraction = float(after / before)
        if fraction < 1e-12:
            raise FilterRejectionError("filter rejected the whole state")
        ket_t = freq_to_time(mat, fgrid, axis=0, tgrid=tgrid)
        vals = np.conj(freq_to_time(np.conj(ket_t), fgrid, axis=1, tgrid=tgrid))
        vals = 0.5 * (vals + vals.conj().T)
        return TwoTimeCoherence(tgrid, vals, normalize=True), fraction
    raise ValidationError(f"cannot filter object of type {type(state).__name__}")


def coherence_to_csv(state: TwoTimeCoherence, path) -> None:
    """Dump G(t, t') as CSV rows (t_ps, tprime_ps, re, im)."""
    t = state.grid.times
    ti, tj = np.meshgrid(t, t, indexing="ij")
    flat = np.column_stack([
        ti.ravel(), tj.ravel(),
        np.real(state.values).ravel(), np.imag(state.values).ravel(),
    ])
    np.savetxt(path, flat, delimiter=",", header="t_ps,tprime_ps,re,im", comments="")
