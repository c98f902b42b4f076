"""Fourier transforms between time (ps) and frequency (GHz) grids.

Convention (physics sign, analytic signal):

    spectrum(nu) = integral psi(t) exp(+2*pi*i*nu*t) dt
    psi(t)       = integral spectrum(nu) exp(-2*pi*i*nu*t) dnu

so a causal decaying exponential has a Lorentzian spectrum with its pole in
the lower half plane.  Both grids are midpoint sampled with arbitrary
offsets; the offset phases are applied explicitly around an FFT core so the
pair below is an exact mutual inverse on matching grids.
"""

from __future__ import annotations

import numpy as np

from .grids import GHZ_TO_CYC_PER_PS, FreqGrid, TimeGrid


def conjugate_freq_grid(tgrid: TimeGrid) -> FreqGrid:
    """Centered frequency grid (GHz) conjugate to a time grid."""
    dnu_cyc = 1.0 / (tgrid.n * tgrid.dt)
    dnu = dnu_cyc / GHZ_TO_CYC_PER_PS
    return FreqGrid(nu0=-0.5 * tgrid.n * dnu, dnu=dnu, n=tgrid.n)


def conjugate_time_grid(fgrid: FreqGrid) -> TimeGrid:
    """Centered time grid (ps) conjugate to a frequency grid."""
    dnu_cyc = fgrid.dnu * GHZ_TO_CYC_PER_PS
    dt = 1.0 / (fgrid.n * dnu_cyc)
    return TimeGrid(t0=-0.5 * fgrid.n * dt, dt=dt, n=fgrid.n)


def _phases(tgrid: TimeGrid, fgrid: FreqGrid):
    # First midpoints and steps, frequency in cycles/ps.
    ta = tgrid.t0 + 0.5 * tgrid.dt
    nua = (fgrid.nu0 + 0.5 * fgrid.dnu) * GHZ_TO_CYC_PER_PS
    dnu = fgrid.dnu * GHZ_TO_CYC_PER_PS
    j = np.arange(tgrid.n)
    k = np.arange(fgrid.n)
    time_phase = np.exp(2j * np.pi * nua * tgrid.dt * j)
    freq_phase = np.exp(2j * np.pi * dnu * ta * k)
    corner = np.exp(2j * np.pi * nua * ta)
    return time_phase, freq_phase, corner


def time_to_freq(values: np.ndarray, tgrid: TimeGrid, axis: int = -1) -> np.ndarray:
    """Spectrum samples on conjugate_freq_grid(tgrid); exact DFT of the sum
    sum_j values_j exp(+2*pi*i*nu_k*t_j) * dt."""
    if values.shape[axis] != tgrid.n:
        raise ValueError("axis length does not match grid")
    fgrid = conjugate_freq_grid(tgrid)
    time_phase, freq_phase, corner = _phases(tgrid, fgrid)
    shaped = _along(time_phase, values.ndim, axis)
    core = np.fft.ifft(values * shaped, axis=axis) * tgrid.n
    return core * _along(freq_phase, values.ndim, axis) * corner * tgrid.dt


def freq_to_time(
    values: np.ndarray,
    fgrid: FreqGrid,
    axis: int = -1,
    tgrid: TimeGrid | None = None,
) -> np.ndarray:
    """Time samples, by default on conjugate_time_grid(fgrid); exact DFT of
    the sum sum_k values_k exp(-2*pi*i*nu_k*t_j) * dnu (dnu in cycles/ps).

    A target tgrid may be supplied (e.g. to return to the grid a spectrum
    came from); it must satisfy n*dt*dnu = 1 but may carry any offset.
    """
    if values.shape[axis] != fgrid.n:
        raise ValueError("axis length does not match grid")
    if tgrid is None:
        tgrid = conjugate_time_grid(fgrid)
    elif tgrid.n != fgrid.n or not np.isclose(
        tgrid.dt * fgrid.dnu * GHZ_TO_CYC_PER_PS * fgrid.n, 1.0, rtol=1e-9
    ):
        raise ValueError("target time grid is not conjugate to the frequency grid")
    time_phase, freq_phase, corner = _phases(tgrid, fgrid)
    dnu_cyc = fgrid.dnu * GHZ_TO_CYC_PER_PS
    shaped = _along(np.conj(freq_phase), values.ndim, axis)
    core = np.fft.fft(values * shaped, axis=axis)
    return core * _along(np.conj(time_phase), values.ndim, axis) * np.conj(corner) * dnu_cyc


def _along(vec: np.ndarray, ndim: int, axis: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = vec.size
    return vec.reshape(shape)
