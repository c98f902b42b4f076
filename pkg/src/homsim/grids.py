"""Uniform sampling grids for temporal and spectral amplitudes.

Time is measured in picoseconds and frequency in gigahertz throughout the
package; the conversion constant between the two appears here once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError

# 1 / (1 ps) = 1000 GHz, so a frequency f in GHz is f * GHZ_TO_CYC_PER_PS
# cycles per picosecond.
GHZ_TO_CYC_PER_PS = 1.0e-3


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with midpoint sampling.

    Sample k sits at t0 + (k + 1/2) * dt.  Midpoint sampling keeps Riemann
    sums of decaying exponentials accurate to O(dt^2) and avoids giving the
    t = 0 edge of a causal wavepacket half weight.
    """

    t0: float  # left edge of the first cell (ps)
    dt: float  # cell width (ps)
    n: int

    def __post_init__(self):
        if self.dt <= 0 or self.n < 2:
            raise GridError(f"need dt > 0 and n >= 2, got dt={self.dt}, n={self.n}")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n) + 0.5) * self.dt

    @property
    def span(self) -> float:
        return self.n * self.dt

    @property
    def frequencies_ghz(self) -> np.ndarray:
        """FFT-conjugate frequency samples in GHz, monotone increasing."""
        return np.fft.fftshift(np.fft.fftfreq(self.n, d=self.dt)) / GHZ_TO_CYC_PER_PS

    def shift_index(self, delay: float) -> int:
        """Nearest whole-cell shift for a delay in ps."""
        return int(round(delay / self.dt))


@dataclass(frozen=True)
class FreqGrid:
    """Uniform frequency grid (GHz), midpoint sampled like TimeGrid."""

    nu0: float  # left edge (GHz), usually negative (detuning from band center)
    dnu: float  # step (GHz)
    n: int

    def __post_init__(self):
        if self.dnu <= 0 or self.n < 2:
            raise GridError(f"need dnu > 0 and n >= 2, got dnu={self.dnu}, n={self.n}")

    @property
    def frequencies(self) -> np.ndarray:
        return self.nu0 + (np.arange(self.n) + 0.5) * self.dnu

    @property
    def span(self) -> float:
        return self.n * self.dnu


def centered_time_grid(half_span: float, dt: float) -> TimeGrid:
    """Grid symmetric about t = 0 covering [-half_span, +half_span]."""
    n = int(np.ceil(2.0 * half_span / dt))
    n += n % 2  # keep n even so frequencies pair up symmetrically
    return TimeGrid(t0=-0.5 * n * dt, dt=dt, n=n)


def causal_time_grid(span: float, dt: float, lead: float = 0.0) -> TimeGrid:
    """Grid covering [-lead, span] for causal wavepackets."""
    n = int(np.ceil((span + lead) / dt))
    n += n % 2
    return TimeGrid(t0=-lead, dt=dt, n=n)


def centered_freq_grid(half_span: float, dnu: float) -> FreqGrid:
    n = int(np.ceil(2.0 * half_span / dnu))
    n += n % 2
    return FreqGrid(nu0=-0.5 * n * dnu, dnu=dnu, n=n)
