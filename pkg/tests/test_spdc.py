"""Tests for the joint spectral amplitude, marginals and heralded states.

Frozen numbers are grid-converged evaluations of the shipped default
configuration; analytic cases (separable amplitudes, the CW pump limit,
gaussian marginals) have closed-form expectations.
"""

import numpy as np
import pytest

from homsim.coherence import SpectralFilter, purity
from homsim.errors import FilterRejectionError, GridError, ValidationError
from homsim.grids import FreqGrid
from homsim.spdc import (
    JointSpectralAmplitude,
    PhasematchParams,
    build_jsa,
    default_jsa_grids,
    heralded_signal_state,
    marginal_spectrum,
    pump_spectral_fwhm_ghz,
    schmidt_purity,
)

SLIT = SpectralFilter("rect-slit", 8.7703, edge_resolution_ghz=2.3122)


@pytest.fixture(scope="module")
def jsa10():
    return build_jsa(10.0)


def _separable_jsa(width_ghz=80.0, pump_ps=10.0):
    pm = PhasematchParams()
    grid, _ = default_jsa_grids(pump_ps, pm)
    amp = np.exp(-(grid.frequencies / width_ghz) ** 2).astype(complex)
    vals = np.outer(amp, amp)
    vals /= np.sqrt(np.sum(np.abs(vals) ** 2) * grid.dnu ** 2)
    return JointSpectralAmplitude(grid, grid, vals, pump_ps, pm)


# ----------------------------------------------------------------------
# construction
# ----------------------------------------------------------------------

def test_pump_spectral_width():
    # transform-limited gaussian: FWHM product is 2 ln2 / pi
    assert pump_spectral_fwhm_ghz(10.0) == pytest.approx(44.127, rel=1e-4)
    with pytest.raises(ValidationError):
        pump_spectral_fwhm_ghz(0.0)


def test_jsa_is_normalized(jsa10):
    norm = np.sum(jsa10.intensity()) * jsa10.signal_grid.dnu * jsa10.idler_grid.dnu
    assert norm == pytest.approx(1.0, abs=1e-9)


def test_jsa_is_anticorrelated(jsa10):
    p = jsa10.intensity()
    p = p / p.sum()
    nu_s = jsa10.signal_grid.frequencies
    nu_i = jsa10.idler_grid.frequencies
    es = np.sum(p * nu_s[:, None])
    ei = np.sum(p * nu_i[None, :])
    cov = np.sum(p * (nu_s[:, None] - es) * (nu_i[None, :] - ei))
    var_s = np.sum(p * (nu_s[:, None] - es) ** 2)
    var_i = np.sum(p * (nu_i[None, :] - ei) ** 2)
    assert cov / np.sqrt(var_s * var_i) < -0.9


def test_cw_limit_collapses_to_energy_conservation():
    jsa = build_jsa(1.0e5)
    nu = jsa.signal_grid.frequencies
    off = np.abs(nu[:, None] + nu[None, :]) > 3.0 * jsa.signal_grid.dnu
    assert float(np.sum(jsa.intensity()[off])) < 1e-12


def test_build_rejects_clipping_grids():
    grid = FreqGrid(nu0=-50.0, dnu=1.0, n=100)
    with pytest.raises(GridError):
        build_jsa(10.0, grids=(grid, grid))


def test_phasematch_validation():
    with pytest.raises(ValidationError):
        PhasematchParams(pm_bandwidth_ghz=-1.0)
    with pytest.raises(ValidationError):
        PhasematchParams(asymmetry=0.0)
    with pytest.raises(ValidationError):
        PhasematchParams(signal_center_nm=925.0)


def test_jsa_type_validation():
    pm = PhasematchParams()
    grid, _ = default_jsa_grids(10.0, pm)
    bad = np.ones((3, 3), dtype=complex)
    with pytest.raises(ValidationError):
        JointSpectralAmplitude(grid, grid, bad, 10.0, pm)
    flat = np.ones((grid.n, grid.n), dtype=complex)
    with pytest.raises(ValidationError):
        JointSpectralAmplitude(grid, grid, flat, 10.0, pm)


# ----------------------------------------------------------------------
# marginal spectra
# ----------------------------------------------------------------------

def test_idler_marginal_is_wider(jsa10):
    sig = marginal_spectrum(jsa10, "signal")
    idl = marginal_spectrum(jsa10, "idler")
    assert sig.fwhm_ghz == pytest.approx(116.47, rel=1e-3)
    assert idl.fwhm_ghz == pytest.approx(143.23, rel=1e-3)
    assert idl.fwhm_ghz > sig.fwhm_ghz


def test_marginals_integrate_to_one(jsa10):
    for arm in ("signal", "idler"):
        m = marginal_spectrum(jsa10, arm)
        assert np.sum(m.intensity) * jsa10.signal_grid.dnu == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ValidationError):
        marginal_spectrum(jsa10, "pump")


def test_symmetric_phasematch_gives_equal_marginals():
    # as asymmetry -> 1 the amplitude becomes exchange symmetric and the
    # two marginals converge
    jsa = build_jsa(10.0, PhasematchParams(asymmetry=0.999))
    sig = marginal_spectrum(jsa, "signal")
    idl = marginal_spectrum(jsa, "idler")
    assert idl.fwhm_ghz == pytest.approx(sig.fwhm_ghz, rel=0.01)


def test_separable_gaussian_marginal_width():
    # amplitude exp(-(nu/w)^2) per arm -> intensity FWHM w*sqrt(2 ln 2)
    jsa = _separable_jsa(width_ghz=80.0)
    m = marginal_spectrum(jsa, "signal")
    assert m.fwhm_ghz == pytest.approx(80.0 * np.sqrt(2.0 * np.log(2.0)), rel=1e-2)


def test_marginal_invariant_under_trace_order(jsa10):
    direct = marginal_spectrum(jsa10, "signal")
    swapped = JointSpectralAmplitude(
        jsa10.idler_grid, jsa10.signal_grid, jsa10.values.T.copy(),
        jsa10.pump_fwhm_time, jsa10.phasematch)
    via_transpose = marginal_spectrum(swapped, "idler")
    assert np.allclose(direct.intensity, via_transpose.intensity, rtol=1e-12)
    assert direct.fwhm_ghz == pytest.approx(via_transpose.fwhm_ghz, rel=1e-12)


# ----------------------------------------------------------------------
# purity and heralded states
# ----------------------------------------------------------------------

def test_schmidt_purity_frozen(jsa10):
    assert schmidt_purity(jsa10) == pytest.approx(0.218919, abs=1e-4)
    assert schmidt_purity(jsa10, signal_filter=SLIT) == pytest.approx(0.985142, abs=1e-4)


def test_separable_amplitude_is_pure():
    assert schmidt_purity(_separable_jsa()) == pytest.approx(1.0, abs=1e-9)


def test_heralded_state_matches_schmidt_purity(jsa10):
    for filt in (None, SLIT):
        state, _ = heralded_signal_state(jsa10, signal_filter=filt)
        assert purity(state) == pytest.approx(
            schmidt_purity(jsa10, signal_filter=filt), abs=1e-4)


def test_heralded_state_is_physical(jsa10):
    state, _ = heralded_signal_state(jsa10, signal_filter=SLIT)
    assert state.trace == pytest.approx(1.0, rel=1e-9)
    assert state.hermiticity_defect() < 1e-12
    assert state.min_eigenvalue_ratio() > -1e-8


def test_unfiltered_efficiency_is_baseline(jsa10):
    _, eff = heralded_signal_state(jsa10)
    assert eff == pytest.approx(0.092, rel=1e-12)


def test_slit_spectral_fraction_frozen(jsa10):
    _, eff = heralded_signal_state(jsa10, signal_filter=SLIT)
    assert eff / 0.092 == pytest.approx(0.057668, abs=2e-4)


def test_narrower_filter_purer_but_dimmer(jsa10):
    prev_purity, prev_eff = 0.0, np.inf
    for fwhm in (60.0, 30.0, 15.0, 7.7, 4.0):
        filt = SpectralFilter("rect-slit", fwhm)
        state, eff = heralded_signal_state(jsa10, signal_filter=filt)
        p = purity(state)
        assert p > prev_purity
        assert eff < prev_eff
        prev_purity, prev_eff = p, eff


def test_efficiency_underflow_is_signaled(jsa10):
    gone = SpectralFilter("rect-slit", 1.0, center_detuning_ghz=5.0e4)
    with pytest.raises(FilterRejectionError):
        heralded_signal_state(jsa10, signal_filter=gone)


def test_idler_filter_conditions_the_herald(jsa10):
    # heralding through a narrowed idler keeps only matching signal photons,
    # so the conditional state purifies
    idler_filt = SpectralFilter("rect-slit", 10.0)
    state, eff = heralded_signal_state(jsa10, idler_filter=idler_filt)
    assert purity(state) > schmidt_purity(jsa10)
    assert eff == pytest.approx(0.092, rel=1e-12)  # fraction is conditioned on the herald


def test_csv_exports(tmp_path, jsa10):
    jpath = tmp_path / "jsa.csv"
    jsa10.to_csv(jpath, stride=16)
    rows = np.loadtxt(jpath, delimiter=",", skiprows=1)
    n = jsa10.signal_grid.n // 16 + (1 if jsa10.signal_grid.n % 16 else 0)
    assert rows.shape == (n * n, 3)
    assert rows[:, 2].min() >= 0.0
    mpath = tmp_path / "marg.csv"
    marginal_spectrum(jsa10, "signal").to_csv(mpath)
    marg = np.loadtxt(mpath, delimiter=",", skiprows=1)
    assert marg.shape == (jsa10.signal_grid.n, 2)
