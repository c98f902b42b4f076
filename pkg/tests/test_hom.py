"""Tests for beamsplitter coincidence densities and coalescence bounds.

Overlap values come from closed-form exponential integrals or from an
independent eigen-decomposition oracle; the delay-optimized filter bounds
are pinned at the resolution of their default grids.
"""

import numpy as np
import pytest

from homsim.coherence import (
    SpectralFilter,
    exponential_wavepacket,
    pure_state_coherence,
    purity,
    qd_coherence,
    transform_limited_pulse,
)
from homsim.errors import ValidationError
from homsim.fourier import conjugate_freq_grid
from homsim.grids import causal_time_grid, centered_time_grid
from homsim.hom import (
    coalescence_probability,
    coalescence_vs_delay,
    coincidence_density,
    hom_dip_curve,
    matched_phase_pulse,
    max_theoretical_coalescence,
    optimal_delay_ps,
    smear_with_detector,
)


# ----------------------------------------------------------------------
# coalescence probability against independent oracles
# ----------------------------------------------------------------------

def test_self_coalescence_equals_kernel_purity():
    qd = qd_coherence(328.0, 216.0)
    pc = coalescence_probability(qd, qd)
    assert pc == pytest.approx(purity(qd), rel=1e-9)
    assert pc == pytest.approx(216.0 / 656.0, abs=1e-4)


def test_exponential_overlap_closed_form():
    # |<psi_a|psi_b>|^2 = 4*Ta*Tb/(Ta+Tb)^2 for one-sided exponentials,
    # times exp(-d/Ta) when the Tb photon is delayed by d > 0.
    grid = causal_time_grid(2400.0, 1.0, lead=8)
    psi_a = exponential_wavepacket(grid, lifetime_ps=100.0)
    psi_b = exponential_wavepacket(grid, lifetime_ps=200.0)
    assert coalescence_probability(psi_a, psi_b) == pytest.approx(8.0 / 9.0, rel=1e-4)
    expected = 8.0 / 9.0 * np.exp(-0.5)
    assert coalescence_probability(psi_a, psi_b, delay_ps=50.0) == pytest.approx(expected, rel=1e-4)


def test_eigen_decomposition_oracle():
    grid = causal_time_grid(900.0, 2.0, lead=8)
    ka = qd_coherence(100.0, 80.0, grid=grid)
    kb = qd_coherence(100.0, 140.0, grid=grid)
    dt = grid.dt
    wa, va = np.linalg.eigh(ka.values * dt)
    wb, vb = np.linalg.eigh(kb.values * dt)
    cross = np.abs(va.conj().T @ vb) ** 2
    expected = float(wa @ cross @ wb)
    assert coalescence_probability(ka, kb) == pytest.approx(expected, abs=1e-10)


def test_coalescence_is_symmetric_and_bounded():
    grid = causal_time_grid(900.0, 2.0, lead=8)
    ka = qd_coherence(100.0, 80.0, grid=grid)
    kb = qd_coherence(100.0, 140.0, grid=grid)
    assert coalescence_probability(ka, kb) == pytest.approx(
        coalescence_probability(kb, ka), rel=1e-9)
    bound = np.sqrt(purity(ka) * purity(kb))
    for delay in (0.0, 40.0, 120.0):
        pc = coalescence_probability(ka, kb, delay_ps=delay)
        assert 0.0 <= pc <= bound + 1e-6


# ----------------------------------------------------------------------
# beamsplitter output statistics
# ----------------------------------------------------------------------

def _pulse_pair():
    grid = centered_time_grid(400.0, 1.0)
    a = transform_limited_pulse(SpectralFilter("gaussian-grating", 30.0), grid=grid)
    b = transform_limited_pulse(SpectralFilter("rect-slit", 7.7), grid=grid)
    return a, b


def test_orthogonal_split_total_is_half():
    a, b = _pulse_pair()
    dens = coincidence_density(a, b, polarization="orthogonal")
    assert dens.total() == pytest.approx(0.5, rel=1e-9)


def test_split_and_same_totals_link_to_coalescence():
    a, b = _pulse_pair()
    pc = coalescence_probability(a, b)
    split = coincidence_density(a, b, polarization="parallel", port="split")
    same = coincidence_density(a, b, polarization="parallel", port="same")
    assert split.total() == pytest.approx(0.5 * (1.0 - pc), rel=1e-9)
    assert same.total() == pytest.approx(0.5 * (1.0 + pc), rel=1e-9)
    assert split.total() + same.total() == pytest.approx(1.0, rel=1e-9)


def test_identical_pure_inputs_never_split():
    a, _ = _pulse_pair()
    dens = coincidence_density(a, a, polarization="parallel")
    assert dens.total() == pytest.approx(0.0, abs=1e-6)
    same = coincidence_density(a, a, polarization="parallel", port="same")
    assert same.total() == pytest.approx(1.0, rel=1e-9)


def test_large_delay_restores_distinguishability():
    a, _ = _pulse_pair()
    dens = coincidence_density(a, a, polarization="parallel", delay_ps=200.0)
    assert dens.total() == pytest.approx(0.5, abs=1e-6)


def test_unbalanced_splitter_totals():
    a, _ = _pulse_pair()
    refl, trans = 0.3, 0.7
    split = coincidence_density(a, a, polarization="parallel", reflectivity=refl)
    same = coincidence_density(a, a, polarization="parallel", reflectivity=refl, port="same")
    assert split.total() == pytest.approx((trans - refl) ** 2, abs=1e-6)
    assert same.total() == pytest.approx(4.0 * refl * trans, rel=1e-6)
    ortho = coincidence_density(a, a, polarization="orthogonal", reflectivity=refl)
    assert ortho.total() == pytest.approx(refl ** 2 + trans ** 2, rel=1e-9)


def test_tau_marginal_integrates_to_total():
    grid = causal_time_grid(900.0, 1.0, lead=8)
    qd = qd_coherence(100.0, 80.0, grid=grid)
    pulse = transform_limited_pulse(SpectralFilter("gaussian-grating", 30.0), grid=grid)
    dens = coincidence_density(qd, pulse, polarization="parallel", delay_ps=20.0)
    tau, vals = dens.tau_marginal()
    assert tau.size == 2 * grid.n - 1
    assert np.sum(vals) * grid.dt == pytest.approx(dens.total(), rel=1e-9)
    # self-interference is symmetric in the detection-time difference
    self_dens = coincidence_density(qd, qd, polarization="orthogonal")
    _, sym = self_dens.tau_marginal()
    assert np.allclose(sym, sym[::-1], rtol=1e-9, atol=1e-12)


def test_input_validation():
    a, b = _pulse_pair()
    other = transform_limited_pulse(SpectralFilter("gaussian-grating", 30.0))
    with pytest.raises(ValidationError):
        coincidence_density(a, b, polarization="diagonal")
    with pytest.raises(ValidationError):
        coincidence_density(a, b, port="both")
    with pytest.raises(ValidationError):
        coincidence_density(a, b, reflectivity=0.0)
    with pytest.raises(ValidationError):
        coincidence_density(a, b, reflectivity=1.2)
    with pytest.raises(ValidationError):
        coincidence_density(a, other)
    with pytest.raises(ValidationError):
        coalescence_probability(a, other)
    with pytest.raises(ValidationError):
        coalescence_probability(a, 3.0)


# ----------------------------------------------------------------------
# delay-optimized coalescence bounds
# ----------------------------------------------------------------------

def test_gaussian_filter_bound_frozen():
    filt = SpectralFilter("gaussian-grating", 30.0)
    assert max_theoretical_coalescence(1.2, filt) == pytest.approx(0.198103, abs=2e-4)


def test_lorentzian_filter_bound_frozen():
    filt = SpectralFilter("lorentzian-cavity", 0.9)
    assert max_theoretical_coalescence(1.1, filt) == pytest.approx(0.693982, abs=2e-4)


def test_slit_bound_with_dephasing_frozen():
    filt = SpectralFilter("rect-slit", 8.7703, edge_resolution_ghz=2.3122)
    matched = max_theoretical_coalescence(
        1.2, filt, dephasing=(328.0, 216.0), spectral_phase="matched")
    flat = max_theoretical_coalescence(1.2, filt, dephasing=(328.0, 216.0))
    assert matched == pytest.approx(0.353513, abs=2e-4)
    assert flat == pytest.approx(0.298517, abs=2e-4)
    assert matched > flat
    delay = optimal_delay_ps(1.2, filt, dephasing=(328.0, 216.0), spectral_phase="matched")
    assert 0.0 <= delay <= 40.0


def test_dephasing_free_paths_agree():
    # a (T1, 2*T1) kernel is the pure exponential state; both routes to the
    # bound must coincide
    filt = SpectralFilter("gaussian-grating", 30.0)
    t1 = 1.0 / (2.0 * np.pi * 1.2e-3)
    pure = max_theoretical_coalescence(1.2, filt)
    kernel = max_theoretical_coalescence(1.2, filt, dephasing=(t1, 2.0 * t1))
    assert kernel == pytest.approx(pure, rel=1e-6)


def test_explicit_pulse_override_matches_default():
    filt = SpectralFilter("gaussian-grating", 30.0)
    grid = causal_time_grid(1500.0, 1.0, lead=150)
    pulse = transform_limited_pulse(filt, grid=grid)
    got = max_theoretical_coalescence(1.2, filt, spdc_pulse=pulse)
    assert got == pytest.approx(0.198103, abs=2e-3)


def test_bound_input_validation():
    filt = SpectralFilter("gaussian-grating", 30.0)
    with pytest.raises(ValidationError):
        coalescence_vs_delay(1.2, filt, spectral_phase="weird")
    with pytest.raises(ValidationError):
        coalescence_vs_delay(None, filt)
    with pytest.raises(ValidationError):
        coalescence_vs_delay(None, filt, dephasing=(328.0, 216.0), spectral_phase="matched")


def test_matched_phase_pulse_keeps_filter_spectrum():
    filt = SpectralFilter("rect-slit", 8.7703, edge_resolution_ghz=2.3122)
    grid = causal_time_grid(2000.0, 1.0, lead=400)
    pulse = matched_phase_pulse(filt, 1.2, grid)
    assert pulse.norm_squared == pytest.approx(1.0, rel=1e-9)
    fgrid = conjugate_freq_grid(grid)
    target = np.abs(filt.flat_phase_profile(fgrid.frequencies, cell_ghz=fgrid.dnu))
    _, spec = pulse.spectrum()
    got = np.abs(spec)
    cosine = np.vdot(got, target) / (np.linalg.norm(got) * np.linalg.norm(target))
    assert float(np.real(cosine)) == pytest.approx(1.0, abs=1e-9)


def test_matched_phase_outperforms_flat_for_dephased_emitter():
    # unlike the flat-phase pulse, the matched pulse rides the emitter's own
    # dispersion, so it can only help
    filt = SpectralFilter("rect-slit", 7.7)
    flat = max_theoretical_coalescence(1.2, filt, dephasing=(328.0, 216.0))
    matched = max_theoretical_coalescence(
        1.2, filt, dephasing=(328.0, 216.0), spectral_phase="matched")
    assert matched > flat


# ----------------------------------------------------------------------
# signal-idler dip curves
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def dip_delays():
    return np.linspace(-120.0, 120.0, 97)


def test_dip_visibility_unfiltered_frozen(dip_delays):
    from homsim.spdc import build_jsa
    _, vis = hom_dip_curve(build_jsa(6.0), dip_delays)
    assert vis == pytest.approx(0.3972, abs=1e-3)


def test_dip_visibility_filtered_frozen(dip_delays):
    from homsim.spdc import build_jsa
    jsa = build_jsa(10.0)
    filt = SpectralFilter("gaussian-grating", 30.0)
    curve_u, vis_u = hom_dip_curve(jsa, dip_delays)
    curve_f, vis_f = hom_dip_curve(jsa, dip_delays, post_bs_filter=filt)
    assert vis_u == pytest.approx(0.6263, abs=1e-3)
    assert vis_f == pytest.approx(0.9630, abs=1e-3)
    # filtering one output can only erase which-path information
    assert vis_f > vis_u


def test_dip_curve_shape(dip_delays):
    from homsim.spdc import build_jsa
    curve, _ = hom_dip_curve(build_jsa(6.0), dip_delays)
    assert np.all(curve.values >= 0.0)
    assert np.allclose(curve.values, curve.values[::-1], atol=1e-9 * curve.values.max())
    baseline = curve.components["baseline"]
    assert curve.values[0] == pytest.approx(baseline, rel=2e-2)
    assert curve.values.min() == pytest.approx(curve.values[dip_delays.size // 2], rel=1e-9)


def test_identical_separable_arms_interfere_fully(dip_delays):
    from homsim.spdc import JointSpectralAmplitude, PhasematchParams, default_jsa_grids
    pm = PhasematchParams()
    grid, _ = default_jsa_grids(10.0, pm)
    amp = np.exp(-(grid.frequencies / 80.0) ** 2).astype(complex)
    vals = np.outer(amp, amp)
    vals /= np.sqrt(np.sum(np.abs(vals) ** 2) * grid.dnu ** 2)
    jsa = JointSpectralAmplitude(grid, grid, vals, 10.0, pm)
    _, vis = hom_dip_curve(jsa, dip_delays)
    assert vis == pytest.approx(1.0, abs=1e-3)


def test_dip_curve_validation():
    from homsim.spdc import build_jsa
    jsa = build_jsa(10.0)
    with pytest.raises(ValidationError):
        hom_dip_curve(jsa, np.array([]))


# ----------------------------------------------------------------------
# detector smearing
# ----------------------------------------------------------------------

def _bump_density():
    tau = np.arange(-2048.0, 2048.0, 4.0)
    dens = np.exp(-0.5 * (tau / 300.0) ** 2) + 0.2 * np.exp(-np.abs(tau) / 80.0)
    return tau, dens


def test_smearing_conserves_counts():
    tau, dens = _bump_density()
    total = np.sum(dens) * 4.0
    curve = smear_with_detector(tau, dens, jitter_fwhm=240.0, bin_ps=128.0)
    assert np.sum(curve.values) == pytest.approx(total, rel=1e-9)
    assert curve.jitter_fwhm == 240.0


def test_smearing_identity_without_jitter():
    tau, dens = _bump_density()
    curve = smear_with_detector(tau, dens, jitter_fwhm=0.0, bin_ps=4.0)
    assert np.allclose(curve.values, dens * 4.0, rtol=1e-12)
    assert np.allclose(curve.delays, tau, atol=1e-9)


def test_smearing_validation():
    tau, dens = _bump_density()
    with pytest.raises(ValidationError):
        smear_with_detector(tau, dens, jitter_fwhm=-1.0, bin_ps=128.0)
    with pytest.raises(ValidationError):
        smear_with_detector(tau, dens, jitter_fwhm=0.0, bin_ps=0.0)
    with pytest.raises(ValidationError):
        smear_with_detector(tau, dens, jitter_fwhm=0.0, bin_ps=6.0)
    with pytest.raises(ValidationError):
        smear_with_detector(np.array([0.0, 4.0, 12.0]), np.ones(3), 0.0, 4.0)


def test_model_curve_round_trips_through_csv(tmp_path):
    tau, dens = _bump_density()
    curve = smear_with_detector(tau, dens, jitter_fwhm=240.0, bin_ps=128.0)
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(back[:, 0], curve.delays)
    assert np.allclose(back[:, 1], curve.values)
