"""Acceptance gate: the toolkit's headline numbers and statistical laws.

One test per criterion; each prints a PASS/FAIL line with the measured
value (visible in the -rP / -rA summary or with -s).  Criterion 9's
smeared half states a shape property the faithful detector model does not
satisfy; it is kept as stated and is expected to fail (see README,
"Known deviations").
"""

import contextlib
import io
import time

import numpy as np
import pytest

from homsim import (
    ExperimentConfig,
    TimeGrid,
    analyze_pair,
    build_jsa,
    coincidence_density,
    fit_lifetime,
    get_preset,
    herald_select,
    heralded_signal_state,
    hom_dip_curve,
    matched_phase_pulse,
    peak_slice,
    pseudo_time_histogram,
    purity,
    qd_coherence,
    simulate_run,
    smear_with_detector,
    stretcher_filter,
    transform_limit,
)
from homsim.cli import main
from homsim.coherence import SpectralFilter
from homsim.presets import (
    HERALD_BASELINE_EFFICIENCY,
    PUMP_FWHM_FILTERED_PS,
    stretcher_heralding_chain,
)

REP_PS = 12200


def verdict(criterion: int, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    return ok


# simulate both polarizations at the reference scale and run the pipeline;
# shared by criteria 5, 6 and 7
@pytest.fixture(scope="module")
def reference_run():
    start = time.time()
    perp = simulate_run(ExperimentConfig(duration=0.6,
                                         polarization="orthogonal"))
    par = simulate_run(ExperimentConfig(duration=0.6))
    result = analyze_pair(perp, par)
    return {"result": result, "elapsed_s": time.time() - start}


def test_criterion_01_transform_limit():
    value = transform_limit(30.0, "gaussian")
    ok = abs(value - 14.7) <= 0.01 * 14.7
    assert verdict(1, ok, f"transform_limit(30 GHz, gaussian) = {value:.3f} ps "
                          f"(target 14.7 +- 1%)")


def test_criterion_02_emitter_purity():
    value = purity(qd_coherence(328.0, 216.0))
    target = 216.0 / (2.0 * 328.0)
    ok = abs(value - target) <= 1e-3
    assert verdict(2, ok, f"purity(T1=328, T2=216) = {value:.4f} "
                          f"(target {target:.4f} +- 1e-3)")


def test_criterion_03_theory_presets():
    targets = {"fbg30": 0.17, "stretcher7p7": 0.36, "polyakov0p9": 0.67}
    got = {}
    for preset in targets:
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            assert main(["theory", "--preset", preset]) == 0
        line = next(l for l in buf.getvalue().splitlines()
                    if l.startswith("headline_coalescence="))
        got[preset] = float(line.split("=")[1])
    ok = all(abs(got[p] - t) <= 0.05 for p, t in targets.items())
    detail = ", ".join(f"{p} {got[p]:.3f} (target {t} +- 0.05)"
                       for p, t in targets.items())
    assert verdict(3, ok, detail)


def test_criterion_04_dephasing_aware_bound():
    value = get_preset("stretcher7p7").headline_coalescence()
    ok = abs(value - 0.36) <= 0.05
    assert verdict(4, ok, f"dephasing-aware 7.7 GHz bound = {value:.4f} "
                          f"(target 0.36 +- 0.05)")


def test_criterion_05_end_to_end_round_trip(reference_run):
    res = reference_run["result"]
    elapsed = reference_run["elapsed_s"]
    checks = [
        (abs(res.p_c - 0.39) <= 0.05, f"raw P_C {res.p_c:.4f} (0.39 +- 0.05)"),
        (abs(res.p_c_filtered - 0.63) <= 0.08,
         f"filtered P_C {res.p_c_filtered:.4f} (0.63 +- 0.08)"),
        (abs(res.selection_efficiency - 0.126) <= 0.03,
         f"efficiency {res.selection_efficiency:.4f} (0.126 +- 0.03)"),
        (res.a_perp >= 2e4 and res.a_par >= 2e4,
         f"central triples {res.a_perp:.0f}/{res.a_par:.0f} (>= 2e4)"),
        (elapsed < 300.0, f"runtime {elapsed:.0f} s (< 300 s)"),
    ]
    ok = all(c for c, _ in checks)
    assert verdict(5, ok, "; ".join(d for _, d in checks))


def test_criterion_06_peak_ratio_laws(reference_run):
    res = reference_run["result"]
    a, sa = res.peaks_perp.central()
    m, sm = res.peaks_perp.side_mean()
    pull_half = (a - 0.5 * m) / np.hypot(sa, 0.5 * sm)
    m_par, sm_par = res.peaks_par.side_mean()
    pull_side = (m_par - m) / np.hypot(sm_par, sm)
    ok = abs(pull_half) <= 3.0 and abs(pull_side) <= 3.0
    assert verdict(6, ok,
                   f"orthogonal central/side = {a / m:.4f} "
                   f"(pull {pull_half:+.2f}); parallel/orthogonal side ratio "
                   f"= {m_par / m:.4f} (pull {pull_side:+.2f}); both |pull| <= 3")


@pytest.fixture(scope="module")
def decay_only_run():
    # SPDC arm blocked: side peaks reduce to the bare two-sided emitter
    # decay under the detector response, the cleanest T1 round trip
    stream = simulate_run(ExperimentConfig(duration=0.2, spdc_survival=0.0))
    events = herald_select(stream)
    hist, _ = pseudo_time_histogram(events, REP_PS)
    return fit_lifetime(peak_slice(hist, 1, REP_PS), 240.0, 128.0)


def test_criterion_07_fit_recovery(reference_run, decay_only_run):
    t1 = decay_only_run.t1_ps
    t2 = reference_run["result"].t2_ps
    ok = abs(t1 - 328.0) <= 15.0 and abs(t2 - 216.0) <= 25.0
    assert verdict(7, ok, f"fit_lifetime T1 = {t1:.1f} ps (328 +- 15); "
                          f"fit_hom_peak T2 = {t2:.1f} ps (216 +- 25)")


def test_criterion_08_signal_idler_dip():
    delays = np.linspace(-60.0, 60.0, 61)
    _, v_raw = hom_dip_curve(build_jsa(6.0), delays)
    _, v_filt = hom_dip_curve(build_jsa(PUMP_FWHM_FILTERED_PS), delays,
                              post_bs_filter=SpectralFilter("gaussian-grating",
                                                            30.0))
    ok = abs(v_raw - 0.40) <= 0.10 and v_filt >= 0.90
    assert verdict(8, ok, f"unfiltered visibility {v_raw:.4f} (0.40 +- 0.10); "
                          f"30 GHz filtered {v_filt:.4f} (>= 0.90)")


def test_criterion_09_flattened_peak():
    grid = TimeGrid(t0=-600.0, dt=2.0, n=2300)
    qd = qd_coherence(328.0, 216.0, grid)
    pulse = matched_phase_pulse(stretcher_filter(), 1.2, grid)
    tau, values = coincidence_density(qd, pulse, "parallel",
                                      12.0).tau_marginal()
    i0 = int(np.argmin(np.abs(tau)))
    sharp_min = (values[i0] < values[i0 - 1]) and (values[i0] < values[i0 + 1])

    smeared = smear_with_detector(tau, values, 240.0, 128.0)
    j0 = int(np.argmin(np.abs(smeared.delays)))
    smeared_min = (smeared.values[j0] < smeared.values[j0 - 1]
                   and smeared.values[j0] < smeared.values[j0 + 1])
    ok = sharp_min and not smeared_min
    assert verdict(
        9, ok,
        f"zero-jitter local minimum at tau=0: {sharp_min}; "
        f"local minimum survives 240 ps smearing: {smeared_min} "
        f"(flattening requires it to vanish; the faithful detector model "
        f"keeps a {min(smeared.values[j0 - 1], smeared.values[j0 + 1]) / smeared.values[j0] - 1.0:.1%} dip)")


def test_criterion_10_heralding_chain():
    _, unfiltered = heralded_signal_state(build_jsa(PUMP_FWHM_FILTERED_PS))
    _, filtered = stretcher_heralding_chain()
    ok = (abs(unfiltered - HERALD_BASELINE_EFFICIENCY) <= 1e-9
          and abs(filtered - 0.015) <= 1e-4)
    assert verdict(10, ok, f"unfiltered heralding {unfiltered:.4f} (0.092); "
                           f"slit-filtered {filtered:.5f} (0.01500 +- 1e-4)")
