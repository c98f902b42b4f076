"""Two-photon interference toolkit for dissimilar single-photon sources.

Models Hong-Ou-Mandel experiments between a dephased two-level emitter
(quantum dot) and a spectrally filtered heralded photon-pair source (pulsed
SPDC): analytic coherence kernels, joint spectral amplitudes, beamsplitter
coincidence densities, a time-tag Monte Carlo and a streaming tag-file
analysis pipeline.
"""

__version__ = "0.1.0"

from .coherence import (
    SpectralFilter,
    TemporalAmplitude,
    TwoTimeCoherence,
    apply_filter,
    exponential_wavepacket,
    filter_amplitude_response,
    intensity_fwhm,
    mixture,
    pure_state_coherence,
    purity,
    qd_coherence,
    transform_limit,
    transform_limited_pulse,
)
from .grids import FreqGrid, TimeGrid
from .hom import (
    CoincidenceDensity,
    HomModelCurve,
    coalescence_probability,
    coalescence_vs_delay,
    coincidence_density,
    hom_dip_curve,
    matched_phase_pulse,
    max_theoretical_coalescence,
    optimal_delay_ps,
    smear_with_detector,
)
from .presets import PRESETS, ScenarioPreset, get_preset, stretcher_filter
from .simkit import (
    ExperimentConfig,
    PairDensity,
    TagRecord,
    TagStream,
    config_to_text,
    pair_density,
    read_config_file,
    read_config_text,
    read_tags,
    sample_pair_times,
    simulate_run,
    write_tags,
)
from .spdc import (
    JointSpectralAmplitude,
    MarginalSpectrum,
    PhasematchParams,
    build_jsa,
    heralded_signal_state,
    marginal_spectrum,
    pump_spectral_fwhm_ghz,
    schmidt_purity,
)
from .tagproc import (
    AnalysisResult,
    CoincidenceHistogram,
    HeraldedEvent,
    HeraldedEvents,
    HomPeakFit,
    LifetimeFit,
    MicroHistograms,
    PeakAreas,
    analyze_pair,
    coalescence,
    fit_hom_peak,
    fit_lifetime,
    herald_select,
    micro_histograms,
    mode_window,
    peak_slice,
    pseudo_time_histogram,
    time_window_filter,
)

__all__ = [
    "AnalysisResult",
    "CoincidenceDensity",
    "CoincidenceHistogram",
    "ExperimentConfig",
    "FreqGrid",
    "HeraldedEvent",
    "HeraldedEvents",
    "HomModelCurve",
    "HomPeakFit",
    "JointSpectralAmplitude",
    "LifetimeFit",
    "MarginalSpectrum",
    "MicroHistograms",
    "PRESETS",
    "PairDensity",
    "PeakAreas",
    "PhasematchParams",
    "ScenarioPreset",
    "SpectralFilter",
    "TagRecord",
    "TagStream",
    "TemporalAmplitude",
    "TimeGrid",
    "TwoTimeCoherence",
    "analyze_pair",
    "apply_filter",
    "build_jsa",
    "coalescence",
    "coalescence_probability",
    "coalescence_vs_delay",
    "coincidence_density",
    "config_to_text",
    "exponential_wavepacket",
    "filter_amplitude_response",
    "fit_hom_peak",
    "fit_lifetime",
    "get_preset",
    "herald_select",
    "heralded_signal_state",
    "hom_dip_curve",
    "intensity_fwhm",
    "marginal_spectrum",
    "matched_phase_pulse",
    "max_theoretical_coalescence",
    "micro_histograms",
    "mixture",
    "mode_window",
    "optimal_delay_ps",
    "pair_density",
    "peak_slice",
    "pseudo_time_histogram",
    "pump_spectral_fwhm_ghz",
    "pure_state_coherence",
    "purity",
    "qd_coherence",
    "read_config_file",
    "read_config_text",
    "read_tags",
    "sample_pair_times",
    "schmidt_purity",
    "simulate_run",
    "smear_with_detector",
    "stretcher_filter",
    "time_window_filter",
    "transform_limit",
    "transform_limited_pulse",
    "write_tags",
]
