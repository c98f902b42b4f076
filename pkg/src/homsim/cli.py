"""Command line front end.

Subcommands
-----------
theory            coalescence bounds and pulse parameters for a source preset
simulate          generate a tag file from a config file
analyze           run the coincidence pipeline on an orthogonal/parallel pair
spectra           export the joint spectrum, marginals and the dip curve
reproduce-table1  theory + simulate + analyze rolled into one comparison table

Exit codes: 0 success, 1 validation/config error, 2 I/O or tag-format
error, 3 fit non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .coherence import (
    SpectralFilter,
    apply_filter,
    exponential_wavepacket,
    intensity_fwhm,
    transform_limited_pulse,
)
from .errors import ConfigError, FitConvergenceError, TagFormatError, ValidationError
from .grids import causal_time_grid
from .hom import hom_dip_curve
from .presets import (
    DEFAULT_QD_LINEWIDTH_GHZ,
    DEFAULT_QD_T1_PS,
    DEFAULT_QD_T2_PS,
    PRESETS,
    PUMP_FWHM_FILTERED_PS,
    PUMP_FWHM_UNFILTERED_PS,
    ScenarioPreset,
    get_preset,
)
from .simkit import (
    ExperimentConfig,
    config_to_text,
    read_config_file,
    read_tags,
    simulate_run,
    write_tags,
)
from .spdc import build_jsa, marginal_spectrum
from .tagproc import analyze_pair


def _power_fwhm_ghz(filt: SpectralFilter) -> float:
    """Half-power width of |H(nu)|^2, measured on a fine grid."""
    span = 6.0 * (filt.fwhm_ghz + filt.edge_resolution_ghz)
    nu = np.linspace(-span, span, 20001)
    power = np.abs(filt.amplitude_transfer(nu, cell_ghz=nu[1] - nu[0])) ** 2
    above = np.flatnonzero(power >= 0.5 * power.max())
    lo = np.interp(0.5, power[above[0] - 1:above[0] + 1],
                   nu[above[0] - 1:above[0] + 1])
    hi = np.interp(0.5, power[above[-1] + 1:above[-1] - 1:-1],
                   nu[above[-1] + 1:above[-1] - 1:-1])
    return float(hi - lo)


def _line_transmission(preset: ScenarioPreset) -> float:
    # fraction of the emitter's Lorentzian line the source filter passes
    span = max(4000.0, 16.0 / (np.pi * preset.qd_linewidth_ghz * 1e-3))
    grid = causal_time_grid(span, 1.0, lead=16)
    psi = exponential_wavepacket(grid, linewidth_ghz=preset.qd_linewidth_ghz)
    _, fraction = apply_filter(psi, preset.filt)
    return fraction


def _emit(lines: list[tuple[str, str]], csv_path: str | None) -> None:
    for key, value in lines:
        print(f"{key}={value}")
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["key", "value"])
            writer.writerows(lines)


# ----------------------------------------------------------------------
# theory


def _preset_from_args(args) -> ScenarioPreset:
    if args.preset != "custom":
        return get_preset(args.preset)
    if args.filter_fwhm_ghz is None:
        raise ConfigError("custom preset needs --filter-fwhm-ghz")
    filt = SpectralFilter(args.filter_shape, args.filter_fwhm_ghz,
                          edge_resolution_ghz=args.edge_resolution_ghz)
    return ScenarioPreset(
        name="custom",
        description="user-supplied parameters",
        qd_linewidth_ghz=args.linewidth_ghz,
        t1_ps=args.t1_ps,
        t2_ps=args.t2_ps,
        filt=filt,
        spectral_phase=args.spectral_phase,
        dephasing_aware=True,
        pump_fwhm_ps=PUMP_FWHM_FILTERED_PS,
    )


def cmd_theory(args) -> int:
    preset = _preset_from_args(args)
    variants = preset.coalescence_variants()
    lines = [
        ("preset", preset.name),
        ("description", preset.description),
        ("filter_shape", preset.filt.shape),
        ("filter_fwhm_ghz", f"{_power_fwhm_ghz(preset.filt):.4g}"),
        ("qd_linewidth_ghz", f"{preset.qd_linewidth_ghz:.4g}"),
        ("t1_ps", f"{preset.t1_ps:.4g}"),
        ("t2_ps", f"{preset.t2_ps:.4g}"),
        ("spectral_phase", preset.spectral_phase),
        ("coalescence_dephasing_free", f"{variants['dephasing_free']:.4f}"),
        ("coalescence_with_dephasing", f"{variants['with_dephasing']:.4f}"),
        ("headline_coalescence", f"{preset.headline_coalescence():.4f}"),
        ("optimal_delay_ps", f"{preset.optimal_delay():.1f}"),
        ("transform_limit_ps",
         f"{intensity_fwhm(transform_limited_pulse(preset.filt)):.2f}"),
        ("line_transmission", f"{_line_transmission(preset):.4f}"),
    ]
    _emit(lines, args.csv)
    return 0


# ----------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    config = read_config_file(args.config)
    overrides = {}
    if args.polarization is not None:
        overrides["polarization"] = args.polarization
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = replace(config, **overrides)
    stream = simulate_run(config)
    write_tags(stream, args.out)
    sys.stdout.write(config_to_text(config))
    print(f"tag_file={args.out}")
    return 0


# ----------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    perp = read_tags(args.orthogonal)
    par = read_tags(args.parallel)
    result = analyze_pair(perp, par, window_bins=args.window_bins,
                          window_offset_bins=args.window_offset)
    print(result.report_text())
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(result.report_text() + "\n")
        result.pseudo_perp.to_csv(out / "pseudo_orthogonal.csv")
        result.pseudo_par.to_csv(out / "pseudo_parallel.csv")
        result.pseudo_perp_filtered.to_csv(out / "pseudo_orthogonal_filtered.csv")
        result.pseudo_par_filtered.to_csv(out / "pseudo_parallel_filtered.csv")
        result.micro_par.detector_total(1).to_csv(out / "micro_d1_parallel.csv")
        result.micro_par.detector_total(2).to_csv(out / "micro_d2_parallel.csv")
        for name, curve in result.fit_curves.items():
            curve.to_csv(out / f"model_{name}.csv")
        print(f"artifacts={out}")
    return 0


# ----------------------------------------------------------------------
# spectra


def cmd_spectra(args) -> int:
    jsa = build_jsa(args.pump_fwhm_ps)
    signal = marginal_spectrum(jsa, "signal")
    idler = marginal_spectrum(jsa, "idler")
    post_filter = None
    if args.fbg_fwhm_ghz is not None:
        post_filter = SpectralFilter("gaussian-grating", args.fbg_fwhm_ghz)
    delays = np.linspace(-args.delay_span_ps, args.delay_span_ps,
                         args.delay_points)
    curve, visibility = hom_dip_curve(jsa, delays, post_bs_filter=post_filter)
    print(f"pump_fwhm_ps={args.pump_fwhm_ps:.4g}")
    print(f"signal_fwhm_ghz={signal.fwhm_ghz:.2f}")
    print(f"idler_fwhm_ghz={idler.fwhm_ghz:.2f}")
    if post_filter is not None:
        print(f"post_bs_filter_fwhm_ghz={args.fbg_fwhm_ghz:.4g}")
    print(f"dip_visibility={visibility:.4f}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jsa.to_csv(out / "jsa_intensity.csv", stride=args.jsa_stride)
        signal.to_csv(out / "signal_marginal.csv")
        idler.to_csv(out / "idler_marginal.csv")
        curve.to_csv(out / "dip_curve.csv")
        print(f"artifacts={out}")
    return 0


# ----------------------------------------------------------------------
# reproduce-table1


TABLE1_ROWS = (
    "Max. theoretical coalescence",
    "Measured raw coalescence",
    "Time-selected coalescence",
    "Time window",
    "Time selection efficiency",
    "2T1/T2",
    "dnu_SPDC",
    "dnu_QD",
)

_TABLE1_UNITS = ("%", "%", "%", "ps", "%", "", "GHz", "GHz")


def cmd_reproduce_table1(args) -> int:
    order = ("fbg30", "stretcher7p7", "polyakov0p9")
    presets = {name: get_preset(name) for name in order}

    columns = {name: {} for name in order}
    for name, preset in presets.items():
        columns[name]["Max. theoretical coalescence"] = (
            f"{100.0 * preset.headline_coalescence():.1f}")
        columns[name]["2T1/T2"] = f"{2.0 * preset.t1_ps / preset.t2_ps:.1f}"
        columns[name]["dnu_SPDC"] = f"{_power_fwhm_ghz(preset.filt):.1f}"
        columns[name]["dnu_QD"] = f"{preset.qd_linewidth_ghz:.1f}"

    # the acquisition model reproduces the pulse-stretcher arrangement, so
    # only that column gets simulated "measured" rows
    par_config = ExperimentConfig(duration=args.duration, seed=args.seed)
    perp_config = replace(par_config, polarization="orthogonal")
    result = analyze_pair(simulate_run(perp_config), simulate_run(par_config))
    measured = columns["stretcher7p7"]
    measured["Measured raw coalescence"] = (
        f"{100.0 * result.p_c:.1f}({100.0 * result.sigma_p_c:.1f})")
    measured["Time-selected coalescence"] = (
        f"{100.0 * result.p_c_filtered:.1f}({100.0 * result.sigma_p_c_filtered:.1f})")
    measured["Time window"] = (
        f"{len(result.window_d1) * int(par_config.bin):d}")
    measured["Time selection efficiency"] = (
        f"{100.0 * result.selection_efficiency:.1f}")

    width = max(len(r) for r in TABLE1_ROWS) + 7
    col_w = 16
    header = "".ljust(width) + "".join(name.ljust(col_w) for name in order)
    out_lines = [header, "-" * len(header)]
    for row, unit in zip(TABLE1_ROWS, _TABLE1_UNITS):
        label = f"{row} ({unit})" if unit else row
        cells = (columns[name].get(row, "-") for name in order)
        out_lines.append(label.ljust(width)
                         + "".join(cell.ljust(col_w) for cell in cells))
    out_lines.append("")
    out_lines.append(f"duration_s={args.duration:.4g} seed={args.seed}")
    text = "\n".join(out_lines)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


# ----------------------------------------------------------------------
# parser and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homsim",
        description="Two-photon interference between a quantum-dot emitter "
                    "and a filtered heralded SPDC source: theory bounds, "
                    "Monte Carlo tag streams and the analysis pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory",
                       help="coalescence bounds for a source configuration")
    p.add_argument("--preset", default="stretcher7p7",
                   help="one of %s, or 'custom'" % ", ".join(sorted(PRESETS)))
    p.add_argument("--filter-shape", default="rect-slit",
                   help="custom preset: filter shape "
                        "(rect-slit, gaussian-grating, lorentzian-cavity)")
    p.add_argument("--filter-fwhm-ghz", type=float, default=None,
                   help="custom preset: filter width")
    p.add_argument("--edge-resolution-ghz", type=float, default=0.0,
                   help="custom preset: slit edge smearing")
    p.add_argument("--linewidth-ghz", type=float,
                   default=DEFAULT_QD_LINEWIDTH_GHZ,
                   help="custom preset: emitter linewidth")
    p.add_argument("--t1-ps", type=float, default=DEFAULT_QD_T1_PS)
    p.add_argument("--t2-ps", type=float, default=DEFAULT_QD_T2_PS)
    p.add_argument("--spectral-phase", default="flat",
                   choices=["flat", "matched"])
    p.add_argument("--csv", default=None, metavar="PATH",
                   help="also write the report as key,value CSV")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="generate a tag file")
    p.add_argument("config", help="key=value config file")
    p.add_argument("out", help="output tag file")
    p.add_argument("--polarization", choices=["parallel", "orthogonal"],
                   default=None, help="override the configured polarization")
    p.add_argument("--duration", type=float, default=None,
                   help="override the acquisition duration (s)")
    p.add_argument("--seed", type=int, default=None, help="override the seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="run the coincidence pipeline")
    p.add_argument("orthogonal", help="tag file, orthogonal polarization")
    p.add_argument("parallel", help="tag file, parallel polarization")
    p.add_argument("--window-bins", type=int, default=3,
                   help="width of the post-selection window in time bins")
    p.add_argument("--window-offset", type=int, default=-2,
                   help="window start relative to the pulse-arrival mode")
    p.add_argument("--out-dir", default=None,
                   help="write report and histogram/model CSVs here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("spectra",
                       help="joint spectrum, marginals and dip curve")
    p.add_argument("--pump-fwhm-ps", type=float,
                   default=PUMP_FWHM_UNFILTERED_PS)
    p.add_argument("--fbg-fwhm-ghz", type=float, default=None,
                   help="gaussian filter in one beamsplitter output")
    p.add_argument("--delay-span-ps", type=float, default=60.0)
    p.add_argument("--delay-points", type=int, default=61)
    p.add_argument("--jsa-stride", type=int, default=4,
                   help="keep every n-th grid point in the JSA CSV")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("reproduce-table1",
                       help="source-comparison table from theory plus one "
                            "simulated acquisition pair")
    p.add_argument("--duration", type=float, default=0.6,
                   help="simulated acquisition per polarization (s)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None, metavar="PATH",
                   help="also write the table to a file")
    p.set_defaults(func=cmd_reproduce_table1)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:  # includes ConfigError
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TagFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
