"""Monte Carlo time-tag streams for the heralded two-photon experiment.

One simulated run covers `duration` seconds of a pulsed acquisition: a
herald detector D0, the two interferometer outputs D1/D2 and a decimated
laser-sync channel.  Only heralded laser periods produce photon events
(unheralded periods never survive the analysis cut, so generating them
would be wasted work); within a heralded period the filtered SPDC signal
and the emitter photon reach the beamsplitter independently, and joint
detection times follow the two-photon coincidence densities of `hom`.

Randomness is counter-based: every (seed, block, lane) triple owns an
independent Philox stream and each event consumes a fixed row of uniforms,
so a run can be generated in any chunking order, and extending the duration
only appends events.
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import pandas as pd
from scipy.special import ndtri

from .coherence import qd_coherence
from .errors import ConfigError, TagFormatError, ValidationError
from .grids import TimeGrid
from .hom import CoincidenceDensity, coincidence_density, matched_phase_pulse
from .presets import DEFAULT_QD_LINEWIDTH_GHZ, stretcher_filter

logger = logging.getLogger(__name__)

# Periods per generation block.  Blocks are the unit of both chunked
# generation and RNG keying; results do not depend on how blocks are
# scheduled.
BLOCK_PERIODS = 1 << 20

HERALD_CHANNEL = 0
D1_CHANNEL = 1
D2_CHANNEL = 2
SYNC_CHANNEL = 3

_FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))
_HEADER_RE = re.compile(rb"#tagfile v1 rep_ps=(\d+) bin_ps=(\d+)\n?$")
_RECORD_RE = re.compile(rb"[0-3]\t\d+$")
_MAX_EXPECTED_TAGS = 2.0e8
_READ_CHUNK_BYTES = 1 << 23

# RNG lanes within a block; each lane is an independent Philox key.
_LANE_BERNOULLI = 0
_LANE_PAIRS = 1
_LANE_SPDC_ONLY = 2
_LANE_QD_ONLY = 3
_LANE_HERALDS = 4
_LANE_BACKGROUND = 5


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one simulated acquisition run.

    All probabilities are per laser pulse: the herald fires with
    herald_prob_per_pulse, and given a herald the filtered signal photon
    reaches the beamsplitter with spdc_survival while the emitter photon
    does so with qd_click_prob.  jitter_fwhm applies per detector, so
    detection-time differences carry sqrt(2) times this width.
    """

    rep_period: float = 12200.0       # ps between laser pulses
    t1: float = 328.0                 # emitter lifetime, ps
    t2: float = 216.0                 # emitter coherence time, ps
    jitter_fwhm: float = 169.7        # per-detector gaussian jitter, ps
    bin: float = 128.0                # timestamp quantization, ps
    herald_prob_per_pulse: float = 0.1
    spdc_survival: float = 0.12      # post-filter heralding efficiency
    qd_click_prob: float = 0.12
    polarization: str = "parallel"
    duration: float = 0.6            # seconds of wall-clock acquisition
    seed: int = 1
    background_rate: float = 0.0     # Hz of uncorrelated counts per detector
    arrival_offset: float = 1600.0   # ps from period start to pulse arrival
    sync_decimation: int = 1000      # record every n-th laser period
    spdc_delay_ps: float = 12.0      # SPDC pulse delay relative to the emitter

    def __post_init__(self):
        for key in ("herald_prob_per_pulse", "spdc_survival", "qd_click_prob"):
            p = getattr(self, key)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{key} must lie in [0, 1], got {p}")
        if self.rep_period <= 0 or self.rep_period != int(self.rep_period):
            raise ValidationError(
                f"rep_period must be a positive whole number of ps, got {self.rep_period}")
        if self.bin <= 0 or self.bin != int(self.bin):
            raise ValidationError(
                f"bin must be a positive whole number of ps, got {self.bin}")
        if self.bin > self.rep_period:
            raise ValidationError("bin must not exceed rep_period")
        if self.t1 <= 0:
            raise ValidationError(f"t1 must be positive, got {self.t1}")
        if not 0.0 < self.t2 <= 2.0 * self.t1:
            raise ValidationError(
                f"t2 must lie in (0, 2*t1] = (0, {2.0 * self.t1}], got {self.t2}")
        if self.jitter_fwhm < 0:
            raise ValidationError("jitter_fwhm must be nonnegative")
        if self.duration <= 0:
            raise ValidationError(f"duration must be positive, got {self.duration}")
        if self.polarization not in ("parallel", "orthogonal"):
            raise ValidationError(
                f"polarization must be 'parallel' or 'orthogonal', got {self.polarization!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must fit in 64 bits")
        if self.background_rate < 0:
            raise ValidationError("background_rate must be nonnegative")
        if self.arrival_offset < 0:
            raise ValidationError("arrival_offset must be nonnegative")
        if self.sync_decimation < 1 or self.sync_decimation != int(self.sync_decimation):
            raise ValidationError("sync_decimation must be a positive integer")

    def n_periods(self) -> int:
        return int(self.duration * 1.0e12 // self.rep_period)


_CONFIG_INT_FIELDS = {"seed", "sync_decimation"}
_CONFIG_STR_FIELDS = {"polarization"}


def config_to_text(config: ExperimentConfig) -> str:
    """Flat key=value rendition; read_config_text inverts it."""
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name in _CONFIG_INT_FIELDS:
            value = int(value)
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def read_config_text(text: str) -> ExperimentConfig:
    """Parse key=value lines into a config; unknown keys are errors."""
    known = {f.name for f in fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        try:
            if key in _CONFIG_STR_FIELDS:
                values[key] = value
            elif key in _CONFIG_INT_FIELDS:
                values[key] = int(value)
            else:
                values[key] = float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
    return ExperimentConfig(**values)


def read_config_file(path) -> ExperimentConfig:
    # unreadable files surface as OSError (an I/O problem, not a config one)
    return read_config_text(Path(path).read_text())


@dataclass(frozen=True)
class TagRecord:
    """One detection event: channel 0 herald, 1/2 interferometer, 3 sync."""

    channel: int
    timestamp: int  # ps since run start

    def __post_init__(self):
        if self.channel not in (0, 1, 2, 3):
            raise ValidationError(f"channel must be 0..3, got {self.channel}")
        if self.timestamp < 0:
            raise ValidationError("timestamp must be nonnegative")


class TagStream:
    """Time-ordered (channel, timestamp) records with acquisition metadata.

    Records are exposed as blocks of numpy arrays; blocks() can be called
    repeatedly and restarts from the beginning, which keeps file-backed
    streams single-pass and bounded in memory.
    """

    def __init__(self, rep_ps: int, bin_ps: int,
                 source: Callable[[], Iterator[tuple[np.ndarray, np.ndarray]]]):
        self.rep_ps = int(rep_ps)
        self.bin_ps = int(bin_ps)
        self._source = source

    @classmethod
    def from_arrays(cls, rep_ps: int, bin_ps: int,
                    channels: np.ndarray, timestamps: np.ndarray) -> "TagStream":
        ch = np.asarray(channels, dtype=np.int64)
        ts = np.asarray(timestamps, dtype=np.int64)
        if ch.shape != ts.shape:
            raise ValidationError("channels and timestamps must have equal length")
        return cls(rep_ps, bin_ps, lambda: iter([(ch, ts)]))

    def blocks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        return self._source()

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        chans = [np.empty(0, dtype=np.int64)]
        times = [np.empty(0, dtype=np.int64)]
        for ch, ts in self.blocks():
            chans.append(np.asarray(ch, dtype=np.int64))
            times.append(np.asarray(ts, dtype=np.int64))
        return np.concatenate(chans), np.concatenate(times)


# ----------------------------------------------------------------------
# density sampling


@dataclass(frozen=True)
class PairDensity:
    """Both-output joint densities of one photon pair at the beamsplitter."""

    split: CoincidenceDensity
    same: CoincidenceDensity

    def __post_init__(self):
        if self.split.grid != self.same.grid:
            raise ValidationError("split and same densities must share a grid")
        total = self.split.total() + self.same.total()
        if abs(total - 1.0) > 1.0e-6:
            raise ValidationError(
                f"split and same densities must sum to unit probability, got {total}")

    @property
    def p_split(self) -> float:
        return self.split.total()


def pair_density(a, b, polarization: str = "parallel",
                 delay_ps: float = 0.0) -> PairDensity:
    """Full beamsplitter output statistics for the input pair (a, b)."""
    split = coincidence_density(a, b, polarization, delay_ps, port="split")
    same = coincidence_density(a, b, polarization, delay_ps, port="same")
    return PairDensity(split, same)


class _GriddedSampler:
    """Inverse-CDF sampling over a cell grid with in-cell dithering."""

    def __init__(self, values: np.ndarray, grid: TimeGrid):
        v = np.asarray(values, dtype=float)
        if np.min(v) < -1.0e-9 * max(np.max(v), 1.0e-300):
            raise ValidationError("density has significantly negative weight")
        v = np.clip(v, 0.0, None).ravel()
        self._cdf = np.cumsum(v)
        if self._cdf[-1] <= 0.0:
            raise ValidationError("density has no probability mass")
        self._shape = np.asarray(values).shape
        self._grid = grid

    def sample(self, u_cell: np.ndarray, *dithers: np.ndarray) -> tuple[np.ndarray, ...]:
        idx = np.searchsorted(self._cdf, u_cell * self._cdf[-1], side="right")
        idx = np.minimum(idx, self._cdf.size - 1)
        cells = np.unravel_index(idx, self._shape)
        return tuple(self._grid.t0 + (c + u) * self._grid.dt
                     for c, u in zip(cells, dithers))


def sample_pair_times(density, rng: np.random.Generator, size: int | None = None):
    """Detection times (t1, t2, same_port) of photon pairs behind the splitter.

    `density` is either a PairDensity (the split/bunched branch is chosen per
    draw) or a single normalized CoincidenceDensity whose port label fixes
    same_port.  Sampling is inverse-transform over the density grid with
    uniform dithering inside each cell; densities with negative or vanishing
    mass are rejected.
    """
    n = 1 if size is None else int(size)
    if n < 1:
        raise ValidationError("size must be at least 1")
    u = rng.random((n, 4))
    if isinstance(density, PairDensity):
        split = _GriddedSampler(density.split.values, density.split.grid)
        same = _GriddedSampler(density.same.values, density.same.grid)
        is_split = u[:, 0] < density.p_split
        t1 = np.empty(n)
        t2 = np.empty(n)
        if is_split.any():
            t1[is_split], t2[is_split] = split.sample(
                u[is_split, 1], u[is_split, 2], u[is_split, 3])
        if (~is_split).any():
            t1[~is_split], t2[~is_split] = same.sample(
                u[~is_split, 1], u[~is_split, 2], u[~is_split, 3])
        same_port = ~is_split
    elif isinstance(density, CoincidenceDensity):
        if abs(density.total() - 1.0) > 1.0e-6:
            raise ValidationError("a bare coincidence density must be normalized")
        t1, t2 = _GriddedSampler(density.values, density.grid).sample(
            u[:, 1], u[:, 2], u[:, 3])
        same_port = np.full(n, density.port == "same")
    else:
        raise ValidationError(
            f"expected PairDensity or CoincidenceDensity, got {type(density).__name__}")
    if size is None:
        return float(t1[0]), float(t2[0]), bool(same_port[0])
    return t1, t2, same_port


# ----------------------------------------------------------------------
# run generation


@dataclass(frozen=True)
class _RunModel:
    grid: TimeGrid
    pairs: PairDensity
    split_sampler: _GriddedSampler
    same_sampler: _GriddedSampler
    qd_sampler: _GriddedSampler
    spdc_sampler: _GriddedSampler
    spdc_shift_ps: float


def _run_model(config: ExperimentConfig) -> _RunModel:
    # Shared time grid for the emitter kernel and the SPDC pulse: enough
    # leading span for the pulse's acausal tail and twelve lifetimes of
    # decay.  Long lifetimes fall back to a coarser step to bound memory.
    lead = 600.0
    tail = max(12.0 * config.t1, 2400.0)
    dt = 2.0 if lead + tail <= 5000.0 else 4.0
    n = int(np.ceil((lead + tail) / dt))
    if n > 3000:
        raise ValidationError(
            "t1 too long for the event time grid; shorten t1 or adapt the model")
    grid = TimeGrid(t0=-lead, dt=dt, n=n)
    sigma = config.jitter_fwhm / _FWHM_TO_SIGMA
    span_needed = config.arrival_offset + grid.t0 + grid.span + 6.0 * sigma
    if span_needed >= config.rep_period:
        raise ValidationError(
            "arrival_offset plus the event window exceeds rep_period; "
            "raise rep_period or lower arrival_offset/t1")

    qd = qd_coherence(config.t1, config.t2, grid)
    pulse = matched_phase_pulse(stretcher_filter(), DEFAULT_QD_LINEWIDTH_GHZ, grid)
    pairs = pair_density(qd, pulse, config.polarization, config.spdc_delay_ps)
    # Singles reuse the pair marginals: the emitter intensity is the kernel
    # diagonal, the SPDC photon keeps the unshifted pulse shape plus the
    # same whole-cell delay the densities use.
    qd_intensity = np.clip(np.real(np.diag(qd.values)), 0.0, None)
    return _RunModel(
        grid=grid,
        pairs=pairs,
        split_sampler=_GriddedSampler(pairs.split.values, grid),
        same_sampler=_GriddedSampler(pairs.same.values, grid),
        qd_sampler=_GriddedSampler(qd_intensity, grid),
        spdc_sampler=_GriddedSampler(pulse.intensity, grid),
        spdc_shift_ps=grid.shift_index(config.spdc_delay_ps) * grid.dt,
    )


def _lane(config: ExperimentConfig, block: int, lane: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(config.seed), block * 8 + lane]))


def _jitter(sigma: float, u: np.ndarray) -> np.ndarray:
    eps = 1.0e-12
    return sigma * ndtri(np.clip(u, eps, 1.0 - eps))


def _stamp(config: ExperimentConfig, periods: np.ndarray, micro: np.ndarray,
           u_jitter: np.ndarray) -> np.ndarray:
    sigma = config.jitter_fwhm / _FWHM_TO_SIGMA
    t = (periods.astype(np.float64) * config.rep_period
         + config.arrival_offset + micro + _jitter(sigma, u_jitter))
    return (np.floor(t / config.bin) * config.bin).astype(np.int64)


def _simulate_block(config: ExperimentConfig, model: _RunModel,
                    block: int, n_periods: int) -> tuple[np.ndarray, np.ndarray]:
    start = block * BLOCK_PERIODS
    count = min(BLOCK_PERIODS, n_periods - start)

    # Fixed three uniforms per period keep the stream layout independent of
    # the outcomes and of where the run ends.
    u = _lane(config, block, _LANE_BERNOULLI).random((BLOCK_PERIODS, 3))
    herald = u[:, 0] < config.herald_prob_per_pulse
    herald[count:] = False
    spdc = herald & (u[:, 1] < config.spdc_survival)
    qd = herald & (u[:, 2] < config.qd_click_prob)

    herald_idx = np.flatnonzero(herald)
    both_idx = np.flatnonzero(spdc & qd)
    spdc_idx = np.flatnonzero(spdc & ~qd)
    qd_idx = np.flatnonzero(qd & ~spdc)

    channels: list[np.ndarray] = []
    stamps: list[np.ndarray] = []

    def emit(chan: int, periods: np.ndarray, micro, u_jitter: np.ndarray) -> None:
        stamps.append(_stamp(config, start + periods, micro, u_jitter))
        channels.append(np.full(stamps[-1].size, chan, dtype=np.int64))

    uh = _lane(config, block, _LANE_HERALDS).random((herald_idx.size, 1))
    emit(HERALD_CHANNEL, herald_idx, 0.0, uh[:, 0])

    # Pair periods: one row of uniforms per pair, columns
    # (branch, cdf cell, two dithers, port, two jitters).
    up = _lane(config, block, _LANE_PAIRS).random((both_idx.size, 7))
    is_split = up[:, 0] < model.pairs.p_split
    if is_split.any():
        rows = np.flatnonzero(is_split)
        t1, t2 = model.split_sampler.sample(up[rows, 1], up[rows, 2], up[rows, 3])
        emit(D1_CHANNEL, both_idx[rows], t1, up[rows, 5])
        emit(D2_CHANNEL, both_idx[rows], t2, up[rows, 6])
    if (~is_split).any():
        # Bunched pair: both photons leave through one output.  Each photon
        # is recorded, so the per-detector statistics stay polarization
        # independent; coalescence only removes cross coincidences.
        rows = np.flatnonzero(~is_split)
        ta, tb = model.same_sampler.sample(up[rows, 1], up[rows, 2], up[rows, 3])
        port = np.where(up[rows, 4] < 0.5, D1_CHANNEL, D2_CHANNEL)
        for chan in (D1_CHANNEL, D2_CHANNEL):
            at = np.flatnonzero(port == chan)
            emit(chan, both_idx[rows[at]], ta[at], up[rows[at], 5])
            emit(chan, both_idx[rows[at]], tb[at], up[rows[at], 6])

    # Lone-photon periods: (cdf cell, dither, port, jitter) per event.
    us = _lane(config, block, _LANE_SPDC_ONLY).random((spdc_idx.size, 4))
    (ts,) = model.spdc_sampler.sample(us[:, 0], us[:, 1])
    ts = ts + model.spdc_shift_ps
    port = np.where(us[:, 2] < 0.5, D1_CHANNEL, D2_CHANNEL)
    for chan in (D1_CHANNEL, D2_CHANNEL):
        at = np.flatnonzero(port == chan)
        emit(chan, spdc_idx[at], ts[at], us[at, 3])

    uq = _lane(config, block, _LANE_QD_ONLY).random((qd_idx.size, 4))
    (tq,) = model.qd_sampler.sample(uq[:, 0], uq[:, 1])
    port = np.where(uq[:, 2] < 0.5, D1_CHANNEL, D2_CHANNEL)
    for chan in (D1_CHANNEL, D2_CHANNEL):
        at = np.flatnonzero(port == chan)
        emit(chan, qd_idx[at], tq[at], uq[at, 3])

    sync_local = np.arange(-start % config.sync_decimation, count,
                           config.sync_decimation, dtype=np.int64)
    sync_t = (start + sync_local).astype(np.float64) * config.rep_period
    stamps.append((np.floor(sync_t / config.bin) * config.bin).astype(np.int64))
    channels.append(np.full(sync_local.size, SYNC_CHANNEL, dtype=np.int64))

    if config.background_rate > 0.0:
        ub = _lane(config, block, _LANE_BACKGROUND)
        lam = config.background_rate * count * config.rep_period * 1.0e-12
        for chan in (HERALD_CHANNEL, D1_CHANNEL, D2_CHANNEL):
            n_bg = int(ub.poisson(lam))
            t = (start + ub.random(n_bg) * count) * config.rep_period
            stamps.append((np.floor(t / config.bin) * config.bin).astype(np.int64))
            channels.append(np.full(n_bg, chan, dtype=np.int64))

    ch = np.concatenate(channels)
    ts = np.concatenate(stamps)
    order = np.argsort(ts, kind="stable")
    return ch[order], ts[order]


def simulate_run(config: ExperimentConfig) -> TagStream:
    """Generate the tag stream of one acquisition run.

    Deterministic in config (including the seed); the returned stream is
    fully materialized and time ordered.
    """
    n_periods = config.n_periods()
    if n_periods < 1:
        raise ValidationError("duration too short for a single repetition period")
    if (n_periods + 1) * config.rep_period >= 2.0 ** 62:
        raise ValidationError("duration overflows the timestamp range")
    expected = n_periods * (
        config.herald_prob_per_pulse
        * (1.0 + config.spdc_survival + config.qd_click_prob)
        + 1.0 / config.sync_decimation
    ) + 3.0 * config.background_rate * config.duration
    if expected > _MAX_EXPECTED_TAGS:
        raise ValidationError(
            f"expected ~{expected:.2e} tags exceeds the {_MAX_EXPECTED_TAGS:.0e} cap; "
            "reduce duration, rates or probabilities")

    model = _run_model(config)
    n_blocks = -(-n_periods // BLOCK_PERIODS)
    blocks = [_simulate_block(config, model, b, n_periods) for b in range(n_blocks)]
    return TagStream(int(config.rep_period), int(config.bin), lambda: iter(blocks))


# ----------------------------------------------------------------------
# tag file I/O


def write_tags(stream: TagStream, sink) -> None:
    """Write the v1 tag-file format to a path or text file object."""
    own = isinstance(sink, (str, Path))
    f = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        f.write(f"#tagfile v1 rep_ps={stream.rep_ps} bin_ps={stream.bin_ps}\n")
        for ch, ts in stream.blocks():
            pd.DataFrame({"c": ch, "t": ts}).to_csv(
                f, sep="\t", header=False, index=False, lineterminator="\n")
    finally:
        if own:
            f.close()


def read_tags(source) -> TagStream:
    """Open a tag file as a lazily read, re-iterable TagStream.

    Each blocks() pass re-reads the file in bounded-size chunks.  Malformed
    records raise TagFormatError with the byte offset; timestamps that go
    backwards are tolerated but counted and logged as a warning when the
    pass completes.
    """
    path = Path(source)
    try:
        with open(path, "rb") as f:
            header = f.readline()
    except OSError as exc:
        raise TagFormatError(f"cannot read tag file {path}: {exc}") from exc
    m = _HEADER_RE.match(header)
    if m is None:
        raise TagFormatError(
            f"{path}: missing or malformed '#tagfile v1' header", byte_offset=0)
    rep_ps, bin_ps = int(m.group(1)), int(m.group(2))
    return TagStream(rep_ps, bin_ps, lambda: _file_blocks(path, len(header)))


def _file_blocks(path: Path, header_len: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    non_monotone = 0
    last_ts = None
    offset = header_len
    carry = b""
    with open(path, "rb") as f:
        f.seek(header_len)
        while True:
            chunk = f.read(_READ_CHUNK_BYTES)
            if not chunk:
                break
            data = carry + chunk
            cut = data.rfind(b"\n")
            if cut < 0:
                carry = data
                continue
            body, carry = data[: cut + 1], data[cut + 1:]
            ch, ts = _parse_records(body, offset, path)
            offset += len(body)
            if ch.size:
                if last_ts is not None and ts[0] < last_ts:
                    non_monotone += 1
                non_monotone += int(np.sum(np.diff(ts) < 0))
                last_ts = ts[-1]
                yield ch, ts
    if carry:
        ch, ts = _parse_records(carry, offset, path)
        if ch.size:
            if last_ts is not None and ts[0] < last_ts:
                non_monotone += 1
            non_monotone += int(np.sum(np.diff(ts) < 0))
            yield ch, ts
    if non_monotone:
        logger.warning("%s: %d non-monotone timestamps", path, non_monotone)


def _parse_records(body: bytes, offset: int, path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        frame = pd.read_csv(io.BytesIO(body), sep="\t", header=None,
                            names=["channel", "timestamp"], dtype=np.int64,
                            na_filter=False, index_col=False)
    except (ValueError, pd.errors.ParserError):
        _raise_at_bad_record(body, offset, path)
        raise  # unreachable; keeps the control flow obvious
    n_lines = body.count(b"\n") + (0 if body.endswith(b"\n") else 1)
    ch = frame["channel"].to_numpy()
    ts = frame["timestamp"].to_numpy()
    if len(frame) != n_lines or ((ch < 0) | (ch > 3)).any() or (ts < 0).any():
        _raise_at_bad_record(body, offset, path)
    return ch, ts


def _raise_at_bad_record(body: bytes, offset: int, path: Path) -> None:
    lines = body.split(b"\n")
    if body.endswith(b"\n"):
        lines = lines[:-1]
    pos = offset
    for line in lines:
        if not _RECORD_RE.match(line):
            raise TagFormatError(
                f"{path}: malformed tag record at byte {pos}: {line[:40]!r}",
                byte_offset=pos)
        pos += len(line) + 1
    raise TagFormatError(f"{path}: malformed tag data near byte {offset}",
                         byte_offset=offset)
