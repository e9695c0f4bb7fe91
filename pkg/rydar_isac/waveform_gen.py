"""ISAC transmit waveforms with instantaneous-bandwidth bookkeeping.

All samples are complex baseband relative to the receiver tuning center. The center
starts at ``Waveform.carrier`` and moves at every ``retune_schedule`` entry.
"""

import dataclasses
import enum
import math
from dataclasses import (
    dataclass,
    field,
)
from typing import (
    List,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    ConfigurationError,
    DomainError,
    InstantaneousBandwidthError,
    ResonanceError,
    SamplingError,
)

DEFAULT_BANDWIDTH_LIMIT_HZ = 10.0e6
MIN_OVERSAMPLING = 2.5
OCCUPANCY_WINDOW = 64
OCCUPANCY_HOP = 32
OCCUPANCY_POWER_FRACTION = 0.99

_REL_TOL = 1e-9


class WaveformKind(str, enum.Enum):
    LFM = "lfm"
    FSK = "fsk"
    PSK_LFM = "psk_lfm"
    FREQ_HOP = "freq_hop"
    TONE = "tone"


@dataclass(eq=False)
class Waveform:
    sample_rate: float
    carrier: float
    samples: np.ndarray
    inst_bandwidth: float
    kind: WaveformKind
    retune_schedule: List[Tuple[float, float]] = field(default_factory=list)
    # (start time, absolute frequency) of each constant-frequency segment of a hop waveform
    tone_schedule: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        self.kind = WaveformKind(self.kind)
        if self.samples.ndim != 1:
            raise DomainError("waveform samples must be one-dimensional")
        if not self.sample_rate > 0:
            raise SamplingError(f"sample rate must be positive, got {self.sample_rate}")
        if self.inst_bandwidth < 0:
            raise DomainError(f"instantaneous bandwidth must be non-negative, got {self.inst_bandwidth}")
        if self.sample_rate * (1 + _REL_TOL) < MIN_OVERSAMPLING * self.inst_bandwidth:
            raise SamplingError(
                f"sample rate {self.sample_rate} Hz is below {MIN_OVERSAMPLING} x instantaneous bandwidth "
                f"{self.inst_bandwidth} Hz"
            )
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("waveform samples must be finite")
        times = [t for t, _ in self.retune_schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("retune schedule times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def times(self, n: Optional[int] = None) -> np.ndarray:
        return np.arange(len(self.samples) if n is None else n) / self.sample_rate

    def _piecewise(self, schedule: Sequence[Tuple[float, float]], initial: float, n: Optional[int]) -> np.ndarray:
        t = self.times(n)
        values = np.full(t.shape, float(initial))
        for start, value in schedule:
            values[t >= start - 0.5 / self.sample_rate] = value
        return values

    def center_frequencies(self, n: Optional[int] = None) -> np.ndarray:
        """Absolute tuning center in force at each sample (padded with the last center up to ``n``)."""
        return self._piecewise(self.retune_schedule, self.carrier, n)

    def reference_frequencies(self, n: Optional[int] = None) -> np.ndarray:
        """Per-sample absolute frequency of the hop segment, or the tuning center without a tone schedule."""
        if not self.tone_schedule:
            return self.center_frequencies(n)
        return self._piecewise(self.tone_schedule, self.tone_schedule[0][1], n)

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2)) if len(self.samples) else 0.0

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return dataclasses.replace(self, samples=samples)


@dataclass(frozen=True)
class HopPlan:
    n_steps: int
    step_spacing: float
    dwell: float
    step_bandwidth: float = 0.0
    start_frequency: float = 0.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError(f"hop plan needs at least one step, got {self.n_steps}")
        if not self.step_spacing > 0:
            raise ConfigurationError(f"step spacing must be positive, got {self.step_spacing}")
        if not self.dwell > 0:
            raise ConfigurationError(f"dwell must be positive, got {self.dwell}")
        if self.step_bandwidth < 0:
            raise ConfigurationError(f"step bandwidth must be non-negative, got {self.step_bandwidth}")

    @property
    def synthesized_bandwidth(self) -> float:
        return self.n_steps * self.step_spacing

    @property
    def duration(self) -> float:
        return self.n_steps * self.dwell

    @property
    def step_frequencies(self) -> np.ndarray:
        return self.start_frequency + self.step_spacing * np.arange(self.n_steps)

    def samples_per_dwell(self, fs: float) -> int:
        return samples_for(self.dwell, fs, "dwell")


def samples_for(duration: float, fs: float, what: str = "duration") -> int:
    """Whole number of samples spanning ``duration``; raises SamplingError when it is not integral."""
    exact = duration * fs
    n = int(round(exact))
    if n < 1 or abs(exact - n) > 1e-6 * max(1.0, exact):
        raise SamplingError(f"{what} {duration} s is not a whole number of samples at {fs} Hz")
    return n


def _chirp_phase(bandwidth: float, duration: float, t: np.ndarray) -> np.ndarray:
    return math.pi * (bandwidth / duration) * t**2 - math.pi * bandwidth * t


def gen_lfm(B: float, T: float, fs: float, carrier: float = 0.0) -> Waveform:
    """Linear chirp sweeping -B/2 to +B/2 over T; B = 0 degenerates to a tone."""
    if B < 0:
        raise DomainError(f"sweep bandwidth must be non-negative, got {B}")
    if not T > 0:
        raise DomainError(f"duration must be positive, got {T}")
    if fs * (1 + _REL_TOL) < MIN_OVERSAMPLING * B:
        raise SamplingError(f"sample rate {fs} Hz is below {MIN_OVERSAMPLING} x sweep bandwidth {B} Hz")
    n = int(round(T * fs))
    if n < 1:
        raise SamplingError(f"duration {T} s holds no samples at {fs} Hz")
    t = np.arange(n) / fs
    samples = np.exp(1j * _chirp_phase(B, T, t))
    return Waveform(sample_rate=fs, carrier=carrier, samples=samples, inst_bandwidth=B, kind=WaveformKind.LFM)


def gen_tone(offset: float, duration: float, fs: float, carrier: float = 0.0) -> Waveform:
    n = int(round(duration * fs))
    if n < 1:
        raise SamplingError(f"duration {duration} s holds no samples at {fs} Hz")
    samples = np.exp(2j * math.pi * offset * np.arange(n) / fs)
    return Waveform(
        sample_rate=fs, carrier=carrier, samples=samples, inst_bandwidth=2 * abs(offset), kind=WaveformKind.TONE
    )


def _is_power_of_two(m: int) -> bool:
    return m >= 2 and (m & (m - 1)) == 0


def gray_encode(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return values ^ (values >> 1)


def gray_decode(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    values = codes.copy()
    shift = codes >> 1
    while np.any(shift):
        values ^= shift
        shift >>= 1
    return values


def bits_to_symbols(bits: Sequence[int], M: int) -> np.ndarray:
    """Tone indices for a bit sequence, MSB first, Gray mapped so adjacent tones differ in one bit."""
    bits = np.asarray(bits, dtype=np.int64)
    k = int(math.log2(M))
    if bits.size % k:
        raise ConfigurationError(f"{bits.size} bits do not fill whole {M}-ary symbols")
    weights = 1 << np.arange(k - 1, -1, -1)
    values = bits.reshape(-1, k) @ weights
    return gray_decode(values)


def symbols_to_bits(symbols: Sequence[int], M: int) -> np.ndarray:
    k = int(math.log2(M))
    values = gray_encode(np.asarray(symbols, dtype=np.int64))
    shifts = np.arange(k - 1, -1, -1)
    return ((values[:, np.newaxis] >> shifts) & 1).astype(np.uint8).reshape(-1)


def fsk_tone_offsets(M: int, tone_spacing: float) -> np.ndarray:
    return (np.arange(M) - (M - 1) / 2) * tone_spacing


def samples_per_symbol(fs: float, symbol_rate: float) -> int:
    if not symbol_rate > 0:
        raise DomainError(f"symbol rate must be positive, got {symbol_rate}")
    return samples_for(1.0 / symbol_rate, fs, "symbol period")


def gen_fsk(
    bits: Sequence[int],
    M: int,
    symbol_rate: float,
    tone_spacing: Optional[float],
    fs: float,
    carrier: float = 0.0,
    allow_nonorthogonal: bool = False,
    hop_frequencies: Optional[Sequence[float]] = None,
    symbols_per_hop: Optional[int] = None,
) -> Waveform:
    """M-FSK burst, one constant tone per symbol.

    With ``hop_frequencies`` the burst hops its carrier every ``symbols_per_hop``
    symbols; each hop is announced as a retune so the baseband stays centered.
    """
    if not _is_power_of_two(M):
        raise ConfigurationError(f"alphabet size must be a power of two, got {M}")
    tone_spacing = symbol_rate if tone_spacing is None else tone_spacing
    if tone_spacing < symbol_rate * (1 - _REL_TOL) and not allow_nonorthogonal:
        raise ConfigurationError(
            f"tone spacing {tone_spacing} Hz is below the symbol rate {symbol_rate} sym/s; tones are not orthogonal"
        )
    symbols = bits_to_symbols(bits, M)
    if symbols.size == 0:
        raise ConfigurationError("FSK burst needs at least one symbol")
    sps = samples_per_symbol(fs, symbol_rate)
    offsets = fsk_tone_offsets(M, tone_spacing)
    t = np.arange(symbols.size * sps) / fs
    samples = np.exp(2j * math.pi * np.repeat(offsets[symbols], sps) * t)

    retunes: List[Tuple[float, float]] = []
    tones: List[Tuple[float, float]] = []
    if hop_frequencies:
        if not symbols_per_hop or symbols_per_hop < 1:
            raise ConfigurationError("symbols_per_hop must be a positive integer when hopping")
        hops = list(hop_frequencies)
        carrier = hops[0]
        for hop_index, first_symbol in enumerate(range(0, symbols.size, symbols_per_hop)):
            start = first_symbol / symbol_rate
            frequency = hops[hop_index % len(hops)]
            tones.append((start, frequency))
            if hop_index and frequency != tones[-2][1]:
                retunes.append((start, frequency))
    return Waveform(
        sample_rate=fs,
        carrier=carrier,
        samples=samples,
        inst_bandwidth=(M - 1) * tone_spacing + 2 * symbol_rate,
        kind=WaveformKind.FSK,
        retune_schedule=retunes,
        tone_schedule=tones,
    )


def psk_chip_signs(bits: Sequence[int], chips_per_bit: int, n_samples: int) -> np.ndarray:
    """+1/-1 per sample for BPSK chips spread evenly over ``n_samples``."""
    if chips_per_bit < 1:
        raise ConfigurationError(f"chips_per_bit must be positive, got {chips_per_bit}")
    chips = np.repeat(np.asarray(bits, dtype=np.int64), chips_per_bit)
    chip_index = (np.arange(n_samples) * chips.size) // n_samples
    return 1.0 - 2.0 * chips[chip_index]


def gen_psk_lfm(
    bits: Sequence[int], chips_per_bit: int, B: float, T: float, fs: float, carrier: float = 0.0
) -> Waveform:
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ConfigurationError("PSK-LFM needs at least one bit")
    chirp = gen_lfm(B, T, fs, carrier)
    signs = psk_chip_signs(bits, chips_per_bit, len(chirp))
    return dataclasses.replace(chirp, samples=chirp.samples * signs, kind=WaveformKind.PSK_LFM)


def wipe_psk_phase(samples: np.ndarray, bits: Sequence[int], chips_per_bit: int) -> np.ndarray:
    """Remove known BPSK chip flips so the reception correlates against the clean chirp."""
    samples = np.asarray(samples)
    return samples * psk_chip_signs(bits, chips_per_bit, len(samples))


def gen_freq_hop(plan: HopPlan, fs: float, bandwidth_limit: float = DEFAULT_BANDWIDTH_LIMIT_HZ) -> Waveform:
    """Stepped-frequency burst: one dwell per step, each a chirp of ``plan.step_bandwidth`` (a tone if 0).

    The receiver retunes to a step whenever it would fall outside the +/- limit/2
    window around the current center.
    """
    if plan.step_bandwidth > bandwidth_limit:
        raise ConfigurationError(
            f"step bandwidth {plan.step_bandwidth} Hz exceeds the instantaneous bandwidth limit {bandwidth_limit} Hz"
        )
    nd = plan.samples_per_dwell(fs)
    local_t = np.arange(nd) / fs
    step_chirp = np.exp(1j * _chirp_phase(plan.step_bandwidth, plan.dwell, local_t))
    frequencies = plan.step_frequencies
    center = frequencies[0]
    retunes: List[Tuple[float, float]] = []
    tones: List[Tuple[float, float]] = []
    offsets = np.empty(plan.n_steps)
    for i, frequency in enumerate(frequencies):
        start = i * plan.dwell
        if abs(frequency - center) + plan.step_bandwidth / 2 > bandwidth_limit / 2:
            center = frequency
            retunes.append((start, float(center)))
        offsets[i] = frequency - center
        tones.append((start, float(frequency)))
    t = np.arange(plan.n_steps * nd) / fs
    samples = np.tile(step_chirp, plan.n_steps) * np.exp(2j * math.pi * np.repeat(offsets, nd) * t)
    return Waveform(
        sample_rate=fs,
        carrier=float(frequencies[0]),
        samples=samples,
        inst_bandwidth=float(plan.step_bandwidth + 2 * np.max(np.abs(offsets))),
        kind=WaveformKind.FREQ_HOP,
        retune_schedule=retunes,
        tone_schedule=tones,
    )


@dataclass(eq=False)
class BandwidthReport:
    limit: float
    window_starts: np.ndarray
    occupied: np.ndarray
    required: np.ndarray
    violation: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.violation is None

    @property
    def max_occupied(self) -> float:
        return float(np.max(self.occupied)) if self.occupied.size else 0.0

    @property
    def max_required(self) -> float:
        return float(np.max(self.required)) if self.required.size else 0.0

    def raise_for_violation(self) -> None:
        if self.violation == "resonance":
            raise ResonanceError(
                f"signal reaches {self.max_required / 2} Hz from the tuning center without a retune "
                f"(limit {self.limit} Hz)"
            )
        if self.violation == "bandwidth":
            raise InstantaneousBandwidthError(
                f"signal needs {max(self.max_occupied, self.max_required)} Hz of instantaneous bandwidth, "
                f"receiver limit is {self.limit} Hz"
            )


def _power_band(power: np.ndarray, freqs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    total = power.sum(axis=1, keepdims=True)
    cdf = np.cumsum(power, axis=1) / np.where(total > 0, total, 1.0)
    tail = (1 - OCCUPANCY_POWER_FRACTION) / 2
    lo = freqs[np.argmax(cdf >= tail, axis=1)]
    hi = freqs[np.argmax(cdf >= 1 - tail, axis=1)]
    silent = total[:, 0] == 0
    lo[silent] = 0.0
    hi[silent] = 0.0
    return lo, hi


def check_instantaneous_bandwidth(w: Waveform, limit: float = DEFAULT_BANDWIDTH_LIMIT_HZ) -> BandwidthReport:
    """Short-time 99%-power occupancy of ``w`` against the receiver limit.

    Each 64-sample window (hop 32) yields its power band [lo, hi] around the tuning
    center; the band must fit in +/- limit/2. Windows straddling a retune are skipped.
    """
    x = w.samples
    win = min(OCCUPANCY_WINDOW, len(x))
    if win == 0:
        empty = np.empty(0)
        return BandwidthReport(limit=limit, window_starts=empty, occupied=empty, required=empty)
    starts = np.arange(0, len(x) - win + 1, OCCUPANCY_HOP)
    retune_samples = [int(round(t * w.sample_rate)) for t, _ in w.retune_schedule]
    keep = np.array([not any(s < r < s + win for r in retune_samples) for s in starts], dtype=bool)
    starts = starts[keep]
    frames = sliding_window_view(x, win)[starts]
    power = np.abs(np.fft.fftshift(np.fft.fft(frames, axis=1), axes=1)) ** 2
    freqs = np.fft.fftshift(np.fft.fftfreq(win, 1.0 / w.sample_rate))
    lo, hi = _power_band(power, freqs)
    occupied = hi - lo
    required = 2 * np.maximum(np.abs(lo), np.abs(hi))
    violation = None
    if occupied.size and np.max(occupied) > limit:
        violation = "bandwidth"
    elif required.size and np.max(required) > limit:
        violation = "resonance" if w.kind == WaveformKind.FREQ_HOP else "bandwidth"
    return BandwidthReport(
        limit=limit, window_starts=starts, occupied=occupied, required=required, violation=violation
    )
