"""Range estimation from the atomic readout."""

import enum
import logging
import math
from dataclasses import (
    dataclass,
    field,
)
from pathlib import Path
from typing import (
    List,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np
from scipy.signal import (
    correlate,
    correlation_lags,
    find_peaks,
)
from scipy.signal.windows import hann

from .coherent_frontend import IqTrace
from .errors import (
    ConfigurationError,
    DomainError,
    LengthMismatchError,
)
from .util import (
    SPEED_OF_LIGHT,
    write_csv,
)
from .waveform_gen import (
    HopPlan,
    Waveform,
)

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 8.0
DEFAULT_UPSAMPLE = 8
DEFAULT_ZERO_PAD = 32
REPORT_HEADER = ("trial", "seed", "truth_m", "est_m", "err_m", "method")


class RangeMethod(str, enum.Enum):
    MATCHED_FILTER = "matched_filter"
    BEAT_FFT = "beat_fft"
    STEPPED_SYNTH = "stepped_synth"


@dataclass(frozen=True)
class RangeEstimate:
    range_m: float
    peak_metric: float
    method: RangeMethod
    ambiguous: bool = False

    def __post_init__(self):
        if not self.range_m >= 0:
            raise DomainError(f"range estimate must be non-negative, got {self.range_m}")
        if not self.peak_metric >= 0:
            raise DomainError(f"peak metric must be non-negative, got {self.peak_metric}")


def _parabolic_offset(left: float, center: float, right: float) -> float:
    denominator = left - 2 * center + right
    if denominator == 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denominator, -0.5, 0.5))


def _check_reception(rx: IqTrace, ref: Waveform) -> None:
    if len(ref) == 0:
        raise ConfigurationError("reference waveform is empty")
    if len(rx) < len(ref):
        raise ConfigurationError(f"reception ({len(rx)} samples) is shorter than the reference ({len(ref)})")


def _correlation(rx: IqTrace, ref: Waveform) -> Tuple[np.ndarray, np.ndarray]:
    _check_reception(rx, ref)
    corr = correlate(rx.samples, ref.samples, mode="full", method="fft")
    lags = correlation_lags(len(rx), len(ref), mode="full")
    causal = lags >= 0
    return np.abs(corr[causal]), lags[causal]


def _delay_to_range(delay: float) -> float:
    return max(SPEED_OF_LIGHT * delay / 2, 0.0)


def matched_filter_range(
    rx: IqTrace, ref: Waveform, fs: Optional[float] = None, threshold: float = DEFAULT_THRESHOLD
) -> Optional[RangeEstimate]:
    """Delay of the strongest correlation peak, or None when it does not clear ``threshold`` x median."""
    fs = rx.sample_rate if fs is None else fs
    magnitude, lags = _correlation(rx, ref)
    peak = int(np.argmax(magnitude))
    if magnitude[peak] < threshold * np.median(magnitude):
        return None
    offset = 0.0
    if 0 < peak < len(magnitude) - 1:
        offset = _parabolic_offset(magnitude[peak - 1], magnitude[peak], magnitude[peak + 1])
    return RangeEstimate(
        range_m=_delay_to_range((lags[peak] + offset) / fs),
        peak_metric=float(magnitude[peak]),
        method=RangeMethod.MATCHED_FILTER,
    )


def _band_limited(spectrum: np.ndarray, upsample: int) -> np.ndarray:
    """Inverse DFT of ``spectrum`` zero-padded at Nyquist: the sequence interpolated ``upsample`` times."""
    nfft = spectrum.size
    half = nfft // 2
    padded = np.zeros(nfft * upsample, dtype=np.complex128)
    padded[:half] = spectrum[:half]
    padded[padded.size - (nfft - half) :] = spectrum[half:]
    return np.fft.ifft(padded) * upsample


def main_lobe_width(auto: np.ndarray) -> float:
    """Full -3 dB width of an autocorrelation main lobe centered at index 0, in its own samples."""
    magnitude = np.abs(auto)
    level = magnitude[0] / math.sqrt(2.0)
    below = np.flatnonzero(magnitude[: max(2, auto.size // 2)] < level)
    if below.size == 0:
        raise ConfigurationError("reference autocorrelation has no main lobe")
    k = int(below[0])
    frac = (magnitude[k - 1] - level) / (magnitude[k - 1] - magnitude[k])
    return 2.0 * (k - 1 + frac)


@dataclass(frozen=True)
class PairFit:
    """Best one-atom and two-atom least-squares fits found by exhaustive search."""

    first: int
    second: int
    amplitudes: np.ndarray
    residual_one: float
    residual_two: float


def fit_pair(y: np.ndarray, atoms: np.ndarray) -> PairFit:
    """Fit ``y`` with one and with two columns of ``atoms`` (complex amplitudes free), trying every column pair."""
    gram = atoms.conj().T @ atoms
    proj = atoms.conj().T @ y
    energy = float(np.vdot(y, y).real)
    diag = np.real(np.diag(gram))
    power = np.abs(proj) ** 2
    residual_one = energy - float(np.max(power / diag))
    det = np.outer(diag, diag) - np.abs(gram) ** 2
    captured = diag[None, :] * power[:, None] + diag[:, None] * power[None, :]
    captured -= 2 * np.real(np.conj(proj)[:, None] * gram * proj[None, :])
    usable = np.triu(det > 1e-9 * np.outer(diag, diag), k=1)
    if not np.any(usable):
        raise ConfigurationError("pair fit needs at least two distinguishable atoms")
    captured = np.where(usable, captured / np.where(usable, det, 1.0), -np.inf)
    first, second = (int(k) for k in np.unravel_index(int(np.argmax(captured)), captured.shape))
    pair = [first, second]
    amplitudes = np.linalg.solve(gram[np.ix_(pair, pair)], proj[pair])
    return PairFit(first, second, amplitudes, residual_one, energy - float(captured[first, second]))


def _group_peaks(peaks: np.ndarray, gap: float) -> List[np.ndarray]:
    groups: List[List[int]] = []
    for peak in peaks:
        if groups and peak - groups[-1][-1] < gap:
            groups[-1].append(int(peak))
        else:
            groups.append([int(peak)])
    return [np.asarray(group) for group in groups]


def _split_group(
    corr: np.ndarray, auto: np.ndarray, group: np.ndarray, width: float, rel_height: float
) -> List[Tuple[int, complex]]:
    reach = int(math.ceil(width))
    candidates = np.arange(max(int(group[0]) - reach, 0), int(group[-1]) + reach + 1)
    window = np.arange(int(group[0]) - 2 * reach, int(group[-1]) + 2 * reach + 1)
    period = corr.size
    y = corr[window % period]
    atoms = auto[(window[:, None] - candidates[None, :]) % period]
    fit = fit_pair(y, atoms)
    weak, strong = sorted(np.abs(fit.amplitudes))
    separation = candidates[fit.second] - candidates[fit.first]
    if separation < width or weak < rel_height * strong or fit.residual_two > 0.5 * fit.residual_one:
        return []
    return [
        (int(candidates[fit.first]), complex(fit.amplitudes[0])),
        (int(candidates[fit.second]), complex(fit.amplitudes[1])),
    ]


def detect_targets(
    rx: IqTrace,
    ref: Waveform,
    fs: Optional[float] = None,
    rel_prominence: float = 0.05,
    rel_height: float = 0.5,
    threshold: float = DEFAULT_THRESHOLD,
    upsample: int = DEFAULT_UPSAMPLE,
) -> List[RangeEstimate]:
    """Matched-filter targets within ``rel_height`` of the strongest, sorted by range.

    Peaks are picked on the correlation interpolated ``upsample`` times, and peaks less
    than 1.5 main-lobe widths apart form a group. Each group is fitted with one and with
    two delayed copies of the reference autocorrelation, every candidate delay pair
    tried. It is reported as two targets when the pair fit halves the residual with
    amplitudes within ``rel_height`` of each other, provided the fitted delays are at
    least one -3 dB main-lobe width apart; in-phase echoes c / 2B apart still resolve.
    Otherwise the group's strongest peak is the target.
    """
    fs = rx.sample_rate if fs is None else fs
    if upsample < 1:
        raise ConfigurationError(f"upsampling factor must be at least 1, got {upsample}")
    _check_reception(rx, ref)
    nfft = 1 << (len(rx) + len(ref) - 2).bit_length()
    ref_spectrum = np.fft.fft(ref.samples, nfft)
    corr = _band_limited(np.fft.fft(rx.samples, nfft) * np.conj(ref_spectrum), upsample)
    auto = _band_limited(np.abs(ref_spectrum) ** 2, upsample)
    width = main_lobe_width(auto)
    magnitude = np.abs(corr[: (len(rx) - 1) * upsample + 1])
    strongest = float(np.max(magnitude))
    height = max(threshold * float(np.median(magnitude)), rel_height * strongest)
    peaks, _ = find_peaks(magnitude, height=height, prominence=rel_prominence * strongest)
    step = 1.0 / (upsample * fs)
    estimates = []
    for group in _group_peaks(peaks, 1.5 * width):
        split = _split_group(corr, auto, group, width, rel_height)
        if split:
            for lag, amplitude in split:
                estimates.append(
                    RangeEstimate(
                        range_m=_delay_to_range(lag * step),
                        peak_metric=abs(amplitude) * float(np.abs(auto[0])),
                        method=RangeMethod.MATCHED_FILTER,
                    )
                )
            continue
        peak = int(group[np.argmax(magnitude[group])])
        offset = 0.0
        if 0 < peak < len(magnitude) - 1:
            offset = _parabolic_offset(magnitude[peak - 1], magnitude[peak], magnitude[peak + 1])
        estimates.append(
            RangeEstimate(
                range_m=_delay_to_range((peak + offset) * step),
                peak_metric=float(magnitude[peak]),
                method=RangeMethod.MATCHED_FILTER,
            )
        )
    return sorted(estimates, key=lambda e: e.range_m)


def dechirp(rx: IqTrace, ref: Waveform) -> IqTrace:
    """Beat signal rx * conj(ref); a delay tau becomes a tone at -chirp_rate * tau."""
    n = min(len(rx), len(ref))
    return IqTrace(
        sample_rate=rx.sample_rate,
        samples=rx.samples[:n] * np.conj(ref.samples[:n]),
        valid=rx.valid[:n],
    )


def beat_fft_range(
    rx: IqTrace,
    chirp_rate: float,
    fs: Optional[float] = None,
    threshold: float = DEFAULT_THRESHOLD,
    zero_pad: int = 8,
) -> Optional[RangeEstimate]:
    if not chirp_rate > 0:
        raise DomainError(f"chirp rate must be positive, got {chirp_rate}")
    fs = rx.sample_rate if fs is None else fs
    n = len(rx)
    if n == 0:
        raise ConfigurationError("beat signal is empty")
    nfft = zero_pad * (1 << max(0, (n - 1).bit_length()))
    spectrum = np.fft.fftshift(np.fft.fft(rx.samples * hann(n, sym=False), nfft))
    freqs = np.fft.fftshift(np.fft.fftfreq(nfft, 1.0 / fs))
    magnitude = np.abs(spectrum)
    peak = int(np.argmax(magnitude))
    if magnitude[peak] < threshold * np.median(magnitude):
        return None
    offset = 0.0
    if 0 < peak < nfft - 1:
        offset = _parabolic_offset(magnitude[peak - 1], magnitude[peak], magnitude[peak + 1])
    beat = abs(freqs[peak] + offset * fs / nfft)
    return RangeEstimate(
        range_m=_delay_to_range(beat / chirp_rate),
        peak_metric=float(magnitude[peak]),
        method=RangeMethod.BEAT_FFT,
    )


def unambiguous_range(plan: HopPlan) -> float:
    return SPEED_OF_LIGHT / (2 * plan.step_spacing)


def stepped_synthesis_range(
    per_step_iq: Sequence[complex],
    plan: HopPlan,
    zero_pad: int = DEFAULT_ZERO_PAD,
    expected_max_range: Optional[float] = None,
) -> RangeEstimate:
    """Synthetic range profile from one coherent sample per hop step.

    Step ``i`` carries exp(-j 4 pi R f_i / c); the zero-padded inverse DFT across steps
    peaks at R modulo c / (2 step_spacing). A peak within half a resolution cell of the
    window end is the wrapped image of a target near 0 m and is folded back to 0. A scene
    extending past the window is flagged ambiguous.
    """
    z = np.asarray(per_step_iq, dtype=np.complex128)
    if z.size < 2:
        raise ConfigurationError("stepped synthesis needs at least two steps")
    if z.size != plan.n_steps:
        raise LengthMismatchError(f"{z.size} step samples for a {plan.n_steps}-step plan")
    nfft = zero_pad * z.size
    profile = np.abs(np.fft.ifft(z, nfft)) * nfft / z.size
    peak = int(np.argmax(profile))
    offset = _parabolic_offset(profile[(peak - 1) % nfft], profile[peak], profile[(peak + 1) % nfft])
    window = unambiguous_range(plan)
    range_m = ((peak + offset) % nfft) * window / nfft
    if range_m > window - range_resolution(plan.synthesized_bandwidth) / 2:
        range_m = max(range_m - window, 0.0)
    ambiguous = expected_max_range is not None and expected_max_range > window
    return RangeEstimate(
        range_m=float(range_m),
        peak_metric=float(profile[peak]),
        method=RangeMethod.STEPPED_SYNTH,
        ambiguous=ambiguous,
    )


def collect_step_samples(trace: IqTrace, tx: Waveform, plan: HopPlan) -> np.ndarray:
    """One coherent sample per step: mean of trace * conj(tx) over the valid samples of its dwell."""
    nd = plan.samples_per_dwell(trace.sample_rate)
    n = min(len(trace), len(tx))
    product = trace.samples[:n] * np.conj(tx.samples[:n])
    steps = np.empty(plan.n_steps, dtype=np.complex128)
    for i in range(plan.n_steps):
        window = slice(i * nd, min((i + 1) * nd, n))
        valid = trace.valid[window]
        if not np.any(valid):
            raise ConfigurationError(f"hop step {i} has no valid samples; dwell is shorter than the retune latency")
        steps[i] = np.mean(product[window][valid])
    return steps


def range_resolution(synth_bandwidth: float) -> float:
    if not synth_bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {synth_bandwidth}")
    return SPEED_OF_LIGHT / (2 * synth_bandwidth)


def stepped_range_bound(snr_step: float, plan: HopPlan) -> float:
    """Cramér-Rao std (m) of the stepped-synthesis range for per-step SNR |z|^2 / E|noise|^2."""
    if not snr_step > 0:
        raise DomainError(f"per-step SNR must be positive, got {snr_step}")
    n = plan.n_steps
    if n < 2:
        raise ConfigurationError("range bound needs at least two steps")
    return SPEED_OF_LIGHT / (4 * math.pi * plan.step_spacing) * math.sqrt(6.0 / (snr_step * n * (n * n - 1)))


def snr_for_range_bound(bound_m: float, plan: HopPlan) -> float:
    """Per-step SNR at which :func:`stepped_range_bound` equals ``bound_m``."""
    if not bound_m > 0:
        raise DomainError(f"range bound must be positive, got {bound_m}")
    n = plan.n_steps
    scale = SPEED_OF_LIGHT / (4 * math.pi * plan.step_spacing)
    return 6.0 * scale**2 / (bound_m**2 * n * (n * n - 1))


def radar_rmse(truths: Sequence[float], estimates: Sequence[float]) -> float:
    truths = np.asarray(truths, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    if truths.shape != estimates.shape:
        raise LengthMismatchError(f"{truths.size} truths against {estimates.size} estimates")
    if truths.size == 0:
        raise DomainError("RMSE needs at least one trial")
    return float(np.sqrt(np.mean((estimates - truths) ** 2)))


@dataclass(frozen=True)
class RadarTrial:
    trial: int
    seed: int
    truth_m: float
    estimate: Optional[RangeEstimate]

    @property
    def err_m(self) -> float:
        return math.nan if self.estimate is None else self.estimate.range_m - self.truth_m

    def as_row(self) -> Tuple:
        est = None if self.estimate is None else self.estimate.range_m
        method = "" if self.estimate is None else self.estimate.method.value
        return (self.trial, self.seed, self.truth_m, est, self.err_m, method)


@dataclass
class RadarReport:
    trials: List[RadarTrial] = field(default_factory=list)
    resolution_m: float = math.nan

    @property
    def seeds(self) -> List[int]:
        return [t.seed for t in self.trials]

    @property
    def detected(self) -> List[RadarTrial]:
        return [t for t in self.trials if t.estimate is not None]

    @property
    def n_missed(self) -> int:
        return len(self.trials) - len(self.detected)

    @property
    def rmse_m(self) -> float:
        detected = self.detected
        if not detected:
            return math.nan
        estimates = [t.estimate.range_m for t in detected]  # type: ignore[union-attr]
        return radar_rmse([t.truth_m for t in detected], estimates)

    def rows(self) -> List[Tuple]:
        return [t.as_row() for t in sorted(self.trials, key=lambda t: t.trial)]

    def summary_row(self) -> Tuple:
        return ("RMSE", "", "", "", self.rmse_m, "")

    def write_csv(self, path: Path) -> Path:
        return write_csv(path, REPORT_HEADER, self.rows() + [self.summary_row()])
