"""Air interface: multipath delay/Doppler/gain, AWGN, monostatic geometry and detuning selectivity."""

import math
from dataclasses import dataclass
from typing import (
    Iterator,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from scipy.signal import oaconvolve
from scipy.special import i0

from .errors import (
    ConfigurationError,
    DomainError,
)
from .util import SPEED_OF_LIGHT
from .waveform_gen import Waveform

DELAY_TAPS = 64
KAISER_BETA = 14.0
# tap offsets relative to the integer delay: -31 .. 32
_TAP_OFFSETS = np.arange(DELAY_TAPS) - (DELAY_TAPS // 2 - 1)

RngLike = Union[None, int, np.random.Generator]


@dataclass(frozen=True)
class Path:
    delay: float
    doppler: float = 0.0
    gain: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise DomainError(f"path delay must be finite and non-negative, got {self.delay}")
        if not (math.isfinite(self.gain) and self.gain >= 0):
            raise DomainError(f"path gain must be finite and non-negative, got {self.gain}")
        if not math.isfinite(self.doppler):
            raise DomainError(f"path doppler must be finite, got {self.doppler}")


@dataclass(frozen=True)
class PathSet:
    paths: Tuple[Path, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))

    @classmethod
    def monostatic(cls, ranges_m: Sequence[float], gains: Optional[Sequence[float]] = None) -> "PathSet":
        gains = [1.0] * len(ranges_m) if gains is None else list(gains)
        if len(gains) != len(ranges_m):
            raise ConfigurationError("need one gain per target range")
        return cls(tuple(Path(delay=round_trip_delay(r), gain=g) for r, g in zip(ranges_m, gains)))

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[Path]:
        return iter(self.paths)

    @property
    def max_delay(self) -> float:
        return max((p.delay for p in self.paths), default=0.0)


@dataclass(frozen=True)
class SelectivityProfile:
    """Receiver sensitivity versus detuning offset, piecewise linear and clamped outside the knots."""

    knots: Tuple[Tuple[float, float], ...] = ((0.0, 1.0),)

    def __post_init__(self):
        knots = tuple((float(f), float(s)) for f, s in self.knots)
        if not knots:
            raise ConfigurationError("selectivity profile needs at least one knot")
        offsets = [f for f, _ in knots]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ConfigurationError("selectivity knots must be sorted by strictly increasing detuning")
        if any(not s > 0 for _, s in knots):
            raise ConfigurationError("selectivity scales must be positive")
        object.__setattr__(self, "knots", knots)

    @classmethod
    def flat(cls) -> "SelectivityProfile":
        return cls()

    def scale_at(self, offset: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        xs, ys = zip(*self.knots)
        return np.interp(offset, xs, ys)


def round_trip_delay(range_m: float) -> float:
    if range_m < 0:
        raise DomainError(f"range must be non-negative, got {range_m}")
    return 2.0 * range_m / SPEED_OF_LIGHT


def _kaiser(x: np.ndarray, half_width: float, beta: float) -> np.ndarray:
    r = np.clip(x / half_width, -1.0, 1.0)
    return i0(beta * np.sqrt(1.0 - r * r)) / i0(beta)


def delay_taps(fraction: float) -> np.ndarray:
    """64-tap Kaiser-windowed sinc for a sub-sample delay ``fraction`` in [0, 1), unit DC gain."""
    x = _TAP_OFFSETS - fraction
    h = np.sinc(x) * _kaiser(x, DELAY_TAPS / 2, KAISER_BETA)
    return h / np.sum(h)


def fractional_delay(x: np.ndarray, delay_samples: float, n_out: int) -> np.ndarray:
    """``x`` delayed by ``delay_samples`` (possibly fractional), zero outside, length ``n_out``."""
    if delay_samples < 0:
        raise DomainError(f"delay must be non-negative, got {delay_samples}")
    x = np.asarray(x, dtype=np.complex128)
    out = np.zeros(n_out, dtype=np.complex128)
    whole = int(math.floor(delay_samples))
    fraction = delay_samples - whole
    if fraction < 1e-12 or fraction > 1 - 1e-12:
        whole = int(round(delay_samples))
        stop = min(n_out, whole + len(x))
        if stop > whole:
            out[whole:stop] = x[: stop - whole]
        return out
    full = oaconvolve(x, delay_taps(fraction))
    # out[t] = full[t - whole + 31]
    lead = DELAY_TAPS // 2 - 1 - whole
    first = max(0, -lead)
    last = min(n_out, len(full) - lead)
    if last > first:
        out[first:last] = full[first + lead : last + lead]
    return out


def _awgn(n: int, sigma: float, rng: RngLike) -> np.ndarray:
    generator = np.random.default_rng(rng)
    return sigma * (generator.standard_normal(n) + 1j * generator.standard_normal(n))


def add_awgn(w: Waveform, sigma: float, rng: RngLike = None) -> Waveform:
    """Complex white Gaussian noise with per-component std ``sigma``."""
    if not sigma >= 0:
        raise DomainError(f"noise std must be non-negative, got {sigma}")
    if sigma == 0:
        return w.with_samples(w.samples.copy())
    return w.with_samples(w.samples + _awgn(len(w), sigma, rng))


def propagate(tx: Waveform, paths: PathSet, awgn_sigma: float = 0.0, rng: RngLike = None) -> Waveform:
    """Sum of delayed, Doppler-shifted, scaled copies of ``tx`` plus AWGN.

    Each delay also rotates the carrier phase by -2 pi f_c tau, with f_c the tuning
    center at receive time. The output is long enough to hold the latest echo.
    """
    if len(paths) == 0:
        raise ConfigurationError("propagate needs at least one path")
    fs = tx.sample_rate
    n_out = len(tx) + int(math.ceil(paths.max_delay * fs - 1e-9))
    t = tx.times(n_out)
    centers = tx.center_frequencies(n_out)
    rx = np.zeros(n_out, dtype=np.complex128)
    for path in paths:
        if path.gain == 0:
            continue
        delayed = fractional_delay(tx.samples, path.delay * fs, n_out)
        rotation = np.exp(-2j * math.pi * centers * path.delay + 2j * math.pi * path.doppler * t)
        rx += path.gain * delayed * rotation
    received = tx.with_samples(rx)
    return add_awgn(received, awgn_sigma, rng)


def monostatic_echo(
    tx: Waveform, range_m: float, rcs_gain: float = 1.0, awgn_sigma: float = 0.0, rng: RngLike = None
) -> Waveform:
    path = Path(delay=round_trip_delay(range_m), gain=rcs_gain)
    return propagate(tx, PathSet((path,)), awgn_sigma, rng)


def apply_selectivity(w: Waveform, profile: SelectivityProfile, detuning_of_carrier: float = 0.0) -> Waveform:
    """Scale each sample by the sensitivity at its detuning offset.

    The offset of a sample is ``detuning_of_carrier`` plus how far its hop segment (or
    tuning center) sits from ``w.carrier``, so hop waveforms are scaled per step.
    """
    offsets = detuning_of_carrier + (w.reference_frequencies() - w.carrier)
    return w.with_samples(w.samples * profile.scale_at(offsets))
