"""LO-coherent atomic measurement.

A strong LO at the signal frequency sets the operating point ``f0``. The weak RF field
adds its in-phase projection ``A_RF cos(dphi)`` to the LO envelope, and the LIA readout
of the atoms is

    y = (1/2pi) (k0 + n_psn) (mu/hbar) (A_RF cos(dphi) + n_bgn + n_qpn)

with photon-shot noise acting on the slope and background / quantum-projection noise
acting on the field. The quadrature branch repeats the measurement with the LO shifted
by pi/2.
"""

import logging
import math
from dataclasses import (
    dataclass,
    field,
)
from typing import (
    List,
    Optional,
    Tuple,
    Union,
)

import numpy as np

from .atomic_core import (
    AtomicParams,
    peak_shift_from_field,
)
from .errors import (
    ApproximationError,
    DomainError,
    HomodyneError,
    SaturationError,
)
from .util import (
    make_rng,
    SeedKey,
)
from .waveform_gen import (
    check_instantaneous_bandwidth,
    DEFAULT_BANDWIDTH_LIMIT_HZ,
    samples_per_symbol,
    Waveform,
)

log = logging.getLogger(__name__)

DEFAULT_RATIO_MIN = 10.0
DEFAULT_RETUNE_LATENCY_S = 1.0e-3


def wrap_phase(phase: float) -> float:
    """Map ``phase`` into (-pi, pi]."""
    return math.pi - (math.pi - phase) % (2 * math.pi)


@dataclass(frozen=True)
class RfTone:
    amplitude: float
    phase: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise DomainError(f"tone amplitude must be non-negative, got {self.amplitude}")
        object.__setattr__(self, "phase", wrap_phase(self.phase))

    @property
    def frequency(self) -> float:
        return self.omega / (2 * math.pi)

    def shifted(self, phase_offset: float) -> "RfTone":
        return RfTone(self.amplitude, self.phase + phase_offset, self.omega)


@dataclass(frozen=True)
class NoiseParams:
    sigma_psn: float = 0.0
    sigma_bgn: float = 0.0
    sigma_qpn: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_psn", "sigma_bgn", "sigma_qpn"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def sigma_field(self) -> float:
        """Combined std of the additive field noises n_bgn + n_qpn."""
        return math.hypot(self.sigma_bgn, self.sigma_qpn)

    def rng(self, *stream: SeedKey) -> np.random.Generator:
        return make_rng(self.seed, *stream)


@dataclass(eq=False)
class IqTrace:
    sample_rate: float
    samples: np.ndarray
    valid: Optional[np.ndarray] = None
    symbol_rate: Optional[float] = None
    retune_schedule: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("readout samples must be finite")
        if self.valid is None:
            self.valid = np.ones(len(self.samples), dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.samples.shape:
            raise DomainError("validity mask must match the sample count")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def n_invalid(self) -> int:
        return int(np.count_nonzero(~self.valid))


def _check_homodyne(rf_omega: float, lo_omega: float) -> None:
    if not np.isclose(rf_omega, lo_omega, rtol=1e-12, atol=1e-9):
        raise HomodyneError(f"RF angular frequency {rf_omega} differs from LO angular frequency {lo_omega}")


def _check_dominance(lo_amplitude: float, rf_amplitude: float, ratio_min: float) -> None:
    if rf_amplitude > 0 and lo_amplitude < ratio_min * rf_amplitude:
        raise ApproximationError(
            f"LO amplitude {lo_amplitude} is less than {ratio_min} x the signal amplitude {rf_amplitude}"
        )


def _check_linear_region(projection: np.ndarray, atomic: AtomicParams) -> None:
    if projection.size == 0:
        return
    shift = float(np.max(np.abs(peak_shift_from_field(projection, atomic))))
    if shift > atomic.max_shift:
        raise SaturationError(
            f"field projection shifts the tracked peak by {shift} Hz, beyond the linear region of "
            f"{atomic.max_shift} Hz"
        )


def superpose_lo(rf: RfTone, lo: RfTone, ratio_min: float = DEFAULT_RATIO_MIN) -> float:
    """Envelope A_LO + A_RF cos(phi_RF - phi_LO) of the homodyne superposition."""
    _check_homodyne(rf.omega, lo.omega)
    _check_dominance(lo.amplitude, rf.amplitude, ratio_min)
    return lo.amplitude + rf.amplitude * math.cos(rf.phase - lo.phase)


def readout_gain(atomic: AtomicParams) -> float:
    """Noise-free readout per unit of in-phase field: k0 mu / (2 pi hbar)."""
    return atomic.k0 * atomic.mu_over_hbar / (2 * math.pi)


def atomic_readout(
    projection: Union[float, np.ndarray],
    atomic: AtomicParams,
    noise: NoiseParams,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Readout for an array of in-phase projections, one fresh noise triple per sample.

    Row ``i`` of the standard-normal draw holds (n_psn, n_bgn, n_qpn) for sample ``i``,
    so a sample's noise depends only on the generator state and its index.
    """
    s = np.asarray(projection, dtype=float)
    rng = noise.rng("readout") if rng is None else rng
    z = rng.standard_normal(s.shape + (3,))
    n_psn = noise.sigma_psn * z[..., 0]
    n_field = noise.sigma_bgn * z[..., 1] + noise.sigma_qpn * z[..., 2]
    return (atomic.k0 + n_psn) * atomic.mu_over_hbar * (s + n_field) / (2 * math.pi)


def readout_moments(projection: float, atomic: AtomicParams, noise: NoiseParams) -> Tuple[float, float]:
    """Closed-form mean and variance of :func:`atomic_readout` for a fixed projection."""
    c = atomic.mu_over_hbar / (2 * math.pi)
    sigma_n2 = noise.sigma_bgn**2 + noise.sigma_qpn**2
    sigma_p2 = noise.sigma_psn**2
    mean = c * atomic.k0 * projection
    variance = c**2 * (atomic.k0**2 * sigma_n2 + sigma_p2 * projection**2 + sigma_p2 * sigma_n2)
    return mean, variance


def atomic_measure(
    rf: RfTone,
    lo: RfTone,
    atomic: AtomicParams,
    noise: NoiseParams,
    rng: Optional[np.random.Generator] = None,
    ratio_min: float = DEFAULT_RATIO_MIN,
) -> float:
    projection = superpose_lo(rf, lo, ratio_min) - lo.amplitude
    s = np.asarray(projection)
    _check_linear_region(s, atomic)
    return float(atomic_readout(s, atomic, noise, noise.rng("I") if rng is None else rng))


def measure_iq(
    rf: RfTone,
    lo: RfTone,
    atomic: AtomicParams,
    noise: NoiseParams,
    rng: Optional[np.random.Generator] = None,
    ratio_min: float = DEFAULT_RATIO_MIN,
) -> complex:
    rng_i = noise.rng("I") if rng is None else rng
    rng_q = noise.rng("Q") if rng is None else rng
    in_phase = atomic_measure(rf, lo, atomic, noise, rng_i, ratio_min)
    quadrature = atomic_measure(rf, lo.shifted(math.pi / 2), atomic, noise, rng_q, ratio_min)
    return complex(in_phase, quadrature)


def retune_mask(n: int, fs: float, retune_schedule: List[Tuple[float, float]], latency: float) -> np.ndarray:
    """True for samples outside every [t_retune, t_retune + latency) window."""
    valid = np.ones(n, dtype=bool)
    blanked = int(round(latency * fs))
    for t, _ in retune_schedule:
        start = int(math.ceil(t * fs - 1e-9))
        valid[max(start, 0) : max(start + blanked, 0)] = False
    return valid


def measure_waveform(
    rx: Waveform,
    lo: RfTone,
    atomic: AtomicParams,
    noise: NoiseParams,
    symbol_rate: Optional[float] = None,
    bandwidth_limit: float = DEFAULT_BANDWIDTH_LIMIT_HZ,
    retune_latency: float = DEFAULT_RETUNE_LATENCY_S,
    ratio_min: float = DEFAULT_RATIO_MIN,
    stream: SeedKey = 0,
) -> IqTrace:
    """Per-sample I/Q readout of a received baseband field.

    ``rx.samples`` is the field phasor relative to the tuning center; the in-phase branch
    sees Re(x e^{-j phi_LO}) and the quadrature branch Im(x e^{-j phi_LO}). Noise streams
    are drawn from (noise.seed, stream, branch).
    """
    _check_homodyne(2 * math.pi * rx.carrier, lo.omega)
    if symbol_rate is not None:
        samples_per_symbol(rx.sample_rate, symbol_rate)
    check_instantaneous_bandwidth(rx, bandwidth_limit).raise_for_violation()
    peak = float(np.max(np.abs(rx.samples))) if len(rx) else 0.0
    _check_dominance(lo.amplitude, peak, ratio_min)
    baseband = rx.samples * np.exp(-1j * lo.phase)
    _check_linear_region(np.concatenate([baseband.real, baseband.imag]), atomic)
    in_phase = atomic_readout(baseband.real, atomic, noise, noise.rng(stream, "I"))
    quadrature = atomic_readout(baseband.imag, atomic, noise, noise.rng(stream, "Q"))
    valid = retune_mask(len(rx), rx.sample_rate, rx.retune_schedule, retune_latency)
    if rx.retune_schedule:
        log.debug("blanked %d samples across %d retunes", np.count_nonzero(~valid), len(rx.retune_schedule))
    return IqTrace(
        sample_rate=rx.sample_rate,
        samples=in_phase + 1j * quadrature,
        valid=valid,
        symbol_rate=symbol_rate,
        retune_schedule=list(rx.retune_schedule),
    )
