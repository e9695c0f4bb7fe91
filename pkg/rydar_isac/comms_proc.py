"""M-FSK demodulation, BER bookkeeping and radar-interference coexistence."""

import enum
import math
from dataclasses import dataclass
from typing import (
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from scipy.optimize import brentq
from scipy.special import comb

from .coherent_frontend import IqTrace
from .errors import (
    ConfigurationError,
    DomainError,
    FramingError,
    LengthMismatchError,
    SamplingError,
    UndefinedRatioError,
)
from .waveform_gen import (
    fsk_tone_offsets,
    gen_lfm,
    samples_per_symbol,
    symbols_to_bits,
    Waveform,
)

BER_HEADER = ("trial", "seed", "snr_db", "isr_db", "n_bits", "n_errors", "ber")


class ErasurePolicy(str, enum.Enum):
    DROP = "drop"
    COUNT_ERROR = "count_error"


@dataclass(frozen=True)
class BerReport:
    n_bits: int
    n_errors: int
    snr_db: float = math.nan
    isr_db: Optional[float] = None
    seed: Optional[int] = None
    n_erased_symbols: int = 0

    def __post_init__(self):
        if self.n_bits < 0 or (self.n_bits == 0 and self.n_erased_symbols == 0):
            raise DomainError(f"BER needs at least one bit, got {self.n_bits}")
        if not 0 <= self.n_errors <= self.n_bits:
            raise DomainError(f"{self.n_errors} errors out of {self.n_bits} bits")

    @property
    def all_erased(self) -> bool:
        """Every symbol was dropped as erased, leaving no bits to count."""
        return self.n_bits == 0

    @property
    def ber(self) -> float:
        return math.nan if self.all_erased else self.n_errors / self.n_bits

    def as_row(self, trial: int) -> Tuple:
        return (trial, self.seed, self.snr_db, self.isr_db, self.n_bits, self.n_errors, self.ber)


def _symbol_frames(rx: IqTrace, symbol_rate: float) -> Tuple[int, int]:
    sps = samples_per_symbol(rx.sample_rate, symbol_rate)
    n_symbols = len(rx) // sps
    if n_symbols == 0:
        raise FramingError(f"trace of {len(rx)} samples holds no complete {sps}-sample symbol")
    return sps, n_symbols


def demod_fsk(rx: IqTrace, M: int, symbol_rate: float, tone_spacing: Optional[float] = None) -> np.ndarray:
    """Non-coherent energy detection: correlate each symbol against the M tones, keep the strongest."""
    tone_spacing = symbol_rate if tone_spacing is None else tone_spacing
    sps, n_symbols = _symbol_frames(rx, symbol_rate)
    frames = rx.samples[: n_symbols * sps].reshape(n_symbols, sps)
    n = np.arange(sps) / rx.sample_rate
    templates = np.exp(2j * math.pi * np.outer(fsk_tone_offsets(M, tone_spacing), n))
    energy = np.abs(frames @ templates.conj().T)
    return symbols_to_bits(np.argmax(energy, axis=1), M)


def erased_symbols(rx: IqTrace, symbol_rate: float) -> np.ndarray:
    """True for every symbol that contains at least one invalid (retune-blanked) sample."""
    sps, n_symbols = _symbol_frames(rx, symbol_rate)
    return ~np.all(rx.valid[: n_symbols * sps].reshape(n_symbols, sps), axis=1)


def demod_psk_lfm(
    rx: IqTrace,
    n_bits: int,
    chips_per_bit: int,
    B: float,
    T: float,
    fs: Optional[float] = None,
    phase_reference: float = 0.0,
) -> np.ndarray:
    """BPSK decisions of a PSK-LFM reception with a known carrier phase."""
    fs = rx.sample_rate if fs is None else fs
    chirp = gen_lfm(B, T, fs)
    if len(rx) < len(chirp):
        raise FramingError(f"trace of {len(rx)} samples is shorter than the {len(chirp)}-sample chirp")
    wiped = rx.samples[: len(chirp)] * np.conj(chirp.samples) * np.exp(-1j * phase_reference)
    bit_index = psk_bit_index(n_bits, chips_per_bit, len(chirp))
    sums = np.bincount(bit_index, weights=wiped.real, minlength=n_bits)
    return (sums < 0).astype(np.uint8)


def psk_bit_index(n_bits: int, chips_per_bit: int, n_samples: int) -> np.ndarray:
    n_chips = n_bits * chips_per_bit
    return ((np.arange(n_samples) * n_chips) // n_samples) // chips_per_bit


def _isr_disabled(isr_db: Optional[float]) -> bool:
    return isr_db is None or (math.isinf(isr_db) and isr_db < 0)


def scaled_interference(rx: Waveform, interferer: Waveform, isr_db: Optional[float]) -> np.ndarray:
    """Interferer tiled to the length of ``rx`` and scaled so P_I / P_S = 10^(isr_db / 10)."""
    if _isr_disabled(isr_db):
        return np.zeros(len(rx), dtype=np.complex128)
    if len(interferer) == 0:
        raise ConfigurationError("interferer waveform is empty")
    if not np.isclose(interferer.sample_rate, rx.sample_rate, rtol=1e-12):
        raise SamplingError(
            f"interferer sample rate {interferer.sample_rate} Hz differs from signal rate {rx.sample_rate} Hz"
        )
    signal_power = rx.power()
    if signal_power == 0:
        raise UndefinedRatioError("signal has zero power; interference-to-signal ratio is undefined")
    tiled = np.resize(interferer.samples, len(rx))
    interferer_power = float(np.mean(np.abs(tiled) ** 2))
    if interferer_power == 0:
        raise UndefinedRatioError("interferer has zero power")
    scale = math.sqrt(signal_power * 10 ** (isr_db / 10) / interferer_power)  # type: ignore[operator]
    return scale * tiled


def inject_interference(rx: Waveform, interferer: Waveform, isr_db: Optional[float]) -> Waveform:
    """Add ``interferer`` at ``isr_db`` below (negative) or above the signal; None or -inf disables it."""
    if _isr_disabled(isr_db):
        return rx.with_samples(rx.samples.copy())
    return rx.with_samples(rx.samples + scaled_interference(rx, interferer, isr_db))


def measure_ber(
    tx_bits: Sequence[int],
    rx_bits: Sequence[int],
    erased: Optional[Sequence[bool]] = None,
    bits_per_symbol: int = 1,
    erasure_policy: Union[ErasurePolicy, str] = ErasurePolicy.DROP,
    snr_db: float = math.nan,
    isr_db: Optional[float] = None,
    seed: Optional[int] = None,
) -> BerReport:
    """Hamming-distance BER; bits of ``erased`` symbols are dropped or counted as errors."""
    tx = np.asarray(tx_bits, dtype=np.uint8)
    rx = np.asarray(rx_bits, dtype=np.uint8)
    if tx.shape != rx.shape:
        raise LengthMismatchError(f"{tx.size} transmitted bits against {rx.size} received bits")
    errors = tx != rx
    n_erased = 0
    if erased is not None:
        erased_bits = np.repeat(np.asarray(erased, dtype=bool), bits_per_symbol)
        if erased_bits.size != tx.size:
            raise LengthMismatchError(f"erasure mask covers {erased_bits.size} bits, message has {tx.size}")
        n_erased = int(np.count_nonzero(erased))
        if ErasurePolicy(erasure_policy) == ErasurePolicy.DROP:
            errors = errors[~erased_bits]
        else:
            errors = errors | erased_bits
    return BerReport(
        n_bits=int(errors.size),
        n_errors=int(np.count_nonzero(errors)),
        snr_db=snr_db,
        isr_db=isr_db,
        seed=seed,
        n_erased_symbols=n_erased,
    )


def esn0_from_samples(amplitude: float, sigma: float, sps: int) -> float:
    """Es/N0 of a constant-envelope symbol of ``sps`` samples in complex noise of per-component std ``sigma``."""
    return amplitude**2 * sps / (2 * sigma**2)


def noncoherent_fsk_ser(esn0: Union[float, np.ndarray], M: int) -> Union[float, np.ndarray]:
    """Exact symbol error probability of non-coherent orthogonal M-FSK at linear Es/N0."""
    esn0 = np.asarray(esn0, dtype=float)
    ser = np.zeros_like(esn0)
    for k in range(1, M):
        ser = ser + (-1) ** (k + 1) * comb(M - 1, k, exact=True) / (k + 1) * np.exp(-k / (k + 1) * esn0)
    return float(ser) if ser.ndim == 0 else ser


def noncoherent_fsk_ber(ebn0_db: Union[float, np.ndarray], M: int) -> Union[float, np.ndarray]:
    esn0 = math.log2(M) * 10 ** (np.asarray(ebn0_db, dtype=float) / 10)
    ber = np.asarray(noncoherent_fsk_ser(esn0, M)) * (M / 2) / (M - 1)
    return float(ber) if ber.ndim == 0 else ber


def ebn0_for_ber(target_ber: float, M: int, lo_db: float = -10.0, hi_db: float = 40.0) -> float:
    """Eb/N0 (dB) at which non-coherent M-FSK reaches ``target_ber``."""
    # a blind guess already achieves BER 1/2
    if not 0 < target_ber < 0.5:
        raise DomainError(f"target BER must lie in (0, 0.5), got {target_ber}")
    return float(brentq(lambda x: noncoherent_fsk_ber(x, M) - target_ber, lo_db, hi_db, xtol=1e-10))
