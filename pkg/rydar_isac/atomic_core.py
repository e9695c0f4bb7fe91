"""EIT-AT readout model of the Rydberg atomic receiver.

The receiver never sweeps the full Autler-Townes spectrum. A small dither of the
coupling-laser detuning around the LO-only peak ``f0`` is demodulated by a lock-in
amplifier, giving the gradient dP_out/df at ``f0``. A weak RF field shifts the tracked
peak by ``delta = mu * A_RF * cos(dphi) / (2 pi hbar)`` and, inside the linear region,
changes the gradient by ``k0 * delta`` with ``k0 = Wp^2 / (2 Wp^2 + Wc^2)^2``.
"""

import enum
import math
from dataclasses import dataclass
from typing import (
    Optional,
    Union,
)

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError,
    PrecisionError,
    SaturationError,
)

HBAR_SI = 1.054571817e-34
DEFAULT_GAMMA_HZ = 1.0e6
DEFAULT_LIN_FRAC = 0.01
# LO-only AT splitting in units of the peak linewidth
DEFAULT_SPLITTING_LINEWIDTHS = 20.0
DITHER_SAMPLES_PER_PERIOD = 64
MAX_DITHER_FRACTION = 0.1

ArrayLike = Union[float, np.ndarray]


class HbarMode(str, enum.Enum):
    SI = "si"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class AtomicParams:
    """Atomic and optical constants of the readout.

    Rabi frequencies are in rad/s, ``f0``/``gamma``/``lo_splitting`` in Hz. In
    normalized mode mu and hbar are both 1 so a field amplitude reads directly as a
    Rabi frequency.
    """

    omega_p: float
    omega_c: float
    mu: float = 1.0
    hbar_mode: HbarMode = HbarMode.NORMALIZED
    scan_ratio_k: float = 1.0
    f0: float = 0.0
    gamma: float = DEFAULT_GAMMA_HZ
    lin_frac: float = DEFAULT_LIN_FRAC
    lo_splitting: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "hbar_mode", HbarMode(self.hbar_mode))
        if not self.omega_p > 0:
            raise DomainError(f"omega_p must be positive, got {self.omega_p}")
        if not self.omega_c >= 0:
            raise DomainError(f"omega_c must be non-negative, got {self.omega_c}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.scan_ratio_k > 0:
            raise DomainError(f"scan_ratio_k must be positive, got {self.scan_ratio_k}")
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not 0 < self.lin_frac <= 1:
            raise DomainError(f"lin_frac must lie in (0, 1], got {self.lin_frac}")
        if self.lo_splitting is not None and not self.lo_splitting >= 0:
            raise DomainError(f"lo_splitting must be non-negative, got {self.lo_splitting}")

    @property
    def hbar(self) -> float:
        return HBAR_SI if self.hbar_mode == HbarMode.SI else 1.0

    @property
    def mu_over_hbar(self) -> float:
        return self.mu / self.hbar

    @property
    def k0(self) -> float:
        return slope_k0(self)

    @property
    def splitting(self) -> float:
        if self.lo_splitting is None:
            return DEFAULT_SPLITTING_LINEWIDTHS * self.gamma
        return self.lo_splitting

    @property
    def max_shift(self) -> float:
        """Largest peak shift (Hz) still inside the linear region."""
        return self.lin_frac * self.gamma


def rabi_from_field(E: ArrayLike, params: AtomicParams) -> ArrayLike:
    """Rabi frequency (rad/s) of a field amplitude E (V/m): Omega = mu E / hbar."""
    field = np.asarray(E, dtype=float)
    if np.any(~np.isfinite(field)) or np.any(field < 0):
        raise DomainError(f"field amplitude must be finite and non-negative, got {E}")
    omega = params.mu_over_hbar * field
    return float(omega) if omega.ndim == 0 else omega


def at_splitting(Omega: ArrayLike, scan_ratio_k: float) -> ArrayLike:
    """AT splitting interval (Hz) observed for Rabi frequency ``Omega``: k Omega / 2 pi."""
    omega = np.asarray(Omega, dtype=float)
    if np.any(~np.isfinite(omega)) or np.any(omega < 0):
        raise DomainError(f"Rabi frequency must be finite and non-negative, got {Omega}")
    delta_f = scan_ratio_k * omega / (2 * math.pi)
    return float(delta_f) if delta_f.ndim == 0 else delta_f


def slope_k0(params: AtomicParams) -> float:
    p2 = params.omega_p**2
    return p2 / (2 * p2 + params.omega_c**2) ** 2


def peak_shift_from_field(projection: ArrayLike, params: AtomicParams) -> ArrayLike:
    """Peak shift (Hz) caused by the in-phase field projection A_RF cos(dphi)."""
    return params.mu_over_hbar * np.asarray(projection, dtype=float) / (2 * math.pi)


def field_from_shift(shift: ArrayLike, params: AtomicParams) -> ArrayLike:
    """Recover A_RF cos(dphi) from an observed peak shift (Hz)."""
    return 2 * math.pi * np.asarray(shift, dtype=float) / params.mu_over_hbar


def _lorentzian(x, hwhm):
    u = x / hwhm
    return 1.0 / (1.0 + u * u)


def _lorentzian_d1(x, hwhm):
    u = x / hwhm
    return -2.0 * u / (hwhm * (1.0 + u * u) ** 2)


def _lorentzian_d2(x, hwhm):
    u = x / hwhm
    return (6.0 * u * u - 2.0) / (hwhm**2 * (1.0 + u * u) ** 3)


def _maximum_offset(separation: float, hwhm: float) -> float:
    """Distance from the midpoint to either maximum of two equal Lorentzians ``separation`` apart."""
    half = separation / 2
    # unresolved pair: a single maximum at the midpoint
    if separation <= 2 * hwhm / math.sqrt(3):
        return 0.0

    def slope(x):
        return _lorentzian_d1(x - half, hwhm) + _lorentzian_d1(x + half, hwhm)

    grid = np.linspace(0.0, half, 65)
    values = slope(grid[1:])
    negative = np.nonzero(values <= 0)[0]
    upper_index = int(negative[0]) + 1
    lower = grid[upper_index - 1]
    upper = grid[upper_index]
    if values[upper_index - 1] == 0:
        return float(upper)
    return float(brentq(slope, lower, upper, xtol=1e-12 * hwhm, rtol=4 * np.finfo(float).eps, maxiter=200))


@dataclass(frozen=True)
class DualLorentzian:
    """Two equal-height Lorentzian transmission peaks; ``tracked_center`` belongs to the peak near f0."""

    amplitude: float
    hwhm: float
    tracked_center: float
    partner_center: float

    def __call__(self, f: ArrayLike) -> ArrayLike:
        f = np.asarray(f, dtype=float)
        return self.amplitude * (
            _lorentzian(f - self.tracked_center, self.hwhm) + _lorentzian(f - self.partner_center, self.hwhm)
        )

    def derivative(self, f: ArrayLike) -> ArrayLike:
        f = np.asarray(f, dtype=float)
        return self.amplitude * (
            _lorentzian_d1(f - self.tracked_center, self.hwhm) + _lorentzian_d1(f - self.partner_center, self.hwhm)
        )

    def second_derivative(self, f: ArrayLike) -> ArrayLike:
        f = np.asarray(f, dtype=float)
        return self.amplitude * (
            _lorentzian_d2(f - self.tracked_center, self.hwhm) + _lorentzian_d2(f - self.partner_center, self.hwhm)
        )


@dataclass(frozen=True, eq=False)
class SpectrumProfile:
    detuning_grid: np.ndarray
    p_out: np.ndarray
    peak_separation: float
    tracked_peak: float
    lineshape: DualLorentzian

    def gradient_at(self, f: ArrayLike) -> ArrayLike:
        return self.lineshape.derivative(f)

    def curvature_at(self, f: ArrayLike) -> ArrayLike:
        return self.lineshape.second_derivative(f)

    def local_maxima(self) -> np.ndarray:
        p = self.p_out
        interior = (p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])
        return self.detuning_grid[1:-1][interior]


def _placed_lineshape(params: AtomicParams, peak_shift: float, separation: float, amplitude: float) -> DualLorentzian:
    hwhm = params.gamma / 2
    # the RF field pushes the tracked peak by +shift and its partner by -shift
    shifted_separation = max(separation + 2 * peak_shift, 0.0)
    offset = _maximum_offset(shifted_separation, hwhm)
    midpoint = params.f0 + peak_shift - offset
    return DualLorentzian(
        amplitude=amplitude,
        hwhm=hwhm,
        tracked_center=midpoint + shifted_separation / 2,
        partner_center=midpoint - shifted_separation / 2,
    )


def default_grid(params: AtomicParams, separation: Optional[float] = None, points: int = 4001) -> np.ndarray:
    separation = params.splitting if separation is None else separation
    return np.linspace(params.f0 - separation - 5 * params.gamma, params.f0 + 5 * params.gamma, points)


def model_spectrum(
    params: AtomicParams,
    peak_shift: float = 0.0,
    grid: Optional[np.ndarray] = None,
    separation: Optional[float] = None,
) -> SpectrumProfile:
    """Dual-peak transmission profile with the tracked maximum at ``f0 + peak_shift``.

    The amplitude is fixed by the unshifted profile so that its curvature at ``f0`` is
    exactly ``-k0``; shifts beyond ``lin_frac * gamma`` raise :class:`SaturationError`.
    """
    if abs(peak_shift) > params.max_shift * (1 + 1e-12):
        raise SaturationError(
            f"peak shift {peak_shift} Hz exceeds the linear region of +/-{params.max_shift} Hz around f0"
        )
    separation = params.splitting if separation is None else float(separation)
    if separation < 0:
        raise DomainError(f"separation must be non-negative, got {separation}")
    grid = default_grid(params, separation) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise DomainError("detuning grid must be a strictly increasing 1-D array")
    if grid[0] > params.f0 - 3 * params.gamma or grid[-1] < params.f0 + 3 * params.gamma:
        raise DomainError("detuning grid must cover f0 +/- 3 gamma")

    unit = _placed_lineshape(params, 0.0, separation, 1.0)
    amplitude = -params.k0 / float(unit.second_derivative(params.f0))
    lineshape = _placed_lineshape(params, peak_shift, separation, amplitude)
    return SpectrumProfile(
        detuning_grid=grid,
        p_out=lineshape(grid),
        peak_separation=lineshape.tracked_center - lineshape.partner_center,
        tracked_peak=params.f0 + peak_shift,
        lineshape=lineshape,
    )


def _check_dither(params: AtomicParams, dither_amplitude: float, samples_per_period: int) -> None:
    if not 0 < dither_amplitude <= MAX_DITHER_FRACTION * params.gamma:
        raise PrecisionError(
            f"dither amplitude {dither_amplitude} Hz outside (0, {MAX_DITHER_FRACTION * params.gamma}] Hz"
        )
    if samples_per_period < DITHER_SAMPLES_PER_PERIOD:
        raise PrecisionError(f"need at least {DITHER_SAMPLES_PER_PERIOD} samples per dither period")


def lia_gradient_readout(
    profile: SpectrumProfile,
    params: AtomicParams,
    dither_amplitude: float,
    at: Optional[ArrayLike] = None,
    samples_per_period: int = DITHER_SAMPLES_PER_PERIOD,
) -> ArrayLike:
    """Lock-in estimate of dP_out/df at ``at`` (default f0).

    The AOFS dithers the detuning sinusoidally by ``dither_amplitude`` over one period;
    the first-harmonic in-phase component divided by the dither amplitude is the
    gradient, biased by P'''(f) * dither^2 / 8.
    """
    _check_dither(params, dither_amplitude, samples_per_period)
    centers = np.asarray(params.f0 if at is None else at, dtype=float)
    theta = 2 * math.pi * np.arange(samples_per_period) / samples_per_period
    reference = np.sin(theta)
    detunings = centers[..., np.newaxis] + dither_amplitude * reference
    transmitted = profile.lineshape(detunings)
    first_harmonic = 2.0 / samples_per_period * np.sum(transmitted * reference, axis=-1)
    gradient = first_harmonic / dither_amplitude
    return float(gradient) if gradient.ndim == 0 else gradient


def lia_gradient_curve(
    profile: SpectrumProfile,
    params: AtomicParams,
    dither_amplitude: float,
    grid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """LIA output swept across the detuning grid (the dispersive trace shown by the readout demo)."""
    grid = profile.detuning_grid if grid is None else np.asarray(grid, dtype=float)
    return np.asarray(lia_gradient_readout(profile, params, dither_amplitude, at=grid))
