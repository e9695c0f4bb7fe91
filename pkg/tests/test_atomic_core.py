import math

import numpy as np
import pytest

from rydar_isac.atomic_core import (
    at_splitting,
    AtomicParams,
    default_grid,
    field_from_shift,
    HbarMode,
    lia_gradient_curve,
    lia_gradient_readout,
    model_spectrum,
    peak_shift_from_field,
    rabi_from_field,
    slope_k0,
)
from rydar_isac.errors import (
    DomainError,
    PrecisionError,
    SaturationError,
)


@pytest.fixture
def params():
    return AtomicParams(omega_p=1.0, omega_c=1.0)


def test_slope_k0():
    assert slope_k0(AtomicParams(omega_p=1.0, omega_c=1.0)) == pytest.approx(1 / 9)
    assert slope_k0(AtomicParams(omega_p=2.0, omega_c=0.0)) == pytest.approx(1 / 16)


def test_at_splitting():
    assert at_splitting(2 * math.pi * 1.0e6, 1.0) == pytest.approx(1.0e6)
    assert at_splitting(2 * math.pi * 1.0e6, 0.5) == pytest.approx(0.5e6)
    with pytest.raises(DomainError):
        at_splitting(-1.0, 1.0)


def test_rabi_from_field():
    normalized = AtomicParams(omega_p=1.0, omega_c=1.0)
    assert rabi_from_field(3.0, normalized) == pytest.approx(3.0)
    si = AtomicParams(omega_p=1.0, omega_c=1.0, mu=1.0e-29, hbar_mode=HbarMode.SI)
    assert rabi_from_field(1.0, si) == pytest.approx(1.0e-29 / 1.054571817e-34)
    with pytest.raises(DomainError):
        rabi_from_field(float("nan"), normalized)


def test_field_shift_inverse(params):
    shift = peak_shift_from_field(12.5, params)
    assert shift == pytest.approx(12.5 / (2 * math.pi))
    assert field_from_shift(shift, params) == pytest.approx(12.5)


def test_invalid_params():
    with pytest.raises(DomainError):
        AtomicParams(omega_p=0.0, omega_c=1.0)
    with pytest.raises(DomainError):
        AtomicParams(omega_p=1.0, omega_c=1.0, lin_frac=0.0)


def _five_point_second_derivative(p, f, h):
    return (-p(f + 2 * h) + 16 * p(f + h) - 30 * p(f) + 16 * p(f - h) - p(f - 2 * h)) / (12 * h * h)


def test_curvature_at_f0_is_minus_k0(params):
    profile = model_spectrum(params)
    assert profile.curvature_at(params.f0) == pytest.approx(-params.k0, rel=1e-9)
    second = _five_point_second_derivative(profile.lineshape, params.f0, params.gamma / 1000)
    assert second == pytest.approx(-params.k0, rel=1e-6)


def test_curvature_is_minus_k0_across_rabi_frequencies():
    rng = np.random.default_rng(20)
    for omega_p, omega_c in zip(rng.uniform(0.1, 10.0, 20), rng.uniform(0.0, 10.0, 20)):
        params = AtomicParams(omega_p=omega_p, omega_c=omega_c)
        profile = model_spectrum(params)
        assert profile.curvature_at(params.f0) == pytest.approx(-params.k0, rel=1e-9)
        second = _five_point_second_derivative(profile.lineshape, params.f0, params.gamma / 1000)
        assert second == pytest.approx(-params.k0, rel=1e-6)


def test_k0_scaling():
    assert slope_k0(AtomicParams(omega_p=2.0, omega_c=2.0)) == pytest.approx(1 / 36, rel=1e-12)
    base = AtomicParams(omega_p=1.3, omega_c=0.7)
    for scale in (0.1, 0.5, 3.0, 40.0):
        scaled = AtomicParams(omega_p=scale * base.omega_p, omega_c=scale * base.omega_c)
        assert scaled.k0 == pytest.approx(base.k0 / scale**2, rel=1e-12)


def test_at_splitting_is_linear_in_field():
    si = AtomicParams(omega_p=1.0, omega_c=1.0, mu=2.5e-29, hbar_mode=HbarMode.SI, scan_ratio_k=0.8)
    field = np.linspace(0.0, 5.0, 10)
    splitting = at_splitting(rabi_from_field(field, si), si.scan_ratio_k)
    slope, intercept = np.polyfit(field, splitting, 1)
    expected = si.scan_ratio_k * si.mu / (2 * math.pi * si.hbar)
    assert slope == pytest.approx(expected, rel=1e-10)
    assert abs(intercept) <= 1e-10 * splitting[-1]


def test_tracked_peak_sits_at_f0(params):
    profile = model_spectrum(params)
    assert profile.tracked_peak == params.f0
    assert abs(profile.gradient_at(params.f0)) <= 1e-6 * params.k0 * params.gamma


def test_shifted_peak(params):
    shift = 100.0
    profile = model_spectrum(params, peak_shift=shift)
    assert profile.tracked_peak == pytest.approx(params.f0 + shift)
    assert abs(profile.gradient_at(params.f0 + shift)) <= 1e-6 * params.k0 * params.gamma
    assert profile.gradient_at(params.f0) == pytest.approx(params.k0 * shift, rel=1e-3)
    assert profile.peak_separation == pytest.approx(params.splitting + 2 * shift)


def test_two_peaks_on_default_grid(params):
    profile = model_spectrum(params)
    maxima = profile.local_maxima()
    spacing = np.diff(profile.detuning_grid)[0]
    assert len(maxima) == 2
    assert np.min(np.abs(maxima - params.f0)) <= spacing


def test_saturation(params):
    with pytest.raises(SaturationError):
        model_spectrum(params, peak_shift=1.5 * params.max_shift)


def test_grid_must_cover_f0(params):
    with pytest.raises(DomainError):
        model_spectrum(params, grid=np.linspace(params.f0 + params.gamma, params.f0 + 10 * params.gamma, 101))
    with pytest.raises(DomainError):
        model_spectrum(params, grid=default_grid(params)[::-1])


def test_lia_readout_tracks_shift(params):
    dither = params.gamma / 100
    baseline = lia_gradient_readout(model_spectrum(params), params, dither)
    once = lia_gradient_readout(model_spectrum(params, peak_shift=50.0), params, dither) - baseline
    twice = lia_gradient_readout(model_spectrum(params, peak_shift=100.0), params, dither) - baseline
    assert once == pytest.approx(params.k0 * 50.0, rel=1e-3)
    assert twice / once == pytest.approx(2.0, rel=0.01)


def test_lia_readout_is_linear_across_configurations():
    rng = np.random.default_rng(100)
    for _ in range(100):
        gamma = 10 ** rng.uniform(5.0, 7.0)
        params = AtomicParams(
            omega_p=rng.uniform(0.1, 10.0),
            omega_c=rng.uniform(0.0, 10.0),
            f0=rng.uniform(-1.0e6, 1.0e6),
            gamma=gamma,
            lo_splitting=rng.uniform(10.0, 40.0) * gamma,
        )
        dither = params.gamma / 100
        shift = rng.choice([-1.0, 1.0]) * rng.uniform(0.05, 1.0) * params.max_shift
        baseline = lia_gradient_readout(model_spectrum(params), params, dither)
        moved = lia_gradient_readout(model_spectrum(params, peak_shift=shift), params, dither)
        assert moved - baseline == pytest.approx(params.k0 * shift, rel=0.01)


def test_lia_dither_limits(params):
    profile = model_spectrum(params)
    with pytest.raises(PrecisionError):
        lia_gradient_readout(profile, params, 0.0)
    with pytest.raises(PrecisionError):
        lia_gradient_readout(profile, params, 0.2 * params.gamma)
    with pytest.raises(PrecisionError):
        lia_gradient_readout(profile, params, params.gamma / 100, samples_per_period=32)


def test_lia_gradient_curve(params):
    profile = model_spectrum(params)
    curve = lia_gradient_curve(profile, params, params.gamma / 100)
    assert curve.shape == profile.detuning_grid.shape
    at = np.array([params.f0 - 0.3 * params.gamma, params.f0 + 0.3 * params.gamma])
    below, above = lia_gradient_readout(profile, params, params.gamma / 100, at=at)
    assert below > 0
    assert above < 0
