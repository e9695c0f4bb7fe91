import math

import numpy as np
import pytest

from rydar_isac.atomic_core import AtomicParams
from rydar_isac.coherent_frontend import (
    atomic_measure,
    atomic_readout,
    measure_iq,
    measure_waveform,
    NoiseParams,
    readout_gain,
    readout_moments,
    retune_mask,
    RfTone,
    superpose_lo,
    wrap_phase,
)
from rydar_isac.errors import (
    ApproximationError,
    HomodyneError,
    InstantaneousBandwidthError,
    SamplingError,
    SaturationError,
)
from rydar_isac.waveform_gen import (
    gen_freq_hop,
    gen_lfm,
    gen_tone,
    HopPlan,
)

CARRIER = 1.0e9


@pytest.fixture
def atomic():
    return AtomicParams(omega_p=1.0, omega_c=1.0)


@pytest.fixture
def quiet():
    return NoiseParams(seed=1)


@pytest.fixture
def lo():
    return RfTone(1.0e4, 0.0, 2 * math.pi * CARRIER)


def test_wrap_phase():
    assert wrap_phase(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert RfTone(1.0, -2.5 * math.pi).phase == pytest.approx(-0.5 * math.pi)


def test_superpose_lo(lo):
    rf = RfTone(100.0, math.pi / 3, lo.omega)
    assert superpose_lo(rf, lo) == pytest.approx(1.0e4 + 50.0)


def test_superpose_lo_checks(lo):
    with pytest.raises(HomodyneError):
        superpose_lo(RfTone(100.0, 0.0, lo.omega + 1.0), lo)
    with pytest.raises(ApproximationError):
        superpose_lo(RfTone(2000.0, 0.0, lo.omega), lo)
    superpose_lo(RfTone(2000.0, 0.0, lo.omega), lo, ratio_min=5.0)


def test_atomic_measure_noise_free(atomic, quiet, lo):
    rf = RfTone(100.0, 0.0, lo.omega)
    assert atomic_measure(rf, lo, atomic, quiet) == pytest.approx(readout_gain(atomic) * 100.0)
    assert readout_gain(atomic) == pytest.approx(1 / (9 * 2 * math.pi))


def test_measure_iq_recovers_phase(atomic, quiet, lo):
    phase = 0.7
    z = measure_iq(RfTone(100.0, phase, lo.omega), lo, atomic, quiet)
    assert abs(z) == pytest.approx(readout_gain(atomic) * 100.0)
    assert math.atan2(z.imag, z.real) == pytest.approx(phase)


def test_measure_iq_recovers_random_phases(atomic, quiet, lo):
    rng = np.random.default_rng(1000)
    for phase in rng.uniform(-math.pi, math.pi, 1000):
        z = measure_iq(RfTone(100.0, phase, lo.omega), lo, atomic, quiet)
        assert abs(z) == pytest.approx(readout_gain(atomic) * 100.0, rel=1e-9)
        assert abs(wrap_phase(math.atan2(z.imag, z.real) - phase)) < 1e-9


def test_measure_waveform_recovers_random_phases(atomic, quiet, lo):
    phases = np.random.default_rng(1001).uniform(-math.pi, math.pi, 1000)
    tone = gen_tone(0.0, 1.0e-3, 1.0e6, carrier=CARRIER)
    trace = measure_waveform(tone.with_samples(10.0 * np.exp(1j * phases)), lo, atomic, quiet)
    error = np.angle(trace.samples * np.exp(-1j * phases))
    assert np.max(np.abs(error)) < 1e-9
    np.testing.assert_allclose(np.abs(trace.samples), readout_gain(atomic) * 10.0, rtol=1e-9)


def test_measure_iq_saturates(atomic, quiet):
    big_lo = RfTone(1.0e6, 0.0, 0.0)
    with pytest.raises(SaturationError):
        measure_iq(RfTone(7.0e4, 0.0, 0.0), big_lo, atomic, quiet)


def test_readout_moments_match_samples(atomic):
    noise = NoiseParams(sigma_psn=0.01, sigma_bgn=1.0, sigma_qpn=0.5, seed=3)
    projection = 20.0
    n = 1_000_000
    samples = atomic_readout(np.full(n, projection), atomic, noise, noise.rng("moments"))
    mean, variance = readout_moments(projection, atomic, noise)
    assert abs(np.mean(samples) - mean) < 3 * math.sqrt(variance / n)
    assert np.var(samples) == pytest.approx(variance, rel=0.02)


def test_readout_is_reproducible(atomic):
    noise = NoiseParams(sigma_bgn=1.0, seed=11)
    first = atomic_readout(np.zeros(16), atomic, noise, noise.rng("x"))
    second = atomic_readout(np.zeros(16), atomic, noise, noise.rng("x"))
    other = atomic_readout(np.zeros(16), atomic, noise, noise.rng("y"))
    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, other)


def test_in_phase_and_quadrature_noise_are_independent(atomic, lo):
    noise = NoiseParams(sigma_bgn=1.0, sigma_qpn=0.5, seed=9)
    n = 100_000
    rx = gen_tone(0.0, n / 1.0e6, 1.0e6, carrier=CARRIER)
    trace = measure_waveform(rx, lo, atomic, noise)
    in_phase, quadrature = trace.samples.real, trace.samples.imag
    assert abs(np.corrcoef(in_phase, quadrature)[0, 1]) < 4 / math.sqrt(n)
    assert abs(np.corrcoef(in_phase[1:], quadrature[:-1])[0, 1]) < 4 / math.sqrt(n)
    _, variance = readout_moments(0.0, atomic, noise)
    assert np.var(in_phase) == pytest.approx(variance, rel=0.02)
    assert np.var(quadrature) == pytest.approx(variance, rel=0.02)
    assert np.mean(in_phase) == pytest.approx(readout_gain(atomic), abs=4 * math.sqrt(variance / n))


def test_measure_waveform_noise_free(atomic, quiet, lo):
    phasor = 10.0 * np.exp(0.3j)
    tone = gen_tone(0.0, 1.0e-4, 1.0e6, carrier=CARRIER)
    rx = tone.with_samples(tone.samples * phasor)
    trace = measure_waveform(rx, lo, atomic, quiet)
    assert len(trace) == len(rx)
    assert trace.n_invalid == 0
    np.testing.assert_allclose(trace.samples, readout_gain(atomic) * phasor)


def test_measure_waveform_lo_phase(atomic, quiet):
    tone = gen_tone(0.0, 1.0e-4, 1.0e6, carrier=CARRIER)
    rotated_lo = RfTone(1.0e4, 0.3, 2 * math.pi * CARRIER)
    trace = measure_waveform(tone.with_samples(tone.samples * 10.0 * np.exp(0.3j)), rotated_lo, atomic, quiet)
    np.testing.assert_allclose(trace.samples, readout_gain(atomic) * 10.0, atol=1e-12)


def test_measure_waveform_streams(atomic, lo):
    noise = NoiseParams(sigma_bgn=1.0, seed=5)
    rx = gen_tone(0.0, 1.0e-4, 1.0e6, carrier=CARRIER)
    first = measure_waveform(rx, lo, atomic, noise)
    again = measure_waveform(rx, lo, atomic, noise)
    other = measure_waveform(rx, lo, atomic, noise, stream=1)
    np.testing.assert_array_equal(first.samples, again.samples)
    assert not np.array_equal(first.samples, other.samples)


def test_measure_waveform_checks(atomic, quiet, lo):
    rx = gen_tone(0.0, 1.0e-4, 1.0e6, carrier=CARRIER)
    with pytest.raises(HomodyneError):
        measure_waveform(rx, RfTone(1.0e4, 0.0, 2 * math.pi * 2 * CARRIER), atomic, quiet)
    with pytest.raises(SamplingError):
        measure_waveform(rx, lo, atomic, quiet, symbol_rate=3.0e5)
    with pytest.raises(ApproximationError):
        measure_waveform(rx.with_samples(rx.samples * 2.0e3), lo, atomic, quiet)
    chirp = gen_lfm(50.0e6, 10.0e-6, 125.0e6, carrier=CARRIER)
    with pytest.raises(InstantaneousBandwidthError):
        measure_waveform(chirp, lo, atomic, quiet)


def test_retune_mask():
    valid = retune_mask(100, 1.0e6, [(20.0e-6, 1.0), (60.0e-6, 2.0)], 5.0e-6)
    assert np.count_nonzero(~valid) == 10
    assert not valid[20:25].any()
    assert not valid[60:65].any()
    assert valid[25] and valid[19]


def test_measure_waveform_blanks_retunes(atomic, quiet):
    plan = HopPlan(n_steps=5, step_spacing=10.0e6, dwell=40.0e-6, step_bandwidth=1.0e6, start_frequency=10.0e9)
    tx = gen_freq_hop(plan, 2.5e6)
    lo = RfTone(1.0e4, 0.0, 2 * math.pi * tx.carrier)
    trace = measure_waveform(tx, lo, atomic, quiet, retune_latency=4.0e-6)
    assert trace.n_invalid == 4 * 10
    assert not trace.valid[100:110].any()
    assert trace.valid[110]
