import math

import numpy as np
import pytest

from rydar_isac.atomic_core import AtomicParams
from rydar_isac.channel import (
    fractional_delay,
    monostatic_echo,
    PathSet,
    propagate,
)
from rydar_isac.coherent_frontend import (
    IqTrace,
    measure_waveform,
    NoiseParams,
    RfTone,
)
from rydar_isac.errors import (
    ConfigurationError,
    LengthMismatchError,
)
from rydar_isac.harness import monotone_within_confidence
from rydar_isac.radar_proc import (
    beat_fft_range,
    collect_step_samples,
    dechirp,
    detect_targets,
    matched_filter_range,
    radar_rmse,
    RadarReport,
    RadarTrial,
    range_resolution,
    RangeEstimate,
    RangeMethod,
    REPORT_HEADER,
    snr_for_range_bound,
    stepped_range_bound,
    stepped_synthesis_range,
    unambiguous_range,
)
from rydar_isac.util import (
    read_csv,
    SPEED_OF_LIGHT,
)
from rydar_isac.waveform_gen import (
    gen_freq_hop,
    gen_lfm,
    HopPlan,
)


@pytest.fixture
def radar_plan():
    return HopPlan(n_steps=100, step_spacing=10.0e6, dwell=40.0e-6, step_bandwidth=1.0e6, start_frequency=10.0e9)


def test_matched_filter_range():
    tx = gen_lfm(10.0e6, 10.0e-6, 25.0e6)
    echo = monostatic_echo(tx, 150.0)
    estimate = matched_filter_range(IqTrace(25.0e6, echo.samples), tx)
    assert estimate is not None
    assert estimate.method == RangeMethod.MATCHED_FILTER
    assert estimate.range_m == pytest.approx(150.0, abs=1.5)


def test_matched_filter_misses_noise():
    tx = gen_lfm(10.0e6, 10.0e-6, 25.0e6)
    rng = np.random.default_rng(7)
    noise = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    assert matched_filter_range(IqTrace(25.0e6, noise), tx) is None


def test_matched_filter_rejects_short_reception():
    tx = gen_lfm(10.0e6, 10.0e-6, 25.0e6)
    with pytest.raises(ConfigurationError):
        matched_filter_range(IqTrace(25.0e6, tx.samples[:100]), tx)


def test_quadrature_targets_one_resolution_cell_apart():
    fs = 100.0e6
    tx = gen_lfm(10.0e6, 10.0e-6, fs)
    rx = fractional_delay(tx.samples, 200.0, 1300) + 1j * fractional_delay(tx.samples, 210.0, 1300)
    estimates = detect_targets(IqTrace(fs, rx), tx)
    cell = SPEED_OF_LIGHT / (2 * fs)
    assert len(estimates) == 2
    assert estimates[0].range_m == pytest.approx(200 * cell, abs=cell / 2)
    assert estimates[1].range_m == pytest.approx(210 * cell, abs=cell / 2)
    assert estimates[1].range_m - estimates[0].range_m == pytest.approx(range_resolution(10.0e6), abs=cell)


def test_matched_filter_shift_adds_whole_samples():
    fs = 25.0e6
    tx = gen_lfm(10.0e6, 10.0e-6, fs)
    echo = monostatic_echo(tx, 150.0).samples
    base = matched_filter_range(IqTrace(fs, echo), tx)
    for k in (1, 7, 40):
        shifted = matched_filter_range(IqTrace(fs, np.concatenate([np.zeros(k), echo])), tx)
        assert shifted.range_m - base.range_m == pytest.approx(k * SPEED_OF_LIGHT / (2 * fs), rel=1e-9)


@pytest.mark.parametrize("carrier", [0.0, 10.0e9])
@pytest.mark.parametrize("separation, expected", [(0.15, 2), (0.10, 1)])
def test_equal_targets_resolve_at_one_resolution_cell(carrier, separation, expected):
    tx = gen_lfm(1.0e9, 0.2e-6, 2.5e9, carrier=carrier)
    echo = propagate(tx, PathSet.monostatic([1.6, 1.6 + separation]))
    estimates = detect_targets(IqTrace(tx.sample_rate, echo.samples), tx)
    assert len(estimates) == expected
    if expected == 2:
        assert estimates[0].range_m == pytest.approx(1.6, abs=0.015)
        assert estimates[1].range_m == pytest.approx(1.6 + separation, abs=0.015)


def test_single_target_is_detected_once():
    fs = 100.0e6
    tx = gen_lfm(10.0e6, 10.0e-6, fs)
    rx = fractional_delay(tx.samples, 200.0, 1300)
    assert len(detect_targets(IqTrace(fs, rx), tx)) == 1


def test_beat_fft_range():
    tx = gen_lfm(10.0e6, 100.0e-6, 25.0e6)
    echo = monostatic_echo(tx, 1500.0)
    beat = dechirp(IqTrace(25.0e6, echo.samples), tx)
    assert len(beat) == len(tx)
    estimate = beat_fft_range(beat, 10.0e6 / 100.0e-6)
    assert estimate is not None
    assert estimate.method == RangeMethod.BEAT_FFT
    assert estimate.range_m == pytest.approx(1500.0, abs=3.0)


def test_stepped_synthesis_range(radar_plan):
    truth = 1.75
    z = np.exp(-4j * np.pi * truth * radar_plan.step_frequencies / SPEED_OF_LIGHT)
    estimate = stepped_synthesis_range(z, radar_plan)
    assert estimate.method == RangeMethod.STEPPED_SYNTH
    assert estimate.range_m == pytest.approx(truth, abs=1.0e-3)
    assert not estimate.ambiguous
    assert stepped_synthesis_range(z, radar_plan, expected_max_range=20.0).ambiguous


def test_stepped_synthesis_folds_wrapped_near_zero_target(radar_plan):
    for truth, expected in ((-0.004, 0.0), (0.0, 0.0), (0.03, 0.03)):
        z = np.exp(-4j * np.pi * truth * radar_plan.step_frequencies / SPEED_OF_LIGHT)
        estimate = stepped_synthesis_range(z, radar_plan)
        assert estimate.range_m == pytest.approx(expected, abs=1.0e-3)
    rng = np.random.default_rng(5)
    z = np.exp(-4j * np.pi * 0.002 * radar_plan.step_frequencies / SPEED_OF_LIGHT)
    z = z + 0.3 * (rng.standard_normal(100) + 1j * rng.standard_normal(100))
    assert stepped_synthesis_range(z, radar_plan).range_m < 0.05


def _brute_force_range(z, plan):
    def profile(ranges):
        steering = np.exp(4j * np.pi * np.outer(ranges, plan.step_frequencies) / SPEED_OF_LIGHT)
        return np.abs(steering @ z)

    cell = range_resolution(plan.synthesized_bandwidth)
    coarse = np.arange(0.0, unambiguous_range(plan), cell / 100)
    best = coarse[np.argmax(profile(coarse))]
    fine = best + np.arange(-cell / 100, cell / 100, cell / 1.0e5)
    return fine[np.argmax(profile(fine))]


@pytest.mark.parametrize("n_steps", [2, 4, 8, 16])
def test_stepped_synthesis_matches_brute_force_search(n_steps):
    plan = HopPlan(n_steps=n_steps, step_spacing=10.0e6, dwell=40.0e-6, step_bandwidth=1.0e6, start_frequency=10.0e9)
    window = unambiguous_range(plan)
    cell = range_resolution(plan.synthesized_bandwidth)
    rng = np.random.default_rng(n_steps)
    for _ in range(20):
        truth = rng.uniform(0.1, 0.7) * window
        z = np.exp(-4j * np.pi * truth * plan.step_frequencies / SPEED_OF_LIGHT + 1j * rng.uniform(0, 2 * np.pi))
        z = z + 0.05 * (rng.standard_normal(n_steps) + 1j * rng.standard_normal(n_steps))
        estimate = stepped_synthesis_range(z, plan)
        assert estimate.range_m == pytest.approx(_brute_force_range(z, plan), abs=cell / 1.0e3)


def _noisy_step_samples(plan, truth, sigma, rng):
    z = np.exp(-4j * np.pi * truth * plan.step_frequencies / SPEED_OF_LIGHT)
    return z + sigma * (rng.standard_normal(plan.n_steps) + 1j * rng.standard_normal(plan.n_steps))


def test_stepped_synthesis_is_unbiased(radar_plan):
    sigma = math.sqrt(1 / (2 * snr_for_range_bound(0.01, radar_plan)))
    rng = np.random.default_rng(2024)
    errors = []
    for _ in range(500):
        truth = rng.uniform(1.6, 1.9)
        z = _noisy_step_samples(radar_plan, truth, sigma, rng)
        errors.append(stepped_synthesis_range(z, radar_plan).range_m - truth)
    assert abs(np.mean(errors)) < range_resolution(radar_plan.synthesized_bandwidth) / 100


def test_range_error_shrinks_with_noise(radar_plan):
    rng = np.random.default_rng(11)
    squared = []
    for sigma in (2.0, 1.0, 0.5, 0.25):
        point = []
        for _ in range(100):
            truth = rng.uniform(1.6, 1.9)
            z = _noisy_step_samples(radar_plan, truth, sigma, rng)
            point.append((stepped_synthesis_range(z, radar_plan).range_m - truth) ** 2)
        squared.append(point)
    assert monotone_within_confidence(squared, increasing=False)
    assert math.sqrt(np.mean(squared[-1])) < math.sqrt(np.mean(squared[0]))


def test_stepped_synthesis_checks(radar_plan):
    with pytest.raises(LengthMismatchError):
        stepped_synthesis_range(np.ones(99), radar_plan)
    with pytest.raises(ConfigurationError):
        stepped_synthesis_range(np.ones(1), HopPlan(n_steps=1, step_spacing=1.0, dwell=1.0))


def test_stepped_ranging_through_receiver(radar_plan):
    fs = 2.5e6
    tx = gen_freq_hop(radar_plan, fs)
    atomic = AtomicParams(omega_p=1.0, omega_c=1.0)
    lo = RfTone(1.0e4, 0.0, 2 * math.pi * tx.carrier)
    for truth in (1.6, 1.75, 1.9):
        echo = monostatic_echo(tx, truth)
        trace = measure_waveform(echo, lo, atomic, NoiseParams(), retune_latency=4.0e-6)
        estimate = stepped_synthesis_range(collect_step_samples(trace, tx, radar_plan), radar_plan)
        assert estimate.range_m == pytest.approx(truth, abs=1.5e-3)


def test_collect_step_samples_needs_valid_samples(radar_plan):
    tx = gen_freq_hop(radar_plan, 2.5e6)
    trace = IqTrace(2.5e6, tx.samples, valid=np.zeros(len(tx), dtype=bool))
    with pytest.raises(ConfigurationError):
        collect_step_samples(trace, tx, radar_plan)


def test_resolution_and_window(radar_plan):
    assert range_resolution(radar_plan.synthesized_bandwidth) == pytest.approx(0.1499, abs=1e-4)
    assert unambiguous_range(radar_plan) == pytest.approx(14.99, abs=0.01)


def test_range_bound(radar_plan):
    snr = snr_for_range_bound(0.01, radar_plan)
    assert snr == pytest.approx(0.3416, abs=1e-3)
    assert stepped_range_bound(snr, radar_plan) == pytest.approx(0.01)
    assert stepped_range_bound(4 * snr, radar_plan) == pytest.approx(0.005)


def test_radar_rmse():
    assert radar_rmse([1.0, 2.0], [1.1, 1.9]) == pytest.approx(0.1)
    with pytest.raises(LengthMismatchError):
        radar_rmse([1.0], [1.0, 2.0])


def test_radar_report(tmp_path):
    hit = RangeEstimate(range_m=1.71, peak_metric=1.0, method=RangeMethod.STEPPED_SYNTH)
    report = RadarReport(
        trials=[RadarTrial(1, 22, 1.8, None), RadarTrial(0, 11, 1.7, hit)],
        resolution_m=0.15,
    )
    assert report.seeds == [22, 11]
    assert report.n_missed == 1
    assert report.rmse_m == pytest.approx(0.01)
    rows = read_csv(report.write_csv(tmp_path / "radar.csv"))
    assert list(rows[0]) == list(REPORT_HEADER)
    assert [r["trial"] for r in rows] == ["0", "1", "RMSE"]
    assert rows[1]["est_m"] == ""
    assert rows[1]["err_m"] == "nan"
    assert float(rows[2]["err_m"]) == pytest.approx(0.01)
