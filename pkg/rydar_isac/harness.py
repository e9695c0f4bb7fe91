"""Monte-Carlo scenario runner and the scenario commands of the CLI.

Every trial draws from its own generator seeded by (master seed, scenario kind, trial
index), so records do not depend on execution order or on the number of workers.
"""

import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import (
    dataclass,
    field,
)
from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
)

import click
import numpy as np
from scipy.stats import bootstrap

from . import __version__
from .atomic_core import (
    AtomicParams,
    default_grid,
    lia_gradient_curve,
    lia_gradient_readout,
    model_spectrum,
    peak_shift_from_field,
)
from .channel import (
    add_awgn,
    apply_selectivity,
    monostatic_echo,
    propagate,
)
from .cli.options import (
    axis_option,
    ClickFloatList,
    config_option,
    group_options,
    output_option,
    quiet_option,
    seed_option,
    trials_option,
)
from .coherent_frontend import (
    measure_waveform,
    RfTone,
    superpose_lo,
)
from .comms_proc import (
    BER_HEADER,
    demod_fsk,
    ebn0_for_ber,
    erased_symbols,
    inject_interference,
    measure_ber,
    noncoherent_fsk_ber,
)
from .config import (
    CommsConfig,
    config_hash,
    dump_config,
    GateCase,
    load_config,
    NoiseConfig,
    resolve_axis,
    ScenarioConfig,
    ScenarioKind,
    with_value,
)
from .errors import (
    ConfigError,
    ReportMismatchError,
    RydarError,
    TrialError,
)
from .radar_proc import (
    collect_step_samples,
    radar_rmse,
    RadarTrial,
    range_resolution,
    REPORT_HEADER as RADAR_HEADER,
    snr_for_range_bound,
    stepped_range_bound,
    stepped_synthesis_range,
)
from .util import (
    derive_seed,
    format_float,
    make_rng,
    verify_output_dir,
    write_csv,
)
from .waveform_gen import (
    check_instantaneous_bandwidth,
    gen_freq_hop,
    gen_fsk,
    gen_lfm,
    gen_tone,
    HopPlan,
    Waveform,
    WaveformKind,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ACCEPTANCE_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

RECORDS_FILE = "records.csv"
HASH_COLUMN = "config_hash"
SUMMARY_FILE = "summary.txt"
CONFIG_SNAPSHOT = "config.yaml"
SWEEP_FILE = "sweep.csv"

Row = Tuple[Any, ...]


@dataclass
class ScenarioReport:
    config_hash: str
    kind: ScenarioKind
    header: Tuple[str, ...]
    records: Dict[int, Row]
    summary: Dict[str, Any]
    passed: Optional[bool]
    wall_clock_s: float = 0.0
    version: str = __version__
    footer: List[Row] = field(default_factory=list)
    output_dir: Optional[Path] = None

    @property
    def rows(self) -> List[Row]:
        return [self.records[i] for i in sorted(self.records)]

    @property
    def metric(self) -> Any:
        return self.summary.get(self.summary.get("metric_name", ""), math.nan)

    def summary_text(self) -> str:
        lines = [
            f"scenario: {self.kind.value}",
            f"version: {self.version}",
            f"config_hash: {self.config_hash}",
            f"trials: {len(self.records)}",
            f"wall_clock_s: {self.wall_clock_s:.3f}",
            f"passed: {self.passed}",
        ]
        lines.extend(f"{key}: {format_float(value)}" for key, value in self.summary.items())
        return "\n".join(lines) + "\n"

    def write(self, output_dir: Path) -> Path:
        stamped = [tuple(row) + (self.config_hash,) for row in self.rows + self.footer]
        write_csv(output_dir / RECORDS_FILE, self.header + (HASH_COLUMN,), stamped)
        (output_dir / SUMMARY_FILE).write_text(self.summary_text())
        self.output_dir = output_dir
        return output_dir


def trial_seed(cfg: ScenarioConfig, index: int) -> int:
    return derive_seed(cfg.seed, cfg.scenario.value, index)


def _frontend_seed(seed: int) -> int:
    return derive_seed(seed, "frontend")


def integrated_snr(
    sigma: float, amplitude: float, n_integrated: int, atomic: AtomicParams, noise: NoiseConfig
) -> float:
    """Readout SNR after averaging ``n_integrated`` samples of a constant-envelope field of ``amplitude``.

    Channel AWGN and the field noises add per component; photon-shot noise scales the
    slope, so it also multiplies the signal.
    """
    k2 = atomic.k0**2
    p2 = noise.sigma_psn**2
    sigma_total2 = sigma**2 + noise.sigma_bgn_v_m**2 + noise.sigma_qpn_v_m**2
    noise_power = 2 * (k2 + p2) * sigma_total2 + p2 * amplitude**2
    if noise_power == 0:
        return math.inf
    return k2 * amplitude**2 * n_integrated / noise_power


def awgn_sigma_for_snr(
    snr: float, amplitude: float, n_integrated: int, atomic: AtomicParams, noise: NoiseConfig
) -> float:
    """Channel AWGN std (per component) at which :func:`integrated_snr` equals ``snr``."""
    k2 = atomic.k0**2
    p2 = noise.sigma_psn**2
    sigma_total2 = (k2 * amplitude**2 * n_integrated / snr - p2 * amplitude**2) / (2 * (k2 + p2))
    sigma2 = sigma_total2 - noise.sigma_bgn_v_m**2 - noise.sigma_qpn_v_m**2
    if sigma2 < 0:
        log.warning("atomic noise alone is below the target SNR of %g; channel noise clamped to zero", snr)
        return 0.0
    return math.sqrt(sigma2)


class ScenarioRunner:
    header: Tuple[str, ...] = ()

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg

    def trial_count(self) -> int:
        return self.cfg.trials

    def run_trial(self, index: int) -> Row:
        raise NotImplementedError

    def summarize(self, rows: List[Row]) -> Tuple[Dict[str, Any], Optional[bool]]:
        raise NotImplementedError

    def footer(self, rows: List[Row], summary: Dict[str, Any]) -> List[Row]:
        return []

    def write_extra(self, output_dir: Path) -> List[Path]:
        return []


@dataclass(frozen=True)
class RadarSetup:
    plan: HopPlan
    tx: Waveform
    atomic: AtomicParams
    lo: RfTone
    awgn_sigma: float
    snr_step: float
    bound_m: float


def radar_valid_samples_per_step(cfg: ScenarioConfig) -> int:
    """Readout samples of each dwell left once the receiver's retune latency has passed."""
    nd = cfg.radar.plan().samples_per_dwell(cfg.radar.sample_rate_hz)
    latency = cfg.receiver.retune_latency_s
    valid = nd - int(round(latency * cfg.radar.sample_rate_hz))
    if valid < 1:
        raise ConfigError(
            "receiver.retune_latency_s", f"{latency} s leaves no valid samples in the {cfg.radar.dwell_s} s radar dwell"
        )
    return valid


def calibrate_radar_sigma(cfg: ScenarioConfig) -> float:
    """AWGN std that puts the stepped-synthesis range bound at ``radar.target_bound_m``.

    The bound fixes the per-step SNR; a step sample averages the valid readout samples
    of its dwell, so the per-sample noise follows from the readout SNR formula.
    """
    snr = snr_for_range_bound(cfg.radar.target_bound_m, cfg.radar.plan())
    return awgn_sigma_for_snr(
        snr, cfg.radar.rcs_gain, radar_valid_samples_per_step(cfg), cfg.atomic.params(), cfg.noise
    )


def radar_setup(cfg: ScenarioConfig) -> RadarSetup:
    plan = cfg.radar.plan()
    tx = gen_freq_hop(plan, cfg.radar.sample_rate_hz, cfg.receiver.bandwidth_limit_hz)
    atomic = cfg.atomic.params()
    sigma = calibrate_radar_sigma(cfg) if cfg.channel.auto_sigma else float(cfg.channel.awgn_sigma_v_m)
    snr = integrated_snr(sigma, cfg.radar.rcs_gain, radar_valid_samples_per_step(cfg), atomic, cfg.noise)
    bound = 0.0 if math.isinf(snr) else stepped_range_bound(snr, plan)
    lo = RfTone(cfg.receiver.lo_amplitude_v_m, cfg.receiver.lo_phase_rad, 2 * math.pi * tx.carrier)
    return RadarSetup(plan=plan, tx=tx, atomic=atomic, lo=lo, awgn_sigma=sigma, snr_step=snr, bound_m=bound)


class RadarRunner(ScenarioRunner):
    header = RADAR_HEADER

    def __init__(self, cfg: ScenarioConfig):
        super().__init__(cfg)
        self.setup = radar_setup(cfg)
        log.info(
            "radar: %d steps x %g Hz, awgn sigma %g, per-step SNR %g, range bound %g m",
            self.setup.plan.n_steps,
            self.setup.plan.step_spacing,
            self.setup.awgn_sigma,
            self.setup.snr_step,
            self.setup.bound_m,
        )

    def run_trial(self, index: int) -> Row:
        cfg, setup = self.cfg, self.setup
        seed = trial_seed(cfg, index)
        rng = make_rng(seed)
        truth = float(rng.uniform(cfg.radar.range_min_m, cfg.radar.range_max_m))
        echo = monostatic_echo(setup.tx, truth, cfg.radar.rcs_gain, setup.awgn_sigma, rng)
        trace = measure_waveform(
            echo,
            setup.lo,
            setup.atomic,
            cfg.noise.params(_frontend_seed(seed)),
            bandwidth_limit=cfg.receiver.bandwidth_limit_hz,
            retune_latency=cfg.receiver.retune_latency_s,
            ratio_min=cfg.receiver.ratio_min,
        )
        steps = collect_step_samples(trace, setup.tx, setup.plan)
        estimate = stepped_synthesis_range(
            steps, setup.plan, cfg.radar.zero_pad, expected_max_range=cfg.radar.range_max_m
        )
        return RadarTrial(index, seed, truth, estimate).as_row()

    def summarize(self, rows: List[Row]) -> Tuple[Dict[str, Any], Optional[bool]]:
        truths = [r[2] for r in rows]
        estimates = [r[3] for r in rows]
        rmse = radar_rmse(truths, estimates)
        summary = {
            "metric_name": "rmse_m",
            "rmse_m": rmse,
            "mean_error_m": float(np.mean(np.subtract(estimates, truths))),
            "bound_m": self.setup.bound_m,
            "resolution_m": range_resolution(self.setup.plan.synthesized_bandwidth),
            "awgn_sigma_v_m": self.setup.awgn_sigma,
            "snr_step": self.setup.snr_step,
            "accept_rmse_m": self.cfg.radar.accept_rmse_m,
        }
        return summary, rmse <= self.cfg.radar.accept_rmse_m

    def footer(self, rows: List[Row], summary: Dict[str, Any]) -> List[Row]:
        return [("RMSE", "", "", "", summary["rmse_m"], "")]


def _comms_amplitude(cfg: ScenarioConfig) -> float:
    gains = [p.gain for p in cfg.channel.paths]
    return cfg.comms.signal_amplitude_v_m * math.sqrt(sum(g * g for g in gains))


def calibrate_comms_sigma(cfg: ScenarioConfig) -> Tuple[float, float]:
    """AWGN std and Eb/N0 (dB) at which the interference-free link runs at ``comms.target_awgn_ber``."""
    comms = cfg.comms
    ebn0_db = ebn0_for_ber(comms.target_awgn_ber, comms.m)
    esn0 = comms.bits_per_symbol * 10 ** (ebn0_db / 10)
    sigma = awgn_sigma_for_snr(esn0, _comms_amplitude(cfg), comms.samples_per_symbol, cfg.atomic.params(), cfg.noise)
    return sigma, ebn0_db


def comms_bits(comms: CommsConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=comms.n_symbols * comms.bits_per_symbol, dtype=np.uint8)


def comms_waveform(comms: CommsConfig, bits: np.ndarray) -> Waveform:
    tx = gen_fsk(
        bits,
        comms.m,
        comms.symbol_rate_sps,
        comms.tone_spacing,
        comms.sample_rate_hz,
        carrier=comms.carrier_hz,
        hop_frequencies=comms.hop_frequencies_hz or None,
        symbols_per_hop=comms.symbols_per_hop,
    )
    return tx.with_samples(tx.samples * comms.signal_amplitude_v_m)


class CommsRunner(ScenarioRunner):
    header = BER_HEADER

    def __init__(self, cfg: ScenarioConfig):
        super().__init__(cfg)
        comms = cfg.comms
        self.atomic = cfg.atomic.params()
        if cfg.channel.auto_sigma:
            self.awgn_sigma, self.ebn0_db = calibrate_comms_sigma(cfg)
        else:
            self.awgn_sigma = float(cfg.channel.awgn_sigma_v_m)
            esn0 = integrated_snr(
                self.awgn_sigma, _comms_amplitude(cfg), comms.samples_per_symbol, self.atomic, cfg.noise
            )
            self.ebn0_db = math.inf if math.isinf(esn0) else 10 * math.log10(esn0 / comms.bits_per_symbol)
        self.paths = cfg.channel.path_set()
        self.profile = cfg.channel.selectivity_profile()
        self.interferer = gen_lfm(
            comms.interferer_bandwidth_hz, comms.interferer_duration_s, comms.sample_rate_hz, comms.carrier_hz
        )
        log.info(
            "comms: %d-FSK, awgn sigma %g, Eb/N0 %g dB, ISR %s dB", comms.m, self.awgn_sigma, self.ebn0_db, comms.isr_db
        )

    def run_trial(self, index: int) -> Row:
        cfg, comms = self.cfg, self.cfg.comms
        seed = trial_seed(cfg, index)
        rng = make_rng(seed)
        bits = comms_bits(comms, rng)
        tx = comms_waveform(comms, bits)
        rx = propagate(tx, self.paths)
        rx = apply_selectivity(rx, self.profile, cfg.channel.detuning_of_carrier_hz)
        rx = inject_interference(rx, self.interferer, comms.isr_db)
        rx = add_awgn(rx, self.awgn_sigma, rng)
        lo = RfTone(cfg.receiver.lo_amplitude_v_m, cfg.receiver.lo_phase_rad, 2 * math.pi * rx.carrier)
        trace = measure_waveform(
            rx,
            lo,
            self.atomic,
            cfg.noise.params(_frontend_seed(seed)),
            symbol_rate=comms.symbol_rate_sps,
            bandwidth_limit=cfg.receiver.bandwidth_limit_hz,
            retune_latency=cfg.receiver.retune_latency_s,
            ratio_min=cfg.receiver.ratio_min,
        )
        decided = demod_fsk(trace, comms.m, comms.symbol_rate_sps, comms.tone_spacing)[: bits.size]
        erased = erased_symbols(trace, comms.symbol_rate_sps)[: comms.n_symbols]
        report = measure_ber(
            bits,
            decided,
            erased,
            comms.bits_per_symbol,
            comms.erasure_policy,
            snr_db=self.ebn0_db,
            isr_db=comms.isr_db,
            seed=seed,
        )
        if report.all_erased:
            log.warning("comms trial %d: every symbol was erased, no bits counted", index)
        return report.as_row(index)

    def summarize(self, rows: List[Row]) -> Tuple[Dict[str, Any], Optional[bool]]:
        n_bits = sum(r[4] for r in rows)
        n_errors = sum(r[5] for r in rows)
        ber = n_errors / n_bits if n_bits else math.nan
        theory = math.nan if math.isinf(self.ebn0_db) else noncoherent_fsk_ber(self.ebn0_db, self.cfg.comms.m)
        summary = {
            "metric_name": "ber",
            "ber": ber,
            "n_bits": n_bits,
            "n_errors": n_errors,
            "ebn0_db": self.ebn0_db,
            "awgn_theory_ber": theory,
            "isr_db": self.cfg.comms.isr_db,
            "awgn_sigma_v_m": self.awgn_sigma,
            "accept_ber": self.cfg.comms.accept_ber,
        }
        return summary, ber <= self.cfg.comms.accept_ber


SPECTRUM_HEADER = (
    "index",
    "rf_amplitude_v_m",
    "peak_shift_hz",
    "tracked_peak_hz",
    "readout_at_f0",
    "readout_change",
    "predicted_change",
    "relative_error",
)


def spectrum_profile(cfg: ScenarioConfig, amplitude: float):
    """Peak shift and spectrum for an RF tone of ``amplitude`` riding on the configured LO."""
    atomic = cfg.atomic.params()
    lo = RfTone(cfg.receiver.lo_amplitude_v_m, cfg.receiver.lo_phase_rad)
    rf = RfTone(amplitude, cfg.spectrum.rf_phase_rad)
    projection = superpose_lo(rf, lo, cfg.receiver.ratio_min) - lo.amplitude
    shift = float(peak_shift_from_field(projection, atomic))
    grid = default_grid(atomic, points=cfg.spectrum.grid_points)
    return shift, model_spectrum(atomic, shift, grid=grid)


def emit_spectrum_demo(cfg: ScenarioConfig, output_dir: Optional[Path] = None) -> List[Path]:
    """Write (detuning, P_out, LIA gradient) series, one file per configured RF amplitude.

    Every row carries the configuration hash, as in ``records.csv``.
    """
    output_dir = verify_output_dir(Path(cfg.output_dir) if output_dir is None else output_dir)
    atomic = cfg.atomic.params()
    digest = config_hash(cfg)
    paths = []
    for index, amplitude in enumerate(cfg.spectrum.rf_amplitudes_v_m):
        _, profile = spectrum_profile(cfg, amplitude)
        gradient = lia_gradient_curve(profile, atomic, cfg.atomic.dither)
        rows = [(f, p, g, digest) for f, p, g in zip(profile.detuning_grid, profile.p_out, gradient)]
        path = output_dir / f"spectrum_{index:02d}.csv"
        paths.append(write_csv(path, ("detuning_hz", "p_out", "lia_gradient", HASH_COLUMN), rows))
    return paths


class SpectrumRunner(ScenarioRunner):
    header = SPECTRUM_HEADER

    def __init__(self, cfg: ScenarioConfig):
        super().__init__(cfg)
        self.atomic = cfg.atomic.params()
        _, baseline = spectrum_profile(cfg, 0.0)
        self.baseline = lia_gradient_readout(baseline, self.atomic, cfg.atomic.dither)

    def trial_count(self) -> int:
        return len(self.cfg.spectrum.rf_amplitudes_v_m)

    def run_trial(self, index: int) -> Row:
        amplitude = self.cfg.spectrum.rf_amplitudes_v_m[index]
        shift, profile = spectrum_profile(self.cfg, amplitude)
        readout = lia_gradient_readout(profile, self.atomic, self.cfg.atomic.dither)
        change = readout - self.baseline
        predicted = self.atomic.k0 * shift
        error = abs(change - predicted) / abs(predicted) if predicted else abs(change)
        return (index, amplitude, shift, profile.tracked_peak, readout, change, predicted, error)

    def summarize(self, rows: List[Row]) -> Tuple[Dict[str, Any], Optional[bool]]:
        worst = max(r[7] for r in rows)
        summary = {
            "metric_name": "max_relative_error",
            "max_relative_error": worst,
            "k0": self.atomic.k0,
            "accept_linearity": self.cfg.spectrum.accept_linearity,
        }
        return summary, worst <= self.cfg.spectrum.accept_linearity

    def write_extra(self, output_dir: Path) -> List[Path]:
        return emit_spectrum_demo(self.cfg, output_dir)


GATE_HEADER = ("index", "name", "kind", "expect_pass", "passed", "max_required_hz", "max_occupied_hz", "violation")


def gate_waveform(case: GateCase, limit: float) -> Waveform:
    if case.kind == WaveformKind.LFM:
        return gen_lfm(case.bandwidth_hz, case.duration_s, case.sample_rate_hz)
    if case.kind == WaveformKind.FREQ_HOP:
        return gen_freq_hop(case.plan(), case.sample_rate_hz, limit)
    return gen_tone(case.offset_hz, case.duration_s, case.sample_rate_hz)


class BandwidthGateRunner(ScenarioRunner):
    header = GATE_HEADER

    def trial_count(self) -> int:
        return len(self.cfg.bandwidth_gate.cases)

    def run_trial(self, index: int) -> Row:
        case = self.cfg.bandwidth_gate.cases[index]
        limit = self.cfg.receiver.bandwidth_limit_hz
        try:
            report = check_instantaneous_bandwidth(gate_waveform(case, limit), limit)
        except RydarError as e:
            # a plan the generator refuses is rejected by the gate as well
            log.info("case %s rejected at generation: %s", case.name, e)
            return (index, case.name, case.kind.value, case.expect_pass, False, math.nan, math.nan, type(e).__name__)
        return (
            index,
            case.name,
            case.kind.value,
            case.expect_pass,
            report.passed,
            report.max_required,
            report.max_occupied,
            report.violation or "",
        )

    def summarize(self, rows: List[Row]) -> Tuple[Dict[str, Any], Optional[bool]]:
        matched = sum(1 for r in rows if r[3] == r[4])
        summary = {"metric_name": "matched_cases", "matched_cases": matched, "cases": len(rows)}
        return summary, matched == len(rows)


RUNNERS = {
    ScenarioKind.RADAR_RANGING: RadarRunner,
    ScenarioKind.COMMS_BER: CommsRunner,
    ScenarioKind.SPECTRUM_DEMO: SpectrumRunner,
    ScenarioKind.BANDWIDTH_GATE: BandwidthGateRunner,
}


def _run_trials(runner: ScenarioRunner, indices: Sequence[int], workers: int) -> Dict[int, Row]:
    def guarded(index: int) -> Row:
        try:
            return runner.run_trial(index)
        except RydarError as e:
            raise TrialError(index, e) from e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(zip(indices, pool.map(guarded, indices)))
    return {index: guarded(index) for index in indices}


def run_scenario(
    cfg: ScenarioConfig, write: bool = True, trial_indices: Optional[Iterable[int]] = None
) -> ScenarioReport:
    """Run every trial of ``cfg`` (or the given subset, in the given order) and persist the results."""
    started = time.perf_counter()
    runner = RUNNERS[cfg.scenario](cfg)
    count = runner.trial_count()
    indices = list(range(count)) if trial_indices is None else list(trial_indices)
    if any(not 0 <= i < count for i in indices) or len(set(indices)) != len(indices):
        raise ConfigError("trials", f"trial indices must be distinct and lie in [0, {count})")
    log.info("running %s: %d trials, seed %d", cfg.scenario.value, len(indices), cfg.seed)
    records = _run_trials(runner, indices, cfg.workers)
    rows = [records[i] for i in sorted(records)]
    summary, passed = runner.summarize(rows)
    report = ScenarioReport(
        config_hash=config_hash(cfg),
        kind=cfg.scenario,
        header=runner.header,
        records=records,
        summary=summary,
        passed=passed,
        footer=runner.footer(rows, summary),
    )
    report.wall_clock_s = time.perf_counter() - started
    if write:
        output_dir = verify_output_dir(Path(cfg.output_dir))
        dump_config(cfg, output_dir / CONFIG_SNAPSHOT)
        runner.write_extra(output_dir)
        report.write(output_dir)
    log.info("%s finished in %.2f s, passed=%s", cfg.scenario.value, report.wall_clock_s, passed)
    return report


def merge_reports(reports: Sequence[ScenarioReport], cfg: Optional[ScenarioConfig] = None) -> ScenarioReport:
    """Combine reports of trial subsets of one configuration.

    Reports must share a config hash (and match ``cfg`` when given); overlapping trials
    must agree. With ``cfg`` the summary is recomputed over the merged records.
    """
    if not reports:
        raise ReportMismatchError("nothing to merge")
    first = reports[0]
    expected = first.config_hash if cfg is None else config_hash(cfg)
    records: Dict[int, Row] = {}
    for report in reports:
        if report.config_hash != expected:
            raise ReportMismatchError(f"config hash {report.config_hash} differs from {expected}")
        for index, row in report.records.items():
            if index in records and records[index] != row:
                raise ReportMismatchError(f"trial {index} differs between reports")
            records[index] = row
    summary, passed, footer = dict(first.summary), first.passed, list(first.footer)
    if cfg is not None:
        runner = RUNNERS[cfg.scenario](cfg)
        rows = [records[i] for i in sorted(records)]
        summary, passed = runner.summarize(rows)
        footer = runner.footer(rows, summary)
    return ScenarioReport(
        config_hash=expected,
        kind=first.kind,
        header=first.header,
        records=records,
        summary=summary,
        passed=passed,
        wall_clock_s=sum(r.wall_clock_s for r in reports),
        footer=footer,
    )


def sweep(cfg: ScenarioConfig, axis: str, values: Sequence[float], write: bool = True) -> List[ScenarioReport]:
    """One independent report per value of ``axis``, each with its own derived seed and output directory."""
    resolve_axis(axis)
    reports = []
    for index, value in enumerate(values):
        point_seed = derive_seed(cfg.seed, "sweep", axis, index)
        point_dir = str(Path(cfg.output_dir) / f"point_{index:03d}")
        point_cfg = with_value(cfg, axis, value, seed=point_seed, output_dir=point_dir)
        log.info("sweep %s = %s (%d/%d)", axis, value, index + 1, len(values))
        reports.append(run_scenario(point_cfg, write=write))
    if write and reports:
        rows = [
            (index, value, r.config_hash, r.summary.get("metric_name", ""), r.metric, r.passed)
            for index, (value, r) in enumerate(zip(values, reports))
        ]
        output_dir = verify_output_dir(Path(cfg.output_dir))
        write_csv(output_dir / SWEEP_FILE, ("index", axis, "config_hash", "metric_name", "metric", "passed"), rows)
    return reports


def monotone_within_confidence(
    samples_per_point: Sequence[Sequence[float]],
    increasing: bool = True,
    confidence: float = 0.95,
    n_resamples: int = 2000,
    seed: int = 0,
) -> bool:
    """False only if some step between consecutive points moves against the trend with confidence.

    Each step's change in mean gets a percentile bootstrap interval; a decrease (for
    ``increasing``) whose whole interval lies below zero breaks monotonicity.
    """
    rng = np.random.default_rng(seed)
    sign = 1.0 if increasing else -1.0
    for before, after in zip(samples_per_point, samples_per_point[1:]):
        a = np.asarray(before, dtype=float)
        b = np.asarray(after, dtype=float)
        if a.size < 2 or b.size < 2 or (np.ptp(a) == 0 and np.ptp(b) == 0):
            if sign * (b.mean() - a.mean()) < 0:
                return False
            continue

        def change(x, y, axis):
            return sign * (np.mean(y, axis=axis) - np.mean(x, axis=axis))

        result = bootstrap(
            (a, b),
            change,
            confidence_level=confidence,
            n_resamples=n_resamples,
            method="percentile",
            random_state=rng,
        )
        if result.confidence_interval.high < 0:
            return False
    return True


def build_transmit_waveform(cfg: ScenarioConfig) -> Waveform:
    """Transmit waveform of the configured scenario (trial 0 for randomized payloads)."""
    if cfg.scenario == ScenarioKind.RADAR_RANGING:
        return gen_freq_hop(cfg.radar.plan(), cfg.radar.sample_rate_hz, cfg.receiver.bandwidth_limit_hz)
    if cfg.scenario == ScenarioKind.COMMS_BER:
        return comms_waveform(cfg.comms, comms_bits(cfg.comms, make_rng(trial_seed(cfg, 0))))
    if cfg.scenario == ScenarioKind.BANDWIDTH_GATE:
        return gate_waveform(cfg.bandwidth_gate.cases[0], cfg.receiver.bandwidth_limit_hz)
    raise ConfigError("scenario", f"{cfg.scenario.value} has no transmit waveform")


def _configure_logging(quiet: bool) -> None:
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _load(config: Optional[Path], scenario: Optional[ScenarioKind], seed, out, trials) -> ScenarioConfig:
    overrides: Dict[str, Any] = {}
    if scenario is not None:
        overrides["scenario"] = scenario.value
    for key, value in (("seed", seed), ("output_dir", out), ("trials", trials)):
        if value is not None:
            overrides[key] = value
    try:
        return load_config(config, overrides=overrides)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


def _exit_for(passed: Optional[bool]) -> None:
    sys.exit(EXIT_ACCEPTANCE_FAILURE if passed is False else EXIT_OK)


def _execute(scenario: Optional[ScenarioKind], config, seed, out, trials, quiet) -> None:
    _configure_logging(quiet)
    cfg = _load(config, scenario, seed, out, trials)
    try:
        report = run_scenario(cfg)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except Exception:
        log.exception("scenario %s failed", cfg.scenario.value)
        sys.exit(EXIT_RUNTIME_ERROR)
    if not quiet:
        click.echo(report.summary_text(), nl=False)
    _exit_for(report.passed)


scenario_options = group_options(config_option, seed_option, output_option, trials_option, quiet_option)


@click.group(help="Run RYDAR ISAC scenarios")
def cli():
    pass


@cli.command(help="Emit spectrum and LIA gradient series for LO-only and LO+RF fields")
@scenario_options
def spectrum(config: Optional[Path], seed: Optional[int], out: Optional[Path], trials: Optional[int], quiet: bool):
    _execute(ScenarioKind.SPECTRUM_DEMO, config, seed, out, trials, quiet)


@cli.command(help="Monte-Carlo stepped-frequency ranging of a desk-scale target")
@scenario_options
def radar(config: Optional[Path], seed: Optional[int], out: Optional[Path], trials: Optional[int], quiet: bool):
    _execute(ScenarioKind.RADAR_RANGING, config, seed, out, trials, quiet)


@cli.command(help="Monte-Carlo M-FSK BER under radar interference")
@scenario_options
def comms(config: Optional[Path], seed: Optional[int], out: Optional[Path], trials: Optional[int], quiet: bool):
    _execute(ScenarioKind.COMMS_BER, config, seed, out, trials, quiet)


@cli.command("bandwidth-gate", help="Check waveform cases against the instantaneous bandwidth limit")
@scenario_options
def bandwidth_gate(
    config: Optional[Path], seed: Optional[int], out: Optional[Path], trials: Optional[int], quiet: bool
):
    _execute(ScenarioKind.BANDWIDTH_GATE, config, seed, out, trials, quiet)


@cli.command("sweep", help="Run the configured scenario once per value of a numeric config field")
@scenario_options
@axis_option
@click.option("--values", "values", type=ClickFloatList(), required=True, help="Comma separated axis values.")
def sweep_command(
    config: Optional[Path],
    seed: Optional[int],
    out: Optional[Path],
    trials: Optional[int],
    quiet: bool,
    axis: str,
    values: List[float],
):
    _configure_logging(quiet)
    cfg = _load(config, None, seed, out, trials)
    try:
        reports = sweep(cfg, axis, values)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except Exception:
        log.exception("sweep over %s failed", axis)
        sys.exit(EXIT_RUNTIME_ERROR)
    if not quiet:
        for value, report in zip(values, reports):
            metric_name = report.summary.get("metric_name")
            metric = format_float(report.metric)
            click.echo(f"{axis}={format_float(value)} {metric_name}={metric} passed={report.passed}")
    _exit_for(False if any(r.passed is False for r in reports) else True)


@cli.command(help="Validate a scenario file without running it")
@group_options(config_option, quiet_option)
def validate(config: Optional[Path], quiet: bool):
    _configure_logging(quiet)
    cfg = _load(config, None, None, None, None)
    try:
        if cfg.scenario == ScenarioKind.RADAR_RANGING:
            radar_valid_samples_per_step(cfg)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    if not quiet:
        click.echo(f"{cfg.scenario.value} {config_hash(cfg)}")
    sys.exit(EXIT_OK)
