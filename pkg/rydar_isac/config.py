"""Scenario configuration.

Scenario files are YAML. Every physical quantity carries its unit in the key name
(``_hz``, ``_s``, ``_m``, ``_v_m``, ``_rad``, ``_rad_s``, ``_db``, ``_sps``, ``_c_m``).
Unknown keys are rejected with their dotted path.

Values are resolved in this order, later wins:

1. dataclass defaults below
2. the scenario file
3. environment: ``RYDAR_<SECTION>__<KEY>`` for section keys, ``RYDAR_<KEY>`` for top-level
   keys, each parsed as a YAML scalar (``RYDAR_COMMS__ISR_DB=-24``, ``RYDAR_SEED=7``)
4. command-line flags (``--seed``, ``--trials``, ``--out``)
"""

import dataclasses
import enum
import hashlib
import json
import math
import os
from dataclasses import (
    dataclass,
    field,
)
from pathlib import Path
from typing import (
    Any,
    Dict,
    get_args,
    get_origin,
    get_type_hints,
    List,
    Mapping,
    Optional,
    Union,
)

import yaml

from .atomic_core import (
    AtomicParams,
    DEFAULT_GAMMA_HZ,
    DEFAULT_LIN_FRAC,
    HbarMode,
    MAX_DITHER_FRACTION,
)
from .channel import (
    Path as ChannelPath,
    PathSet,
    SelectivityProfile,
)
from .coherent_frontend import (
    DEFAULT_RATIO_MIN,
    DEFAULT_RETUNE_LATENCY_S,
    NoiseParams,
)
from .comms_proc import ErasurePolicy
from .errors import (
    ConfigError,
    RydarError,
)
from .radar_proc import unambiguous_range
from .waveform_gen import (
    DEFAULT_BANDWIDTH_LIMIT_HZ,
    HopPlan,
    samples_for,
    WaveformKind,
)

ENV_PREFIX = "RYDAR_"
HASH_EXCLUDED = ("output_dir", "workers")
MAX_SEED = 2**64


class ScenarioKind(str, enum.Enum):
    RADAR_RANGING = "radar_ranging"
    COMMS_BER = "comms_ber"
    SPECTRUM_DEMO = "spectrum_demo"
    BANDWIDTH_GATE = "bandwidth_gate"


def _join(prefix: str, name: str) -> str:
    if not prefix:
        return name
    if not name:
        return prefix
    return f"{prefix}.{name}"


def _positive(section: object, *names: str) -> None:
    for name in names:
        value = getattr(section, name)
        if not value > 0:
            raise ConfigError(name, f"must be positive, got {value}")


def _non_negative(section: object, *names: str) -> None:
    for name in names:
        value = getattr(section, name)
        if not value >= 0:
            raise ConfigError(name, f"must be non-negative, got {value}")


@dataclass
class AtomicConfig:
    omega_p_rad_s: float = 1.0
    omega_c_rad_s: float = 1.0
    mu_c_m: float = 1.0
    hbar_mode: HbarMode = HbarMode.NORMALIZED
    scan_ratio_k: float = 1.0
    f0_hz: float = 0.0
    gamma_hz: float = DEFAULT_GAMMA_HZ
    lin_frac: float = DEFAULT_LIN_FRAC
    lo_splitting_hz: Optional[float] = None
    dither_hz: Optional[float] = None

    def __post_init__(self):
        try:
            self.params()
        except RydarError as e:
            raise ConfigError("", str(e))
        if self.dither_hz is not None and not 0 < self.dither_hz <= MAX_DITHER_FRACTION * self.gamma_hz:
            raise ConfigError("dither_hz", f"must lie in (0, {MAX_DITHER_FRACTION} x gamma_hz]")

    def params(self) -> AtomicParams:
        return AtomicParams(
            omega_p=self.omega_p_rad_s,
            omega_c=self.omega_c_rad_s,
            mu=self.mu_c_m,
            hbar_mode=self.hbar_mode,
            scan_ratio_k=self.scan_ratio_k,
            f0=self.f0_hz,
            gamma=self.gamma_hz,
            lin_frac=self.lin_frac,
            lo_splitting=self.lo_splitting_hz,
        )

    @property
    def dither(self) -> float:
        return self.gamma_hz / 100 if self.dither_hz is None else self.dither_hz


@dataclass
class NoiseConfig:
    sigma_psn: float = 0.0
    sigma_bgn_v_m: float = 0.0
    sigma_qpn_v_m: float = 0.0

    def __post_init__(self):
        _non_negative(self, "sigma_psn", "sigma_bgn_v_m", "sigma_qpn_v_m")

    def params(self, seed: int) -> NoiseParams:
        return NoiseParams(
            sigma_psn=self.sigma_psn, sigma_bgn=self.sigma_bgn_v_m, sigma_qpn=self.sigma_qpn_v_m, seed=seed
        )


@dataclass
class ReceiverConfig:
    lo_amplitude_v_m: float = 1.0e4
    lo_phase_rad: float = 0.0
    bandwidth_limit_hz: float = DEFAULT_BANDWIDTH_LIMIT_HZ
    retune_latency_s: float = DEFAULT_RETUNE_LATENCY_S
    ratio_min: float = DEFAULT_RATIO_MIN

    def __post_init__(self):
        _positive(self, "lo_amplitude_v_m", "bandwidth_limit_hz", "ratio_min")
        _non_negative(self, "retune_latency_s")


@dataclass
class PathConfig:
    delay_s: float = 0.0
    doppler_hz: float = 0.0
    gain: float = 1.0

    def __post_init__(self):
        _non_negative(self, "delay_s", "gain")

    def path(self) -> ChannelPath:
        return ChannelPath(delay=self.delay_s, doppler=self.doppler_hz, gain=self.gain)


@dataclass
class ChannelConfig:
    # "auto" calibrates the noise to the scenario's target SNR
    awgn_sigma_v_m: Union[float, str] = "auto"
    paths: List[PathConfig] = field(default_factory=lambda: [PathConfig()])
    selectivity: List[List[float]] = field(default_factory=lambda: [[0.0, 1.0]])
    detuning_of_carrier_hz: float = 0.0

    def __post_init__(self):
        if isinstance(self.awgn_sigma_v_m, str):
            if self.awgn_sigma_v_m != "auto":
                raise ConfigError("awgn_sigma_v_m", f"must be a number or 'auto', got {self.awgn_sigma_v_m!r}")
        elif not self.awgn_sigma_v_m >= 0:
            raise ConfigError("awgn_sigma_v_m", f"must be non-negative, got {self.awgn_sigma_v_m}")
        if not self.paths:
            raise ConfigError("paths", "at least one path is required")
        for i, knot in enumerate(self.selectivity):
            if len(knot) != 2:
                raise ConfigError(f"selectivity[{i}]", "knots are [detuning_hz, scale] pairs")
        try:
            self.selectivity_profile()
        except RydarError as e:
            raise ConfigError("selectivity", str(e))

    @property
    def auto_sigma(self) -> bool:
        return isinstance(self.awgn_sigma_v_m, str)

    def path_set(self) -> PathSet:
        return PathSet(tuple(p.path() for p in self.paths))

    def selectivity_profile(self) -> SelectivityProfile:
        return SelectivityProfile(tuple((k[0], k[1]) for k in self.selectivity))


@dataclass
class RadarConfig:
    n_steps: int = 100
    step_spacing_hz: float = 10.0e6
    start_frequency_hz: float = 10.0e9
    step_bandwidth_hz: float = 1.0e6
    dwell_s: float = 40.0e-6
    sample_rate_hz: float = 2.5e6
    range_min_m: float = 1.6
    range_max_m: float = 1.9
    rcs_gain: float = 1.0
    target_bound_m: float = 0.01
    accept_rmse_m: float = 0.0208
    zero_pad: int = 32

    def __post_init__(self):
        if self.n_steps < 2:
            raise ConfigError("n_steps", f"stepped synthesis needs at least two steps, got {self.n_steps}")
        _positive(
            self,
            "step_spacing_hz",
            "dwell_s",
            "sample_rate_hz",
            "rcs_gain",
            "target_bound_m",
            "accept_rmse_m",
            "zero_pad",
        )
        _non_negative(self, "step_bandwidth_hz", "range_min_m")
        if self.range_max_m < self.range_min_m:
            raise ConfigError("range_max_m", "must not be below range_min_m")
        try:
            plan = self.plan()
            plan.samples_per_dwell(self.sample_rate_hz)
        except RydarError as e:
            raise ConfigError("dwell_s", str(e))
        if self.range_max_m >= unambiguous_range(plan):
            raise ConfigError("range_max_m", f"targets must stay within the {unambiguous_range(plan)} m window")

    def plan(self) -> HopPlan:
        return HopPlan(
            n_steps=self.n_steps,
            step_spacing=self.step_spacing_hz,
            dwell=self.dwell_s,
            step_bandwidth=self.step_bandwidth_hz,
            start_frequency=self.start_frequency_hz,
        )


@dataclass
class CommsConfig:
    m: int = 4
    symbol_rate_sps: float = 80.0e3
    tone_spacing_hz: Optional[float] = None
    sample_rate_hz: float = 1.28e6
    carrier_hz: float = 0.0
    n_symbols: int = 20000
    signal_amplitude_v_m: float = 1.0
    target_awgn_ber: float = 0.01
    isr_db: Optional[float] = -20.0
    interferer_bandwidth_hz: float = 500.0e3
    interferer_duration_s: float = 1.0e-3
    accept_ber: float = 0.0397
    erasure_policy: ErasurePolicy = ErasurePolicy.DROP
    hop_frequencies_hz: List[float] = field(default_factory=list)
    symbols_per_hop: Optional[int] = None

    def __post_init__(self):
        if self.m < 2 or self.m & (self.m - 1):
            raise ConfigError("m", f"alphabet size must be a power of two, got {self.m}")
        _positive(
            self, "symbol_rate_sps", "sample_rate_hz", "n_symbols", "signal_amplitude_v_m", "interferer_duration_s"
        )
        _non_negative(self, "interferer_bandwidth_hz")
        if not 0 < self.target_awgn_ber < 0.5:
            raise ConfigError("target_awgn_ber", "must lie in (0, 0.5)")
        if not 0 <= self.accept_ber <= 1:
            raise ConfigError("accept_ber", "must lie in [0, 1]")
        try:
            samples_for(1.0 / self.symbol_rate_sps, self.sample_rate_hz, "symbol period")
        except RydarError as e:
            raise ConfigError("sample_rate_hz", str(e))
        if self.hop_frequencies_hz and not (self.symbols_per_hop and self.symbols_per_hop > 0):
            raise ConfigError("symbols_per_hop", "a positive value is required with hop_frequencies_hz")

    @property
    def tone_spacing(self) -> float:
        return self.symbol_rate_sps if self.tone_spacing_hz is None else self.tone_spacing_hz

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.m))

    @property
    def samples_per_symbol(self) -> int:
        return int(round(self.sample_rate_hz / self.symbol_rate_sps))


@dataclass
class SpectrumConfig:
    rf_amplitudes_v_m: List[float] = field(default_factory=lambda: [0.0, 500.0, 1000.0])
    rf_phase_rad: float = 0.0
    grid_points: int = 4001
    accept_linearity: float = 0.01

    def __post_init__(self):
        if not self.rf_amplitudes_v_m:
            raise ConfigError("rf_amplitudes_v_m", "at least one amplitude is required")
        if any(a < 0 for a in self.rf_amplitudes_v_m):
            raise ConfigError("rf_amplitudes_v_m", "amplitudes must be non-negative")
        if self.grid_points < 3:
            raise ConfigError("grid_points", "need at least three grid points")
        _positive(self, "accept_linearity")


@dataclass
class GateCase:
    name: str = "case"
    kind: WaveformKind = WaveformKind.TONE
    expect_pass: bool = True
    sample_rate_hz: float = 1.0e6
    duration_s: float = 1.0e-4
    bandwidth_hz: float = 0.0
    offset_hz: float = 0.0
    n_steps: int = 1
    step_spacing_hz: float = 1.0e6
    dwell_s: float = 1.0e-5
    step_bandwidth_hz: float = 0.0
    start_frequency_hz: float = 0.0

    def __post_init__(self):
        if self.kind not in (WaveformKind.LFM, WaveformKind.FREQ_HOP, WaveformKind.TONE):
            raise ConfigError("kind", "bandwidth gate cases support lfm, freq_hop and tone")
        _positive(self, "sample_rate_hz", "duration_s")

    def plan(self) -> HopPlan:
        return HopPlan(
            n_steps=self.n_steps,
            step_spacing=self.step_spacing_hz,
            dwell=self.dwell_s,
            step_bandwidth=self.step_bandwidth_hz,
            start_frequency=self.start_frequency_hz,
        )


def _default_gate_cases() -> List[GateCase]:
    return [
        GateCase(
            name="lfm_50mhz",
            kind=WaveformKind.LFM,
            expect_pass=False,
            bandwidth_hz=50.0e6,
            duration_s=10.0e-6,
            sample_rate_hz=125.0e6,
        ),
        GateCase(
            name="hop_1ghz_5mhz_steps",
            kind=WaveformKind.FREQ_HOP,
            expect_pass=True,
            n_steps=200,
            step_spacing_hz=5.0e6,
            step_bandwidth_hz=2.0e6,
            dwell_s=20.0e-6,
            sample_rate_hz=5.0e6,
        ),
    ]


@dataclass
class BandwidthGateConfig:
    cases: List[GateCase] = field(default_factory=_default_gate_cases)

    def __post_init__(self):
        if not self.cases:
            raise ConfigError("cases", "at least one case is required")


@dataclass
class ScenarioConfig:
    scenario: ScenarioKind = ScenarioKind.RADAR_RANGING
    seed: int = 0
    trials: int = 1
    output_dir: str = "rydar-output"
    workers: int = 1
    atomic: AtomicConfig = field(default_factory=AtomicConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radar: RadarConfig = field(default_factory=RadarConfig)
    comms: CommsConfig = field(default_factory=CommsConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    bandwidth_gate: BandwidthGateConfig = field(default_factory=BandwidthGateConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials", f"must be at least 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigError("workers", f"must be at least 1, got {self.workers}")
        if not 0 <= self.seed < MAX_SEED:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")


def _coerce_scalar(tp: Any, value: Any, path: str) -> Any:
    if tp is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(path, f"expected true or false, got {value!r}")
    if tp is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if tp is float:
        if isinstance(value, bool):
            raise ConfigError(path, f"expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            number = float(value)
        elif isinstance(value, str):
            try:
                number = float(value)
            except ValueError:
                raise ConfigError(path, f"expected a number, got {value!r}")
        else:
            raise ConfigError(path, f"expected a number, got {value!r}")
        if math.isnan(number):
            raise ConfigError(path, "must not be NaN")
        return number
    if tp is str:
        if isinstance(value, str):
            return value
        raise ConfigError(path, f"expected a string, got {value!r}")
    raise ConfigError(path, f"unsupported configuration type {tp}")


def _coerce(tp: Any, value: Any, path: str) -> Any:
    origin = get_origin(tp)
    if origin is Union:
        members = [arg for arg in get_args(tp) if arg is not type(None)]
        if value is None:
            if len(members) < len(get_args(tp)):
                return None
            raise ConfigError(path, "must not be null")
        messages = []
        for member in members:
            try:
                return _coerce(member, value, path)
            except ConfigError as e:
                messages.append(e.message)
        raise ConfigError(path, "; ".join(messages))
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        (item,) = get_args(tp)
        return [_coerce(item, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        return build_section(tp, value, path)
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        try:
            return tp(value)
        except ValueError:
            choices = ", ".join(str(m.value) for m in tp)
            raise ConfigError(path, f"must be one of {choices}, got {value!r}")
    return _coerce_scalar(tp, value, path)


def build_section(cls: Any, data: Any, path: str = "") -> Any:
    """Instantiate dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(path, f"expected a mapping, got {data!r}")
    hints = get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(str(k) for k in data if k not in names)
    if unknown:
        raise ConfigError(_join(path, unknown[0]), "unknown key")
    kwargs = {name: _coerce(hints[name], data[name], _join(path, name)) for name in names if name in data}
    try:
        return cls(**kwargs)
    except ConfigError as e:
        raise ConfigError(_join(path, e.path), e.message) from None


def apply_env_overrides(raw: Dict[str, Any], environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    for key in sorted(environ):
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX) :].lower()
        try:
            value = yaml.safe_load(environ[key])
        except yaml.YAMLError as e:
            raise ConfigError(name.replace("__", "."), f"cannot parse environment value: {e}")
        if "__" in name:
            section, option = name.split("__", 1)
            target = raw.setdefault(section, {})
            if not isinstance(target, dict):
                raise ConfigError(section, "expected a mapping")
            target[option] = value
        else:
            raw[name] = value
    return raw


def config_from_dict(raw: Mapping[str, Any]) -> ScenarioConfig:
    return build_section(ScenarioConfig, raw)


def load_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ScenarioConfig:
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as e:
            raise ConfigError("", f"cannot parse {path}: {e}")
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError("", f"{path} must hold a mapping at the top level")
        raw = loaded or {}
    apply_env_overrides(raw, environ)
    for key, value in (overrides or {}).items():
        raw[key] = str(value) if isinstance(value, Path) else value
    return config_from_dict(raw)


def _plain(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    return _plain(dataclasses.asdict(cfg))


def config_hash(cfg: ScenarioConfig) -> str:
    data = {k: v for k, v in config_to_dict(cfg).items() if k not in HASH_EXCLUDED}
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dump_config(cfg: ScenarioConfig, path: Path) -> Path:
    path.write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
    return path


def _field_type(cls: Any, name: str, axis: str) -> Any:
    if not dataclasses.is_dataclass(cls):
        raise ConfigError(axis, "does not name a configuration field")
    hints = get_type_hints(cls)
    if name not in hints:
        raise ConfigError(axis, "does not name a configuration field")
    return hints[name]


def _is_numeric(tp: Any) -> bool:
    if get_origin(tp) is Union:
        members = [arg for arg in get_args(tp) if arg is not type(None)]
        return len(members) == 1 and _is_numeric(members[0])
    return tp in (int, float)


def resolve_axis(axis: str) -> List[str]:
    """Split a dotted sweep axis and check it ends on a numeric field."""
    parts = axis.split(".")
    cls: Any = ScenarioConfig
    tp: Any = None
    for part in parts:
        tp = _field_type(cls, part, axis)
        cls = tp
    if not _is_numeric(tp):
        raise ConfigError(axis, "is not a numeric configuration field")
    return parts


def with_value(cfg: ScenarioConfig, axis: str, value: Any, **top_level: Any) -> ScenarioConfig:
    """Copy of ``cfg`` with the field at ``axis`` replaced, re-validated."""
    parts = resolve_axis(axis)
    raw = config_to_dict(cfg)
    target = raw
    for part in parts[:-1]:
        target = target[part]
    target[parts[-1]] = value
    raw.update(top_level)
    return config_from_dict(raw)
