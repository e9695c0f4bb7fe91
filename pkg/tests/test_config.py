from pathlib import Path

import pytest

from rydar_isac.comms_proc import ErasurePolicy
from rydar_isac.config import (
    config_hash,
    config_to_dict,
    dump_config,
    load_config,
    resolve_axis,
    ScenarioKind,
    with_value,
)
from rydar_isac.errors import ConfigError
from rydar_isac.waveform_gen import WaveformKind


@pytest.fixture
def test_data_dir():
    return Path(".") / "tests" / "test_data"


def test_defaults():
    cfg = load_config(environ={})
    assert cfg.scenario == ScenarioKind.RADAR_RANGING
    assert cfg.radar.n_steps == 100
    assert cfg.radar.plan().synthesized_bandwidth == pytest.approx(1.0e9)
    assert cfg.channel.auto_sigma
    assert cfg.comms.tone_spacing == cfg.comms.symbol_rate_sps
    assert cfg.comms.samples_per_symbol == 16
    assert cfg.atomic.dither == pytest.approx(cfg.atomic.gamma_hz / 100)
    assert [c.name for c in cfg.bandwidth_gate.cases] == ["lfm_50mhz", "hop_1ghz_5mhz_steps"]


def test_scenario_file(test_data_dir):
    cfg = load_config(test_data_dir / "bandwidth_gate.yaml", environ={})
    assert cfg.scenario == ScenarioKind.BANDWIDTH_GATE
    assert [c.kind for c in cfg.bandwidth_gate.cases] == [WaveformKind.LFM, WaveformKind.FREQ_HOP, WaveformKind.TONE]
    assert cfg.bandwidth_gate.cases[1].step_bandwidth_hz == 2.0e6


def test_unknown_key(test_data_dir):
    with pytest.raises(ConfigError) as excinfo:
        load_config(test_data_dir / "unknown_key.yaml", environ={})
    assert excinfo.value.path == "radar.dwell_us"


def test_retune_latency_belongs_to_receiver():
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"radar": {"retune_latency_s": 4.0e-6}}, environ={})
    assert excinfo.value.path == "radar.retune_latency_s"
    cfg = load_config(overrides={"receiver": {"retune_latency_s": 4.0e-6}}, environ={})
    assert cfg.receiver.retune_latency_s == 4.0e-6


def test_type_and_range_errors():
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"radar": {"n_steps": "many"}}, environ={})
    assert excinfo.value.path == "radar.n_steps"
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"comms": {"m": 3}}, environ={})
    assert excinfo.value.path == "comms.m"
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"trials": 0}, environ={})
    assert excinfo.value.path == "trials"
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"channel": {"awgn_sigma_v_m": "loud"}}, environ={})
    assert excinfo.value.path == "channel.awgn_sigma_v_m"
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"radar": {"range_max_m": 20.0}}, environ={})
    assert excinfo.value.path == "radar.range_max_m"
    assert str(excinfo.value).startswith("radar.range_max_m: ")


def test_precedence(test_data_dir):
    environ = {"RYDAR_SEED": "7", "RYDAR_COMMS__ISR_DB": "-10", "HOME": "/root"}
    cfg = load_config(test_data_dir / "comms_small.yaml", environ=environ)
    assert cfg.seed == 7
    assert cfg.comms.isr_db == -10.0
    assert cfg.comms.n_symbols == 2000
    cfg = load_config(test_data_dir / "comms_small.yaml", overrides={"seed": 9}, environ=environ)
    assert cfg.seed == 9


def test_optional_values():
    cfg = load_config(overrides={"comms": {"isr_db": None, "erasure_policy": "count_error"}}, environ={})
    assert cfg.comms.isr_db is None
    assert cfg.comms.erasure_policy == ErasurePolicy.COUNT_ERROR


def test_hash_ignores_output_location():
    a = load_config(overrides={"output_dir": "a", "workers": 1}, environ={})
    b = load_config(overrides={"output_dir": "b", "workers": 4}, environ={})
    c = load_config(overrides={"seed": 1}, environ={})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def test_snapshot_reloads(tmp_path, test_data_dir):
    cfg = load_config(test_data_dir / "bandwidth_gate.yaml", environ={})
    snapshot = dump_config(cfg, tmp_path / "config.yaml")
    again = load_config(snapshot, environ={})
    assert config_to_dict(again) == config_to_dict(cfg)
    assert config_hash(again) == config_hash(cfg)


def test_resolve_axis():
    assert resolve_axis("comms.isr_db") == ["comms", "isr_db"]
    assert resolve_axis("seed") == ["seed"]
    with pytest.raises(ConfigError):
        resolve_axis("comms.erasure_policy")
    with pytest.raises(ConfigError):
        resolve_axis("comms.isr_db.value")
    with pytest.raises(ConfigError):
        resolve_axis("nope")


def test_with_value():
    cfg = load_config(environ={})
    changed = with_value(cfg, "comms.isr_db", -30.0, output_dir="elsewhere")
    assert changed.comms.isr_db == -30.0
    assert changed.output_dir == "elsewhere"
    assert cfg.comms.isr_db == -20.0
    with pytest.raises(ConfigError):
        with_value(cfg, "radar.n_steps", 1)
