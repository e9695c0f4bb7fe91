from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from rydar_isac.cli.isac_util import cli
from rydar_isac.errors import DomainError
from rydar_isac.util import read_csv
from rydar_isac.waveform_gen import (
    gen_freq_hop,
    gen_lfm,
    HopPlan,
    WaveformKind,
)
from rydar_isac.waveform_io import (
    decode_waveform,
    encode_waveform,
    HEADER,
    read_waveform,
    write_waveform,
    write_waveform_csv,
)


@pytest.fixture
def test_data_dir():
    return Path(".") / "tests" / "test_data"


def test_container_layout():
    w = gen_lfm(1.0e6, 1.0e-5, 2.5e6, carrier=3.0e9)
    data = encode_waveform(w)
    assert len(data) == HEADER.size + 16 * len(w)
    decoded = decode_waveform(data)
    assert decoded.sample_rate == w.sample_rate
    assert decoded.carrier == w.carrier
    assert decoded.kind == WaveformKind.LFM
    np.testing.assert_array_equal(decoded.samples, w.samples)


def test_corrupt_containers():
    data = encode_waveform(gen_lfm(1.0e6, 1.0e-5, 2.5e6))
    with pytest.raises(DomainError):
        decode_waveform(data[:10])
    with pytest.raises(DomainError):
        decode_waveform(data[:-16])
    bad_kind = HEADER.pack(2.5e6, 0.0, 99, 0)
    with pytest.raises(DomainError):
        decode_waveform(bad_kind)


def test_files(tmp_path):
    plan = HopPlan(n_steps=3, step_spacing=10.0e6, dwell=4.0e-6, start_frequency=10.0e9)
    w = gen_freq_hop(plan, 2.5e6)
    read = read_waveform(write_waveform(w, tmp_path / "hop.bin"))
    assert read.kind == WaveformKind.FREQ_HOP
    np.testing.assert_array_equal(read.samples, w.samples)
    rows = read_csv(write_waveform_csv(w, tmp_path / "hop.csv"))
    assert len(rows) == len(w)
    assert list(rows[0]) == ["t", "I", "Q"]
    assert float(rows[1]["t"]) == pytest.approx(1 / 2.5e6)


def test_export_waveform_command(tmp_path):
    runner = CliRunner()
    result = runner.invoke(cli, ["export-waveform", "--out", str(tmp_path), "--seed", "3"])
    assert result.exit_code == 0, result.output
    w = read_waveform(tmp_path / "radar_ranging_tx.bin")
    assert len(w) == 10000
    assert w.carrier == 10.0e9
    assert (tmp_path / "radar_ranging_tx.csv").exists()


def test_export_waveform_bad_config(test_data_dir, tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        cli, ["export-waveform", "--config", str(test_data_dir / "unknown_key.yaml"), "--out", str(tmp_path)]
    )
    assert result.exit_code == 2
