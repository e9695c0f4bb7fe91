"""Waveform persistence.

Binary container, all little-endian::

    float64  sample rate (Hz)
    float64  carrier (Hz)
    uint32   kind code (index into WaveformKind)
    uint64   sample count N
    float64  I0, Q0, I1, Q1, ... (2N values)

Only samples and their timing survive; schedules and bandwidth bookkeeping do not.
"""

import logging
import struct
import sys
from pathlib import Path

import click
import numpy as np

from .cli.options import (
    config_option,
    group_options,
    output_option,
    seed_option,
)
from .config import load_config
from .errors import (
    ConfigError,
    DomainError,
)
from .harness import (
    build_transmit_waveform,
    EXIT_CONFIG_ERROR,
)
from .util import (
    verify_output_dir,
    write_csv,
)
from .waveform_gen import (
    Waveform,
    WaveformKind,
)

log = logging.getLogger(__name__)

HEADER = struct.Struct("<ddIQ")
_KINDS = list(WaveformKind)
_SAMPLE_DTYPE = np.dtype("<f8")


def encode_waveform(w: Waveform) -> bytes:
    interleaved = np.empty(2 * len(w), dtype=_SAMPLE_DTYPE)
    interleaved[0::2] = w.samples.real
    interleaved[1::2] = w.samples.imag
    header = HEADER.pack(w.sample_rate, w.carrier, _KINDS.index(w.kind), len(w))
    return header + interleaved.tobytes()


def decode_waveform(data: bytes) -> Waveform:
    if len(data) < HEADER.size:
        raise DomainError(f"waveform container is truncated: {len(data)} bytes")
    sample_rate, carrier, kind_code, length = HEADER.unpack_from(data)
    if kind_code >= len(_KINDS):
        raise DomainError(f"unknown waveform kind code {kind_code}")
    payload = data[HEADER.size :]
    if len(payload) != 16 * length:
        raise DomainError(f"container announces {length} samples but holds {len(payload) // 16}")
    interleaved = np.frombuffer(payload, dtype=_SAMPLE_DTYPE)
    samples = interleaved[0::2] + 1j * interleaved[1::2]
    return Waveform(
        sample_rate=sample_rate, carrier=carrier, samples=samples, inst_bandwidth=0.0, kind=_KINDS[kind_code]
    )


def write_waveform(w: Waveform, path: Path) -> Path:
    path.write_bytes(encode_waveform(w))
    return path


def read_waveform(path: Path) -> Waveform:
    return decode_waveform(path.read_bytes())


def write_waveform_csv(w: Waveform, path: Path) -> Path:
    rows = zip(w.times(), w.samples.real, w.samples.imag)
    return write_csv(path, ("t", "I", "Q"), rows)


@click.group(help="Waveform export")
def cli():
    pass


@cli.command("export-waveform", help="Write a scenario's transmit waveform as binary container and CSV")
@group_options(config_option, seed_option, output_option)
def export_waveform(config: Path, seed: int, out: Path):
    overrides = {k: v for k, v in (("seed", seed), ("output_dir", out)) if v is not None}
    try:
        cfg = load_config(config, overrides=overrides)
        output_dir = verify_output_dir(Path(cfg.output_dir))
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    waveform = build_transmit_waveform(cfg)
    stem = f"{cfg.scenario.value}_tx"
    binary = write_waveform(waveform, output_dir / f"{stem}.bin")
    table = write_waveform_csv(waveform, output_dir / f"{stem}.csv")
    log.info("wrote %d samples to %s and %s", len(waveform), binary, table)
    click.echo(str(binary))
