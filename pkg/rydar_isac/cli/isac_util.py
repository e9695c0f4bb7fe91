import click

from ..harness import cli as harness_cli
from ..waveform_io import cli as waveform_io_cli

cli = click.CommandCollection(
    sources=[harness_cli, waveform_io_cli],
    help="Simulate integrated sensing and communication with a Rydberg-atom receiver",
)
