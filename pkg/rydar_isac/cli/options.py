import pathlib
from typing import (
    Any,
    List,
    Optional,
)

import click
from click.core import (
    Context,
    Parameter,
)

from ..config import MAX_SEED

config_option = click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False, resolve_path=True, path_type=pathlib.Path),
    default=None,
    help="Scenario YAML file. Built-in defaults apply to everything it leaves out.",
)

output_option = click.option(
    "--out",
    type=click.Path(path_type=pathlib.Path),
    default=None,
    help="Directory for records, summary and config snapshot.",
)

trials_option = click.option(
    "--trials",
    type=int,
    default=None,
    help="Number of Monte-Carlo trials.",
)

quiet_option = click.option(
    "--quiet",
    is_flag=True,
    default=False,
    help="Only log warnings and do not print the summary.",
)

axis_option = click.option(
    "--axis",
    type=str,
    required=True,
    help="Dotted path of the numeric config field to sweep, e.g. comms.isr_db.",
)


def group_options(*options):
    def wrapper(function):
        for option in reversed(options):
            function = option(function)
        return function

    return wrapper


class ClickSeed(click.ParamType):
    name = "seed"

    def convert(self, value: Any, param: Optional[Parameter], ctx: Optional[Context]) -> int:
        if isinstance(value, int):
            seed = value
        else:
            try:
                seed = int(value, 0)
            except ValueError as e:
                self.fail(f"{value!r} is not an integer: {str(e)}", param, ctx)
        if not 0 <= seed < MAX_SEED:
            self.fail(f"{value!r} is not an unsigned 64-bit integer", param, ctx)
        return seed


class ClickFloatList(click.ParamType):
    name = "float list"

    def convert(self, value: Any, param: Optional[Parameter], ctx: Optional[Context]) -> List[float]:
        if isinstance(value, list):
            return value
        try:
            values = [float(v) for v in value.split(",") if v.strip()]
        except ValueError as e:
            self.fail(f"{value!r} is not a comma separated list of numbers: {str(e)}", param, ctx)
        if not values:
            self.fail("at least one value is required", param, ctx)
        return values


seed_option = click.option(
    "--seed",
    type=ClickSeed(),
    default=None,
    help="Master seed; every trial seed derives from it.",
)
