import csv
import hashlib
import math
import os
from pathlib import Path
from typing import (
    Any,
    Iterable,
    List,
    Sequence,
    Union,
)

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0

SeedKey = Union[int, str]


def stable_int(key: SeedKey) -> int:
    """Map a seed key to a non-negative integer that is stable across runs and platforms."""
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"seed keys must be non-negative, got {key}")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(*keys: SeedKey) -> np.random.SeedSequence:
    return np.random.SeedSequence([stable_int(k) for k in keys])


def make_rng(*keys: SeedKey) -> np.random.Generator:
    """Independent generator for the stream identified by ``keys``, e.g. (master_seed, scenario, trial)."""
    return np.random.default_rng(seed_sequence(*keys))


def derive_seed(*keys: SeedKey) -> int:
    """A single 64-bit seed derived from ``keys``."""
    return int(seed_sequence(*keys).generate_state(1, dtype=np.uint64)[0])


def format_float(value: Any) -> str:
    # 17 significant digits round-trips any double; format() rounds half-to-even on the exact binary value.
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])
    return path


def read_csv(path: Path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def verify_output_dir(output_dir: Path) -> Path:
    if os.path.exists(output_dir) and not os.path.isdir(output_dir):
        msg = f"`{output_dir}` exists and is not a directory. Choose another location with '--out'"
        raise ConfigError("output_dir", msg)
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir
