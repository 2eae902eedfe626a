import logging
from collections import defaultdict
from contextlib import contextmanager
from pathlib import Path
from time import perf_counter
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from steinloc.exceptions import ConfigFileError

logger = logging.getLogger(__name__)


def next_prime(n: int) -> int:
    """Smallest prime >= n.

    Args:
        n (int): lower bound.

    Returns:
        int: the prime.
    """
    candidate = max(int(n), 2)
    while True:
        if candidate < 4 or all(candidate % d for d in range(2, int(candidate**0.5) + 1)):
            return candidate
        candidate += 1


def rng_streams(seed: int, names: list[str]) -> dict[str, np.random.Generator]:
    """Independent generators spawned from one root seed, one per pipeline stage.

    Args:
        seed (int): root seed.
        names (list[str]): stage names, the order fixes the spawned child.

    Returns:
        dict[str, np.random.Generator]: stage name to generator.
    """
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


class StageTimer:
    """Accumulates wall-clock seconds per named stage."""

    def __init__(self):
        self.durations: dict[str, float] = defaultdict(float)
        self._start = perf_counter()

    @contextmanager
    def __call__(self, stage: str) -> Iterator[None]:
        start = perf_counter()
        try:
            yield
        finally:
            self.durations[stage] += perf_counter() - start

    @property
    def total(self) -> float:
        return perf_counter() - self._start

    def as_dict(self, stages: Iterable[str] = ()) -> dict[str, float]:
        """Seconds per stage, `stages` first and zero when never entered, then `total`."""
        out = {stage: self.durations.get(stage, 0.0) for stage in stages}
        out.update(self.durations)
        out["total"] = self.total
        return out


def read_config_file(path: str | Path) -> dict[str, str]:
    """Read a flat `key = value` file, `#` starts a comment.

    Args:
        path (str | Path): config file.

    Raises:
        ConfigFileError: missing file, malformed line, or duplicate key.

    Returns:
        dict[str, str]: raw string values, validation is left to the caller.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"Config file {path} does not exist")
    try:
        table = pd.read_csv(
            path,
            sep=r"\s*=\s*",
            comment="#",
            header=None,
            names=["key", "value"],
            dtype=str,
            engine="python",
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError:
        return {}
    except (ValueError, pd.errors.ParserError) as e:
        raise ConfigFileError(f"Cannot parse {path}: {e}") from e
    table["key"] = table["key"].str.strip()
    table["value"] = table["value"].str.strip()
    if table["value"].isna().any():
        bad = table.loc[table["value"].isna(), "key"].tolist()
        raise ConfigFileError(f"{path}: keys without value {bad}")
    duplicated = table["key"][table["key"].duplicated()].tolist()
    if duplicated:
        raise ConfigFileError(f"{path}: duplicate keys {duplicated}")
    logger.debug(f"Read {len(table)} keys from {path}")
    return dict(zip(table["key"], table["value"]))
