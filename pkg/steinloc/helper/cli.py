from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from django.conf import settings
from django.core.management.base import CommandError
from pydantic import ValidationError

from steinloc.exceptions import LocalizationError
from steinloc.helper.miscellaneous import read_config_file
from steinloc.localization.models import FilterConfig
from steinloc.simulation.models import Scenario
from steinloc.simulation.presets import PRESETS


@contextmanager
def command_errors() -> Iterator[None]:
    """Re-raise domain and validation errors as CommandError (non-zero exit)."""
    try:
        yield
    except (LocalizationError, ValidationError, ValueError) as e:
        raise CommandError(f"{type(e).__name__}: {e}") from e


def load_config(path: str | None = None, **overrides) -> FilterConfig:
    """FilterConfig from the optional key = value file, then non-None overrides.

    The profile falls back to LOCALIZATION_PROFILE and the seed to
    LOCALIZATION_SEED when neither the file nor the overrides set them.
    """
    values: dict = {
        "profile": settings.LOCALIZATION_PROFILE,
        "seed": settings.LOCALIZATION_SEED,
    }
    if path:
        values.update(read_config_file(path))
    values.update({key: value for key, value in overrides.items() if value is not None})
    return FilterConfig.model_validate(values)


def load_scenario(path: str | None = None, preset: str | None = None, seed: int | None = None) -> Scenario:
    if bool(path) == bool(preset):
        raise CommandError("Give exactly one of --scenario and --preset")
    if preset:
        if preset not in PRESETS:
            raise CommandError(f"Unknown preset {preset!r}, choose from {sorted(PRESETS)}")
        scenario = PRESETS[preset]()
    else:
        file = Path(path)
        if not file.is_file():
            raise CommandError(f"Scenario file {file} does not exist")
        scenario = Scenario.model_validate_json(file.read_text())
    if seed is not None:
        scenario = scenario.model_copy(update={"seed": seed})
    return scenario


def particle_counts(text: str) -> list[int]:
    """Parse `1e4,1e5,1e6` style lists."""
    try:
        counts = [int(float(item)) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise CommandError(f"Bad particle list {text!r}") from e
    if not counts or min(counts) < 1:
        raise CommandError(f"Bad particle list {text!r}")
    return counts


def output_dir(out: str | None, default_name: str) -> Path:
    return Path(out) if out else Path(settings.LOCALIZATION_OUTPUT_DIR) / default_name
