"""
Run configuration parsing and rendering.

The configuration grammar is TOML; see README.md for the keys of every
section. ``render_config`` writes the canonical form, which is also the text
whose digest is recorded in the run manifest.
"""

import json
import logging
import math
import re
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import BaseModel, ValidationError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from gou_ruin.core.exceptions import ConfigError
from gou_ruin.schemas.config import RunConfig
from gou_ruin.services.levy_models import validate

logger = logging.getLogger(__name__)

SECTION_ORDER = ("model", "simulation", "analysis", "output", "verify", "overrides")


class ConfigSyntaxError(ConfigError):
    """Custom exception for malformed configuration text."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class UnknownKeyError(ConfigError):
    """Raised when a configuration section contains a key it does not define."""
    pass


class MissingSeedError(ConfigError):
    """Raised when the simulation section has no seed."""
    pass


class InvalidConfigError(ConfigError):
    """Raised for configuration values rejected by the schema."""
    pass


def _translate(error: ValidationError) -> ConfigError:
    details = error.errors()
    for detail in details:
        location = ".".join(str(part) for part in detail["loc"])
        if detail["type"] == "extra_forbidden":
            return UnknownKeyError(f"unknown key '{location}'")
    first = details[0]
    location = ".".join(str(part) for part in first["loc"])
    return InvalidConfigError(f"{location}: {first['msg']}")


def parse_config(text: str, force: bool = False) -> RunConfig:
    """
    Parse and validate a run configuration.

    Args:
        text: TOML text
        force: Accept a model that only fails the Condition A constraint
            (also enabled by ``overrides.force`` in the text)

    Returns:
        The validated configuration

    Raises:
        ConfigSyntaxError: Malformed TOML, with its line number
        MissingSeedError: No ``simulation.seed``
        UnknownKeyError: A key not defined by its section
        InvalidConfigError: A value rejected by the schema
        ModelValidationError: Model invariants fail (passed through)

    Example:
        >>> config = parse_config(Path("configs/brownian_reference.toml").read_text())
        >>> config.simulation.step
        0.00390625
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ConfigSyntaxError(str(e), int(match.group(1)) if match else 0) from e

    simulation = data.get("simulation")
    if not isinstance(simulation, dict) or "seed" not in simulation:
        raise MissingSeedError("simulation.seed is required; runs never draw from entropy")

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise _translate(e) from e

    if config.overrides.unchecked_model:
        logger.warning(f"Model invariants not checked for {config.model.variant} (overrides.unchecked_model)")
        return config
    allow = force or config.overrides.force
    validate(config.model, allow_condition_a_violation=allow)
    return config


def load_config(path: Union[str, Path], force: bool = False) -> RunConfig:
    """Read and parse a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    logger.info(f"Loaded configuration from {path}")
    return parse_config(text, force=force)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return json.dumps(value.value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(item) for item in value) + "]"
    raise TypeError(f"cannot render {type(value).__name__} as TOML")


def _section_items(section: BaseModel) -> Dict[str, Any]:
    return {
        name: getattr(section, name)
        for name in type(section).model_fields
        if getattr(section, name) is not None
    }


def render_config(config: RunConfig) -> str:
    """
    Canonical TOML text of a configuration.

    Every field is written explicitly, so ``parse_config(render_config(c)) == c``.
    """
    lines = []
    for name in SECTION_ORDER:
        section = getattr(config, name)
        lines.append(f"[{name}]")
        items = _section_items(section)
        if name == "model":
            items = {"variant": items.pop("variant"), **items}
        for key, value in items.items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)
