"""Flat key-value experiment configs with strict key checking.

Config files hold one ``key = value`` pair per line; blank lines and
lines starting with ``#`` are ignored.  Every key must belong to the
schema of the command being run -- unknown keys are rejected so a typo
cannot silently fall back to a default.  Command-line flags override
file values.
"""

from __future__ import annotations

__all__ = ["ConfigError", "read_config_file", "coerce", "merge_config"]


class ConfigError(ValueError):
    """Invalid config file contents or values."""


def read_config_file(path) -> dict[str, str]:
    """Parse a flat key-value file into a string-to-string mapping."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value
    return values


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def coerce(key: str, text: str, kind):
    """Convert a raw string to the schema type for ``key``.

    ``kind`` is ``int``, ``float``, ``bool``, ``str``, or
    ``list[float]`` (comma-separated).
    """
    try:
        if kind is bool:
            return _parse_bool(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is str:
            return text
        if kind == "list[float]":
            return [float(part) for part in text.split(",") if part.strip()]
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None
    raise ConfigError(f"unsupported schema type for key {key!r}")


def merge_config(schema: dict, file_values: dict[str, str], overrides: dict) -> dict:
    """Resolve a final config from schema defaults, file, and flags.

    ``schema`` maps key -> (type, default).  File values are coerced and
    checked against the schema; ``overrides`` (already typed, from
    command-line flags) win over file values.  A ``None`` override means
    the flag was not given.
    """
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    resolved = {}
    for key, (kind, default) in schema.items():
        value = default
        if key in file_values:
            value = coerce(key, file_values[key], kind)
        if overrides.get(key) is not None:
            value = overrides[key]
        resolved[key] = value
    return resolved
