"""Flat ``key = value`` config files shared by the CLI and the experiment harness.

Keys are namespaced with a dotted prefix naming the consumer, e.g.::

    # comment lines and blanks are ignored
    home.cost_weight = 0.6
    train.episodes = 500
    trace.days = 31
    experiment.seeds = 0,1,2,3,4

Values are coerced by the dataclass field they land in (int, float, bool,
str, or comma-separated tuples thereof).
"""

from __future__ import annotations

import dataclasses
import typing
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a flat string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def section(mapping: dict[str, str], prefix: str) -> dict[str, str]:
    """Extract keys under ``prefix.`` with the prefix stripped."""
    head = prefix + "."
    return {k[len(head):]: v for k, v in mapping.items() if k.startswith(head)}


def _coerce(value: str, typ) -> object:
    origin = typing.get_origin(typ)
    if origin in (tuple, list):
        args = typing.get_args(typ)
        item_t = args[0] if args else str
        items = [v.strip() for v in value.split(",") if v.strip() != ""]
        seq = [_coerce(v, item_t) for v in items]
        return tuple(seq) if origin is tuple else seq
    if typ is bool:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if typ is int:
        return int(value)
    if typ is float:
        return float(value)
    return value


def apply_overrides(instance, mapping: dict[str, str]):
    """Return a copy of a dataclass with string overrides coerced per field type.

    Unknown keys raise, so config typos never pass silently.
    """
    if not mapping:
        return instance
    fields = {f.name: f for f in dataclasses.fields(instance)}
    changes = {}
    hints = typing.get_type_hints(type(instance))
    for key, value in mapping.items():
        if key not in fields:
            known = ", ".join(sorted(fields))
            raise ConfigError(f"unknown key {key!r} for {type(instance).__name__} (known: {known})")
        try:
            changes[key] = _coerce(value, hints[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from exc
    return dataclasses.replace(instance, **changes)
