"""Layered key=value configuration: defaults, then file, then flag overrides."""

from __future__ import annotations

from pathlib import Path

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"{source}:{lineno}: empty key")
        if key in values:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def read_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    return parse_config_text(path.read_text(), source=str(path))


def coerce_like(default, raw: str, key: str):
    """Parse raw with the type of the default value; bools accept true/false words."""
    if isinstance(default, bool):
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValueError(f"config key {key!r}: could not parse {raw!r}") from None
    return raw


def resolve(defaults: dict, file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Apply file then flag layers over the defaults; unknown keys are errors."""
    out = dict(defaults)
    for key, raw in (file_values or {}).items():
        if key not in defaults:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = coerce_like(defaults[key], raw, key)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in defaults:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = value
    return out


def format_config(cfg: dict) -> str:
    lines = []
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_config(path: str | Path, cfg: dict) -> None:
    Path(path).write_text(format_config(cfg))
