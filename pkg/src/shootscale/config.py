"""Run configuration: key=value config files and flag/file/default precedence.

Config files are plain ``key=value`` lines with ``#`` comments, one key per
line, using the long option names with underscores (``alpha_range=1e-3:200``).
Flags win over the file; the file wins over defaults; unknown keys are errors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .errors import ConfigError
from .ivp import IntegratorSettings

__all__ = ["RunConfig", "parse_kv_file", "parse_range", "parse_eps_list", "resolve_config"]


def parse_kv_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def parse_range(text: str) -> tuple[float, float]:
    """``lo:hi`` with lo < hi."""
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected lo:hi, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"non-numeric range bound in {text!r}") from exc
    if not lo < hi:
        raise ConfigError(f"range must satisfy lo < hi, got {text!r}")
    return lo, hi


def parse_eps_list(text: str) -> list[float]:
    """Either ``lo:hi:step`` (inclusive ladder) or a comma list ``a,b,c``."""
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"expected lo:hi:step, got {text!r}")
            lo, hi, step = (float(p) for p in parts)
            if step <= 0.0 or hi < lo:
                raise ConfigError(f"need step > 0 and hi >= lo in {text!r}")
            out = []
            k = 0
            while True:
                v = lo + k * step
                if v > hi * (1.0 + 1e-12):
                    break
                out.append(round(v, 12))
                k += 1
            return out
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"non-numeric value in {text!r}") from exc


@dataclass
class RunConfig:
    """Resolved per-command parameters plus shared integrator settings."""

    command: str
    values: dict[str, Any]
    settings: IntegratorSettings
    out_path: str | None = None
    fmt: str = "csv"
    quiet: bool = False
    jobs: int = 1

    def __getitem__(self, key: str) -> Any:
        return self.values[key]


def resolve_config(command: str, cli_values: dict[str, Any], file_values: dict[str, str],
                   spec: dict[str, tuple[Callable[[str], Any], Any]]) -> dict[str, Any]:
    """Merge CLI values (None means "not given"), config file and defaults.

    ``spec`` maps each key to (caster, default).  File keys outside the spec
    are rejected so that typos never pass silently.
    """
    unknown = set(file_values) - set(spec)
    if unknown:
        raise ConfigError(f"unknown config keys for {command!r}: {sorted(unknown)}")
    out: dict[str, Any] = {}
    for key, (caster, default) in spec.items():
        cli_val = cli_values.get(key)
        if cli_val is not None:
            out[key] = cli_val
        elif key in file_values:
            out[key] = caster(file_values[key])
        else:
            out[key] = default
    return out
