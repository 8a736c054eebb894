"""Configuration: a flat key/value file in TOML syntax plus environment
overrides (``DAVOTS_PORT``, ``DAVOTS_CACHE``)."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_PORT = 8700
DEFAULT_CACHE = "~/.cache/davots"

_LINE = re.compile(r"^\s*([A-Za-z_][\w.-]*)\s*=\s*(.+?)\s*$")


class ConfigError(ValueError):
    pass


def _parse_value(raw: str):
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [_parse_value(p.strip()) for p in inner.split(",")] if inner else []
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r}") from None


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped or stripped.startswith("["):
            continue
        m = _LINE.match(stripped)
        if not m:
            raise ConfigError(f"line {lineno}: expected key = value")
        values[m.group(1)] = _parse_value(m.group(2))
    return values


@dataclass
class Config:
    port: int = DEFAULT_PORT
    cache_dir: Path = field(default_factory=lambda: Path(DEFAULT_CACHE).expanduser())
    datasets: list[str] = field(default_factory=list)

    @staticmethod
    def load(path: str | Path | None = None, env: dict | None = None) -> "Config":
        env = os.environ if env is None else env
        cfg = Config()
        if path is not None:
            values = parse_config_text(Path(path).read_text())
            if "port" in values:
                cfg.port = int(values["port"])
            if "cache_dir" in values:
                cfg.cache_dir = Path(str(values["cache_dir"])).expanduser()
            if "datasets" in values:
                ds = values["datasets"]
                cfg.datasets = [str(d) for d in (ds if isinstance(ds, list) else [ds])]
        if env.get("DAVOTS_PORT"):
            cfg.port = int(env["DAVOTS_PORT"])
        if env.get("DAVOTS_CACHE"):
            cfg.cache_dir = Path(env["DAVOTS_CACHE"]).expanduser()
        return cfg
