"""Service configuration from a flat key = value file.

Recognized keys (all optional):

    listen = "127.0.0.1:8080"
    data_root = "data"
    study_tz = "UTC"
    exclude_cidrs = ["10.0.0.0/8", "192.168.0.0/16"]   # or a comma string
    thumbnail_rate_limit = 20.0                        # req/s per ip, <= 0 = off
    log_path = "data/access.log"
    admin_token = "secret"                             # guards sensor POSTs
    trust_forwarded_for = false                        # reverse-proxy setups
    ui_dir = "frontend"                                # serve the dashboard from /

The path can also come from the PLUMEWATCH_CONFIG environment variable.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, replace
from pathlib import Path
from zoneinfo import ZoneInfo

from .errors import ValidationError

ENV_VAR = "PLUMEWATCH_CONFIG"


@dataclass(frozen=True)
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    data_root: Path = Path("data")
    study_tz: str = "UTC"
    exclude_cidrs: tuple[str, ...] = ()
    thumbnail_rate_limit: float = 20.0
    log_path: Path | None = None  # defaults to <data_root>/access.log
    admin_token: str | None = None
    trust_forwarded_for: bool = False
    ui_dir: Path | None = None  # static dashboard files, served at /

    def resolved_log_path(self) -> Path:
        return self.log_path if self.log_path is not None else self.data_root / "access.log"

    def validate(self) -> None:
        if not self.data_root.is_dir():
            raise ValidationError(f"data root {self.data_root} does not exist")
        try:
            ZoneInfo(self.study_tz)
        except Exception:
            raise ValidationError(f"invalid study timezone {self.study_tz!r}") from None


_LINE_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.+?)\s*$")


def _parse_scalar(raw: str):
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
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
        pass
    return raw


def parse_flat_config(text: str) -> dict:
    """Flat TOML-style subset: strings, numbers, booleans, string arrays."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ValidationError(f"config line {lineno}: cannot parse {raw!r}")
        value = m.group("value")
        if not value.startswith(('"', "[")):
            value = value.split("#", 1)[0].strip()
        if value.startswith("["):
            if not value.endswith("]"):
                raise ValidationError(f"config line {lineno}: unterminated array")
            items = [v.strip() for v in value[1:-1].split(",") if v.strip()]
            values[m.group("key")] = [
                _parse_scalar(v) for v in items
            ]
        else:
            values[m.group("key")] = _parse_scalar(value)
    return values


def _cidr_list(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return tuple(str(v) for v in value)


def load_config(path: Path | str | None = None) -> ServiceConfig:
    """Load config from an explicit path, $PLUMEWATCH_CONFIG, or defaults."""
    if path is None:
        env = os.environ.get(ENV_VAR)
        if env:
            path = env
    config = ServiceConfig()
    if path is None:
        return config
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    values = parse_flat_config(path.read_text())

    updates: dict = {}
    if "listen" in values:
        listen = str(values["listen"])
        host, _, port = listen.rpartition(":")
        if not host or not port.isdigit():
            raise ValidationError(f"listen must look like host:port, got {listen!r}")
        updates["listen_host"] = host
        updates["listen_port"] = int(port)
    if "data_root" in values:
        updates["data_root"] = Path(str(values["data_root"]))
    if "study_tz" in values:
        updates["study_tz"] = str(values["study_tz"])
    if "exclude_cidrs" in values:
        updates["exclude_cidrs"] = _cidr_list(values["exclude_cidrs"])
    if "thumbnail_rate_limit" in values:
        updates["thumbnail_rate_limit"] = float(values["thumbnail_rate_limit"])
    if "log_path" in values:
        updates["log_path"] = Path(str(values["log_path"]))
    if "admin_token" in values:
        updates["admin_token"] = str(values["admin_token"]) or None
    if "trust_forwarded_for" in values:
        raw = values["trust_forwarded_for"]
        if not isinstance(raw, bool):
            raise ValidationError("trust_forwarded_for must be true or false")
        updates["trust_forwarded_for"] = raw
    if "ui_dir" in values:
        updates["ui_dir"] = Path(str(values["ui_dir"]))
    unknown = set(values) - {
        "listen", "data_root", "study_tz", "exclude_cidrs", "thumbnail_rate_limit",
        "log_path", "admin_token", "trust_forwarded_for", "ui_dir",
    }
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return replace(config, **updates)
