"""Run configuration and table serialization.

Config files are flat ``key = value`` text with ``#`` comments. Lists are
comma separated. Every emitted table starts with ``#`` metadata lines
(schema version, config hash, base seed, build id, timestamp) followed by
exactly one header row; floats are written with 17 significant digits so
they round-trip bit for bit.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "OUTPUT_DIR_ENV",
    "ConfigError",
    "Param",
    "parse_config_text",
    "read_config_file",
    "coerce_config",
    "config_hash",
    "build_id",
    "RunMeta",
    "format_value",
    "write_table",
    "write_metadata",
    "read_csv_table",
    "default_output_dir",
]

SCHEMA_VERSION = "1"
OUTPUT_DIR_ENV = "KINKCHAIN_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    kind: Callable[[str], Any]
    default: Any
    help: str
    is_list: bool = False


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _convert(param: Param, key: str, value: Any) -> Any:
    if value is None:
        return None
    try:
        if param.kind is bool and isinstance(value, str):
            conv = _bool
        else:
            conv = param.kind
        if param.is_list:
            items = value.split(",") if isinstance(value, str) else list(value)
            return tuple(conv(x.strip() if isinstance(x, str) else x) for x in items if str(x).strip())
        return conv(value.strip() if isinstance(value, str) else value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc


def coerce_config(schema: Mapping[str, Param], raw: Mapping[str, Any]) -> dict[str, Any]:
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return {key: _convert(p, key, raw.get(key, p.default)) for key, p in schema.items()}


def _jsonable(x: Any) -> Any:
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def config_hash(config: Mapping[str, Any]) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@lru_cache(maxsize=1)
def build_id() -> str:
    """``<version>+<sha1 of the package sources>``, stable for a given source tree."""
    from . import __version__

    h = hashlib.sha1()
    root = Path(__file__).parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


@dataclass(frozen=True)
class RunMeta:
    command: str
    config: Mapping[str, Any]
    base_seed: int
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    def header(self) -> dict[str, Any]:
        from .lattice import RNG_NAME

        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config_hash": config_hash(self.config),
            "base_seed": int(self.base_seed),
            "build_id": build_id(),
            "rng": RNG_NAME,
            "timestamp": self.timestamp,
        }


def format_value(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    meta: RunMeta,
    fmt: str = "csv",
) -> Path:
    """Write one table as CSV (``#`` metadata lines, one header row) or JSON."""
    rows = [list(r) for r in rows]
    path = Path(path).with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            for key, value in meta.header().items():
                fh.write(f"# {key}: {value}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([format_value(x) for x in r])
    elif fmt == "json":
        payload = {"meta": meta.header(), "columns": list(columns), "rows": _jsonable(rows)}
        path.write_text(json.dumps(payload, indent=1) + "\n")
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    return path


def write_metadata(outdir: Path, meta: RunMeta, files: Sequence[Path], extra: Mapping[str, Any] | None = None) -> Path:
    payload = dict(meta.header())
    payload["config"] = _jsonable(meta.config)
    payload["files"] = [Path(f).name for f in files]
    if extra:
        payload.update(_jsonable(extra))
    path = Path(outdir) / "metadata.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return path


def read_csv_table(path: str | os.PathLike) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Inverse of :func:`write_table` for CSV: ``(meta, columns, rows)``."""
    meta: dict[str, str] = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "kinkchain-out"))
