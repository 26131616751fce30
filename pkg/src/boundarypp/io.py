"""Plain-text serialisation helpers (CSV with round-trip floats, JSON, TOML)."""
from __future__ import annotations

import hashlib
import json
import math
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ValidationError


def fmt(v):
    """Shortest decimal string that round-trips to the same float."""
    if isinstance(v, (bool,)):
        return "1" if v else "0"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    f = float(v)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def write_csv(path, header: dict, columns: list[str], rows):
    """Write ``# key=value`` header lines, a column line and data rows."""
    path = Path(path)
    lines = [f"# {k}={header[k]}" for k in header]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(x if isinstance(x, str) else fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return ``(header, columns, rows)`` with rows as lists of strings."""
    header, columns, rows = {}, None, []
    for raw in Path(path).read_text().splitlines():
        if not raw.strip():
            continue
        if raw.startswith("#"):
            key, _, value = raw[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        elif columns is None:
            columns = raw.split(",")
        else:
            rows.append(raw.split(","))
    if columns is None:
        raise ValidationError(f"{path}: no column line")
    return header, columns, rows


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    try:
        import numpy as np
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.bool_):
            return bool(o)
    except ImportError:  # pragma: no cover
        pass
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json(path, obj):
    path = Path(path)
    path.write_text(canonical_json(obj))
    return path


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_config(path):
    """Parse a TOML configuration file into nested dictionaries."""
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"invalid config {path}: {exc}") from None
