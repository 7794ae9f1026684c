"""Plain-text ``key = value`` files used for manifests, sidecars, configs and reports."""
from __future__ import annotations

import math
from pathlib import Path


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def dumps(items: dict) -> str:
    lines = []
    for key, value in items.items():
        text = format_value(value)
        if "\n" in text:
            raise ValueError(f"value for {key!r} spans several lines")
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines. Blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write(path, items: dict) -> None:
    Path(path).write_text(dumps(items), encoding="utf-8")


def read(path) -> dict[str, str]:
    return loads(Path(path).read_text(encoding="utf-8"))


def parse_scalar(text: str):
    """Best-effort conversion of a stored string back to bool/int/float/str."""
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text
