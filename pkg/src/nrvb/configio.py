"""Line-oriented key=value config text, used by checkpoints, bitstreams and the CLI."""

from __future__ import annotations


def dumps(d: dict) -> str:
    lines = []
    for key in sorted(d):
        value = d[key]
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, float):
            value = repr(value)
        if isinstance(value, (tuple, list)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
