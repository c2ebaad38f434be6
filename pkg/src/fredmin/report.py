"""Deterministic report rendering.

Reports are nested dicts built in a fixed order by the pipeline. The text
format writes every scalar with 17 significant digits; the JSON format keeps
json's shortest round-trip float encoding. Two runs of the same problem file
produce byte-identical output.
"""

from __future__ import annotations

import json


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _emit(prefix, value, lines):
    if isinstance(value, dict):
        for key, sub in value.items():
            _emit(f"{prefix}.{key}" if prefix else str(key), sub, lines)
        return
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            for idx, row in enumerate(value):
                lines.append(f"{prefix}[{idx}] = "
                             + " ".join(_fmt(x) for x in row))
        else:
            lines.append(f"{prefix} = " + "; ".join(_fmt(x) for x in value))
        return
    lines.append(f"{prefix} = {_fmt(value)}")


def render_text(report: dict) -> str:
    lines = ["# fredmin solve report"]
    _emit("", report, lines)
    return "\n".join(lines) + "\n"


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"
