"""Deterministic JSON reading and writing with exact decimal numbers.

The engine keeps decimal semantics exact end to end: instance files are read
with ``Decimal`` floats, arithmetic stays in ``Decimal``, and the writer below
emits decimals as plain number tokens (no float round-trip). The writer is
also byte-stable, which every golden test and content hash relies on:
non-ASCII is escaped, separators are fixed, and key order is either insertion
order or sorted, never interpreter-dependent.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from decimal import Context, Decimal
from typing import Any


def loads(text: str) -> Any:
    """Parse JSON, mapping floats to Decimal so no precision is lost."""
    return json.loads(text, parse_float=Decimal)


def canonical_decimal(value: Decimal) -> Decimal:
    """Strip trailing zeros without ever rounding, whatever the precision.

    The default-context normalize() rounds values beyond 28 significant
    digits; canonicalization must stay exact, so normalize under a context
    wide enough for the value itself.
    """
    ctx = Context(prec=max(1, len(value.as_tuple().digits)))
    return value.normalize(ctx)


def format_number(value: Decimal | int) -> str:
    # "f" expands any exponent the canonical form kept (1E+2 prints as 100).
    if isinstance(value, int):
        return str(value)
    return format(canonical_decimal(value), "f")


def _escape(text: str) -> str:
    out = ["\""]
    for ch in text:
        if ch == "\"":
            out.append("\\\"")
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20 or ord(ch) > 0x7E:
            cp = ord(ch)
            if cp > 0xFFFF:
                cp -= 0x10000
                hi = 0xD800 + (cp >> 10)
                lo = 0xDC00 + (cp & 0x3FF)
                out.append(f"\\u{hi:04x}\\u{lo:04x}")
            else:
                out.append(f"\\u{cp:04x}")
        else:
            out.append(ch)
    out.append("\"")
    return "".join(out)


def _write(obj: Any, parts: list[str], sort_keys: bool, indent: int | None, depth: int) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, (int, Decimal)):
        parts.append(format_number(obj))
    elif isinstance(obj, float):
        # Floats only ever enter via programmatic callers; keep repr stable.
        parts.append(repr(obj))
    elif isinstance(obj, str):
        parts.append(_escape(obj))
    elif isinstance(obj, _dt.datetime):
        parts.append(_escape(obj.isoformat()))
    elif isinstance(obj, _dt.date):
        parts.append(_escape(obj.isoformat()))
    elif isinstance(obj, dict):
        keys = sorted(obj) if sort_keys else list(obj)
        if not keys:
            parts.append("{}")
            return
        nl, pad, pad_in = _padding(indent, depth)
        parts.append("{" + nl)
        for i, key in enumerate(keys):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {type(key).__name__}")
            parts.append(pad_in)
            parts.append(_escape(key))
            parts.append(": " if indent is not None else ":")
            _write(obj[key], parts, sort_keys, indent, depth + 1)
            if i < len(keys) - 1:
                parts.append("," + nl)
        parts.append(nl + pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            parts.append("[]")
            return
        nl, pad, pad_in = _padding(indent, depth)
        parts.append("[" + nl)
        for i, item in enumerate(obj):
            parts.append(pad_in)
            _write(item, parts, sort_keys, indent, depth + 1)
            if i < len(obj) - 1:
                parts.append("," + nl)
        parts.append(nl + pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def _padding(indent: int | None, depth: int) -> tuple[str, str, str]:
    if indent is None:
        return "", "", ""
    return "\n", " " * (indent * depth), " " * (indent * (depth + 1))


def dumps(obj: Any, sort_keys: bool = False, indent: int | None = None) -> str:
    parts: list[str] = []
    _write(obj, parts, sort_keys, indent, 0)
    return "".join(parts)


def dump_lines(records: list[Any]) -> str:
    """JSON Lines: one compact record per line, trailing newline."""
    return "".join(dumps(rec) + "\n" for rec in records)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
