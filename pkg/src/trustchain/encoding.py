"""Hashing, canonical JSON and time helpers shared by every layer.

All on-ledger and over-the-wire objects are hashed or signed through
:func:`canonical_json`, so its output must not change between releases.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import math
import re
from decimal import Decimal
from typing import Any

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)
_LOWER_HEX = re.compile(r"(?:[0-9a-f]{2})*")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def from_hex(value: str, size: int | None = None) -> bytes:
    """Decode lowercase hex, optionally enforcing a byte length.

    Uppercase is rejected so every byte string has exactly one encoding.
    """
    if not isinstance(value, str) or not _LOWER_HEX.fullmatch(value):
        raise ValueError(f"expected lowercase hex string, got {value!r}")
    raw = bytes.fromhex(value)
    if size is not None and len(raw) != size:
        raise ValueError(f"expected {size} bytes, got {len(raw)}")
    return raw


def render_number(value: int | float) -> str:
    """Render a JSON number in shortest round-trip form (ECMAScript rules).

    Integers are written exactly. Floats use the shortest digit string that
    round-trips (``repr``) laid out the way ``Number.prototype.toString``
    does, so ``1.0`` renders as ``1`` and ``1e21`` as ``1e+21``.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(value, int):
        return str(value)
    if not math.isfinite(value):
        raise ValueError("non-finite numbers have no JSON form")
    if value == 0:
        return "0"
    sign = "-" if value < 0 else ""
    # repr() yields the shortest round-trip digit string
    _, digit_tuple, exponent = Decimal(repr(abs(value))).as_tuple()
    digits = "".join(map(str, digit_tuple)).lstrip("0")
    stripped = digits.rstrip("0")
    exponent += len(digits) - len(stripped)
    digits = stripped
    point = len(digits) + exponent
    k, n = len(digits), point
    if k <= n <= 21:
        out = digits + "0" * (n - k)
    elif 0 < n <= 21:
        out = digits[:n] + "." + digits[n:]
    elif -6 < n <= 0:
        out = "0." + "0" * (-n) + digits
    else:
        e = n - 1
        head = digits[0] + ("." + digits[1:] if k > 1 else "")
        out = f"{head}e{'+' if e > 0 else '-'}{abs(e)}"
    return sign + out


def _encode(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, float)):
        out.append(render_number(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        # code-point order of str keys equals bytewise order of their UTF-8
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"object keys must be strings, got {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot canonicalize {type(obj).__name__}")


def _needs_slow_path(obj: Any) -> bool:
    # The C encoder agrees with _encode on everything except float rendering
    # and silently stringifies non-str keys; both go through _encode instead.
    if isinstance(obj, float):
        return True
    if isinstance(obj, dict):
        return any(not isinstance(k, str) or _needs_slow_path(v) for k, v in obj.items())
    if isinstance(obj, (list, tuple)):
        return any(_needs_slow_path(v) for v in obj)
    return False


def canonical_json(obj: Any) -> bytes:
    """Sorted keys, no whitespace, UTF-8, shortest numbers."""
    if not _needs_slow_path(obj):
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    out: list[str] = []
    _encode(obj, out)
    return "".join(out).encode("utf-8")


def expect_keys(data: Any, keys: set[str], what: str) -> None:
    """Require ``data`` to be an object with exactly ``keys``."""
    if not isinstance(data, dict):
        raise ValueError(f"{what} must be a JSON object")
    if set(data) != keys:
        raise ValueError(f"{what} keys {sorted(data)} != {sorted(keys)}")


def rfc3339(seconds: int) -> str:
    stamp = dt.datetime.fromtimestamp(int(seconds), tz=dt.timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_rfc3339(value: str) -> int:
    stamp = dt.datetime.strptime(value, "%Y-%m-%dT%H:%M:%SZ")
    return int(stamp.replace(tzinfo=dt.timezone.utc).timestamp())
