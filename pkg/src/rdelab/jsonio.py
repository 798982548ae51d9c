"""Deterministic JSON/CSV writing.

Floats are written with 17 significant digits so that every value round-trips
bit-exactly; infinities become the strings ``"inf"`` / ``"-inf"``. Keys are
sorted, so equal inputs give byte-identical text.
"""
import json
import math
import os
import tempfile

import numpy as np


def _fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = "%.17g" % x
    if s in ("0", "-0"):
        return "0.0"
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, out, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ","
    if obj is None:
        out.append("null")
    elif obj is True or obj is False or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, k in enumerate(sorted(obj, key=str)):
            if i:
                out.append(sep)
            out.append(pad)
            out.append(json.dumps(str(k)) + ":" + ("" if indent is None else " "))
            _encode(obj[k], out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if len(seq) == 0:
            out.append("[]")
            return
        flat = all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
                   for v in seq)
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(sep)
            if not flat:
                out.append(pad)
            _encode(v, out, indent, level + 1)
        out.append(("" if flat else end) + "]")
    elif hasattr(obj, "to_dict"):
        _encode(obj.to_dict(), out, indent, level)
    else:
        raise TypeError("cannot encode %r" % type(obj))


def dumps(obj, indent=1):
    out = []
    _encode(obj, out, indent, 0)
    return "".join(out) + "\n"


def _decode_inf(obj):
    if isinstance(obj, str) and obj in ("inf", "-inf", "nan"):
        return float(obj)
    if isinstance(obj, list):
        return [_decode_inf(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _decode_inf(v) for k, v in obj.items()}
    return obj


def loads(text):
    return _decode_inf(json.loads(text))


def write_atomic(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, columns):
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join("%.17g" % v for v in row))
    return "\n".join(lines) + "\n"
