"""Experiment reports and their deterministic serialization.

JSON output uses sorted keys, floats written with 17 significant digits and
infinities as the strings ``"inf"`` / ``"-inf"``, so identical inputs give
byte-identical files.  CSV covers only the value tables.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

__all__ = ["Report", "to_plain", "dumps_json", "dumps_csv", "table"]


def table(columns: list[str], rows) -> dict:
    """A value table: column names plus row lists."""
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


@dataclass
class Report:
    experiment: str
    inputs: Any
    numeric: dict
    checks: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    wall_time: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def as_dict(self) -> dict:
        from . import __version__
        d = {
            "experiment": self.experiment,
            "inputs": self.inputs,
            "numeric": self.numeric,
            "checks": self.checks,
            "passed": self.passed,
            "results": self.results,
            "tables": self.tables,
            "versions": {"gcoupling": __version__, "numpy": np.__version__},
        }
        if self.wall_time is not None:
            d["wall_time_s"] = self.wall_time
        return d


def _float(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def to_plain(obj):
    """Convert numpy values, tuples and dataclass-like objects to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return to_plain(obj.as_dict())
    return str(obj)


def _emit(obj, indent: int, level: int, out: list) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(pad + json.dumps(k) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
        elif all(not isinstance(v, (dict, list)) for v in obj):
            # scalar rows stay on one line to keep tables readable
            out.append("[")
            for i, v in enumerate(obj):
                _emit(v, indent, level + 1, out)
                if i < len(obj) - 1:
                    out.append(", ")
            out.append("]")
        else:
            out.append("[\n")
            for i, v in enumerate(obj):
                out.append(pad)
                _emit(v, indent, level + 1, out)
                out.append(",\n" if i < len(obj) - 1 else "\n")
            out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(f"{obj:.17g}")
    else:
        out.append(json.dumps(obj))


def dumps_json(obj, indent: int = 2) -> str:
    """Deterministic JSON text of ``obj`` (a Report or plain data).

    >>> dumps_json({"b": 0.1, "a": float("inf")})
    '{\\n  "a": "inf",\\n  "b": 0.10000000000000001\\n}\\n'
    """
    if isinstance(obj, Report):
        obj = obj.as_dict()
    out: list[str] = []
    _emit(to_plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def dumps_csv(report: Report) -> str:
    """The report's value tables as CSV, with a leading ``table`` column.

    Raises ``ValueError`` when the report has no tables.
    """
    if not report.tables:
        raise ValueError(f"experiment {report.experiment!r} has no value tables; use JSON")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for name in sorted(report.tables):
        t = to_plain(report.tables[name])
        w.writerow(["table"] + t["columns"])
        for row in t["rows"]:
            w.writerow([name] + [f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()
