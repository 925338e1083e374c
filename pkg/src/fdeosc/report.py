"""JSON report assembly. Output is deterministic apart from ``generated_at``."""
from __future__ import annotations

import dataclasses
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__

SCHEMA = 1
VERDICT_WORDING = "criterion hypotheses verified numerically"


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(dataclasses.asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def new_report(command: str, config: dict, policy: dict) -> dict:
    return {
        "schema": SCHEMA,
        "toolkit": "fdeosc",
        "version": __version__,
        "generated_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "command": command,
        "config": config,
        "policy": policy,
        "warnings": [],
    }


def add_warnings(report: dict, warnings) -> None:
    for w in warnings:
        if w not in report["warnings"]:
            report["warnings"].append(w)


def dumps(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: dict, path: str | Path | None) -> str:
    text = dumps(report)
    if path is not None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    return text


def strip_timestamp(text: str) -> dict:
    data = json.loads(text)
    data.pop("generated_at", None)
    return data
