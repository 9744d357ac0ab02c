"""Deterministic report serialization: JSON reports, CSV samples, manifests.

Reports must be byte-identical across re-runs with the same seed except
for their timestamp, so every writer here goes through one canonical
JSON encoding (sorted keys, repr floats) and hashes exclude the volatile
fields.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

REPORT_SCHEMA_VERSION = 1

# fields allowed to differ between identical runs
VOLATILE_KEYS = ("created", "wall_time_s")


def _jsonable(obj):
    """Recursively coerce numpy scalars/arrays so json.dumps is exact."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        try:
            return obj.item()
        except (AttributeError, ValueError):
            pass
    if hasattr(obj, "tolist"):
        return obj.tolist()
    return obj


def canonical_json(obj) -> str:
    """Stable textual form: sorted keys, no whitespace variation."""
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """16-hex-digit digest of a configuration mapping."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def content_hash(report: dict) -> str:
    """Digest of a report with the volatile fields removed."""
    stripped = {k: v for k, v in report.items() if k not in VOLATILE_KEYS}
    return hashlib.sha256(canonical_json(stripped).encode()).hexdigest()[:16]


def make_envelope(experiment: str, config: dict, results: dict,
                  passed: bool | None = None) -> dict:
    """Standard report body; the content hash covers everything but time."""
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "toolkit_version": __version__,
        "experiment": experiment,
        "config": _jsonable(config),
        "config_hash": config_hash(config),
        "results": _jsonable(results),
        "passed": passed,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    report["content_hash"] = content_hash(report)
    return report


def write_report(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n")
    return path


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())


def write_samples_csv(path, rows, header) -> Path:
    """Flat sample-level CSV (one row per sample) for external plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
    return path


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass
class RunManifest:
    """What one harness invocation produced."""

    experiment: str
    config_hash: str
    toolkit_version: str = __version__
    wall_time_s: float = 0.0
    outputs: list = field(default_factory=list)
    passed: bool | None = None
    created: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def write(self, path) -> Path:
        d = self.to_dict()
        if not d["created"]:
            d["created"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        return write_report(path, d)
