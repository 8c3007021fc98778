"""Serialization: CSV/JSON-lines writers, field dumps, run manifests.

All floats are written with 17 significant digits so files round-trip
exactly; identical configuration and seed therefore produce byte-identical
numeric outputs (the manifest, which carries a timestamp, is the one file
excluded from that guarantee).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from pathlib import Path

import numpy as np

ARTIFACT_VERSION = "0.1.0"


def fmt_float(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonify(obj):
    if isinstance(obj, (np.floating, float)):
        return float(format(float(obj), ".17g"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonify(dataclasses.asdict(obj))
    return obj


def dump_json(obj, path=None, **kw) -> str:
    text = json.dumps(_jsonify(obj), sort_keys=True, **kw)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_jsonify(rec), sort_keys=True) + "\n")


def dump_fields(path, times, fields, box_length: float) -> None:
    """Raw little-endian f64 snapshots with a JSON header sidecar."""
    arr = np.stack([f.samples for f in fields]).astype("<f8")
    arr.tofile(path)
    header = {
        "n": int(arr.shape[1]),
        "box": float(box_length),
        "times": [float(t) for t in times],
        "dtype": "<f8",
        "order": "C",
    }
    dump_json(header, str(path) + ".json", indent=1)


def load_fields(path):
    header = json.loads(Path(str(path) + ".json").read_text())
    raw = np.fromfile(path, dtype="<f8").reshape(-1, header["n"])
    return header, raw


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config: dict, outputs: list, extra: dict | None = None,
                   t_wall: float = 0.0, steps: int = 0) -> str:
    """Append-only run registry entry plus a per-run manifest file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clean = {k: v for k, v in config.items() if not callable(v)}
    cfg_text = json.dumps(_jsonify(clean), sort_keys=True)
    run_id = time.strftime("%Y%m%dT%H%M%S") + "-" + hashlib.sha256(
        cfg_text.encode()
    ).hexdigest()[:12]
    manifest = {
        "run_id": run_id,
        "artifact_version": ARTIFACT_VERSION,
        "config": json.loads(cfg_text),
        "outputs": {str(p): file_digest(p) for p in outputs if Path(p).exists()},
        "wall_seconds": float(t_wall),
        "steps": int(steps),
    }
    if extra:
        manifest.update(_jsonify(extra))
    path = out_dir / "manifest.json"
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    registry = os.environ.get("FKDV_RUN_REGISTRY", str(out_dir / "runs.jsonl"))
    with open(registry, "a") as fh:
        fh.write(json.dumps(manifest, sort_keys=True) + "\n")
    return run_id


def gnuplot_script(csv_path, columns: list[str], title: str) -> str:
    """Companion plot script for a CSV (written next to it with .gp suffix)."""
    lines = [
        f'set title "{title}"',
        "set datafile separator ','",
        "set key autotitle columnhead",
        f'plot ' + ", ".join(
            f'"{Path(csv_path).name}" using 1:{i + 2} with lines'
            for i in range(len(columns) - 1)
        ),
    ]
    out = str(csv_path) + ".gp"
    Path(out).write_text("\n".join(lines) + "\n")
    return out
