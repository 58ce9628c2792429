"""Deterministic file output: CSV with a provenance comment line, sorted JSON,
and sidecar metadata."""
from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from . import __version__

OUTPUT_ENV = "QANALOG_OUTPUT_DIR"
# bump when a field of any JSON or CSV output changes meaning
SCHEMA_VERSION = 1


def fmt(x) -> str:
    """17 significant digits, '.' decimal, independent of locale."""
    return "%.17g" % float(x)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    canon = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def provenance(config: dict, seed: int) -> dict:
    return {"schema": SCHEMA_VERSION, "seed": int(seed), "config_hash": config_hash(config),
            "version": __version__}


def output_dir(flag: str | None) -> str:
    path = flag or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(path, exist_ok=True)
    return path


def write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(path: str, columns: list[str], rows, meta: dict) -> str:
    """CSV with one '#'-comment provenance line, a header, then data rows."""
    lines = [
        "# qanalog {version} seed={seed} config_hash={config_hash} schema={schema}".format(**meta),
        ",".join(columns),
    ]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return cols, data


def write_json(path: str, payload: dict, meta: dict) -> str:
    out = dict(payload)
    out["meta"] = meta
    return write_text(path, dumps(out))


def write_sidecar(path: str, config: dict, meta: dict, files: list[str]) -> str:
    payload = {"config": config, "files": [os.path.basename(f) for f in files], **meta}
    return write_text(path, dumps(payload))


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out
