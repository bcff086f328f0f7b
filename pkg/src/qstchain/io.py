"""Profile interchange and artifact writers.

Profiles are JSON objects ``{"n": N, "couplings": [...], "meta": {...}}``.
CSV files start with ``#``-prefixed metadata lines (tool version, seed,
config hash) followed by a header row; floats are written with 17
significant digits.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from qstchain import __version__
from qstchain.dynamics import CouplingProfile, ProfileError

TOOL = "qstchain"


class ProfileSchemaError(ProfileError):
    """A profile document violates the interchange schema.

    ``field`` is the JSON path of the offending entry.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def profile_from_dict(doc: Any) -> CouplingProfile:
    if not isinstance(doc, dict):
        raise ProfileSchemaError("$", "expected a JSON object")
    if "n" not in doc:
        raise ProfileSchemaError("n", "missing")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ProfileSchemaError("n", f"expected a positive integer, got {n!r}")
    if "couplings" not in doc:
        raise ProfileSchemaError("couplings", "missing")
    couplings = doc["couplings"]
    if not isinstance(couplings, list):
        raise ProfileSchemaError("couplings", "expected a list of numbers")
    if len(couplings) != n - 1:
        raise ProfileSchemaError("couplings",
                                 f"expected {n - 1} values for n={n}, got {len(couplings)}")
    for i, value in enumerate(couplings):
        path = f"couplings[{i}]"
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProfileSchemaError(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ProfileSchemaError(path, f"non-finite value {value!r}")
        if value < 0:
            raise ProfileSchemaError(path, f"negative coupling {value!r}")
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise ProfileSchemaError("meta", "expected a JSON object")
    return CouplingProfile([float(v) for v in couplings], n, meta=meta)


def load_profile(path) -> CouplingProfile:
    text = Path(path).read_text()
    try:
        # NaN/Infinity literals are parsed so they can be rejected by field
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileSchemaError("$", f"invalid JSON ({exc})") from exc
    return profile_from_dict(doc)


def save_profile(path, profile: CouplingProfile, meta: dict | None = None) -> Path:
    doc = profile.to_dict()
    if meta:
        doc["meta"].update(meta)
    return write_json(path, doc)


def dumps_json(doc: Any) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, doc: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(doc))
    return path


def config_hash(config: Any) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def metadata(seed=None, config: Any = None, **extra) -> dict:
    meta = {"tool": TOOL, "version": __version__}
    if seed is not None:
        meta["seed"] = seed
    if config is not None:
        meta["config_hash"] = config_hash(config)
    meta.update(extra)
    return meta


def format_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> tuple[dict, list[dict]]:
    """Metadata dict and data rows (as strings) of a file from :func:`write_csv`."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            meta[key] = value
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))
