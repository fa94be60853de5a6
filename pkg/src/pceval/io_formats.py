"""Bit-exact file formats for clouds, sets, normals and result tables.

Cloud files come in two interchangeable forms, sniffed by magic bytes:

* text: one point per line, three decimal reals separated by single spaces,
  LF endings, ``#`` comment lines allowed.  Values are written with 9
  significant digits (round-trips float32 exactly, float64 to 1e-8
  relative).
* binary: magic ``PCEV``, format version u16 LE, reserved u16 = 0, point
  count u64 LE, then count x 3 IEEE-754 binary32 LE coordinates interleaved
  x, y, z.  Round trips are byte-identical.

Normals files use the same binary layout under magic ``PCNM`` and must be
unit rows.  A set manifest is a JSON document listing a role and ordered
cloud paths relative to the manifest's directory.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .cloud import CloudSet, PointCloud
from .errors import DataIOError, InvalidArgumentError, ParseError

CLOUD_MAGIC = b"PCEV"
NORMALS_MAGIC = b"PCNM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHQ")


def _read_binary_payload(raw: bytes, path, magic: bytes) -> np.ndarray:
    if len(raw) < _HEADER.size:
        raise ParseError("file too short for a binary header", path=path,
                         offset=len(raw))
    got_magic, version, reserved, count = _HEADER.unpack_from(raw, 0)
    if got_magic != magic:
        raise ParseError(f"bad magic {got_magic!r}, expected {magic!r}",
                         path=path, offset=0)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version}", path=path,
                         offset=4)
    if reserved != 0:
        raise ParseError("reserved field must be zero", path=path, offset=6)
    if count == 0:
        raise ParseError("point count must be at least 1", path=path, offset=8)
    expected = _HEADER.size + 12 * count
    if len(raw) != expected:
        raise ParseError(
            f"payload size mismatch: declared {count} points need {expected} "
            f"bytes, file has {len(raw)}", path=path,
            offset=min(len(raw), expected),
        )
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    triples = values.reshape(count, 3).astype(np.float64)
    if not np.isfinite(triples).all():
        bad = int(np.nonzero(~np.isfinite(triples).all(axis=1))[0][0])
        raise ParseError("non-finite coordinates", path=path,
                         offset=_HEADER.size + 12 * bad)
    return triples


def _parse_text(raw: bytes, path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(raw.decode("utf-8", errors="replace").split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise ParseError(f"expected 3 values, got {len(parts)}",
                             path=path, line=lineno)
        try:
            triple = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"unparseable number in {stripped!r}",
                             path=path, line=lineno) from None
        if not all(np.isfinite(triple)):
            raise ParseError("non-finite coordinates", path=path, line=lineno)
        rows.append(triple)
    if not rows:
        raise ParseError("no points in file", path=path, line=1)
    return np.asarray(rows, dtype=np.float64)


def load_cloud(path) -> PointCloud:
    """Load a cloud file, sniffing binary magic and falling back to text."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if raw[:4] == CLOUD_MAGIC:
        pts = _read_binary_payload(raw, path, CLOUD_MAGIC)
    else:
        pts = _parse_text(raw, path)
    return PointCloud(pts, id=path.stem)


def save_cloud(cloud: PointCloud, path, format: str = "binary") -> None:
    """Write a cloud; binary preserves float32-representable values exactly."""
    path = Path(path)
    if format == "binary":
        payload = _HEADER.pack(CLOUD_MAGIC, FORMAT_VERSION, 0, len(cloud))
        payload += cloud.points.astype("<f4").tobytes()
        _write_bytes(path, payload)
    elif format == "text":
        lines = [" ".join(f"{v:.9g}" for v in p) for p in cloud.points]
        _write_bytes(path, ("\n".join(lines) + "\n").encode())
    else:
        raise InvalidArgumentError(f"unknown cloud format {format!r}")


def load_normals(path, expected_count: int | None = None) -> np.ndarray:
    """Load a unit-normals file (binary, magic PCNM)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    triples = _read_binary_payload(raw, path, NORMALS_MAGIC)
    if expected_count is not None and len(triples) != expected_count:
        raise ParseError(
            f"normals count {len(triples)} does not match cloud count {expected_count}",
            path=path, offset=8,
        )
    norms = np.linalg.norm(triples, axis=1)
    if np.abs(norms - 1.0).max() > 1e-6:
        bad = int(np.abs(norms - 1.0).argmax())
        raise ParseError("normals must be unit length (within binary32 slack)",
                         path=path, offset=_HEADER.size + 12 * bad)
    return triples


def save_normals(normals: np.ndarray, path) -> None:
    normals = np.asarray(normals, dtype=np.float64)
    f32 = normals.astype("<f4")
    # renormalize in float32 so the on-disk rows stay unit within 1e-6
    lens = np.linalg.norm(f32.astype(np.float64), axis=1, keepdims=True)
    f32 = (f32 / lens).astype("<f4")
    payload = _HEADER.pack(NORMALS_MAGIC, FORMAT_VERSION, 0, len(normals))
    payload += f32.tobytes()
    _write_bytes(Path(path), payload)


def load_set(manifest_path) -> CloudSet:
    """Load an ordered cloud set from a JSON manifest.

    The manifest lists ``role`` and ``clouds`` (paths relative to the
    manifest); list order defines cloud indices.
    """
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise DataIOError(f"cannot read {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=manifest_path,
                         line=exc.lineno) from exc
    if not isinstance(doc, dict) or "clouds" not in doc:
        raise ParseError("manifest must be an object with a 'clouds' list",
                         path=manifest_path)
    role = doc.get("role", "generated")
    paths = doc["clouds"]
    if not isinstance(paths, list) or not paths:
        raise ParseError("'clouds' must be a non-empty list", path=manifest_path)
    clouds = []
    for rel in paths:
        p = manifest_path.parent / rel
        if not p.exists():
            raise ParseError(f"cloud file {rel!r} does not resolve",
                             path=manifest_path)
        clouds.append(load_cloud(p))
    return CloudSet(tuple(clouds), role=role)


def save_manifest(paths, manifest_path, role: str = "generated",
                  metadata: dict | None = None) -> None:
    doc = {"role": role, "clouds": [str(p) for p in paths]}
    if metadata:
        doc["metadata"] = metadata
    _write_bytes(Path(manifest_path),
                 (json.dumps(doc, indent=2) + "\n").encode())


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


# -- result tables -----------------------------------------------------------

def report_document(reports, config: dict | None = None) -> dict:
    """JSON-ready document embedding the full parameterization."""
    from . import __version__

    return {
        "version": __version__,
        "config": config or {},
        "results": [r.to_dict() for r in reports],
    }


def write_report(reports, path, format: str = "json",
                 config: dict | None = None) -> None:
    """Persist metric reports as JSON (verbatim fields) or CSV."""
    path = Path(path)
    if format == "json":
        doc = report_document(reports, config)
        _write_bytes(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())
    elif format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "measure", "aligned", "params", "value",
                         "scaling", "scaled_value"])
        for r in reports:
            d = r.to_dict()
            params = {k: d[k] for k in ("alpha", "solver", "epsilon", "normalize",
                                        "neighborhood", "grid") if k in d}
            writer.writerow([
                d["metric"], d.get("measure", ""), d.get("aligned", ""),
                json.dumps(params, sort_keys=True) if params else "",
                repr(d["value"]), repr(d["scaling"]), repr(d["scaled_value"]),
            ])
        _write_bytes(path, buf.getvalue().encode())
    else:
        raise InvalidArgumentError(f"unknown report format {format!r}")


def read_report(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=path, line=exc.lineno) from exc
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc


def write_sweep(result, path, format: str = "csv",
                config: dict | None = None) -> None:
    """Persist a sweep table; detail rows first, then per-level means."""
    path = Path(path)
    rows = list(result.detail) + list(result.summary)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(result.columns)
        for row in rows:
            writer.writerow([_csv_cell(row.get(c, "")) for c in result.columns])
        _write_bytes(path, buf.getvalue().encode())
    elif format == "json":
        from . import __version__

        doc = {
            "version": __version__,
            "config": config or {},
            "columns": result.columns,
            "detail": result.detail,
            "summary": result.summary,
        }
        _write_bytes(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())
    else:
        raise InvalidArgumentError(f"unknown sweep format {format!r}")


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v
