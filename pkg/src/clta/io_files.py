"""Binary feature files, manifest CSVs, and checkpoint persistence.

All binary formats are little-endian regardless of host order. Feature
payloads are float32 on disk; everything is promoted to float64 on read.
"""

import csv
import datetime
import json
import struct
from pathlib import Path

import numpy as np

from .attention import FrameSequence
from .errors import FormatError

FEATURE_MAGIC = b"FVF1"
CHECKPOINT_MAGIC = b"CLTA"
CHECKPOINT_VERSION = 1
MANIFEST_FIELDS = ["video_id", "label", "split", "path"]


# -- feature files -------------------------------------------------------------

def write_feature_file(path, features: np.ndarray) -> None:
    features = np.asarray(features)
    if features.ndim != 2:
        raise FormatError(f"features must be 2-d, got shape {features.shape}")
    T, d = features.shape
    payload = np.ascontiguousarray(features, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", T, d))
        fh.write(payload)


def read_feature_file(path, video_id: str = "", label: str | None = None) -> FrameSequence:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header at byte {len(raw)} (need 12)")
    if raw[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r} at byte 0")
    T, d = struct.unpack("<II", raw[4:12])
    if T < 1 or d < 1:
        raise FormatError(f"{path}: invalid dimensions T={T}, d={d} at byte 4")
    expected = 12 + 4 * T * d
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload truncated at byte {len(raw)} (expected {expected})")
    data = np.frombuffer(raw, dtype="<f4", offset=12).astype(np.float64).reshape(T, d)
    bad = np.flatnonzero(~np.isfinite(data.reshape(-1)))
    if bad.size:
        raise FormatError(f"{path}: non-finite value at byte {12 + 4 * int(bad[0])}")
    return FrameSequence(features=data, label=label, video_id=video_id or Path(path).stem)


# -- manifests -----------------------------------------------------------------

def write_manifest(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def read_manifest(path, check_files: bool = True) -> list[dict]:
    """Parse and validate a manifest; paths are relative to the manifest."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_FIELDS:
            raise FormatError(f"{path}: bad manifest header {reader.fieldnames}")
        rows = list(reader)
    seen = set()
    split_labels: dict[str, set] = {}
    for row in rows:
        vid = row["video_id"]
        if vid in seen:
            raise FormatError(f"{path}: duplicate video_id {vid!r}")
        seen.add(vid)
        if row["split"] not in ("train", "val", "test"):
            raise FormatError(f"{path}: unknown split {row['split']!r} for {vid!r}")
        split_labels.setdefault(row["split"], set()).add(row["label"])
        if check_files and not (path.parent / row["path"]).exists():
            raise FormatError(f"{path}: missing feature file {row['path']!r}")
    names = sorted(split_labels)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            leaked = split_labels[a] & split_labels[b]
            if leaked:
                raise FormatError(
                    f"{path}: labels shared between splits {a}/{b}: {sorted(leaked)}")
    return rows


def load_split(manifest_path, split: str) -> list[FrameSequence]:
    base = Path(manifest_path).parent
    rows = read_manifest(manifest_path)
    return [read_feature_file(base / r["path"], video_id=r["video_id"], label=r["label"])
            for r in rows if r["split"] == split]


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict) -> None:
    """Named float64 parameter blocks plus a JSON metadata sidecar."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(bytes([CHECKPOINT_VERSION]))
        for name in sorted(params):
            arr = np.asarray(params[name], dtype=np.float64)
            if arr.ndim == 1:
                rows, cols = arr.shape[0], 0
            elif arr.ndim == 2:
                rows, cols = arr.shape
            else:
                raise FormatError(f"parameter {name!r} has unsupported ndim {arr.ndim}")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<II", rows, cols))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_checkpoint(path):
    """Returns (params, meta)."""
    raw = Path(path).read_bytes()
    if len(raw) < 5 or raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic at byte 0")
    if raw[4] != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {raw[4]} at byte 4")
    params: dict[str, np.ndarray] = {}
    off = 5
    while off < len(raw):
        if off + 4 > len(raw):
            raise FormatError(f"{path}: truncated block header at byte {off}")
        (nlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        rows, cols = struct.unpack_from("<II", raw, off)
        off += 8
        count = rows * max(cols, 1)
        nbytes = 8 * count
        if off + nbytes > len(raw):
            raise FormatError(f"{path}: truncated payload for {name!r} at byte {off}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(np.float64)
        params[name] = arr if cols == 0 else arr.reshape(rows, cols)
        off += nbytes
    meta_path = Path(str(path) + ".meta.json")
    if not meta_path.exists():
        raise FormatError(f"missing checkpoint metadata {meta_path}")
    meta = json.loads(meta_path.read_text())
    return params, meta


# -- CSV output ----------------------------------------------------------------

def write_csv(path, header: list[str], rows: list[list], deterministic: bool = False) -> None:
    """Result CSV with an optional commented timestamp line."""
    with open(path, "w", newline="") as fh:
        if not deterministic:
            stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
            fh.write(f"# generated: {stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
