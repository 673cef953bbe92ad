"""Feature CSVs, uncompressed NIfTI-1 volumes and JSON run records."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import FeatureDataset
from .errors import (
    BadMagic,
    CompressedInput,
    EmptyFile,
    InvalidConfig,
    IoFailure,
    NonIntegerLabel,
    NonNumericCell,
    RaggedRow,
    TruncatedFile,
    UnsupportedDatatype,
    UnsupportedDim,
)

# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def read_feature_csv(path, domain: Optional[str] = None) -> FeatureDataset:
    """Read a header-first CSV; a ``label`` column (any case) holds class ids.

    Line numbers in errors are 1-based physical lines, header included.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    label_cols = [i for i, h in enumerate(header) if h.lower() == "label"]
    label_col = label_cols[0] if label_cols else None
    feat_cols = [i for i in range(len(header)) if i != label_col]
    if len(rows) < 2 or not feat_cols:
        raise EmptyFile(f"{path} has no data rows")
    samples = np.empty((len(rows) - 1, len(feat_cols)))
    labels = np.empty(len(rows) - 1, dtype=np.int64) if label_col is not None else None
    for r, row in enumerate(rows[1:]):
        line = r + 2
        if len(row) != len(header):
            raise RaggedRow(line, len(header), len(row))
        for c_out, c in enumerate(feat_cols):
            try:
                samples[r, c_out] = float(row[c])
            except ValueError:
                raise NonNumericCell(line, c + 1) from None
        if label_col is not None:
            cell = row[label_col].strip()
            try:
                val = float(cell)
            except ValueError:
                raise NonIntegerLabel(line) from None
            if not math.isfinite(val) or val != int(val):
                raise NonIntegerLabel(line)
            labels[r] = int(val)
    if domain is None:
        domain = Path(path).stem
    return FeatureDataset(samples, labels, domain)


def write_feature_csv(ds: FeatureDataset, path, names: Optional[List[str]] = None) -> Path:
    path = Path(path)
    names = names or [f"f{i + 1}" for i in range(ds.dim)]
    header = list(names) + (["label"] if ds.labels is not None else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(ds.n):
        row = [format(float(v), ".17g") for v in ds.samples[i]]
        if ds.labels is not None:
            row.append(str(int(ds.labels[i])))
        w.writerow(row)
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


# ---------------------------------------------------------------------------
# NIfTI-1 (single file, uncompressed)
# ---------------------------------------------------------------------------

HEADER_SIZE = 348
VOX_OFFSET = 352

# datatype code -> numpy kind
_DATATYPES = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}

# field name -> (offset, struct format); the rest of the header is opaque
_FIELDS = {
    "sizeof_hdr": (0, "i"),
    "dim": (40, "8h"),
    "datatype": (70, "h"),
    "bitpix": (72, "h"),
    "pixdim": (76, "8f"),
    "vox_offset": (108, "f"),
    "scl_slope": (112, "f"),
    "scl_inter": (116, "f"),
    "magic": (344, "4s"),
}


@dataclass(eq=False)
class Volume:
    """3-D scalar grid; ``data[x, y, z]`` with x varying fastest on disk."""

    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    intensity_range: Optional[Tuple[float, float]] = None
    header_passthrough: Optional[bytes] = None
    byteorder: str = "<"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3 or min(data.shape) < 1:
            raise InvalidConfig(f"volume must be 3-D with positive dims, got {data.shape}")
        if not np.isfinite(data).all():
            raise InvalidConfig("volume contains non-finite values")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or min(spacing) <= 0:
            raise InvalidConfig(f"spacing must be three positive numbers, got {spacing}")
        self.data = data
        self.spacing = spacing
        if self.intensity_range is None:
            self.intensity_range = (float(data.min()), float(data.max()))

    @property
    def dims(self):
        return tuple(int(d) for d in self.data.shape)

    def replace_data(self, data, intensity_range=None) -> "Volume":
        return Volume(data, self.spacing, intensity_range or self.intensity_range,
                      self.header_passthrough, self.byteorder)


def _unpack(hdr, bo, name):
    off, fmt = _FIELDS[name]
    vals = struct.unpack_from(bo + fmt, hdr, off)
    return vals if len(vals) > 1 else vals[0]


def read_nifti(path) -> Volume:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if raw[:2] == b"\x1f\x8b":
        raise CompressedInput(f"{path} is gzip-compressed")
    if len(raw) < HEADER_SIZE:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, header needs {HEADER_SIZE}")
    hdr = raw[:HEADER_SIZE]
    if struct.unpack_from("<i", hdr, 0)[0] == HEADER_SIZE:
        bo = "<"
    elif struct.unpack_from(">i", hdr, 0)[0] == HEADER_SIZE:
        bo = ">"
    else:
        raise BadMagic(f"{path}: sizeof_hdr is not {HEADER_SIZE}")
    magic = _unpack(hdr, bo, "magic")
    if magic != b"n+1\x00":
        raise BadMagic(f"{path}: magic {magic!r}, only single-file 'n+1' is supported")
    dim = _unpack(hdr, bo, "dim")
    if dim[0] != 3:
        raise UnsupportedDim(f"{path}: dim[0] = {dim[0]}")
    dims = tuple(int(d) for d in dim[1:4])
    if min(dims) < 1:
        raise UnsupportedDim(f"{path}: dims {dims}")
    code = _unpack(hdr, bo, "datatype")
    if code not in _DATATYPES:
        raise UnsupportedDatatype(f"{path}: datatype {code}")
    dtype = np.dtype(_DATATYPES[code]).newbyteorder(bo)
    offset = int(_unpack(hdr, bo, "vox_offset"))
    nbytes = dtype.itemsize * dims[0] * dims[1] * dims[2]
    if len(raw) < offset + nbytes:
        raise TruncatedFile(f"{path}: expected {offset + nbytes} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype=dtype, count=dims[0] * dims[1] * dims[2], offset=offset)
    data = data.reshape(dims, order="F").astype(np.float64)
    slope = _unpack(hdr, bo, "scl_slope")
    inter = _unpack(hdr, bo, "scl_inter")
    if slope != 0 and math.isfinite(slope):
        data = data * np.float64(slope) + np.float64(inter)
    pix = _unpack(hdr, bo, "pixdim")
    spacing = tuple(abs(float(p)) if p else 1.0 for p in pix[1:4])
    return Volume(data, spacing, None, bytes(hdr), bo)


def _blank_header() -> bytearray:
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<h", hdr, 252, 0)  # qform_code
    struct.pack_into("<h", hdr, 254, 0)  # sform_code
    return hdr


def nifti_header(v: Volume) -> bytes:
    """Header bytes for ``v``: passthrough bytes with modeled fields overwritten."""
    bo = v.byteorder if v.header_passthrough is not None else "<"
    hdr = bytearray(v.header_passthrough) if v.header_passthrough is not None else _blank_header()
    pix = list(struct.unpack_from(bo + "8f", hdr, 76))
    pix[1:4] = v.spacing
    if pix[0] not in (-1.0, 1.0):
        pix[0] = 1.0
    dims = v.dims
    struct.pack_into(bo + "i", hdr, 0, HEADER_SIZE)
    struct.pack_into(bo + "8h", hdr, 40, 3, *dims, 1, 1, 1, 1)
    struct.pack_into(bo + "h", hdr, 70, 16)
    struct.pack_into(bo + "h", hdr, 72, 32)
    struct.pack_into(bo + "8f", hdr, 76, *pix)
    struct.pack_into(bo + "f", hdr, 108, float(VOX_OFFSET))
    struct.pack_into(bo + "f", hdr, 112, 1.0)
    struct.pack_into(bo + "f", hdr, 116, 0.0)
    struct.pack_into("4s", hdr, 344, b"n+1\x00")
    return bytes(hdr)


def write_nifti(v: Volume, path) -> Path:
    """Write float32 data after a 352-byte prefix (header + empty extension flag)."""
    path = Path(path)
    bo = v.byteorder if v.header_passthrough is not None else "<"
    body = np.asarray(v.data, dtype=np.dtype("f4").newbyteorder(bo)).tobytes(order="F")
    try:
        with open(path, "wb") as fh:
            fh.write(nifti_header(v))
            fh.write(b"\x00\x00\x00\x00")
            fh.write(body)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------


def file_digest(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return "sha256:" + h.hexdigest()


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def iso_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def compact_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def json_safe(value):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass
class RunRecord:
    method: str
    config: Dict
    seed: int
    inputs: List[Dict[str, str]]
    timestamp: datetime = field(default_factory=utc_now)
    outputs: List[str] = field(default_factory=list)
    metrics: Dict = field(default_factory=dict)
    extra: Dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.inputs:
            raise InvalidConfig("a run record needs at least one input")
        for item in self.inputs:
            if not item.get("digest"):
                raise InvalidConfig(f"input {item.get('path')!r} has an empty digest")

    @classmethod
    def for_files(cls, method, config, seed, paths, **kw):
        inputs = [{"path": str(p), "digest": file_digest(p)} for p in paths]
        return cls(method, config, seed, inputs, **kw)

    def to_dict(self):
        out = {
            "method": self.method,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "timestamp": iso_timestamp(self.timestamp),
            "outputs": [str(p) for p in self.outputs],
            "metrics": self.metrics,
        }
        out.update(self.extra)
        return json_safe(out)

    @classmethod
    def from_dict(cls, d):
        known = {"method", "config", "seed", "inputs", "timestamp", "outputs", "metrics"}
        ts = datetime.strptime(d["timestamp"], "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
        return cls(d["method"], d["config"], d["seed"], d["inputs"], ts,
                   list(d.get("outputs", [])), dict(d.get("metrics", {})),
                   {k: v for k, v in d.items() if k not in known})


def unique_path(directory: Path, stem: str, suffix: str = "") -> Path:
    """``stem+suffix`` in ``directory``, or ``stem_1+suffix``, ``stem_2``... if taken."""
    candidate = directory / f"{stem}{suffix}"
    i = 0
    while candidate.exists():
        i += 1
        candidate = directory / f"{stem}_{i}{suffix}"
    return candidate


def write_run_record(r: RunRecord, directory) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        path = unique_path(directory, f"{r.method}_{compact_timestamp(r.timestamp)}", ".json")
        # exclusive create: a concurrent writer that lost the race retries
        while True:
            try:
                fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
                break
            except FileExistsError:
                path = unique_path(directory, f"{r.method}_{compact_timestamp(r.timestamp)}", ".json")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(r.to_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def read_run_record(path) -> RunRecord:
    try:
        return RunRecord.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
