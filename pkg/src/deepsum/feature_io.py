"""Readers and writers for everything that crosses a file boundary.

Data files are JSON lines: an optional header object on the first line and
one record per following line. Trained models use a small binary container
(magic ``DSFE``) holding little-endian float32 tensors.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .embedding import JointModel


class FormatError(ValueError):
    """A file does not conform to its expected format."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


# --------------------------------------------------------------------------
# domain types

@dataclass
class FeatureTrack:
    """Time-stamped descriptors of one video, one row per frame."""

    video_id: str
    dim: int
    fps: float
    duration_s: float
    times: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.dim <= 0 or self.fps <= 0 or self.duration_s <= 0:
            raise ValueError("dim, fps and duration_s must be positive")
        if self.vectors.shape != (len(self.times), self.dim):
            raise ValueError(f"vectors have shape {self.vectors.shape}, expected ({len(self.times)}, {self.dim})")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("frame timestamps must be strictly increasing")
        if len(self.times) and (self.times[0] < 0 or self.times[-1] > self.duration_s):
            raise ValueError("frame timestamps must lie within [0, duration_s]")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("non-finite descriptor values")

    def __len__(self):
        return len(self.times)


@dataclass
class DescriptionVector:
    desc_id: str
    video_id: str
    span: tuple[float, float]
    y: np.ndarray
    text: str | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        start, end = self.span
        if not start < end:
            raise ValueError(f"description span must satisfy start < end, got {self.span}")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("non-finite description values")


@dataclass
class ReferenceSummarySet:
    """Human-made summaries of one video, stored as time intervals."""

    video_id: str
    fps: float
    duration_s: float
    references: list[tuple[str, list[tuple[float, float]]]]

    def __post_init__(self):
        if not self.references:
            raise ValueError("at least one reference summary is required")

    @property
    def annotators(self) -> list[str]:
        return [a for a, _ in self.references]


@dataclass
class ModelFile:
    model: JointModel
    metadata: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# json-lines helpers

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False, separators=(",", ":"))


def _write_lines(path, records: Iterable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(_dumps(rec))
            fh.write("\n")


def _read_lines(path):
    """Yield (line number, parsed object) for non-blank lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(obj, dict):
                raise FormatError("expected a JSON object", path, lineno)
            yield lineno, obj


def _require(obj, key, path, lineno):
    try:
        return obj[key]
    except KeyError:
        raise FormatError(f"missing field {key!r}", path, lineno) from None


def _real(value, name, path, lineno, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{name} must be a number", path, lineno)
    value = float(value)
    if not math.isfinite(value):
        raise FormatError(f"{name} is not finite", path, lineno)
    if positive and value <= 0:
        raise FormatError(f"{name} must be positive", path, lineno)
    return value


def _vector(values, dim, name, path, lineno):
    if not isinstance(values, list):
        raise FormatError(f"{name} must be a list", path, lineno)
    if dim is not None and len(values) != dim:
        raise FormatError(f"dimension mismatch: {name} has {len(values)} values, expected {dim}", path, lineno)
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise FormatError(f"{name} must contain only numbers", path, lineno) from None
    if arr.ndim != 1 or any(isinstance(v, bool) for v in values):
        raise FormatError(f"{name} must contain only numbers", path, lineno)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{name} contains non-finite values", path, lineno)
    return arr


def _first(lines, path, what):
    try:
        return next(lines)
    except StopIteration:
        raise FormatError(f"empty file, expected {what} header", path) from None


# --------------------------------------------------------------------------
# feature tracks

def read_feature_track(path) -> FeatureTrack:
    lines = _read_lines(path)
    lineno, header = _first(lines, path, "track")
    video_id = str(_require(header, "video_id", path, lineno))
    dim = _require(header, "dim", path, lineno)
    if isinstance(dim, bool) or not isinstance(dim, int) or dim <= 0:
        raise FormatError("header dim must be a positive integer", path, lineno)
    fps = _real(_require(header, "fps", path, lineno), "fps", path, lineno, positive=True)
    duration = _real(_require(header, "duration_s", path, lineno), "duration_s", path, lineno, positive=True)

    times, vectors = [], []
    for lineno, rec in lines:
        t = _real(_require(rec, "t", path, lineno), "t", path, lineno)
        if times and t <= times[-1]:
            raise FormatError(f"timestamps not strictly increasing ({t} after {times[-1]})", path, lineno)
        if t < 0 or t > duration:
            raise FormatError(f"timestamp {t} outside [0, {duration}]", path, lineno)
        vectors.append(_vector(_require(rec, "v", path, lineno), dim, "v", path, lineno))
        times.append(t)
    if not times:
        raise FormatError("track has no frames", path)
    return FeatureTrack(video_id, dim, fps, duration, np.array(times), np.stack(vectors))


def write_feature_track(path, track: FeatureTrack) -> None:
    header = {"video_id": track.video_id, "dim": track.dim, "fps": track.fps, "duration_s": track.duration_s}
    rows = ({"t": float(t), "v": v.tolist()} for t, v in zip(track.times, track.vectors))
    _write_lines(path, [header, *rows])


# --------------------------------------------------------------------------
# descriptions

def read_descriptions(path, dim: int | None = None) -> list[DescriptionVector]:
    out = []
    for lineno, rec in _read_lines(path):
        start = _real(_require(rec, "start_s", path, lineno), "start_s", path, lineno)
        end = _real(_require(rec, "end_s", path, lineno), "end_s", path, lineno)
        if not start < end:
            raise FormatError(f"malformed span ({start}, {end})", path, lineno)
        y = _vector(_require(rec, "y", path, lineno), dim, "y", path, lineno)
        if dim is None:
            dim = len(y)
        text = rec.get("text")
        out.append(DescriptionVector(str(_require(rec, "desc_id", path, lineno)),
                                     str(_require(rec, "video_id", path, lineno)),
                                     (start, end), y, None if text is None else str(text)))
    return out


def write_descriptions(path, descriptions: Iterable[DescriptionVector]) -> None:
    def rec(d):
        r = {"desc_id": d.desc_id, "video_id": d.video_id, "start_s": float(d.span[0]),
             "end_s": float(d.span[1]), "y": d.y.tolist()}
        if d.text is not None:
            r["text"] = d.text
        return r
    _write_lines(path, (rec(d) for d in descriptions))


# --------------------------------------------------------------------------
# reference summaries

def clip_intervals(intervals, duration_s):
    """Clip intervals to [0, duration_s], dropping any that end up empty."""
    out = []
    for s, e in intervals:
        s, e = max(0.0, float(s)), min(float(duration_s), float(e))
        if s < e:
            out.append((s, e))
    return out


def read_references(path) -> ReferenceSummarySet:
    lines = _read_lines(path)
    lineno, header = _first(lines, path, "reference")
    video_id = str(_require(header, "video_id", path, lineno))
    fps = _real(_require(header, "fps", path, lineno), "fps", path, lineno, positive=True)
    duration = _real(_require(header, "duration_s", path, lineno), "duration_s", path, lineno, positive=True)
    refs = []
    for lineno, rec in lines:
        annotator = str(_require(rec, "annotator_id", path, lineno))
        raw = _require(rec, "intervals", path, lineno)
        if not isinstance(raw, list):
            raise FormatError("intervals must be a list", path, lineno)
        intervals = []
        for item in raw:
            if not isinstance(item, list) or len(item) != 2:
                raise FormatError("each interval must be a [start, end] pair", path, lineno)
            s = _real(item[0], "interval start", path, lineno)
            e = _real(item[1], "interval end", path, lineno)
            if not s < e:
                raise FormatError(f"malformed interval ({s}, {e}): start must be < end", path, lineno)
            intervals.append((s, e))
        refs.append((annotator, clip_intervals(intervals, duration)))
    if not refs:
        raise FormatError("no reference summaries", path)
    return ReferenceSummarySet(video_id, fps, duration, refs)


def write_references(path, refs: ReferenceSummarySet) -> None:
    header = {"video_id": refs.video_id, "fps": refs.fps, "duration_s": refs.duration_s}
    rows = ({"annotator_id": a, "intervals": [[float(s), float(e)] for s, e in iv]} for a, iv in refs.references)
    _write_lines(path, [header, *rows])


# --------------------------------------------------------------------------
# pipeline intermediates

def write_segment_manifest(path, header: dict, segments) -> None:
    rows = ({"index": s.index, "start_s": s.start_s, "end_s": s.end_s,
             "frame_indices": [int(i) for i in s.frame_indices], "cost": s.cost,
             "degenerate": s.degenerate} for s in segments)
    _write_lines(path, [header, *rows])


def read_segment_manifest(path):
    """Return (header, list of row dicts)."""
    lines = _read_lines(path)
    lineno, header = _first(lines, path, "manifest")
    for key in ("video_id", "duration_s", "window_s", "stride_s", "sample_fps"):
        _require(header, key, path, lineno)
    rows = []
    for lineno, rec in lines:
        for key in ("index", "start_s", "end_s", "frame_indices"):
            _require(rec, key, path, lineno)
        rows.append(rec)
    return header, rows


def write_points(path, header: dict, indices, points: np.ndarray) -> None:
    rows = ({"index": int(i), "x": p.tolist()} for i, p in zip(indices, points))
    _write_lines(path, [header, *rows])


def read_points(path):
    """Return (header, indices array, (L, d) points array)."""
    lines = _read_lines(path)
    lineno, header = _first(lines, path, "points")
    dim = _require(header, "dim", path, lineno)
    idx, pts = [], []
    for lineno, rec in lines:
        idx.append(int(_require(rec, "index", path, lineno)))
        pts.append(_vector(_require(rec, "x", path, lineno), dim, "x", path, lineno))
    if len(set(idx)) != len(idx):
        raise FormatError("duplicate segment indices", path)
    return header, np.array(idx, dtype=np.int64), np.stack(pts) if pts else np.zeros((0, dim))


def write_record(path, record: dict) -> None:
    _write_lines(path, [record])


def read_record(path) -> dict:
    records = [rec for _, rec in _read_lines(path)]
    if len(records) != 1:
        raise FormatError(f"expected exactly one record, found {len(records)}", path)
    return records[0]


def write_jsonl(path, records) -> None:
    _write_lines(path, records)


def read_jsonl(path) -> list[dict]:
    return [rec for _, rec in _read_lines(path)]


# --------------------------------------------------------------------------
# binary model container
#
# layout (all little-endian):
#   b"DSFE" | u32 version | u32 metadata length | metadata (utf-8 JSON)
#   u32 tensor count
#   per tensor: u16 name length | name | u8 rank | u32 dims[rank] | f32 values (C order)

MAGIC = b"DSFE"
VERSION = 1
TENSOR_ORDER = ("video.W1", "video.b1", "video.W2", "video.b2",
                "text.W1", "text.b1", "text.W2", "text.b2")


def write_model(path, model_file: ModelFile) -> None:
    tensors = model_file.model.named_tensors()
    meta = _dumps(model_file.metadata).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta, struct.pack("<I", len(tensors))]
    for name in TENSOR_ORDER:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        bname = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(bname)) + bname)
        chunks.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


class _Cursor:
    def __init__(self, data, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated payload while reading {what}", self.path)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_model(path) -> ModelFile:
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data, path)
    if cur.take(4, "magic") != MAGIC:
        raise FormatError("bad magic bytes, not a model file", path)
    version, meta_len = cur.unpack("<II", "header")
    if version != VERSION:
        raise FormatError(f"unsupported model version {version} (expected {VERSION})", path)
    try:
        metadata = json.loads(cur.take(meta_len, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError("corrupt metadata block", path) from None
    (count,) = cur.unpack("<I", "tensor count")
    tensors = {}
    for _ in range(count):
        (nlen,) = cur.unpack("<H", "tensor name")
        try:
            name = cur.take(nlen, "tensor name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("corrupt tensor name", path) from None
        (rank,) = cur.unpack("<B", f"tensor {name}")
        dims = cur.unpack(f"<{rank}I", f"tensor {name}")
        n = int(np.prod(dims, dtype=np.int64))
        raw = cur.take(4 * n, f"tensor {name}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"non-finite values in tensor {name}", path)
        tensors[name] = arr
    if cur.pos != len(data):
        raise FormatError("trailing bytes after last tensor", path)
    try:
        model = JointModel.from_tensors(tensors)
    except ValueError as exc:
        raise FormatError(str(exc), path) from None
    return ModelFile(model, metadata)
