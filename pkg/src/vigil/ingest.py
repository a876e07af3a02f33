"""Feature-frame wire format and sidecar files.

Everything is newline-delimited JSON with a one-line versioned header, so any
extractor runtime can produce it and a stream can be processed without
buffering. One frame per line:

    {"format": "vigil-frames", "version": 1, "n": 3}
    {"t": 0, "flow": {"mean": 1.02, "var": 0.25, "skew": 0.1, "kurt": 2.9},
     "objects": [{"bbox": [10.0, 20.0, 50.0, 80.0], "probs": [0.1, 0.7, 0.2]}]}
    {"t": 1, "flow": {...}, "objects": [{"loc": [30.0, 50.0, 2400.0], "probs": [0.9, 0.05, 0.0]}]}

Each object carries either ``bbox`` (x1, y1, x2, y2) or ``loc`` (cx, cy,
area), never both, plus ``probs`` of the header-declared length ``n``.
Category weights are ingest-time configuration, not stored per record.

Parsing is lazy (a generator), which gives pull-based backpressure: a slow
consumer simply reads lines more slowly. No byte sequence can crash the
parser; every failure is a diagnosed error with its 1-based line number.
"""

from __future__ import annotations

import io
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .detector import AlarmRecord
from .errors import InvalidInputError, StreamFormatError
from .features import (
    BoundingBox,
    FeatureWeights,
    FlowStats,
    FrameFeatures,
    LocationFeatures,
    ObjectMeta,
    assemble_feature,
    bbox_to_location,
    validate_class_probs,
)
from .metrics import GroundTruth

FRAMES_FORMAT = "vigil-frames"
GT_FORMAT = "vigil-ground-truth"
TRACE_FORMAT = "vigil-trace"
ALARMS_FORMAT = "vigil-alarms"
FORMAT_VERSION = 1


@contextmanager
def _as_line_source(source):
    """Accept a path, file-like object, or iterable of lines."""
    if isinstance(source, (str, Path)):
        f = open(source, "r", encoding="utf-8")
        try:
            yield f
        finally:
            f.close()
    elif isinstance(source, bytes):
        yield io.StringIO(source.decode("utf-8", errors="replace"))
    else:
        yield source


@contextmanager
def _as_sink(sink):
    if isinstance(sink, (str, Path)):
        f = open(sink, "w", encoding="utf-8")
        try:
            yield f
        finally:
            f.close()
    else:
        yield sink


def _parse_header(line: str, expected_format: str, line_no: int) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise StreamFormatError(f"invalid header: {e.msg}", line_no) from e
    if not isinstance(header, dict) or header.get("format") != expected_format:
        raise StreamFormatError(f"expected a {expected_format!r} header line", line_no)
    if header.get("version") != FORMAT_VERSION:
        raise StreamFormatError(
            f"unsupported {expected_format} version {header.get('version')!r}", line_no
        )
    return header


@dataclass
class ParseStats:
    frames: int = 0
    skipped: int = 0
    errors: list = field(default_factory=list)  # (line_no, message)


class StreamReader:
    """Iterator over FrameFeatures parsed from the wire format.

    strict=True aborts on the first malformed record; strict=False skips the
    record, counts it, and keeps the diagnostic in :attr:`stats`.
    """

    def __init__(self, source, weights: FeatureWeights = FeatureWeights(), strict: bool = True):
        self.source = source
        self.weights = weights
        self.strict = strict
        self.stats = ParseStats()
        self.n_classes: int | None = None

    def __iter__(self) -> Iterator[FrameFeatures]:
        with _as_line_source(self.source) as lines:
            it = iter(lines)
            line_no = 0
            header_seen = False
            last_t = None
            for raw_line in it:
                line_no += 1
                line = raw_line.strip()
                if not line:
                    continue
                if not header_seen:
                    header = _parse_header(line, FRAMES_FORMAT, line_no)
                    n = header.get("n")
                    if not isinstance(n, int) or n < 1:
                        raise StreamFormatError("header must declare the class count 'n' (>= 1)", line_no)
                    self.n_classes = n
                    header_seen = True
                    continue
                try:
                    frame = self._parse_frame(line, line_no, last_t)
                except StreamFormatError as e:
                    if self.strict:
                        raise
                    self.stats.skipped += 1
                    self.stats.errors.append((line_no, str(e)))
                    continue
                last_t = frame.t
                self.stats.frames += 1
                yield frame

    def _parse_frame(self, line: str, line_no: int, last_t: int | None) -> FrameFeatures:
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise StreamFormatError(f"invalid JSON: {e.msg}", line_no) from e
        return frame_from_record(rec, self.n_classes, self.weights, last_t=last_t, line_no=line_no)


def frame_from_record(
    rec,
    n_classes: int,
    weights: FeatureWeights,
    last_t: int | None = None,
    line_no: int | None = None,
) -> FrameFeatures:
    """Validate and assemble one wire-format frame record (already JSON-decoded)."""
    if not isinstance(rec, dict):
        raise StreamFormatError("frame record must be a JSON object", line_no)
    try:
        t = rec["t"]
        flow_d = rec["flow"]
        objects_d = rec["objects"]
    except (KeyError, TypeError) as e:
        raise StreamFormatError(f"frame record missing field: {e}", line_no) from e
    if not isinstance(t, int) or isinstance(t, bool) or t < 0:
        raise StreamFormatError(f"frame index must be a non-negative integer, got {t!r}", line_no)
    if last_t is not None and t <= last_t:
        raise StreamFormatError(f"frame index must strictly increase: {t} after {last_t}", line_no)
    try:
        flow = FlowStats(
            mean=float(flow_d["mean"]),
            variance=float(flow_d["var"]),
            skewness=float(flow_d["skew"]),
            kurtosis=float(flow_d["kurt"]),
        )
    except (KeyError, TypeError, ValueError, InvalidInputError) as e:
        raise StreamFormatError(f"bad flow stats: {e}", line_no) from e
    if not isinstance(objects_d, list):
        raise StreamFormatError("'objects' must be a list", line_no)

    metas: list[ObjectMeta] = []
    vectors = []
    for i, obj in enumerate(objects_d):
        if not isinstance(obj, dict):
            raise StreamFormatError(f"object {i} must be a JSON object", line_no)
        has_bbox = "bbox" in obj
        has_loc = "loc" in obj
        if has_bbox == has_loc:
            raise StreamFormatError(f"object {i} must carry exactly one of 'bbox' or 'loc'", line_no)
        try:
            probs = validate_class_probs(obj["probs"])
        except (KeyError, TypeError, InvalidInputError) as e:
            raise StreamFormatError(f"object {i} probs: {e}", line_no) from e
        if probs.size != n_classes:
            raise StreamFormatError(
                f"object {i} has {probs.size} class probabilities, stream declared n={n_classes}",
                line_no,
            )
        try:
            if has_bbox:
                bb = obj["bbox"]
                box = BoundingBox(float(bb[0]), float(bb[1]), float(bb[2]), float(bb[3]))
                loc = bbox_to_location(box)
                metas.append(ObjectMeta(probs=probs, bbox=box, loc=loc))
            else:
                lc = obj["loc"]
                loc = LocationFeatures(float(lc[0]), float(lc[1]), float(lc[2]))
                metas.append(ObjectMeta(probs=probs, loc=loc))
            vectors.append(assemble_feature(flow, loc, probs, weights))
        except (InvalidInputError, TypeError, ValueError, IndexError) as e:
            raise StreamFormatError(f"object {i}: {e}", line_no) from e

    m = n_classes + 7
    objects = np.vstack(vectors) if vectors else np.empty((0, m), dtype=np.float64)
    return FrameFeatures(t=t, objects=objects, flow=flow, raw_meta=metas)


def parse_stream(source, weights: FeatureWeights = FeatureWeights(), strict: bool = True) -> StreamReader:
    """Open a stream source for iteration. See :class:`StreamReader`."""
    return StreamReader(source, weights=weights, strict=strict)


def frame_to_record(frame: FrameFeatures) -> dict:
    """Wire-format dict for one frame; requires raw per-object metadata."""
    if frame.raw_meta is None:
        raise InvalidInputError(
            "frame has no raw object metadata; weighted vectors alone cannot be re-serialized"
        )
    objects = []
    for meta in frame.raw_meta:
        rec: dict = {"probs": [float(p) for p in meta.probs]}
        if meta.bbox is not None:
            rec["bbox"] = [meta.bbox.x1, meta.bbox.y1, meta.bbox.x2, meta.bbox.y2]
        else:
            loc = meta.location()
            rec["loc"] = [loc.cx, loc.cy, loc.area]
        objects.append(rec)
    return {
        "t": frame.t,
        "flow": {
            "mean": frame.flow.mean,
            "var": frame.flow.variance,
            "skew": frame.flow.skewness,
            "kurt": frame.flow.kurtosis,
        },
        "objects": objects,
    }


def write_stream(frames: Iterable[FrameFeatures], sink, n_classes: int) -> int:
    """Serialize frames to the wire format; returns the number written."""
    count = 0
    with _as_sink(sink) as f:
        f.write(json.dumps({"format": FRAMES_FORMAT, "version": FORMAT_VERSION, "n": n_classes}) + "\n")
        for frame in frames:
            f.write(json.dumps(frame_to_record(frame)) + "\n")
            count += 1
    return count


# -- ground truth --------------------------------------------------------------


def load_ground_truth(source) -> GroundTruth:
    """Read the interval sidecar; overlapping or inverted intervals are rejected."""
    with _as_line_source(source) as lines:
        it = iter(lines)
        line_no = 0
        header_seen = False
        intervals = None
        for raw_line in it:
            line_no += 1
            line = raw_line.strip()
            if not line:
                continue
            if not header_seen:
                _parse_header(line, GT_FORMAT, line_no)
                header_seen = True
                continue
            try:
                body = json.loads(line)
                intervals = body["intervals"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise StreamFormatError(f"bad ground-truth body: {e}", line_no) from e
            break
        if not header_seen:
            raise StreamFormatError("missing ground-truth header", line_no or 1)
        if intervals is None:
            intervals = []
        try:
            return GroundTruth(intervals=tuple((int(a), int(b)) for (a, b) in intervals))
        except (InvalidInputError, TypeError, ValueError) as e:
            raise StreamFormatError(f"bad intervals: {e}", line_no) from e


def save_ground_truth(gt: GroundTruth, sink) -> None:
    with _as_sink(sink) as f:
        f.write(json.dumps({"format": GT_FORMAT, "version": FORMAT_VERSION}) + "\n")
        f.write(json.dumps({"intervals": [list(iv) for iv in gt.intervals]}) + "\n")


# -- traces and alarms ----------------------------------------------------------


def write_trace(rows: Iterable[tuple], sink) -> None:
    """Persist per-frame (t, delta, s) rows; floats round-trip exactly."""
    with _as_sink(sink) as f:
        f.write(json.dumps({"format": TRACE_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for (t, delta, s) in rows:
            f.write(json.dumps({"t": int(t), "delta": float(delta), "s": float(s)}) + "\n")


def read_trace(source) -> list[tuple[int, float, float]]:
    rows = []
    with _as_line_source(source) as lines:
        line_no = 0
        header_seen = False
        for raw_line in lines:
            line_no += 1
            line = raw_line.strip()
            if not line:
                continue
            if not header_seen:
                _parse_header(line, TRACE_FORMAT, line_no)
                header_seen = True
                continue
            try:
                rec = json.loads(line)
                rows.append((int(rec["t"]), float(rec["delta"]), float(rec["s"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise StreamFormatError(f"bad trace row: {e}", line_no) from e
        if not header_seen:
            raise StreamFormatError("missing trace header", 1)
    return rows


def write_alarms(alarms: Iterable[AlarmRecord], sink) -> None:
    with _as_sink(sink) as f:
        f.write(json.dumps({"format": ALARMS_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for alarm in alarms:
            f.write(json.dumps(alarm.to_dict()) + "\n")


def read_alarms(source) -> list[AlarmRecord]:
    alarms = []
    with _as_line_source(source) as lines:
        line_no = 0
        header_seen = False
        for raw_line in lines:
            line_no += 1
            line = raw_line.strip()
            if not line:
                continue
            if not header_seen:
                _parse_header(line, ALARMS_FORMAT, line_no)
                header_seen = True
                continue
            try:
                alarms.append(AlarmRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise StreamFormatError(f"bad alarm row: {e}", line_no) from e
        if not header_seen:
            raise StreamFormatError("missing alarms header", 1)
    return alarms
