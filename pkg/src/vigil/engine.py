"""Orchestration shared by the CLI and the service.

One Engine owns one model plus any number of independent per-stream
detectors. Frames go in, per-frame (delta, s) and alarm events come out;
closed alarms keep their segment's object vectors and a trace window so a
reviewer can label them later. All model mutations (auto inserts, feedback,
recalibration) funnel through a single writer lock and, when configured, an
append-only journal.

Both operational surfaces drive this class, which is what makes their
traces identical for identical inputs.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .continual import ContinualUpdater, FeedbackLabel, Journal, UpdatePolicy
from .detector import AlarmRecord, DetectorConfig, SequentialDetector, StepResult
from .errors import AlarmStateError, UnknownAlarmError
from .features import FeatureWeights, FrameFeatures
from .ingest import frame_from_record
from .nominal import NominalModel


@dataclass
class AlarmEntry:
    record: AlarmRecord
    segment_vectors: np.ndarray | None = None
    trace: list = field(default_factory=list)

    def detail(self) -> dict:
        return {
            "record": self.record.to_dict(),
            "trace": [[t, d, s] for (t, d, s) in self.trace],
            "segment_vector_count": 0 if self.segment_vectors is None else int(self.segment_vectors.shape[0]),
        }


@dataclass
class _StreamRuntime:
    detector: SequentialDetector
    frame_ring: deque  # (t, objects) pairs for segment-vector capture


class Engine:
    def __init__(
        self,
        model: NominalModel,
        detector_cfg: DetectorConfig,
        policy: UpdatePolicy | None = None,
        journal: Journal | None = None,
        weights: FeatureWeights = FeatureWeights(),
        frame_buffer: int = 4096,
        trace_margin: int = 20,
    ):
        self.model = model
        self.detector_cfg = detector_cfg
        self.weights = weights
        self.policy = policy if policy is not None else UpdatePolicy(auto_insert_on_zero=False)
        self.journal = journal
        self.updater = ContinualUpdater(self.policy, model, journal)
        self.frame_buffer = frame_buffer
        self.trace_margin = trace_margin
        self.streams: dict[str, _StreamRuntime] = {}
        self.alarms: dict[str, AlarmEntry] = {}
        self.started_at = time.time()
        self._lock = threading.RLock()
        self._request_cache: dict[str, dict] = {}

    # -- frame processing ------------------------------------------------------

    def _runtime(self, stream_id: str) -> _StreamRuntime:
        rt = self.streams.get(stream_id)
        if rt is None:
            rt = _StreamRuntime(
                detector=SequentialDetector(self.detector_cfg, self.model, stream_id=stream_id),
                frame_ring=deque(maxlen=self.frame_buffer),
            )
            self.streams[stream_id] = rt
        return rt

    def process_frame(self, frame: FrameFeatures, stream_id: str = "s0") -> StepResult:
        """Score one frame, advance its stream's detector, manage alarm records."""
        with self._lock:
            rt = self._runtime(stream_id)
            if frame.n_objects > 0:
                distances = self.model.knn_distances(frame.objects)
            else:
                distances = ()
            res = rt.detector.step(frame.t, distances)
            rt.frame_ring.append((frame.t, frame.objects))
            if res.opened is not None:
                self.alarms[res.opened.id] = AlarmEntry(record=res.opened)
            if res.closed is not None:
                self._capture_segment(rt, res.closed)
            # Zero statistic means this frame looked confidently nominal.
            if res.s == 0.0 and frame.n_objects > 0:
                self.updater.on_frame_nominal(frame.objects, stream_id=stream_id, t=frame.t)
            return res

    def _capture_segment(self, rt: _StreamRuntime, record: AlarmRecord) -> None:
        entry = self.alarms.get(record.id)
        if entry is None:
            entry = AlarmEntry(record=record)
            self.alarms[record.id] = entry
        entry.record = record
        end = record.tau_end if record.tau_end is not None else record.detection_frame
        vecs = [objs for (t, objs) in rt.frame_ring if record.tau_start <= t <= end and objs.shape[0] > 0]
        if vecs:
            entry.segment_vectors = np.vstack(vecs)
        else:
            entry.segment_vectors = np.empty((0, self.model.m), dtype=np.float64)
        entry.record.frame_vectors_ref = record.id
        lo = record.tau_start - self.trace_margin
        entry.trace = [(t, d, s) for (t, d, s) in rt.detector.state.history if t >= lo]

    def process_records(self, records, stream_id: str = "s0", request_id: str | None = None) -> dict:
        """Process wire-format frame records (the service's frame-batch entry point).

        Idempotent per request id: replaying a batch returns the original
        response without reprocessing.
        """
        with self._lock:
            if request_id is not None and request_id in self._request_cache:
                return self._request_cache[request_id]
            n_classes = self.model.m - 7
            results = []
            closed_records = []
            for rec in records:
                frame = frame_from_record(rec, n_classes, self.weights)
                res = self.process_frame(frame, stream_id=stream_id)
                results.append({
                    "t": res.t,
                    "delta": res.delta,
                    "s": res.s,
                    "opened": res.opened.id if res.opened is not None else None,
                    "closed": res.closed.id if res.closed is not None else None,
                })
                if res.closed is not None:
                    closed_records.append(res.closed.to_dict())
            response = {
                "stream_id": stream_id,
                "results": results,
                "alarms_closed": closed_records,
                "reference_size": self.model.reference_size,
            }
            if request_id is not None:
                self._request_cache[request_id] = response
            return response

    def finalize_stream(self, stream_id: str = "s0") -> AlarmRecord | None:
        """Close out a stream at end of input; an unfinished alarm stays ``open``."""
        with self._lock:
            rt = self.streams.get(stream_id)
            if rt is None:
                return None
            record = rt.detector.finalize()
            if record is not None:
                self._capture_segment(rt, record)
            return record

    # -- alarm review ----------------------------------------------------------

    def alarm_list(self, status: str | None = None) -> list[AlarmRecord]:
        """Alarms ordered by peak statistic, most confident first."""
        with self._lock:
            records = [e.record for e in self.alarms.values()]
        if status is not None:
            records = [r for r in records if r.status == status]
        return sorted(records, key=lambda r: -r.peak_statistic)

    def alarm_detail(self, alarm_id: str) -> dict:
        with self._lock:
            entry = self.alarms.get(alarm_id)
            if entry is None:
                raise UnknownAlarmError(alarm_id)
            return entry.detail()

    def label_alarm(
        self,
        alarm_id: str,
        verdict: str,
        sample_fraction: float | None = None,
        labeler: str = "",
        request_id: str | None = None,
    ) -> dict:
        """Apply a reviewer verdict; idempotent per request id and per verdict."""
        with self._lock:
            if request_id is not None and request_id in self._request_cache:
                return self._request_cache[request_id]
            entry = self.alarms.get(alarm_id)
            if entry is None:
                raise UnknownAlarmError(alarm_id)
            if not entry.record.closed:
                raise AlarmStateError(f"alarm {alarm_id} is still open; only closed alarms can be labeled")
            label = FeedbackLabel(
                alarm_id=alarm_id, verdict=verdict, sample_fraction=sample_fraction, labeler=labeler
            )
            inserted = self.updater.apply_feedback(entry.record, label, entry.segment_vectors)
            result = {
                "alarm_id": alarm_id,
                "verdict": verdict,
                "inserted": inserted,
                "reference_size": self.model.reference_size,
                "status": entry.record.status,
            }
            if request_id is not None:
                self._request_cache[request_id] = result
            return result

    def recalibrate(self, vectors, alpha: float | None = None, request_id: str | None = None) -> dict:
        with self._lock:
            if request_id is not None and request_id in self._request_cache:
                return self._request_cache[request_id]
            self.model.recalibrate(vectors, alpha)
            if self.journal is not None:
                self.journal.record_recalibrate(self.model.alpha, np.asarray(vectors, dtype=np.float64))
            result = {"d_alpha": self.model.d_alpha, "alpha": self.model.alpha}
            if request_id is not None:
                self._request_cache[request_id] = result
            return result

    def stats(self) -> dict:
        with self._lock:
            counts: dict[str, int] = {}
            for e in self.alarms.values():
                counts[e.record.status] = counts.get(e.record.status, 0) + 1
            return {
                **self.model.summary(),
                "uptime_s": time.time() - self.started_at,
                "streams": sorted(self.streams.keys()),
                "alarm_counts": counts,
                "total_alarms": len(self.alarms),
            }


@dataclass
class DetectionRun:
    """Result of running a whole stream through an Engine."""

    trace: list            # (t, delta, s) per frame
    alarms: list           # AlarmRecords in close order; trailing open one last
    engine: Engine

    def scores(self, mode: str = "s") -> np.ndarray:
        col = 2 if mode == "s" else 1
        return np.asarray([row[col] for row in self.trace], dtype=np.float64)


def detect_stream(
    model: NominalModel,
    frames,
    cfg: DetectorConfig,
    policy: UpdatePolicy | None = None,
    journal: Journal | None = None,
    stream_id: str = "s0",
) -> DetectionRun:
    """Run an ordered frame iterable through a fresh engine and collect outputs."""
    engine = Engine(model, cfg, policy=policy, journal=journal)
    trace = []
    alarms = []
    for frame in frames:
        res = engine.process_frame(frame, stream_id=stream_id)
        trace.append((res.t, res.delta, res.s))
        if res.closed is not None:
            alarms.append(res.closed)
    tail = engine.finalize_stream(stream_id)
    if tail is not None:
        alarms.append(tail)
    return DetectionRun(trace=trace, alarms=alarms, engine=engine)
