"""Continual-learning protocol: automatic nominal inserts and reviewer feedback.

Two ways the reference set grows during operation:

* while the running statistic sits at zero, every stride-th object vector is
  considered confidently nominal and inserted automatically;
* when a reviewer marks a closed alarm as a false alarm, a seeded uniform
  sample of the segment's vectors is folded in, so the pattern that caused
  the alarm stops looking novel.

Every mutation can be mirrored to an append-only journal; replaying the
journal against the initial model reconstructs the live model exactly.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detector import AlarmRecord
from .errors import InvalidInputError, StreamFormatError
from .nominal import NominalModel

JOURNAL_FORMAT = "vigil-journal"
JOURNAL_VERSION = 1

VERDICTS = ("false_alarm", "true_anomaly")


@dataclass(frozen=True)
class UpdatePolicy:
    """Knobs for both update paths.

    ``auto_insert_stride`` keeps reference growth bounded (one insert per
    stride eligible vectors, roughly one per second of video at stride 30);
    set it to 1 for the literal insert-every-zero-statistic-vector rule.
    """

    auto_insert_on_zero: bool = True
    auto_insert_stride: int = 30
    feedback_sample_fraction: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        if self.auto_insert_stride < 1:
            raise InvalidInputError(f"auto_insert_stride must be >= 1, got {self.auto_insert_stride}")
        if not 0.0 < self.feedback_sample_fraction <= 1.0:
            raise InvalidInputError(
                f"feedback_sample_fraction must be in (0, 1], got {self.feedback_sample_fraction}"
            )


@dataclass
class FeedbackLabel:
    """A reviewer verdict on one closed alarm."""

    alarm_id: str
    verdict: str
    sample_fraction: float | None = None  # None -> policy default
    labeler: str = ""
    timestamp: float | None = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise InvalidInputError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if self.sample_fraction is not None and not 0.0 < self.sample_fraction <= 1.0:
            raise InvalidInputError(f"sample_fraction must be in (0, 1], got {self.sample_fraction}")
        if self.timestamp is None:
            self.timestamp = time.time()


class Journal:
    """Append-only NDJSON log of model mutations.

    Inserted vectors are stored verbatim (JSON floats round-trip float64
    exactly), which keeps replay trivially deterministic.
    """

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "w", encoding="utf-8") as f:
                f.write(json.dumps({"format": JOURNAL_FORMAT, "version": JOURNAL_VERSION}) + "\n")

    def _append(self, entry: dict) -> None:
        entry = {"ts": time.time(), **entry}
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry) + "\n")
            f.flush()

    def record_insert(self, source: str, vectors: np.ndarray, **context) -> None:
        self._append({
            "op": "insert",
            "source": source,
            **context,
            "vectors": np.asarray(vectors, dtype=np.float64).tolist(),
        })

    def record_label(self, label: FeedbackLabel, inserted: int, **context) -> None:
        self._append({
            "op": "label",
            "alarm_id": label.alarm_id,
            "verdict": label.verdict,
            "sample_fraction": label.sample_fraction,
            "labeler": label.labeler,
            "inserted": inserted,
            **context,
        })

    def record_recalibrate(self, alpha: float, vectors: np.ndarray) -> None:
        self._append({
            "op": "recalibrate",
            "alpha": alpha,
            "vectors": np.asarray(vectors, dtype=np.float64).tolist(),
        })

    @staticmethod
    def replay(source, model: NominalModel) -> NominalModel:
        """Apply every journaled mutation, in order, to ``model``."""
        path = Path(source)
        with open(path, "r", encoding="utf-8") as f:
            line_no = 0
            header_seen = False
            for raw_line in f:
                line_no += 1
                line = raw_line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as e:
                    raise StreamFormatError(f"bad journal entry: {e.msg}", line_no) from e
                if not header_seen:
                    if entry.get("format") != JOURNAL_FORMAT or entry.get("version") != JOURNAL_VERSION:
                        raise StreamFormatError("missing or unsupported journal header", line_no)
                    header_seen = True
                    continue
                op = entry.get("op")
                if op == "insert":
                    model.insert(np.asarray(entry["vectors"], dtype=np.float64))
                elif op == "recalibrate":
                    model.recalibrate(np.asarray(entry["vectors"], dtype=np.float64), entry["alpha"])
                elif op == "label":
                    continue  # audit metadata; the matching insert carries the effect
                else:
                    raise StreamFormatError(f"unknown journal op {op!r}", line_no)
        return model


def _alarm_rng(seed: int, alarm_id: str) -> np.random.Generator:
    digest = hashlib.sha256(alarm_id.encode("utf-8")).digest()
    return np.random.default_rng(np.random.SeedSequence([seed, int.from_bytes(digest[:8], "big")]))


def sample_segment_vectors(vectors: np.ndarray, fraction: float, seed: int, alarm_id: str) -> np.ndarray:
    """Seeded uniform sample of a fraction of the segment's vectors.

    Deterministic per (seed, alarm_id): replaying identical feedback yields
    an identical reference set regardless of labeling order.
    """
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] == 0:
        return np.empty((0, V.shape[1] if V.ndim == 2 else 0), dtype=np.float64)
    n = V.shape[0]
    count = n if fraction >= 1.0 else max(1, int(round(fraction * n)))
    if count >= n:
        return V
    rng = _alarm_rng(seed, alarm_id)
    idx = np.sort(rng.choice(n, size=count, replace=False))
    return V[idx]


class ContinualUpdater:
    """Applies the update protocol to one model; serialize through one writer."""

    def __init__(self, policy: UpdatePolicy, model: NominalModel, journal: Journal | None = None):
        self.policy = policy
        self.model = model
        self.journal = journal
        self._zero_counter = 0
        self.applied_labels: dict[str, str] = {}  # alarm_id -> verdict

    def on_frame_nominal(self, frame_vectors: np.ndarray, stream_id: str = "s0", t: int | None = None) -> int:
        """Insert every stride-th vector of a zero-statistic frame.

        Caller must only invoke this when the detector reported s_t = 0.
        Returns how many vectors were inserted.
        """
        if not self.policy.auto_insert_on_zero:
            return 0
        V = np.asarray(frame_vectors, dtype=np.float64)
        if V.ndim != 2 or V.shape[0] == 0:
            return 0
        selected = []
        for i in range(V.shape[0]):
            self._zero_counter += 1
            if self._zero_counter % self.policy.auto_insert_stride == 0:
                selected.append(V[i])
        if not selected:
            return 0
        batch = np.vstack(selected)
        self.model.insert(batch)
        if self.journal is not None:
            self.journal.record_insert("auto", batch, stream_id=stream_id, t=t)
        return batch.shape[0]

    def apply_feedback(
        self,
        alarm: AlarmRecord,
        label: FeedbackLabel,
        segment_vectors: np.ndarray,
    ) -> int:
        """Fold a labeled false alarm's sampled vectors into the reference set.

        True-anomaly verdicts archive the alarm without touching the model
        (the detector only ever learns nominal data). Re-applying the same
        verdict to an alarm is a no-op; insertions are never retracted.
        """
        if not alarm.closed:
            raise InvalidInputError(f"alarm {alarm.id} is still open and cannot be labeled")
        previous = self.applied_labels.get(alarm.id)
        if previous == label.verdict:
            alarm.status = "labeled_false" if label.verdict == "false_alarm" else "labeled_true"
            return 0
        inserted = 0
        if label.verdict == "false_alarm":
            fraction = label.sample_fraction
            if fraction is None:
                fraction = self.policy.feedback_sample_fraction
            batch = sample_segment_vectors(segment_vectors, fraction, self.policy.rng_seed, alarm.id)
            if batch.shape[0] > 0:
                self.model.insert(batch)
                inserted = batch.shape[0]
                if self.journal is not None:
                    self.journal.record_insert("feedback", batch, alarm_id=alarm.id)
            alarm.status = "labeled_false"
        else:
            alarm.status = "labeled_true"
        self.applied_labels[alarm.id] = label.verdict
        if self.journal is not None:
            self.journal.record_label(label, inserted)
        return inserted
