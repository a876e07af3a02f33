"""Offline evaluation: frame-level AUC, detection delay, and event counting.

Scores from multiple videos are evaluated concatenated, never per-video
averaged, and never normalized with future frames — both would inflate the
numbers in ways an online system cannot reproduce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .detector import AlarmRecord
from .errors import InvalidInputError, UndefinedMetricError


@dataclass(frozen=True)
class GroundTruth:
    """Disjoint, sorted, inclusive [start, end] anomalous frame intervals."""

    intervals: tuple
    stream_id: str = "s0"

    def __post_init__(self):
        ivals = tuple((int(a), int(b)) for (a, b) in self.intervals)
        object.__setattr__(self, "intervals", ivals)
        prev_end = None
        for (a, b) in ivals:
            if b < a:
                raise InvalidInputError(f"inverted interval [{a}, {b}]")
            if prev_end is not None and a <= prev_end:
                raise InvalidInputError(f"intervals overlap or are unsorted near [{a}, {b}]")
            prev_end = b

    def frame_labels(self, n_frames: int) -> np.ndarray:
        """Boolean per-frame anomaly labels for frames 0..n_frames-1."""
        labels = np.zeros(n_frames, dtype=bool)
        for (a, b) in self.intervals:
            labels[max(a, 0) : min(b, n_frames - 1) + 1] = True
        return labels

    def intersects(self, start: int, end: int) -> bool:
        return any(a <= end and start <= b for (a, b) in self.intervals)

    def is_empty(self) -> bool:
        return len(self.intervals) == 0


def roc_points(scores: Sequence[float], labels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC support points over all distinct thresholds, (0,0) prepended.

    Returns (thresholds, fpr, tpr) with thresholds descending; tie groups
    collapse to one point so the trapezoid through them is exact.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise InvalidInputError("scores and labels must be 1-D and the same length")
    P = int(y.sum())
    N = int((~y).sum())
    if P == 0 or N == 0:
        raise UndefinedMetricError("frame AUC needs both anomalous and nominal frames in the ground truth")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(~y_sorted)
    last_of_group = np.r_[np.nonzero(np.diff(s_sorted))[0], s.size - 1]
    thresholds = np.r_[np.inf, s_sorted[last_of_group]]
    tpr = np.r_[0.0, tps[last_of_group] / P]
    fpr = np.r_[0.0, fps[last_of_group] / N]
    return thresholds, fpr, tpr


def frame_auc(scores: Sequence[float], gt: GroundTruth | np.ndarray) -> float:
    """Trapezoidal area under the frame-level ROC curve.

    ``gt`` may be a GroundTruth (labels derived for len(scores) frames) or a
    precomputed boolean label array.
    """
    s = np.asarray(scores, dtype=np.float64)
    labels = gt.frame_labels(s.size) if isinstance(gt, GroundTruth) else np.asarray(gt, dtype=bool)
    _, fpr, tpr = roc_points(s, labels)
    return float(np.trapezoid(tpr, fpr))


@dataclass
class DelayResult:
    delays: dict            # interval start -> frames until detection
    misses: int
    detected: int

    @property
    def average(self) -> float | None:
        if not self.delays:
            return None
        return float(np.mean(list(self.delays.values())))


def detection_delay(alarms: Iterable[AlarmRecord], gt: GroundTruth) -> DelayResult:
    """Average frames between each detected interval's onset and its first detection.

    An interval counts as detected when some alarm's detection frame falls
    inside it; undetected intervals are reported as misses, not folded into
    the average.
    """
    detections = sorted(a.detection_frame for a in alarms)
    delays: dict[int, int] = {}
    misses = 0
    for (a, b) in gt.intervals:
        inside = [d for d in detections if a <= d <= b]
        if inside:
            delays[a] = inside[0] - a
        else:
            misses += 1
    return DelayResult(delays=delays, misses=misses, detected=len(delays))


def count_false_alarm_events(alarms: Iterable[AlarmRecord], gt: GroundTruth) -> int:
    """Alarms whose segment touches no ground-truth interval. Event-level."""
    count = 0
    for alarm in alarms:
        start, end = alarm.interval()
        if not gt.intersects(start, end):
            count += 1
    return count


def count_true_positive_events(alarms: Iterable[AlarmRecord], gt: GroundTruth) -> int:
    """Alarms whose segment intersects at least one ground-truth interval."""
    count = 0
    for alarm in alarms:
        start, end = alarm.interval()
        if gt.intersects(start, end):
            count += 1
    return count


def flagged_events(flags: Sequence[bool]) -> list[tuple[int, int]]:
    """Group per-frame boolean flags into contiguous [start, end] events."""
    events = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            events.append((start, i - 1))
            start = None
    if start is not None:
        events.append((start, len(flags) - 1))
    return events


@dataclass
class EvalReport:
    """Evaluation summary over one (possibly concatenated) stream."""

    auc: float
    avg_detection_delay: float | None
    false_alarm_events: int
    true_positive_events: int
    missed_intervals: int
    score_mode: str = "s"
    per_threshold_curve: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "avg_detection_delay": self.avg_detection_delay,
            "false_alarm_events": self.false_alarm_events,
            "true_positive_events": self.true_positive_events,
            "missed_intervals": self.missed_intervals,
            "score_mode": self.score_mode,
        }

    def format_text(self) -> str:
        delay = "n/a" if self.avg_detection_delay is None else f"{self.avg_detection_delay:.2f} frames"
        return "\n".join([
            f"frame AUC ({self.score_mode!s} scores): {self.auc:.4f}",
            f"average detection delay:   {delay}",
            f"false alarm events:        {self.false_alarm_events}",
            f"true positive events:      {self.true_positive_events}",
            f"missed intervals:          {self.missed_intervals}",
        ])

    def roc_table(self) -> str:
        lines = ["fpr\ttpr\tthreshold"]
        for (thr, fpr, tpr) in self.per_threshold_curve:
            lines.append(f"{fpr:.6g}\t{tpr:.6g}\t{thr:.6g}")
        return "\n".join(lines)


def evaluate(
    scores: Sequence[float],
    alarms: Iterable[AlarmRecord],
    gt: GroundTruth,
    score_mode: str = "s",
) -> EvalReport:
    """Assemble the full report: AUC, delays, and event counts."""
    s = np.asarray(scores, dtype=np.float64)
    labels = gt.frame_labels(s.size)
    thresholds, fpr, tpr = roc_points(s, labels)
    auc = float(np.trapezoid(tpr, fpr))
    alarms = list(alarms)
    delay = detection_delay(alarms, gt)
    return EvalReport(
        auc=auc,
        avg_detection_delay=delay.average,
        false_alarm_events=count_false_alarm_events(alarms, gt),
        true_positive_events=count_true_positive_events(alarms, gt),
        missed_intervals=delay.misses,
        score_mode=score_mode,
        per_threshold_curve=list(zip(thresholds.tolist(), fpr.tolist(), tpr.tolist())),
    )
