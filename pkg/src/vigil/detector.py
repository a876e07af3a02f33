"""Online sequential decision core.

Per frame, the largest object kNN distance is turned into signed anomaly
evidence

    delta_t = d_max^m - d_alpha^m        (clamped to +-evidence_cap)

and accumulated into the non-negative running statistic

    s_t = max(s_{t-1} + delta_t, 0),  s_0 = 0.

An alarm opens the first time s_t exceeds the threshold h; its start is the
last frame where the statistic was zero. While an alarm is open, a strictly
decreasing run of the statistic over ``n_consec`` frames closes it, anchored
at the peak frame where the run began, after which the statistic resets to
zero and monitoring continues from the live frame.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from collections import deque
from typing import Iterable, Sequence

from .errors import InvalidInputError
from .nominal import NominalModel

def _pow_saturating(base: float, exponent: int) -> float:
    """base**exponent for base >= 0, saturating to +inf instead of overflowing.

    Distances taken to the dimensionality (e.g. m=87) overflow float64 long
    before they stop being meaningful evidence; the caller clamps the
    difference of two of these to the evidence cap.
    """
    if base < 0:
        raise InvalidInputError(f"distance must be >= 0, got {base!r}")
    if base == 0.0:
        return 0.0
    try:
        value = base**exponent
    except OverflowError:
        return math.inf
    return value


@dataclass(frozen=True)
class DetectorConfig:
    """Tuning for the sequential detector.

    ``m`` is the evidence exponent; leave None to use the model's
    dimensionality. ``delta_floor`` is the evidence assigned to frames with
    no detected objects; None means "maximally nominal", i.e. the evidence of
    a zero-distance frame, -d_alpha^m (clamped).
    """

    h: float = 10.0
    n_consec: int = 5
    delta_floor: float | None = None
    evidence_cap: float = 1e6
    m: int | None = None
    single_shot_threshold: float = 0.0
    history_size: int = 4096

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidInputError(f"alarm threshold h must be > 0, got {self.h}")
        if self.n_consec < 1:
            raise InvalidInputError(f"n_consec must be >= 1, got {self.n_consec}")
        if not (math.isfinite(self.evidence_cap) and self.evidence_cap > 0):
            raise InvalidInputError(f"evidence_cap must be finite and > 0, got {self.evidence_cap}")
        if self.delta_floor is not None and self.delta_floor > 0:
            raise InvalidInputError(f"delta_floor must be <= 0, got {self.delta_floor}")
        if self.m is not None and self.m < 1:
            raise InvalidInputError(f"evidence exponent m must be >= 1, got {self.m}")


def evidence(max_knn_distance: float, d_alpha: float, m: int, cfg: DetectorConfig) -> float:
    """Instantaneous anomaly evidence of a frame, clamped to +-evidence_cap."""
    max_knn_distance = float(max_knn_distance)
    d_alpha = float(d_alpha)
    if not max_knn_distance >= 0:
        raise InvalidInputError(f"kNN distance must be >= 0, got {max_knn_distance!r}")
    if not d_alpha >= 0:
        raise InvalidInputError(f"d_alpha must be >= 0, got {d_alpha!r}")
    if m < 1:
        raise InvalidInputError(f"exponent m must be >= 1, got {m}")
    pd = _pow_saturating(max_knn_distance, m)
    pa = _pow_saturating(d_alpha, m)
    if math.isinf(pd) and math.isinf(pa):
        # Both powers saturated; fall back to the sign of the distance gap.
        if max_knn_distance == d_alpha:
            raw = 0.0
        else:
            raw = math.inf if max_knn_distance > d_alpha else -math.inf
    else:
        raw = pd - pa
    return min(max(raw, -cfg.evidence_cap), cfg.evidence_cap)


def single_shot_decision(max_knn_distance: float, d_alpha: float, m: int, cfg: DetectorConfig) -> bool:
    """Benchmark baseline: threshold the instantaneous evidence of one frame."""
    return evidence(max_knn_distance, d_alpha, m, cfg) > cfg.single_shot_threshold


@dataclass
class AlarmRecord:
    """One alarm segment: open while the statistic is elevated, then closed."""

    id: str
    stream_id: str
    tau_start: int
    detection_frame: int
    tau_end: int | None = None
    peak_frame: int | None = None
    peak_statistic: float = 0.0
    status: str = "open"  # open | closed | labeled_false | labeled_true
    frame_vectors_ref: str | None = None

    @property
    def closed(self) -> bool:
        return self.status != "open"

    def interval(self) -> tuple[int, int]:
        end = self.tau_end if self.tau_end is not None else self.detection_frame
        return (self.tau_start, end)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "stream_id": self.stream_id,
            "tau_start": self.tau_start,
            "detection_frame": self.detection_frame,
            "tau_end": self.tau_end,
            "peak_frame": self.peak_frame,
            "peak_statistic": self.peak_statistic,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlarmRecord":
        return cls(**{k: d[k] for k in (
            "id", "stream_id", "tau_start", "detection_frame", "tau_end",
            "peak_frame", "peak_statistic", "status",
        )})


@dataclass
class StepResult:
    """Outcome of feeding one frame to the detector."""

    t: int
    delta: float
    s: float
    opened: AlarmRecord | None = None
    closed: AlarmRecord | None = None


@dataclass
class DetectorState:
    s: float = 0.0
    t: int | None = None
    tau_start_candidate: int | None = None
    phase: str = "monitoring"  # monitoring | in_alarm
    decrease_run: int = 0
    run_start_frame: int | None = None
    prev_s: float = 0.0
    peak_frame: int | None = None
    peak_value: float = 0.0
    alarm_seq: int = 0
    open_alarm: AlarmRecord | None = None
    history: deque = field(default_factory=lambda: deque(maxlen=4096))


class SequentialDetector:
    """Stateful per-stream detector; feed frames in order via :meth:`step`.

    Single-writer per stream; run one instance per independent stream.
    """

    def __init__(self, cfg: DetectorConfig, model: NominalModel | None = None, stream_id: str = "s0"):
        self.cfg = cfg
        self.model = model
        self.stream_id = stream_id
        self.state = DetectorState(history=deque(maxlen=cfg.history_size))

    def _exponent(self) -> int:
        if self.cfg.m is not None:
            return self.cfg.m
        if self.model is None:
            raise InvalidInputError("detector needs either cfg.m or a model to define the evidence exponent")
        return self.model.m

    def _floor(self, d_alpha: float, m: int) -> float:
        if self.cfg.delta_floor is not None:
            return max(self.cfg.delta_floor, -self.cfg.evidence_cap)
        return evidence(0.0, d_alpha, m, self.cfg)

    def frame_delta(self, knn_distances: Sequence[float], d_alpha: float | None = None) -> float:
        """Evidence for one frame given its per-object kNN distances."""
        da = self.model.d_alpha if d_alpha is None else d_alpha
        m = self._exponent()
        if len(knn_distances) == 0:
            return self._floor(da, m)
        return evidence(max(knn_distances), da, m, self.cfg)

    def step(self, t: int, knn_distances: Sequence[float], d_alpha: float | None = None) -> StepResult:
        """Advance the statistic by one frame and manage alarm segmentation."""
        delta = self.frame_delta(knn_distances, d_alpha)
        return self.step_delta(t, delta)

    def step_delta(self, t: int, delta: float) -> StepResult:
        """Pure recursion entry point: advance using a precomputed evidence value."""
        st = self.state
        if st.t is not None and t <= st.t:
            raise InvalidInputError(f"frame index must increase: got t={t} after t={st.t}")
        if st.t is None and st.tau_start_candidate is None:
            # Statistic is implicitly zero just before the first frame.
            st.tau_start_candidate = max(t - 1, 0)
        prev_t = st.t
        st.prev_s = st.s
        st.s = max(st.s + delta, 0.0)
        st.t = t

        opened = closed = None
        if st.phase == "monitoring":
            if st.s == 0.0:
                st.tau_start_candidate = t
            elif st.s > self.cfg.h:
                st.alarm_seq += 1
                opened = AlarmRecord(
                    id=f"{self.stream_id}-{st.alarm_seq}",
                    stream_id=self.stream_id,
                    tau_start=st.tau_start_candidate,
                    detection_frame=t,
                    peak_frame=t,
                    peak_statistic=st.s,
                )
                st.open_alarm = opened
                st.phase = "in_alarm"
                st.decrease_run = 0
                st.run_start_frame = None
                st.peak_frame, st.peak_value = t, st.s
        else:  # in_alarm
            alarm = st.open_alarm
            if st.s > st.peak_value:
                st.peak_frame, st.peak_value = t, st.s
                alarm.peak_frame, alarm.peak_statistic = t, st.s
            if st.s < st.prev_s:
                if st.decrease_run == 0:
                    st.run_start_frame = prev_t
                st.decrease_run += 1
            else:
                # Ties or increases break the run; the segment is still hot.
                st.decrease_run = 0
                st.run_start_frame = None
            if st.decrease_run >= self.cfg.n_consec or st.s == 0.0:
                closed = self._close(t)

        st.history.append((t, delta, st.s))
        return StepResult(t=t, delta=delta, s=st.s, opened=opened, closed=closed)

    def _close(self, t: int) -> AlarmRecord:
        st = self.state
        alarm = st.open_alarm
        # The decrease run started right after the peak; anchor tau_end there.
        alarm.tau_end = st.run_start_frame if st.run_start_frame is not None else t
        alarm.status = "closed"
        st.open_alarm = None
        st.phase = "monitoring"
        st.decrease_run = 0
        st.run_start_frame = None
        # Reset and continue from the live frame; the statistic is zero here.
        st.s = 0.0
        st.tau_start_candidate = t
        return alarm

    def finalize(self) -> AlarmRecord | None:
        """Close a still-open alarm at end of stream (status stays ``open``)."""
        st = self.state
        if st.open_alarm is None:
            return None
        alarm = st.open_alarm
        alarm.tau_end = st.t
        st.open_alarm = None
        st.phase = "monitoring"
        st.s = 0.0
        st.tau_start_candidate = st.t
        return alarm


def replay_deltas(
    deltas: Iterable[float],
    cfg: DetectorConfig,
    start_t: int = 0,
) -> tuple[list[float], list[AlarmRecord]]:
    """Run the bare recursion over a recorded evidence sequence.

    Returns the statistic trajectory and all alarms (closed ones plus a
    trailing open one, if any). Bit-exact: the recursion has no hidden state.
    """
    det = SequentialDetector(cfg, model=None, stream_id="replay")
    trajectory: list[float] = []
    alarms: list[AlarmRecord] = []
    t = start_t
    for delta in deltas:
        res = det.step_delta(t, float(delta))
        trajectory.append(res.s)
        if res.closed is not None:
            alarms.append(res.closed)
        t += 1
    tail = det.finalize()
    if tail is not None:
        alarms.append(tail)
    return trajectory, alarms


def calibrate_threshold(
    deltas: Sequence[float],
    cfg: DetectorConfig,
    target_alarms: int = 0,
    margin: float = 0.05,
    max_rounds: int = 64,
) -> float:
    """Smallest threshold whose alarm count on a nominal run is <= target.

    Candidate thresholds are the excursion peaks of the no-reset trajectory;
    the choice is then verified (and nudged up if needed) against the real
    detector, whose post-alarm resets can re-trigger within one excursion.
    """
    if len(deltas) == 0:
        raise InvalidInputError("cannot calibrate on an empty evidence sequence")
    s = 0.0
    peaks: list[float] = []
    cur_peak = 0.0
    for d in deltas:
        s = max(s + d, 0.0)
        if s == 0.0:
            if cur_peak > 0.0:
                peaks.append(cur_peak)
            cur_peak = 0.0
        else:
            cur_peak = max(cur_peak, s)
    if cur_peak > 0.0:
        peaks.append(cur_peak)

    if not peaks:
        h = 1.0
    else:
        peaks.sort(reverse=True)
        idx = min(target_alarms, len(peaks))
        if idx >= len(peaks):
            h = max(peaks[-1] / 2.0, 1e-12)
        else:
            h = peaks[idx] * (1.0 + margin) + 1e-12

    for _ in range(max_rounds):
        _, alarms = replay_deltas(deltas, dataclasses.replace(cfg, h=h))
        if len(alarms) <= target_alarms:
            return h
        h *= 1.0 + max(margin, 0.05)
    return h
