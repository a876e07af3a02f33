import numpy as np
import pytest

from vigil.detector import AlarmRecord
from vigil.errors import InvalidInputError, UndefinedMetricError
from vigil.metrics import (
    GroundTruth,
    count_false_alarm_events,
    count_true_positive_events,
    detection_delay,
    evaluate,
    flagged_events,
    frame_auc,
)


def auc_pairwise_oracle(scores, labels):
    """Concordant-pair count with half credit for ties, over all (pos, neg) pairs."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    pos = s[y]
    neg = s[~y]
    total = 0.0
    for p in pos:
        total += np.sum(p > neg) + 0.5 * np.sum(p == neg)
    return total / (pos.size * neg.size)


def alarm(tau_start, tau_end, detection=None, alarm_id="a"):
    det = tau_start if detection is None else detection
    return AlarmRecord(
        id=alarm_id, stream_id="s0", tau_start=tau_start, detection_frame=det,
        tau_end=tau_end, peak_frame=det, peak_statistic=99.0, status="closed",
    )


class TestGroundTruth:
    def test_rejects_overlap(self):
        with pytest.raises(InvalidInputError):
            GroundTruth(intervals=((5, 10), (8, 12)))

    def test_rejects_inverted(self):
        with pytest.raises(InvalidInputError):
            GroundTruth(intervals=((10, 5),))

    def test_labels(self):
        gt = GroundTruth(intervals=((2, 4),))
        assert gt.frame_labels(7).tolist() == [False, False, True, True, True, False, False]


class TestFrameAuc:
    def test_perfect_separation(self):
        gt = GroundTruth(intervals=((5, 9),))
        scores = gt.frame_labels(20).astype(float)
        assert frame_auc(scores, gt) == 1.0

    def test_constant_scores_half(self):
        gt = GroundTruth(intervals=((5, 9),))
        assert frame_auc(np.ones(20), gt) == 0.5

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = 200
            labels = np.zeros(n, dtype=bool)
            a = int(rng.integers(0, n - 20))
            labels[a : a + int(rng.integers(5, 20))] = True
            # quantized scores force plenty of ties
            scores = np.round(rng.normal(0, 1, n) + labels * rng.uniform(0, 2), 1)
            got = frame_auc(scores, labels)
            want = auc_pairwise_oracle(scores, labels)
            assert got == pytest.approx(want, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        labels = np.zeros(300, dtype=bool)
        labels[40:90] = True
        scores = rng.normal(0, 1, 300) + labels
        base = frame_auc(scores, labels)
        assert frame_auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert frame_auc(3.0 * scores + 11.0, labels) == pytest.approx(base, abs=1e-12)
        assert frame_auc(np.arctan(scores), labels) == pytest.approx(base, abs=1e-12)

    def test_one_class_labels_rejected(self):
        with pytest.raises(UndefinedMetricError):
            frame_auc(np.arange(5.0), GroundTruth(intervals=()))
        with pytest.raises(UndefinedMetricError):
            frame_auc(np.arange(5.0), GroundTruth(intervals=((0, 4),)))


class TestDetectionDelay:
    def test_immediate_detection_zero_delay(self):
        gt = GroundTruth(intervals=((100, 200),))
        res = detection_delay([alarm(95, 210, detection=100)], gt)
        assert res.average == 0.0 and res.misses == 0

    def test_two_interval_average(self):
        gt = GroundTruth(intervals=((100, 200), (300, 400)))
        alarms = [alarm(100, 220, detection=110, alarm_id="a"), alarm(320, 410, detection=330, alarm_id="b")]
        res = detection_delay(alarms, gt)
        assert res.average == 20.0
        assert res.misses == 0

    def test_no_alarms_all_missed(self):
        gt = GroundTruth(intervals=((100, 200), (300, 400)))
        res = detection_delay([], gt)
        assert res.average is None
        assert res.misses == 2

    def test_earliest_detection_counts(self):
        gt = GroundTruth(intervals=((100, 200),))
        alarms = [alarm(150, 220, detection=160), alarm(100, 140, detection=105, alarm_id="b")]
        assert detection_delay(alarms, gt).delays[100] == 5


class TestEventCounting:
    def test_disjoint_alarm_is_false(self):
        gt = GroundTruth(intervals=((100, 200),))
        assert count_false_alarm_events([alarm(50, 60)], gt) == 1

    def test_contained_alarm_is_true_positive(self):
        gt = GroundTruth(intervals=((100, 200),))
        assert count_false_alarm_events([alarm(150, 160)], gt) == 0
        assert count_true_positive_events([alarm(150, 160)], gt) == 1

    def test_boundary_overlap_counts_as_intersecting(self):
        gt = GroundTruth(intervals=((100, 200),))
        assert count_false_alarm_events([alarm(95, 105)], gt) == 0
        assert count_false_alarm_events([alarm(95, 100)], gt) == 0
        assert count_false_alarm_events([alarm(95, 99)], gt) == 1

    def test_flagged_events_grouping(self):
        flags = [False, True, True, False, True, False, False, True]
        assert flagged_events(flags) == [(1, 2), (4, 4), (7, 7)]


class TestDelayMonotonicity:
    def test_raising_threshold_never_shortens_delay(self):
        # fixed evidence trajectory; higher thresholds can only detect later
        from vigil.detector import DetectorConfig, replay_deltas

        rng = np.random.default_rng(10)
        deltas = rng.normal(-0.2, 0.6, 500)
        deltas[200:260] += 2.5  # the anomaly ramp
        gt = GroundTruth(intervals=((200, 259),))
        previous = None
        for h in (1.0, 5.0, 20.0, 60.0):
            _, alarms = replay_deltas(deltas, DetectorConfig(h=h))
            res = detection_delay([a for a in alarms], gt)
            if res.detected == 0:
                continue
            delay = res.delays[200]
            if previous is not None:
                assert delay >= previous
            previous = delay
        assert previous is not None, "at least one threshold should detect the ramp"


class TestEvaluate:
    def test_report_fields(self):
        gt = GroundTruth(intervals=((10, 19),))
        scores = np.zeros(30)
        scores[10:20] = 5.0
        alarms = [alarm(9, 21, detection=11), alarm(25, 27, alarm_id="b")]
        report = evaluate(scores, alarms, gt)
        assert report.auc == 1.0
        assert report.avg_detection_delay == 1.0
        assert report.false_alarm_events == 1
        assert report.true_positive_events == 1
        assert report.missed_intervals == 0
        assert "frame AUC" in report.format_text()
        assert report.roc_table().startswith("fpr\ttpr\tthreshold")
        d = report.to_dict()
        assert d["auc"] == 1.0 and d["false_alarm_events"] == 1
