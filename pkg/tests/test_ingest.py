import io
import json

import numpy as np
import pytest

from vigil.errors import StreamFormatError
from vigil.features import FeatureWeights
from vigil.ingest import (
    load_ground_truth,
    parse_stream,
    read_alarms,
    read_trace,
    save_ground_truth,
    write_alarms,
    write_stream,
    write_trace,
)
from vigil.detector import AlarmRecord
from vigil.metrics import GroundTruth
from vigil.simgen import generate, nominal_scenario

HEADER = json.dumps({"format": "vigil-frames", "version": 1, "n": 2})


def stream_text(*frame_dicts):
    return "\n".join([HEADER] + [json.dumps(d) for d in frame_dicts]) + "\n"


def frame_dict(t, objects=None):
    return {
        "t": t,
        "flow": {"mean": 1.0, "var": 0.5, "skew": 0.0, "kurt": 3.0},
        "objects": objects if objects is not None else [{"loc": [1.0, 2.0, 3.0], "probs": [0.5, 0.5]}],
    }


class TestParseStream:
    def test_empty_input_empty_stream(self):
        reader = parse_stream(io.StringIO(HEADER + "\n"))
        assert list(reader) == []
        assert reader.stats.frames == 0 and reader.stats.skipped == 0

    def test_basic_frame(self):
        frames = list(parse_stream(io.StringIO(stream_text(frame_dict(0)))))
        assert len(frames) == 1
        f = frames[0]
        assert f.t == 0 and f.m == 9 and f.n_objects == 1
        # layout: flow(4), loc(3), probs(2) under unit weights
        assert f.objects[0].tolist() == [1.0, 0.5, 0.0, 3.0, 1.0, 2.0, 3.0, 0.5, 0.5]

    def test_bbox_converted_to_location(self):
        d = frame_dict(0, objects=[{"bbox": [0.0, 0.0, 10.0, 10.0], "probs": [1.0, 0.0]}])
        f = next(iter(parse_stream(io.StringIO(stream_text(d)))))
        assert f.objects[0][4:7].tolist() == [5.0, 5.0, 100.0]

    def test_both_bbox_and_loc_rejected_with_line(self):
        d = frame_dict(0, objects=[{"bbox": [0, 0, 1, 1], "loc": [0.5, 0.5, 1.0], "probs": [1, 0]}])
        with pytest.raises(StreamFormatError) as ei:
            list(parse_stream(io.StringIO(stream_text(d))))
        assert "line 2" in str(ei.value)

    def test_missing_header_rejected(self):
        with pytest.raises(StreamFormatError):
            list(parse_stream(io.StringIO(json.dumps(frame_dict(0)) + "\n")))

    def test_wrong_version_rejected(self):
        bad = json.dumps({"format": "vigil-frames", "version": 99, "n": 2})
        with pytest.raises(StreamFormatError):
            list(parse_stream(io.StringIO(bad + "\n")))

    def test_non_monotone_t_rejected(self):
        text = stream_text(frame_dict(3), frame_dict(3))
        with pytest.raises(StreamFormatError):
            list(parse_stream(io.StringIO(text)))

    def test_inconsistent_n_rejected(self):
        d = frame_dict(0, objects=[{"loc": [1, 2, 3], "probs": [0.2, 0.2, 0.6]}])
        with pytest.raises(StreamFormatError):
            list(parse_stream(io.StringIO(stream_text(d))))

    def test_lenient_mode_skips_and_counts(self):
        text = "\n".join([
            HEADER,
            json.dumps(frame_dict(0)),
            "{broken json",
            json.dumps(frame_dict(1, objects=[{"probs": [1, 0]}])),  # neither bbox nor loc
            json.dumps(frame_dict(2)),
        ])
        reader = parse_stream(io.StringIO(text), strict=False)
        frames = list(reader)
        assert [f.t for f in frames] == [0, 2]
        assert reader.stats.skipped == 2
        assert [line for (line, _) in reader.stats.errors] == [3, 4]

    def test_weights_applied_at_ingest(self):
        f = next(iter(parse_stream(io.StringIO(stream_text(frame_dict(0))), weights=FeatureWeights(2, 3, 4))))
        assert f.objects[0].tolist() == [2.0, 1.0, 0.0, 6.0, 3.0, 6.0, 9.0, 2.0, 2.0]

    def test_parser_totality_on_garbage(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            blob = bytes(rng.integers(0, 256, size=rng.integers(1, 200), dtype=np.uint8))
            try:
                list(parse_stream(blob))
            except StreamFormatError:
                pass  # diagnosed failure is the contract; crashes are not

    def test_roundtrip_semantic_equality(self):
        frames, _ = generate(nominal_scenario(seed=21, frames=200))
        buf = io.StringIO()
        write_stream(frames, buf, n_classes=3)
        buf.seek(0)
        parsed = list(parse_stream(buf))
        assert len(parsed) == len(frames)
        for orig, back in zip(frames, parsed):
            assert orig.t == back.t
            assert orig.flow == back.flow
            assert np.array_equal(orig.objects, back.objects)
        # serialize(parse(x)) == serialize(x) record for record
        buf2 = io.StringIO()
        write_stream(parsed, buf2, n_classes=3)
        assert buf.getvalue() == buf2.getvalue()

    def test_order_preserved(self):
        frames, _ = generate(nominal_scenario(seed=22, frames=50))
        buf = io.StringIO()
        write_stream(frames, buf, n_classes=3)
        buf.seek(0)
        ts = [f.t for f in parse_stream(buf)]
        assert ts == sorted(ts) == list(range(50))


class TestGroundTruthFile:
    def roundtrip(self, gt):
        buf = io.StringIO()
        save_ground_truth(gt, buf)
        buf.seek(0)
        return load_ground_truth(buf)

    def test_empty(self):
        assert self.roundtrip(GroundTruth(intervals=())).intervals == ()

    def test_roundtrip(self):
        gt = GroundTruth(intervals=((5, 10), (20, 30)))
        assert self.roundtrip(gt).intervals == ((5, 10), (20, 30))

    def test_overlap_rejected(self):
        text = json.dumps({"format": "vigil-ground-truth", "version": 1}) + "\n" + json.dumps(
            {"intervals": [[5, 10], [8, 12]]}
        )
        with pytest.raises(StreamFormatError):
            load_ground_truth(io.StringIO(text))

    def test_inverted_rejected(self):
        text = json.dumps({"format": "vigil-ground-truth", "version": 1}) + "\n" + json.dumps(
            {"intervals": [[10, 5]]}
        )
        with pytest.raises(StreamFormatError):
            load_ground_truth(io.StringIO(text))


class TestTraceAndAlarms:
    def test_trace_roundtrip_bit_exact(self):
        rows = [(t, float(np.random.default_rng(t).normal()), float(abs(np.random.default_rng(t).normal()))) for t in range(100)]
        buf = io.StringIO()
        write_trace(rows, buf)
        buf.seek(0)
        assert read_trace(buf) == rows

    def test_alarm_roundtrip(self):
        alarms = [
            AlarmRecord(id="s0/1", stream_id="s0", tau_start=5, detection_frame=8, tau_end=12,
                        peak_frame=9, peak_statistic=42.5, status="closed"),
            AlarmRecord(id="s0/2", stream_id="s0", tau_start=50, detection_frame=55, tau_end=None,
                        peak_frame=55, peak_statistic=13.0, status="open"),
        ]
        buf = io.StringIO()
        write_alarms(alarms, buf)
        buf.seek(0)
        back = read_alarms(buf)
        assert [a.to_dict() for a in back] == [a.to_dict() for a in alarms]
