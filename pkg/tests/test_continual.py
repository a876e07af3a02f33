import time

import numpy as np
import pytest

from vigil.continual import ContinualUpdater, FeedbackLabel, Journal, UpdatePolicy, sample_segment_vectors
from vigil.detector import AlarmRecord, DetectorConfig
from vigil.engine import Engine
from vigil.errors import InvalidInputError
from vigil.nominal import NominalModel, TrainConfig, train
from vigil.simgen import anomaly_scenario, collect_objects, generate, nominal_scenario


def fresh_model(seed=0, size=60, m=4, k=1):
    rng = np.random.default_rng(seed)
    return NominalModel(reference=rng.normal(size=(size, m)), calib_distances=np.array([0.5]), k=k, alpha=0.5)


def closed_alarm(alarm_id="s0/1"):
    return AlarmRecord(
        id=alarm_id, stream_id="s0", tau_start=10, detection_frame=12, tau_end=20,
        peak_frame=13, peak_statistic=50.0, status="closed",
    )


class TestAutoInsert:
    def test_stride_one_inserts_all(self):
        model = fresh_model()
        upd = ContinualUpdater(UpdatePolicy(auto_insert_stride=1), model)
        n0 = model.reference_size
        inserted = upd.on_frame_nominal(np.zeros((3, 4)))
        assert inserted == 3
        assert model.reference_size == n0 + 3

    def test_disabled_policy_is_noop(self):
        model = fresh_model()
        upd = ContinualUpdater(UpdatePolicy(auto_insert_on_zero=False), model)
        assert upd.on_frame_nominal(np.zeros((3, 4))) == 0
        assert model.insert_count == 0

    def test_stride_ten_over_hundred_vectors(self):
        model = fresh_model()
        upd = ContinualUpdater(UpdatePolicy(auto_insert_stride=10), model)
        total = sum(upd.on_frame_nominal(np.zeros((1, 4))) for _ in range(100))
        assert total == 10

    def test_engine_only_inserts_on_zero_statistic(self):
        # frames whose objects push the statistic positive must not be learned
        train_frames, _ = generate(nominal_scenario(seed=1, frames=600))
        model = train(collect_objects(train_frames), TrainConfig(k=3, rng_seed=0))
        frames, _ = generate(nominal_scenario(seed=2, frames=400))
        policy = UpdatePolicy(auto_insert_on_zero=True, auto_insert_stride=1)
        engine = Engine(model, DetectorConfig(h=1e12), policy=policy)
        eligible = 0
        for f in frames:
            res = engine.process_frame(f)
            if res.s == 0.0:
                eligible += f.n_objects
        assert model.insert_count == eligible
        assert eligible > 0


class TestSampling:
    def test_full_fraction_takes_everything(self):
        V = np.arange(100.0).reshape(50, 2)
        out = sample_segment_vectors(V, 1.0, seed=0, alarm_id="x")
        assert np.array_equal(out, V)

    def test_fraction_rounding_and_determinism(self):
        V = np.arange(100.0).reshape(50, 2)
        a = sample_segment_vectors(V, 0.2, seed=7, alarm_id="s0/1")
        b = sample_segment_vectors(V, 0.2, seed=7, alarm_id="s0/1")
        assert a.shape == (10, 2)
        assert np.array_equal(a, b)
        c = sample_segment_vectors(V, 0.2, seed=7, alarm_id="s0/2")
        assert not np.array_equal(a, c)

    def test_tiny_segment_still_contributes(self):
        V = np.ones((2, 3))
        assert sample_segment_vectors(V, 0.1, seed=0, alarm_id="a").shape[0] == 1


class TestApplyFeedback:
    def test_false_alarm_full_insert(self):
        model = fresh_model()
        upd = ContinualUpdater(UpdatePolicy(), model)
        segment = np.random.default_rng(1).normal(size=(50, 4))
        n0 = model.reference_size
        inserted = upd.apply_feedback(closed_alarm(), FeedbackLabel("s0/1", "false_alarm", 1.0), segment)
        assert inserted == 50
        assert model.reference_size == n0 + 50

    def test_true_anomaly_untouched(self):
        model = fresh_model()
        upd = ContinualUpdater(UpdatePolicy(), model)
        alarm = closed_alarm()
        inserted = upd.apply_feedback(alarm, FeedbackLabel("s0/1", "true_anomaly"), np.ones((5, 4)))
        assert inserted == 0
        assert model.insert_count == 0
        assert alarm.status == "labeled_true"

    def test_same_verdict_is_idempotent(self):
        model = fresh_model()
        upd = ContinualUpdater(UpdatePolicy(), model)
        alarm = closed_alarm()
        segment = np.ones((10, 4))
        first = upd.apply_feedback(alarm, FeedbackLabel("s0/1", "false_alarm", 1.0), segment)
        second = upd.apply_feedback(alarm, FeedbackLabel("s0/1", "false_alarm", 1.0), segment)
        assert first == 10 and second == 0
        assert model.insert_count == 10

    def test_open_alarm_rejected(self):
        model = fresh_model()
        upd = ContinualUpdater(UpdatePolicy(), model)
        alarm = closed_alarm()
        alarm.status = "open"
        with pytest.raises(InvalidInputError):
            upd.apply_feedback(alarm, FeedbackLabel("s0/1", "false_alarm"), np.ones((3, 4)))

    def test_bad_verdict_rejected(self):
        with pytest.raises(InvalidInputError):
            FeedbackLabel("a", "maybe")


class TestReplayAfterFeedback:
    def test_identical_segment_goes_silent(self):
        # false-alarm the segment with full sampling and k=1, then re-feed the
        # recorded frames: every vector now has a zero-distance neighbor, so
        # the evidence is negative and the statistic never leaves zero
        train_frames, _ = generate(nominal_scenario(seed=5, frames=900))
        model = train(collect_objects(train_frames), TrainConfig(k=1, alpha=0.05, rng_seed=0))
        frames, _ = generate(anomaly_scenario(seed=6, frames=500, segment=(300, 360), separation=6.0))

        engine = Engine(model, DetectorConfig(h=1.0))
        by_t = {}
        closed = []
        for f in frames:
            by_t[f.t] = f
            res = engine.process_frame(f)
            if res.closed is not None:
                closed.append(res.closed)
        assert closed, "the injected segment must raise an alarm"
        alarm = closed[0]
        result_count = engine.label_alarm(alarm.id, "false_alarm", sample_fraction=1.0)

        replay = [by_t[t] for t in range(alarm.tau_start, alarm.tau_end + 1)]
        second = Engine(model, DetectorConfig(h=1.0))
        for f in replay:
            res = second.process_frame(f, stream_id="replay")
            assert res.s == 0.0
            assert res.delta < 0.0
        assert second.finalize_stream("replay") is None

    def test_max_distance_never_higher_after_feedback(self):
        train_frames, _ = generate(nominal_scenario(seed=7, frames=700))
        model = train(collect_objects(train_frames), TrainConfig(k=3, rng_seed=0))
        frames, _ = generate(anomaly_scenario(seed=8, frames=400, segment=(200, 260), separation=4.0))
        segment_vectors = collect_objects([f for f in frames if 200 <= f.t <= 260])
        before = model.knn_distances(segment_vectors)
        upd = ContinualUpdater(UpdatePolicy(), model)
        upd.apply_feedback(closed_alarm(), FeedbackLabel("s0/1", "false_alarm", 0.5), segment_vectors)
        after = model.knn_distances(segment_vectors)
        assert after.max() <= before.max()
        assert np.all(after <= before)

    def test_no_forgetting(self):
        model = fresh_model(size=200, m=5, k=2)
        rng = np.random.default_rng(9)
        queries = rng.normal(size=(300, 5))
        good_before = model.knn_distances(queries) <= model.d_alpha
        upd = ContinualUpdater(UpdatePolicy(), model)
        for i in range(5):
            seg = rng.normal(size=(rng.integers(5, 40), 5)) * rng.uniform(0.5, 3)
            upd.apply_feedback(closed_alarm(f"s0/{i}"), FeedbackLabel(f"s0/{i}", "false_alarm", 0.4), seg)
        good_after = model.knn_distances(queries) <= model.d_alpha
        assert np.all(good_after[good_before])


class TestDeterminism:
    def test_same_seed_same_final_reference(self):
        segs = [np.random.default_rng(i).normal(size=(30, 4)) for i in range(4)]

        def run():
            model = fresh_model(seed=3)
            upd = ContinualUpdater(UpdatePolicy(rng_seed=99), model)
            for i, seg in enumerate(segs):
                upd.apply_feedback(closed_alarm(f"s0/{i}"), FeedbackLabel(f"s0/{i}", "false_alarm", 0.3), seg)
            return model.state_digest()

        assert run() == run()


class TestJournal:
    def test_replay_reconstructs_model(self, tmp_path):
        journal_path = tmp_path / "journal.ndjson"
        train_frames, _ = generate(nominal_scenario(seed=11, frames=700))
        X = collect_objects(train_frames)
        cfg = TrainConfig(k=3, alpha=0.05, rng_seed=4)
        live = train(X, cfg)
        initial_blob = live.save()

        journal = Journal(journal_path)
        upd = ContinualUpdater(UpdatePolicy(auto_insert_stride=1), live, journal)
        rng = np.random.default_rng(12)
        upd.on_frame_nominal(rng.normal(size=(4, live.m)))
        upd.apply_feedback(closed_alarm("s0/1"), FeedbackLabel("s0/1", "false_alarm", 0.5), rng.normal(size=(40, live.m)))
        upd.apply_feedback(closed_alarm("s0/2"), FeedbackLabel("s0/2", "true_anomaly"), rng.normal(size=(10, live.m)))
        recal = rng.normal(size=(30, live.m))
        live.recalibrate(recal, alpha=0.1)
        journal.record_recalibrate(0.1, recal)

        rebuilt = Journal.replay(journal_path, NominalModel.load(initial_blob))
        assert rebuilt.state_digest() == live.state_digest()

    def test_update_cost_stays_small_on_large_model(self):
        rng = np.random.default_rng(13)
        model = NominalModel(reference=rng.normal(size=(50_000, 8)), calib_distances=np.array([1.0]), k=1, alpha=0.5)
        upd = ContinualUpdater(UpdatePolicy(), model)
        t0 = time.perf_counter()
        for i in range(20):
            upd.apply_feedback(
                closed_alarm(f"s0/{i}"), FeedbackLabel(f"s0/{i}", "false_alarm", 1.0), rng.normal(size=(100, 8))
            )
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0, f"20 feedback batches took {elapsed:.3f}s"
