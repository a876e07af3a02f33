"""Synthetic feature-stream scenarios with ground truth.

Stands in for real camera feeds: nominal object vectors come from a mixture
of diagonal Gaussian clusters in feature space, anomaly segments swap in a
shifted or novel generator (or shift the flow moments), and the emitted
ground truth marks exactly those injected segments. A recurring
novel-but-nominal pattern can be layered in for continual-learning
experiments; its frames are *not* ground-truth anomalies, which is what
makes alarms on them false alarms.

Vector layout matches the engine: 4 flow moments, 3 location values, then
n class confidences. The flow block is drawn once per frame and shared by
all of that frame's objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .features import FeatureWeights, FlowStats, FrameFeatures, LocationFeatures, ObjectMeta, assemble_feature
from .metrics import GroundTruth

_AREA_FLOOR = 1e-3  # sampled areas are clipped here to stay valid


@dataclass(frozen=True)
class Cluster:
    """Diagonal Gaussian component over the full (4 + 3 + n) raw feature space."""

    mean: np.ndarray
    cov_diag: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "cov_diag", np.asarray(self.cov_diag, dtype=np.float64))
        if self.mean.shape != self.cov_diag.shape or self.mean.ndim != 1:
            raise InvalidInputError("cluster mean and cov_diag must be 1-D and the same length")
        if np.any(self.cov_diag < 0):
            raise InvalidInputError("cluster covariance diagonal must be >= 0")

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.cov_diag)


@dataclass(frozen=True)
class AnomalySegment:
    """One injected anomalous interval [start, end] (inclusive frames)."""

    start: int
    end: int
    kind: str  # cluster_shift | novel_cluster | motion_shift
    offset: np.ndarray | None = None       # cluster_shift: added to raw vectors
    cluster: Cluster | None = None         # novel_cluster: replacement generator
    flow_offset: np.ndarray | None = None  # motion_shift: added to the flow moments

    def __post_init__(self):
        if self.end < self.start:
            raise InvalidInputError(f"segment end {self.end} before start {self.start}")
        if self.kind == "cluster_shift":
            if self.offset is None:
                raise InvalidInputError("cluster_shift segment needs an offset vector")
            object.__setattr__(self, "offset", np.asarray(self.offset, dtype=np.float64))
        elif self.kind == "novel_cluster":
            if self.cluster is None:
                raise InvalidInputError("novel_cluster segment needs a cluster")
        elif self.kind == "motion_shift":
            if self.flow_offset is None or len(self.flow_offset) != 4:
                raise InvalidInputError("motion_shift segment needs a 4-vector flow offset")
            object.__setattr__(self, "flow_offset", np.asarray(self.flow_offset, dtype=np.float64))
        else:
            raise InvalidInputError(f"unknown anomaly kind {self.kind!r}")


@dataclass(frozen=True)
class RecurringPattern:
    """Novel-but-nominal pattern replayed over several intervals.

    With ``exact_repeat`` the object vectors of the first occurrence are
    replayed bit-identically in every later occurrence, so a full feedback
    insertion makes repeats sit at kNN distance zero.
    """

    intervals: tuple
    cluster: Cluster
    objects_per_frame: int = 2
    exact_repeat: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    n_classes: int
    frames: int
    clusters: tuple
    object_rate: float = 1.5
    weights: FeatureWeights = field(default_factory=FeatureWeights)
    anomaly_segments: tuple = ()
    recurring: RecurringPattern | None = None
    rng_seed: int = 0

    @property
    def m(self) -> int:
        return self.n_classes + 7

    def __post_init__(self):
        if self.frames < 1:
            raise InvalidInputError("scenario needs at least one frame")
        if not self.clusters:
            raise InvalidInputError("scenario needs at least one nominal cluster")
        total = sum(c.weight for c in self.clusters)
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise InvalidInputError(f"mixture weights must sum to 1, got {total}")
        for c in self.clusters:
            if c.mean.size != self.m:
                raise InvalidInputError(f"cluster dimension {c.mean.size} != m={self.m}")
        for seg in self.anomaly_segments:
            if seg.start < 0 or seg.end >= self.frames:
                raise InvalidInputError(f"segment [{seg.start}, {seg.end}] outside [0, {self.frames})")
        if self.recurring is not None:
            for (a, b) in self.recurring.intervals:
                if a < 0 or b >= self.frames or b < a:
                    raise InvalidInputError(f"recurring interval [{a}, {b}] outside [0, {self.frames})")


def _sample_raw(rng: np.random.Generator, cluster: Cluster, count: int) -> np.ndarray:
    return cluster.mean + rng.standard_normal((count, cluster.mean.size)) * cluster.std


def _pick_cluster(rng: np.random.Generator, cfg: ScenarioConfig) -> Cluster:
    weights = [c.weight for c in cfg.clusters]
    idx = rng.choice(len(cfg.clusters), p=weights)
    return cfg.clusters[int(idx)]


def _clip_parts(raw: np.ndarray, n_classes: int) -> np.ndarray:
    # Keep sampled vectors inside the domain types: positive area, probs in [0,1].
    raw[..., 6] = np.maximum(raw[..., 6], _AREA_FLOOR)
    raw[..., 7 : 7 + n_classes] = np.clip(raw[..., 7 : 7 + n_classes], 0.0, 1.0)
    return raw


def generate(cfg: ScenarioConfig) -> tuple[list[FrameFeatures], GroundTruth]:
    """Generate the frame stream and its ground truth, deterministically per seed."""
    rng = np.random.default_rng(cfg.rng_seed)
    pattern_bank = None
    if cfg.recurring is not None:
        # Dedicated child generator so bank size never shifts the main stream.
        # Each bank slot fixes the frame's flow block too: exact repeats must
        # be bit-identical assembled vectors, and objects share their frame's
        # flow moments.
        bank_rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 0xBA_5E]))
        max_len = max(b - a + 1 for (a, b) in cfg.recurring.intervals)
        pat = cfg.recurring.cluster
        pattern_bank = [
            (
                pat.mean[:4] + bank_rng.standard_normal(4) * pat.std[:4],
                _clip_parts(_sample_raw(bank_rng, pat, cfg.recurring.objects_per_frame), cfg.n_classes),
            )
            for _ in range(max_len)
        ]

    frames: list[FrameFeatures] = []
    for t in range(cfg.frames):
        segment = next(
            (s for s in cfg.anomaly_segments if s.start <= t <= s.end),
            None,
        )
        recurring_pos = None
        if cfg.recurring is not None:
            for occ, (a, b) in enumerate(cfg.recurring.intervals):
                if a <= t <= b:
                    recurring_pos = (occ, t - a)
                    break

        if recurring_pos is not None and cfg.recurring.exact_repeat:
            flow_raw = pattern_bank[recurring_pos[1]][0]
        else:
            flow_cluster = _pick_cluster(rng, cfg)
            flow_raw = flow_cluster.mean[:4] + rng.standard_normal(4) * flow_cluster.std[:4]
            if segment is not None and segment.kind == "motion_shift":
                flow_raw = flow_raw + segment.flow_offset
            if segment is not None and segment.kind == "cluster_shift":
                flow_raw = flow_raw + segment.offset[:4]
        flow = FlowStats(
            mean=float(flow_raw[0]),
            variance=float(max(flow_raw[1], 0.0)),
            skewness=float(flow_raw[2]),
            kurtosis=float(max(flow_raw[3], 0.0)),
        )

        if recurring_pos is not None:
            pos = recurring_pos[1]
            if cfg.recurring.exact_repeat:
                raw = pattern_bank[pos][1].copy()
            else:
                raw = _clip_parts(
                    _sample_raw(rng, cfg.recurring.cluster, cfg.recurring.objects_per_frame),
                    cfg.n_classes,
                )
        else:
            count = int(rng.poisson(cfg.object_rate))
            if count == 0:
                raw = np.empty((0, cfg.m), dtype=np.float64)
            elif segment is not None and segment.kind == "novel_cluster":
                raw = _clip_parts(_sample_raw(rng, segment.cluster, count), cfg.n_classes)
            else:
                rows = []
                for _ in range(count):
                    rows.append(_sample_raw(rng, _pick_cluster(rng, cfg), 1)[0])
                raw = np.vstack(rows)
                if segment is not None and segment.kind == "cluster_shift":
                    raw = raw + segment.offset
                raw = _clip_parts(raw, cfg.n_classes)

        objects = np.empty((raw.shape[0], cfg.m), dtype=np.float64)
        meta: list[ObjectMeta] = []
        for i in range(raw.shape[0]):
            loc = LocationFeatures(cx=float(raw[i, 4]), cy=float(raw[i, 5]), area=float(raw[i, 6]))
            probs = raw[i, 7:]
            objects[i] = assemble_feature(flow, loc, probs, cfg.weights)
            meta.append(ObjectMeta(probs=probs.copy(), loc=loc))
        frames.append(FrameFeatures(t=t, objects=objects, flow=flow, raw_meta=meta))

    intervals = sorted((s.start, s.end) for s in cfg.anomaly_segments)
    gt = GroundTruth(intervals=tuple(intervals))
    return frames, gt


# -- flow-field synthesis (moment-controllable magnitude fields) --------------


@dataclass(frozen=True)
class FlowFieldSpec:
    """Recipe for a synthetic flow-magnitude field with controllable moments."""

    shape: tuple
    distribution: str  # constant | uniform | normal | bimodal
    seed: int = 0
    level: float = 1.0            # constant
    low: float = 0.0              # uniform
    high: float = 1.0
    mean: float = 1.0             # normal / bimodal slow mode
    std: float = 0.15
    fast_fraction: float = 0.05   # bimodal fast mode (the "bike" subpopulation)
    fast_mean: float = 8.0
    fast_std: float = 0.5


def generate_flow_field(spec: FlowFieldSpec) -> np.ndarray:
    """Sample a 2-D magnitude field; mixing a fast subpopulation fattens the tail."""
    if len(spec.shape) != 2 or spec.shape[0] < 1 or spec.shape[1] < 1:
        raise InvalidInputError(f"flow field shape must be 2-D positive, got {spec.shape!r}")
    rng = np.random.default_rng(spec.seed)
    if spec.distribution == "constant":
        return np.full(spec.shape, float(spec.level))
    if spec.distribution == "uniform":
        return rng.uniform(spec.low, spec.high, spec.shape)
    if spec.distribution == "normal":
        return np.clip(rng.normal(spec.mean, spec.std, spec.shape), 0.0, None)
    if spec.distribution == "bimodal":
        field_arr = rng.normal(spec.mean, spec.std, spec.shape)
        fast = rng.random(spec.shape) < spec.fast_fraction
        field_arr[fast] = rng.normal(spec.fast_mean, spec.fast_std, int(fast.sum()))
        return np.clip(field_arr, 0.0, None)
    raise InvalidInputError(f"unknown flow-field distribution {spec.distribution!r}")


# -- canned scenarios ----------------------------------------------------------


def default_nominal_cluster(n_classes: int = 3) -> Cluster:
    """A single well-behaved nominal cluster at unit-ish scale."""
    mean = np.concatenate([
        [1.0, 0.5, 0.0, 3.0],          # flow moments
        [0.0, 0.0, 1.5],               # cx, cy, area
        np.linspace(0.7, 0.1, n_classes),
    ])
    std = np.concatenate([
        [0.15, 0.08, 0.10, 0.20],
        [0.30, 0.30, 0.20],
        np.full(n_classes, 0.04),
    ])
    return Cluster(mean=mean, cov_diag=std**2, weight=1.0)


def shifted_cluster(base: Cluster, shift_sigmas: float, dims: slice = slice(4, 7)) -> Cluster:
    """Copy of ``base`` displaced by ``shift_sigmas`` standard deviations on ``dims``."""
    mean = base.mean.copy()
    mean[dims] = mean[dims] + shift_sigmas * base.std[dims]
    return Cluster(mean=mean, cov_diag=base.cov_diag.copy(), weight=1.0)


def nominal_scenario(seed: int = 0, frames: int = 1200, n_classes: int = 3, object_rate: float = 1.5) -> ScenarioConfig:
    """Pure-nominal stream (used for training data and calibration checks)."""
    return ScenarioConfig(
        n_classes=n_classes,
        frames=frames,
        clusters=(default_nominal_cluster(n_classes),),
        object_rate=object_rate,
        rng_seed=seed,
    )


def anomaly_scenario(
    seed: int = 0,
    frames: int = 1500,
    n_classes: int = 3,
    segment: tuple = (900, 980),
    separation: float = 6.0,
    object_rate: float = 1.5,
) -> ScenarioConfig:
    """Nominal stream with one novel-cluster anomaly of tunable separation."""
    base = default_nominal_cluster(n_classes)
    novel = shifted_cluster(base, separation)
    return ScenarioConfig(
        n_classes=n_classes,
        frames=frames,
        clusters=(base,),
        object_rate=object_rate,
        anomaly_segments=(AnomalySegment(start=segment[0], end=segment[1], kind="novel_cluster", cluster=novel),),
        rng_seed=seed,
    )


def recurring_scenario(
    seed: int = 0,
    occurrences: int = 5,
    occ_len: int = 40,
    gap: int = 160,
    n_classes: int = 3,
    separation: float = 6.0,
    pattern_spread: float = 0.25,
    object_rate: float = 1.5,
) -> ScenarioConfig:
    """Recurring novel-but-nominal pattern for continual-learning experiments.

    The pattern cluster is displaced from the nominal cluster but tight
    (``pattern_spread`` scales its spread), so a handful of learned vectors
    covers later occurrences. Ground truth stays empty: every alarm on the
    pattern is a false alarm.
    """
    base = default_nominal_cluster(n_classes)
    pattern = Cluster(
        mean=shifted_cluster(base, separation).mean,
        cov_diag=(base.std * pattern_spread) ** 2,
        weight=1.0,
    )
    intervals = []
    start = gap
    for _ in range(occurrences):
        intervals.append((start, start + occ_len - 1))
        start += occ_len + gap
    frames = start + gap
    return ScenarioConfig(
        n_classes=n_classes,
        frames=frames,
        clusters=(base,),
        object_rate=object_rate,
        recurring=RecurringPattern(intervals=tuple(intervals), cluster=pattern),
        rng_seed=seed,
    )


def collect_objects(frames: list[FrameFeatures]) -> np.ndarray:
    """Stack every object vector in a stream into one (M, m) training matrix."""
    mats = [f.objects for f in frames if f.n_objects > 0]
    if not mats:
        raise InvalidInputError("stream contains no objects")
    return np.vstack(mats)
