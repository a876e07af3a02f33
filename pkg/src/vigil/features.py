"""Feature-space definitions: per-object vectors and flow-field moment statistics.

An object detected in a frame is described by three weighted blocks, laid out
in a fixed order inside one flat vector of dimension ``m = n_classes + 7``:

    [w1*mean, w1*variance, w1*skewness, w1*kurtosis,   # motion (4)
     w2*cx, w2*cy, w2*area,                            # location (3)
     w3*p_1, ..., w3*p_n]                              # appearance (n)

Everything here is pure and stateless; feature vectors are plain float64
numpy arrays so the rest of the engine can treat them as points in R^m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .errors import InvalidInputError

# Number of non-appearance dimensions: 4 motion moments + 3 location values.
FIXED_DIMS = 7

# Indices of the motion/location blocks within an assembled vector.
MOTION_SLICE = slice(0, 4)
LOCATION_SLICE = slice(4, 7)
APPEARANCE_START = 7


@dataclass(frozen=True)
class FlowStats:
    """Moment summary of a frame's optical-flow magnitude field.

    ``variance`` is the population variance (divide by N: the field is the
    whole pixel population, not a sample). ``kurtosis`` is the standardized
    fourth moment E[(x-mu)^4]/sigma^4 without the -3 excess correction, so a
    Gaussian field sits near 3. A constant field (sigma = 0) reports
    skewness = kurtosis = 0 to keep downstream vectors finite.
    """

    mean: float
    variance: float
    skewness: float
    kurtosis: float

    def __post_init__(self):
        for name in ("mean", "variance", "skewness", "kurtosis"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"FlowStats.{name} must be finite, got {v!r}")
        if self.variance < 0:
            raise InvalidInputError(f"variance must be >= 0, got {self.variance!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mean, self.variance, self.skewness, self.kurtosis], dtype=np.float64)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box with x2 > x1 and y2 > y1."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"bounding box coordinates must be finite, got {vals!r}")
        if self.x2 <= self.x1 or self.y2 <= self.y1:
            raise InvalidInputError(
                f"degenerate bounding box: need x2 > x1 and y2 > y1, got {vals!r}"
            )


@dataclass(frozen=True)
class LocationFeatures:
    """Box center and area as monitored location features."""

    cx: float
    cy: float
    area: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.cx, self.cy, self.area)):
            raise InvalidInputError("location features must be finite")
        if self.area <= 0:
            raise InvalidInputError(f"area must be > 0, got {self.area!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.area], dtype=np.float64)


@dataclass(frozen=True)
class FeatureWeights:
    """Relative importance of the motion / location / appearance blocks."""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0

    def __post_init__(self):
        ws = (self.w1, self.w2, self.w3)
        if not all(math.isfinite(w) and w >= 0 for w in ws):
            raise InvalidInputError(f"weights must be finite and >= 0, got {ws!r}")
        if all(w == 0 for w in ws):
            raise InvalidInputError("at least one weight must be non-zero")


@dataclass
class ObjectMeta:
    """Raw per-object detector output retained for audit and re-serialization."""

    probs: np.ndarray
    bbox: BoundingBox | None = None
    loc: LocationFeatures | None = None

    def location(self) -> LocationFeatures:
        if self.loc is not None:
            return self.loc
        assert self.bbox is not None
        return bbox_to_location(self.bbox)


@dataclass
class FrameFeatures:
    """All feature vectors for one frame plus the frame's flow statistics.

    ``objects`` is an (n_objects, m) float64 array; zero-object frames carry
    an empty (0, m) array. ``raw_meta`` optionally keeps the unweighted
    detector outputs so a parsed stream can be re-serialized losslessly.
    """

    t: int
    objects: np.ndarray
    flow: FlowStats
    raw_meta: list[ObjectMeta] | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return int(self.objects.shape[1])

    @property
    def n_objects(self) -> int:
        return int(self.objects.shape[0])


def compute_flow_stats(flow_field) -> FlowStats:
    """Compute mean, population variance, skewness, and (non-excess) kurtosis.

    Args:
        flow_field: array-like of flow magnitudes; any shape, at least one entry.

    Raises:
        InvalidInputError: empty field or any non-finite entry.
    """
    arr = np.asarray(flow_field, dtype=np.float64)
    if arr.size == 0:
        raise InvalidInputError("flow field is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("flow field contains non-finite entries")

    mean = float(arr.mean())
    dev = arr - mean
    variance = float(np.mean(dev * dev))
    if variance == 0.0:
        # Degenerate constant field: define higher moments as 0 rather than 0/0.
        return FlowStats(mean=mean, variance=0.0, skewness=0.0, kurtosis=0.0)
    sigma = math.sqrt(variance)
    skewness = float(np.mean(dev**3)) / sigma**3
    kurtosis = float(np.mean(dev**4)) / (variance * variance)
    return FlowStats(mean=mean, variance=variance, skewness=skewness, kurtosis=kurtosis)


def bbox_to_location(box: BoundingBox) -> LocationFeatures:
    """Reduce a bounding box to its center coordinates and area."""
    return LocationFeatures(
        cx=(box.x1 + box.x2) / 2.0,
        cy=(box.y1 + box.y2) / 2.0,
        area=(box.x2 - box.x1) * (box.y2 - box.y1),
    )


def validate_class_probs(probs) -> np.ndarray:
    """Check per-class confidences are finite and within [0, 1]; return float64 array.

    Confidences need not sum to 1: detectors emit independent per-class
    scores, so only the range is enforced.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError(f"class probabilities must be a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("class probabilities contain non-finite entries")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidInputError("class probabilities must lie in [0, 1]")
    return p


def assemble_feature(
    flow: FlowStats,
    loc: LocationFeatures,
    probs,
    weights: FeatureWeights = FeatureWeights(),
) -> np.ndarray:
    """Assemble one object's flat feature vector of dimension n + 7.

    Layout: motion moments scaled by w1, then location by w2, then class
    probabilities by w3. Deterministic and linear in each weight.
    """
    p = validate_class_probs(probs)
    out = np.empty(FIXED_DIMS + p.size, dtype=np.float64)
    out[MOTION_SLICE] = weights.w1 * flow.as_array()
    out[LOCATION_SLICE] = weights.w2 * loc.as_array()
    out[APPEARANCE_START:] = weights.w3 * p
    if not np.all(np.isfinite(out)):
        raise InvalidInputError("assembled feature vector contains non-finite entries")
    return out


def feature_dim(n_classes: int) -> int:
    """Vector dimension for a detector with ``n_classes`` classes."""
    if n_classes < 1:
        raise InvalidInputError(f"n_classes must be >= 1, got {n_classes}")
    return n_classes + FIXED_DIMS


def split_feature(vector: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split an assembled vector back into its (motion, location, appearance) blocks."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.size <= FIXED_DIMS:
        raise InvalidInputError(f"feature vector must have dimension > {FIXED_DIMS}, got shape {v.shape}")
    return v[MOTION_SLICE], v[LOCATION_SLICE], v[APPEARANCE_START:]
