"""Nominal reference store: training, exact kNN queries, and incremental growth.

Training randomly splits the nominal vectors into a calibration part and a
reference part, records each calibration point's kth-nearest Euclidean
distance into the reference, and fixes the decision baseline ``d_alpha`` as
the (1-alpha) nearest-rank percentile of those distances. Queries return the
exact kth-nearest distance (never approximate); inserts append vectors
without touching the calibration, so growing the model is O(batch) instead
of a retrain.

Distance semantics: the squared Euclidean distance between two vectors is
accumulated left-to-right over dimensions in float64. Every query path uses
this exact order, which makes results reproducible bit-for-bit and lets
tests compare against independent implementations of the same recipe.
Only oversized training batches (see ``_GEMM_THRESHOLD``) switch to a
BLAS-based expansion where a ~1 ulp difference is immaterial.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import threading
import time
import zipfile
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import InvalidInputError, ModelFormatError, TrainingError

MODEL_FORMAT = "vigil-model"
MODEL_VERSION = 1

# Above this many pair-dimension products, batch training distances go
# through the matmul expansion instead of the exact kernel (memory-bandwidth
# bound otherwise; only reached by bulk-retrain benchmarks).
_GEMM_THRESHOLD = 5e9


@njit(cache=True, parallel=True)
def _sqdist_kernel(ref, queries, out):
    # out[qi, i] = sum_j (ref[i,j] - queries[qi,j])^2, accumulated in j order.
    n, m = ref.shape
    nq = queries.shape[0]
    for i in prange(n):
        for qi in range(nq):
            acc = 0.0
            for j in range(m):
                d = ref[i, j] - queries[qi, j]
                acc += d * d
            out[qi, i] = acc


def _kth_from_sq(sq: np.ndarray, k: int) -> np.ndarray:
    """kth smallest sqrt-distance per row of a squared-distance matrix."""
    part = np.partition(sq, k - 1, axis=1)[:, k - 1]
    return np.sqrt(part)


def _kth_distances_exact(ref: np.ndarray, queries: np.ndarray, k: int, chunk: int = 256) -> np.ndarray:
    out = np.empty(queries.shape[0], dtype=np.float64)
    buf = np.empty((min(chunk, queries.shape[0]), ref.shape[0]), dtype=np.float64)
    for lo in range(0, queries.shape[0], chunk):
        q = queries[lo : lo + chunk]
        sq = buf[: q.shape[0]]
        _sqdist_kernel(ref, q, sq)
        out[lo : lo + chunk] = _kth_from_sq(sq, k)
    return out


def _kth_distances_gemm(ref: np.ndarray, queries: np.ndarray, k: int, chunk: int = 256) -> np.ndarray:
    rr = np.einsum("ij,ij->i", ref, ref)
    out = np.empty(queries.shape[0], dtype=np.float64)
    for lo in range(0, queries.shape[0], chunk):
        q = queries[lo : lo + chunk]
        sq = q @ ref.T
        sq *= -2.0
        sq += rr[None, :]
        sq += np.einsum("ij,ij->i", q, q)[:, None]
        np.maximum(sq, 0.0, out=sq)  # expansion can go slightly negative
        out[lo : lo + chunk] = _kth_from_sq(sq, k)
    return out


def kth_nn_distances(ref: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Exact kth-nearest Euclidean distance from each query into ``ref``.

    Switches to the matmul expansion only for very large batch jobs.
    """
    if ref.shape[0] < k:
        raise InvalidInputError(f"reference holds {ref.shape[0]} vectors, need at least k={k}")
    work = float(ref.shape[0]) * queries.shape[0] * ref.shape[1]
    if work > _GEMM_THRESHOLD:
        return _kth_distances_gemm(ref, queries, k)
    return _kth_distances_exact(ref, queries, k)


def _nearest_rank_index(n: int, alpha: float) -> int:
    """1-based nearest-rank index of the (1-alpha) percentile among n values."""
    x = (1.0 - alpha) * n
    r = math.ceil(x - 1e-9 * max(1.0, abs(x)))
    return min(max(r, 1), n)


def nearest_rank_percentile(sorted_values: np.ndarray, alpha: float) -> float:
    """(1-alpha) nearest-rank percentile of an ascending-sorted array."""
    if sorted_values.size == 0:
        raise InvalidInputError("cannot take a percentile of an empty set")
    return float(sorted_values[_nearest_rank_index(sorted_values.size, alpha) - 1])


@dataclass(frozen=True)
class FeatureScaler:
    """Optional per-dimension min-max normalization fitted on the training set.

    Dimensions with zero range map to 0 so they contribute nothing to
    distances. Off by default; persisted with the model when fitted.
    """

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "FeatureScaler":
        return cls(lo=X.min(axis=0), hi=X.max(axis=0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        inv = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 0.0)
        return (X - self.lo) * inv


@dataclass(frozen=True)
class TrainConfig:
    k: int = 3
    alpha: float = 0.05
    split_fraction: float = 0.2  # fraction of training vectors used for calibration
    rng_seed: int = 0
    max_reference_size: int | None = None
    normalize: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.split_fraction < 1.0:
            raise InvalidInputError(f"split_fraction must be in (0, 1), got {self.split_fraction}")
        if self.max_reference_size is not None and self.max_reference_size < 1:
            raise InvalidInputError("max_reference_size must be >= 1 when set")


def _as_matrix(vectors, m: int | None = None) -> np.ndarray:
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InvalidInputError(f"expected a (count, m) matrix of vectors, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("vectors contain non-finite entries")
    if m is not None and X.shape[1] != m:
        raise InvalidInputError(f"dimension mismatch: expected m={m}, got {X.shape[1]}")
    return np.ascontiguousarray(X)


class NominalModel:
    """Reference set plus calibration state; safe for many readers, one writer.

    Queries snapshot the reference atomically, so a concurrent batch insert
    is either entirely visible or entirely invisible to any given query.
    """

    def __init__(
        self,
        reference: np.ndarray,
        calib_distances: np.ndarray,
        k: int,
        alpha: float,
        max_reference_size: int | None = None,
        scaler: FeatureScaler | None = None,
        created_at: float | None = None,
        updated_at: float | None = None,
        insert_count: int = 0,
    ):
        ref = _as_matrix(reference)
        if ref.shape[0] < k:
            raise InvalidInputError(f"reference smaller than k: {ref.shape[0]} < {k}")
        self.k = int(k)
        self.alpha = float(alpha)
        self.m = int(ref.shape[1])
        self.max_reference_size = max_reference_size
        self.scaler = scaler
        self.calib_distances = np.sort(np.asarray(calib_distances, dtype=np.float64))
        if self.calib_distances.size == 0 or np.any(self.calib_distances < 0):
            raise InvalidInputError("calibration distances must be a non-empty set of non-negative reals")
        self.d_alpha = nearest_rank_percentile(self.calib_distances, self.alpha)
        now = time.time()
        self.created_at = created_at if created_at is not None else now
        self.updated_at = updated_at if updated_at is not None else now
        self.insert_count = int(insert_count)
        self._write_lock = threading.Lock()
        # Snapshot tuple (buffer, row_count); swapped atomically on insert.
        self._snap = (ref, ref.shape[0])
        self._apply_cap()

    # -- read side -----------------------------------------------------------

    @property
    def reference_size(self) -> int:
        return self._snap[1]

    @property
    def reference(self) -> np.ndarray:
        buf, n = self._snap
        view = buf[:n]
        view.flags.writeable = False
        return view

    def _prepare_queries(self, queries) -> np.ndarray:
        Q = _as_matrix(queries, m=self.m)
        if self.scaler is not None:
            Q = np.ascontiguousarray(self.scaler.transform(Q))
        return Q

    def knn_distances(self, queries) -> np.ndarray:
        """Exact kth-nearest Euclidean distances for a batch of query vectors."""
        Q = self._prepare_queries(queries)
        buf, n = self._snap
        return kth_nn_distances(buf[:n], Q, self.k)

    def knn_distance(self, query) -> float:
        """Exact kth-nearest Euclidean distance for one query vector."""
        return float(self.knn_distances(np.asarray(query, dtype=np.float64)[None, :])[0])

    # -- write side ----------------------------------------------------------

    def insert(self, vectors) -> "NominalModel":
        """Append vectors to the reference set; calibration stays untouched.

        The decision baseline intentionally does not move on insert;
        recalibration is a separate, explicit operation.
        """
        vs = _as_matrix(vectors, m=self.m)
        if self.scaler is not None:
            vs = np.ascontiguousarray(self.scaler.transform(vs))
        with self._write_lock:
            buf, n = self._snap
            b = vs.shape[0]
            if n + b <= buf.shape[0]:
                buf[n : n + b] = vs
                self._snap = (buf, n + b)
            else:
                cap = max(2 * buf.shape[0], n + b)
                grown = np.empty((cap, self.m), dtype=np.float64)
                grown[:n] = buf[:n]
                grown[n : n + b] = vs
                self._snap = (grown, n + b)
            self._apply_cap()
            self.insert_count += b
            self.updated_at = time.time()
        return self

    def _apply_cap(self):
        # FIFO eviction: keep the most recently inserted rows.
        cap = self.max_reference_size
        if cap is None:
            return
        buf, n = self._snap
        if n > cap:
            kept = np.ascontiguousarray(buf[n - cap : n])
            self._snap = (kept, cap)

    def recalibrate(self, calib_vectors, alpha: float | None = None) -> "NominalModel":
        """Recompute calibration distances against the current reference.

        The paper-faithful update rule never moves ``d_alpha``; this is the
        explicit operator lever for after large continual updates.
        """
        calib = _as_matrix(calib_vectors, m=self.m)
        if self.scaler is not None:
            calib = np.ascontiguousarray(self.scaler.transform(calib))
        a = self.alpha if alpha is None else float(alpha)
        if not 0.0 < a < 1.0:
            raise InvalidInputError(f"alpha must be in (0, 1), got {a}")
        with self._write_lock:
            buf, n = self._snap
            d = kth_nn_distances(buf[:n], calib, self.k)
            self.calib_distances = np.sort(d)
            self.alpha = a
            self.d_alpha = nearest_rank_percentile(self.calib_distances, a)
            self.updated_at = time.time()
        return self

    # -- persistence ---------------------------------------------------------

    def save(self) -> bytes:
        buf = io.BytesIO()
        self.save_to(buf)
        return buf.getvalue()

    def save_to(self, file) -> None:
        meta = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "k": self.k,
            "alpha": self.alpha,
            "m": self.m,
            "d_alpha": self.d_alpha,
            "max_reference_size": self.max_reference_size,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "insert_count": self.insert_count,
            "normalized": self.scaler is not None,
        }
        arrays = {
            "meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
            "reference": self.reference,
            "calib_distances": self.calib_distances,
        }
        if self.scaler is not None:
            arrays["scaler_lo"] = self.scaler.lo
            arrays["scaler_hi"] = self.scaler.hi
        np.savez(file, **arrays)

    @classmethod
    def load(cls, data: bytes) -> "NominalModel":
        if not data:
            raise ModelFormatError("empty model payload")
        return cls.load_from(io.BytesIO(data))

    @classmethod
    def load_from(cls, file) -> "NominalModel":
        try:
            with np.load(file) as z:
                meta = json.loads(bytes(z["meta"]).decode("utf-8"))
                reference = z["reference"]
                calib = z["calib_distances"]
                scaler = None
                if meta.get("normalized"):
                    scaler = FeatureScaler(lo=z["scaler_lo"], hi=z["scaler_hi"])
        except (zipfile.BadZipFile, OSError, KeyError, ValueError, json.JSONDecodeError) as e:
            raise ModelFormatError(f"cannot read model payload: {e}") from e
        if meta.get("format") != MODEL_FORMAT:
            raise ModelFormatError(f"not a {MODEL_FORMAT} payload")
        if meta.get("version") != MODEL_VERSION:
            raise ModelFormatError(
                f"unsupported model version {meta.get('version')!r}, expected {MODEL_VERSION}"
            )
        model = cls(
            reference=reference,
            calib_distances=calib,
            k=meta["k"],
            alpha=meta["alpha"],
            max_reference_size=meta.get("max_reference_size"),
            scaler=scaler,
            created_at=meta["created_at"],
            updated_at=meta["updated_at"],
            insert_count=meta.get("insert_count", 0),
        )
        if not math.isclose(model.d_alpha, meta["d_alpha"], rel_tol=0, abs_tol=0):
            raise ModelFormatError("stored d_alpha does not match calibration distances")
        return model

    @classmethod
    def load_path(cls, path) -> "NominalModel":
        with open(path, "rb") as f:
            return cls.load(f.read())

    def save_path(self, path) -> None:
        with open(path, "wb") as f:
            self.save_to(f)

    def state_digest(self) -> str:
        """Content hash of everything that defines behavior (timestamps excluded)."""
        h = hashlib.sha256()
        h.update(json.dumps([self.k, repr(self.alpha), self.m, repr(self.d_alpha), self.insert_count]).encode())
        h.update(self.reference.tobytes())
        h.update(self.calib_distances.tobytes())
        if self.scaler is not None:
            h.update(self.scaler.lo.tobytes())
            h.update(self.scaler.hi.tobytes())
        return h.hexdigest()

    def summary(self) -> dict:
        return {
            "reference_size": self.reference_size,
            "calibration_size": int(self.calib_distances.size),
            "k": self.k,
            "alpha": self.alpha,
            "m": self.m,
            "d_alpha": self.d_alpha,
            "insert_count": self.insert_count,
            "normalized": self.scaler is not None,
        }


def train(vectors, cfg: TrainConfig = TrainConfig()) -> NominalModel:
    """Build a NominalModel from nominal feature vectors.

    Partitions the vectors uniformly at random (seeded) into calibration and
    reference parts, computes each calibration point's kth-NN distance into
    the reference, and fixes d_alpha at the (1-alpha) nearest-rank
    percentile. Deterministic for a fixed ``cfg.rng_seed``.

    Raises:
        TrainingError: fewer than 2 vectors, or the split leaves fewer than
            k reference vectors.
    """
    X = _as_matrix(vectors)
    M = X.shape[0]
    if M < 2:
        raise TrainingError(f"need at least 2 training vectors, got {M}")
    M1 = int(round(cfg.split_fraction * M))
    M1 = min(max(M1, 1), M - 1)
    M2 = M - M1
    if M2 < cfg.k:
        raise TrainingError(
            f"reference split too small: M2={M2} < k={cfg.k} (M={M}, split_fraction={cfg.split_fraction})"
        )
    scaler = FeatureScaler.fit(X) if cfg.normalize else None
    Xs = np.ascontiguousarray(scaler.transform(X)) if scaler is not None else X
    rng = np.random.default_rng(cfg.rng_seed)
    perm = rng.permutation(M)
    calib_part = Xs[perm[:M1]]
    reference = np.ascontiguousarray(Xs[perm[M1:]])
    distances = kth_nn_distances(reference, np.ascontiguousarray(calib_part), cfg.k)
    # The model stores the reference in scaled space and scales queries on entry.
    return NominalModel(
        reference=reference,
        calib_distances=distances,
        k=cfg.k,
        alpha=cfg.alpha,
        max_reference_size=cfg.max_reference_size,
        scaler=scaler,
    )
