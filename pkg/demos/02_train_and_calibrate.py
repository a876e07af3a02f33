"""
Training the nominal model
==========================

The model is nothing more than a reference set of nominal feature vectors
plus one calibrated number: d_alpha, the (1-alpha) percentile of kth-nearest
distances measured on a held-out calibration split. Everything downstream
(evidence signs, alarm thresholds) hangs off that single baseline.
"""

import numpy as np

from vigil import TrainConfig, train
from vigil.simgen import collect_objects, generate, nominal_scenario

# two independent draws from the same world: one to train, one to test
train_frames, _ = generate(nominal_scenario(seed=10, frames=3000))
fresh_frames, _ = generate(nominal_scenario(seed=11, frames=3000))

X = collect_objects(train_frames)
print(f"training vectors: {X.shape[0]} objects in R^{X.shape[1]}")

cfg = TrainConfig(k=3, alpha=0.05, split_fraction=0.2, rng_seed=0)
model = train(X, cfg)
s = model.summary()
print(f"split: M1={s['calibration_size']} calibration, M2={s['reference_size']} reference")
print(f"d_alpha = {model.d_alpha:.4f}  (alpha={model.alpha}, k={model.k})")

# the calibration promise: at most alpha of calibration distances exceed d_alpha,
# and a fresh nominal sample exceeds it at roughly the same rate
calib_rate = float(np.mean(model.calib_distances > model.d_alpha))
fresh = collect_objects(fresh_frames)
fresh_rate = float(np.mean(model.knn_distances(fresh) > model.d_alpha))
print(f"exceedance on calibration split: {calib_rate:.3f}  (<= {model.alpha})")
print(f"exceedance on fresh nominal data: {fresh_rate:.3f}  (~ {model.alpha})")

# persistence round-trips exactly: same distances before and after
blob = model.save()
from vigil import NominalModel

restored = NominalModel.load(blob)
probe = fresh[:5]
assert np.array_equal(model.knn_distances(probe), restored.knn_distances(probe))
print(f"model serialized to {len(blob)} bytes and restored, queries identical")

# growing the model is an append, not a retrain
before = model.reference_size
model.insert(fresh[:100])
print(f"inserted 100 vectors: reference {before} -> {model.reference_size}, d_alpha untouched ({model.d_alpha:.4f})")
