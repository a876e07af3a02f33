"""
Why accumulate evidence: sequential vs single-shot decisions
============================================================

The single-shot rule flags any frame whose instantaneous evidence is positive
(largest distance beyond the baseline). By construction about 5% of nominal
frames do that, scattering false events everywhere. The sequential statistic
integrates the same evidence over time; isolated noise drains away while a
persistent anomaly still ramps straight through the threshold.
"""

from vigil.experiments import sequential_vs_single_shot

print("same scenario, same model, matched per-segment detection power\n")
print(f"{'seed':>4} {'h':>10} {'single-shot false events':>25} {'sequential false events':>24}")
for seed in range(5):
    r = sequential_vs_single_shot(seed=seed)
    assert r.sequential_detected >= 1 and r.single_shot_detected >= 1
    print(f"{seed:>4} {r.h:>10.4g} {r.single_shot_false_events:>25} {r.sequential_false_events:>24}")

print(
    "\nboth rules catch the injected anomaly in every run; the sequential statistic"
    "\npays one or two orders of magnitude fewer false events for it"
)
