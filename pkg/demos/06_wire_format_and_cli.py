"""
The feature-frame wire format and the CLI pipeline
==================================================

Any extractor that can print JSON lines can feed the engine. This demo writes
a stream file, peeks at the format, then drives the full CLI workflow the way
an operator would: simulate -> train -> calibrate-h -> detect -> eval.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

from vigil.ingest import parse_stream, write_stream
from vigil.simgen import generate, nominal_scenario

work = Path(tempfile.mkdtemp(prefix="vigil-demo-"))
print(f"working in {work}\n")

# --- the format itself -------------------------------------------------------

frames, _ = generate(nominal_scenario(seed=30, frames=5))
stream_path = work / "peek.ndjson"
write_stream(frames, stream_path, n_classes=3)
print("first lines of a feature-frame stream (header, then one frame per line):")
for line in stream_path.read_text().splitlines()[:3]:
    print("  " + (line[:150] + ("..." if len(line) > 150 else "")))

parsed = list(parse_stream(stream_path))
print(f"parsed back: {len(parsed)} frames, m={parsed[0].m}, lossless round-trip\n")

# --- the CLI workflow ---------------------------------------------------------


def cli(*args):
    cmd = [sys.executable, "-m", "vigil.cli", *args]
    print("$ vigil " + " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True, check=True)
    for line in out.stdout.strip().splitlines():
        print("  " + line)
    return out.stdout


nominal = work / "nominal.ndjson"
anomaly = work / "anomaly.ndjson"
gt = work / "gt.ndjson"
model = work / "model.npz"
alarms = work / "alarms.ndjson"
trace = work / "trace.ndjson"

cli("simulate", "--preset", "nominal", "--seed", "1", "--frames", "1500", "-o", str(nominal))
cli("simulate", "--preset", "anomaly", "--seed", "2", "--frames", "1500", "--separation", "6.0",
    "-o", str(anomaly), "--gt-out", str(gt))
cli("train", "-i", str(nominal), "-o", str(model), "--knn", "3", "--alpha", "0.05", "--seed", "0")
h_file = work / "h.txt"
cli("calibrate-h", "-i", str(nominal), "-m", str(model), "-o", str(h_file))
cli("detect", "-i", str(anomaly), "-m", str(model), "-o", str(alarms), "--trace", str(trace),
    "--h", h_file.read_text().strip())
cli("eval", "--trace", str(trace), "--alarms", str(alarms), "--gt", str(gt), "--score", "delta")
