"""
The live review loop over HTTP
==============================

Boots the actual service in-process, streams frames at it, lets an alarm
close, labels it false through the endpoint, and replays the segment to show
the model stopped alarming. The append-only journal then rebuilds the final
model from the initial one, byte for byte.
"""

import json
import tempfile
import threading
import time
import urllib.request
from pathlib import Path

import uvicorn

from vigil import DetectorConfig, Engine, Journal, NominalModel, TrainConfig, train, UpdatePolicy
from vigil.ingest import frame_to_record
from vigil.service import create_app
from vigil.simgen import anomaly_scenario, collect_objects, generate, nominal_scenario

PORT = 8499
BASE = f"http://127.0.0.1:{PORT}"
work = Path(tempfile.mkdtemp(prefix="vigil-demo-"))


def call(method, path, payload=None):
    data = None if payload is None else json.dumps(payload).encode()
    req = urllib.request.Request(BASE + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


# train a model and persist the starting point
train_frames, _ = generate(nominal_scenario(seed=40, frames=1200))
model = train(collect_objects(train_frames), TrainConfig(k=1, alpha=0.05, rng_seed=0))
initial_blob = model.save()

journal_path = work / "journal.ndjson"
engine = Engine(model, DetectorConfig(h=10.0), policy=UpdatePolicy(auto_insert_on_zero=False),
                journal=Journal(journal_path))
server = uvicorn.Server(uvicorn.Config(create_app(engine), host="127.0.0.1", port=PORT, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
print(f"service up at {BASE}, journal at {journal_path}\n")

# stream a scenario with one anomaly; the camera side is just POSTing JSON
frames, _ = generate(anomaly_scenario(seed=41, frames=900, segment=(500, 560), separation=6.0))
records = [frame_to_record(f) for f in frames]
closed = []
for lo in range(0, len(records), 128):
    resp = call("POST", "/streams/cam0/frames", {"frames": records[lo:lo + 128]})
    closed += resp["alarms_closed"]
call("POST", "/streams/cam0/finalize")
print(f"streamed {len(records)} frames, alarms closed: {[a['id'] for a in closed]}")

alarm = closed[0]
detail = call("GET", f"/alarms/{alarm['id']}")
stats = call("GET", "/stats")
print(f"alarm {alarm['id']}: frames [{alarm['tau_start']}, {alarm['tau_end']}], "
      f"{detail['segment_vector_count']} segment vectors stored")
print(f"reference size before labeling: {stats['reference_size']}")

# the reviewer says it was harmless; the model learns the whole segment
result = call("POST", f"/alarms/{alarm['id']}/label",
              {"verdict": "false_alarm", "sample_fraction": 1.0, "request_id": "demo-1"})
print(f"labeled false alarm: +{result['inserted']} vectors -> reference {result['reference_size']}")

# the same segment, replayed on a fresh stream, now stays silent
segment = [r for r in records if alarm["tau_start"] <= r["t"] <= alarm["tau_end"]]
replay = call("POST", "/streams/cam1/frames", {"frames": segment})
peak = max(r["s"] for r in replay["results"])
print(f"replayed the segment on a new stream: peak statistic {peak} (was {alarm['peak_statistic']:.3g})")

# journal + initial model == live model
rebuilt = Journal.replay(journal_path, NominalModel.load(initial_blob))
live_digest = call("GET", "/stats")["state_digest"]
print(f"journal replay digest match: {rebuilt.state_digest() == live_digest}")

server.should_exit = True
thread.join(timeout=5)
print("service stopped")
