"""The HTTP service: the same loop a web client would drive.

A completed run is prepared on disk, the FastAPI app is mounted in-process,
and the stakeholder loop runs over plain JSON: browse runs, inspect
attribution ranges, post a preference, poll the search job, fetch the result.

Run:  python3 demos/04_service_walkthrough.py
"""

import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from exagree import pipeline as pl
from exagree.service import create_app

root = Path(tempfile.mkdtemp(prefix="exagree-demo-"))
manifest = pl.stage_synth(root / "demo-run", n=1000, p=5, seed=1)
pl.stage_train_ref(manifest, "logistic")
pl.stage_sample(manifest, epsilon=0.05, n_samples=120, seed=0)
pl.stage_dman(manifest, lr=1e-3, epochs=1200, seed=0)
print(f"prepared run at {manifest.run_dir}\n")

client = TestClient(create_app(root))

runs = client.get("/v1/runs").json()["runs"]
print("GET /v1/runs              ->", [r["run_id"] for r in runs])
run_id = runs[0]["run_id"]

features = client.get(f"/v1/runs/{run_id}/features").json()["features"]
print("GET .../features          ->", [f["name"] for f in features])

ranges = client.get(f"/v1/runs/{run_id}/attribution-ranges").json()["ranges"]
print("GET .../attribution-ranges->",
      [f"{r['feature']}:[{r['min']:.3f},{r['max']:.3f}]" for r in ranges[:3]],
      "...")

# Invalid preference text comes back as a structured 400, not a crash.
bad = client.post(f"/v1/runs/{run_id}/targets",
                  json={"target_id": "bad", "text": "gauss_9 > gauss_0"})
print(f"\nPOST bad target           -> {bad.status_code} "
      f"{bad.json()['message']}")

created = client.post(f"/v1/runs/{run_id}/targets",
                      json={"target_id": "demo",
                            "text": "rank: gauss_1, gauss_0, gauss_2, "
                                    "gauss_3, gauss_4"})
print(f"POST good target          -> {created.status_code} "
      f"compiled {created.json()['compiled_target']['ranking']}")

job = client.post(f"/v1/runs/{run_id}/targets/demo/search",
                  json={"heads": 8, "epochs": 25}).json()
print(f"POST .../search           -> job {job['job_id']}")

while True:
    status = client.get(f"/v1/jobs/{job['job_id']}").json()
    if status["status"] in ("done", "failed"):
        break
    time.sleep(0.2)
print(f"GET /v1/jobs/...          -> {status['status']}")

result = client.get(f"/v1/runs/{run_id}/targets/demo/result").json()
print(f"\nspearman vs target: reference {result['reference_spearman']:.3f}"
      f" -> SAEM {result['spearman_vs_target']:.3f}")
print("agreement at k=0.5:", result["agreement"]["0.5"])
