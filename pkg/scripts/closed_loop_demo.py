#!/usr/bin/env python3
"""Serve a data root, fire synthetic thumbnail traffic, analyze the log.

Demonstrates the full usage-analytics loop on whatever datasets exist in the
data root (build one with make_demo_data.py first):

    python3 scripts/closed_loop_demo.py demo-data
"""

import json
import random
import sys
import threading
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from plumewatch.config import ServiceConfig
from plumewatch.server import serve
from plumewatch.storage import DataStore
from plumewatch.thumbnails import ThumbnailSpec, encode_url
from plumewatch.timelapse import load_dataset
from plumewatch.usage import run_analysis


def main() -> int:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-data")
    store = DataStore(root)
    dataset_ids = store.list_datasets()
    if not dataset_ids:
        print(f"no datasets under {root}; run make_demo_data.py first", file=sys.stderr)
        return 1

    log_path = root / "demo-closed-loop.log"
    if log_path.exists():
        log_path.unlink()
    config = ServiceConfig(
        listen_port=0, data_root=root, log_path=log_path,
        thumbnail_rate_limit=0.0, trust_forwarded_for=True,
        exclude_cidrs=("10.0.0.0/8",),
    )
    server = serve(config)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_port}"
    print(f"serving on {base}")

    rng = random.Random(7)
    ips = ["203.0.113.5", "198.51.100.7", "192.0.2.9", "10.1.2.3"]  # last is excluded
    datasets = {ds: load_dataset(store, ds) for ds in dataset_ids}
    sent = 0
    for _ in range(120):
        ds = datasets[rng.choice(dataset_ids)]
        left = rng.randrange(0, ds.frame_width - 40)
        top = rng.randrange(0, ds.frame_height - 30)
        spec = ThumbnailSpec(
            ds.id, (left, top, left + 40, top + 30), 20, 15,
            rng.randrange(0, max(1, ds.frame_count - 4)), rng.randrange(1, 4), 12,
            "gif", rng.choice(["human", "algorithm"]),
        )
        headers = {"X-Forwarded-For": rng.choice(ips)}
        if rng.random() < 0.25:
            req = urllib.request.Request(
                f"{base}/api/thumbnail", data=json.dumps(spec.to_json()).encode(),
                method="POST", headers=headers,
            )
        else:
            req = urllib.request.Request(base + encode_url(spec), headers=headers)
        with urllib.request.urlopen(req) as resp:
            assert resp.status == 200
        sent += 1
    server.shutdown()
    server.server_close()
    print(f"sent {sent} requests; log at {log_path}")

    dataset_dates = {ds: d.capture_date for ds, d in datasets.items()}
    result = run_analysis(
        log_path.read_text().splitlines(), config.exclude_cidrs, dataset_dates,
        tz=config.study_tz,
    )
    print(json.dumps(result.summary.to_json(), indent=2))
    print("user vectors:")
    for vector in result.vectors:
        print(f"  {vector.ip}: {vector.components()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
