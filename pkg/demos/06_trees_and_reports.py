"""
Decoding trees and benchmark reports
====================================

Two introspection surfaces: a per-decode hypothesis tree recording every
expansion, pruning, and completion; and a manifest runner that replays a
benchmark configuration into a JSON + text report pair.
"""
import json
from importlib import resources
from pathlib import Path
from tempfile import TemporaryDirectory

from sketchdec import bench
from sketchdec.decoders import DecoderConfig, decode
from sketchdec.tasks import fig1

## Ask the decoder to keep its search tree
result = decode(
    fig1.fig1_sketch(),
    fig1.fig1_backend(),
    DecoderConfig(kind="beamvar", width=2, record_tree=True),
)
lines = result.tree.to_ndjson().splitlines()
print(f"decode explored {len(lines)} nodes; the first few:")
for line in lines[:5]:
    node = json.loads(line)
    print(
        f"  #{node['id']:<3} parent={node['parent']}"
        f" token={node['token_text']!r} status={node['status']}"
    )

## Node statuses summarize the search
from collections import Counter

statuses = Counter(json.loads(line)["status"] for line in lines)
print("status counts:", dict(statuses))

## The bundled manifest drives every benchmark task
manifest = resources.files("sketchdec.data") / "bench_manifest.json"
rows = bench.load_manifest(str(manifest))
print()
print(f"manifest rows: {len(rows)}")

## Replay just the list-repetition rows and render the report
report = bench.run_manifest(rows, task_filter="fig1")
print(bench.render_text(report, include_metadata=False))

## write_report drops machine- and human-readable files side by side
with TemporaryDirectory() as tmp:
    copy = Path(tmp) / "m.json"
    copy.write_text(manifest.read_text())
    json_path, text_path = bench.write_report(report, copy)
    print("wrote:", json_path.name, "and", text_path.name)
