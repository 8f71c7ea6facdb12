#!/usr/bin/env python3
"""End-to-end checks of the flowbone command line: outputs, manifest and exit codes."""

import hashlib
import json
import os
import subprocess
import sys
import tempfile
import xml.etree.ElementTree as ET
from pathlib import Path

CLI = sys.argv[1]
failures = []


def run(*args, env=None):
    return subprocess.run([CLI, *args], capture_output=True, text=True, env=env)


def check(cond, what):
    if not cond:
        failures.append(what)
        print("FAIL", what)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    data = tmp / "data"
    r = run("synth", "-o", str(data), "--nodes", "14", "--years", "4", "--regions", "3", "--hubs", "1", "--seed", "3")
    check(r.returncode == 0, "synth exits 0: " + r.stderr)
    inputs = ["--flows", str(data / "flows.csv"), "--meta", str(data / "meta.csv"),
              "--population", str(data / "population.csv")]

    out = tmp / "out"
    r = run("pipeline", *inputs, "-o", str(out), "--epochs", "15", "--clusters-k", "3", "--ego", "C01")
    check(r.returncode == 0, "pipeline exits 0: " + r.stderr)

    manifest = json.loads((out / "manifest.json").read_text())
    listed = {a["path"] for a in manifest["artifacts"]}
    on_disk = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
    check(listed == on_disk, "manifest lists every file")
    for a in manifest["artifacts"]:
        digest = hashlib.sha256((out / a["path"]).read_bytes()).hexdigest()
        check(digest == a["sha256"], "sha256 of " + a["path"])
    kinds = {a["kind"] for a in manifest["artifacts"]}
    for k in ("backbone", "embedding", "clusters", "metrics", "stability"):
        check(k in kinds, "artifact kind " + k)

    svgs = list(out.rglob("*.svg"))
    check(len(svgs) > 0, "svg output present")
    for s in svgs:
        try:
            root = ET.parse(s).getroot()
            check(root.tag.endswith("svg"), "root element of " + s.name)
        except ET.ParseError as e:
            check(False, f"{s.name} is well-formed: {e}")

    before = {p: p.read_bytes() for p in out.rglob("*") if p.is_file()}
    for stage in ("metrics", "align", "cluster", "persistence"):
        r = run(stage, *inputs, "-o", str(out), "--epochs", "15", "--clusters-k", "3", "--ego", "C01")
        check(r.returncode == 0, stage + " exits 0: " + r.stderr)
    after = {p: p.read_bytes() for p in out.rglob("*") if p.is_file()}
    check(before == after, "stage reruns reproduce the pipeline bytes")

    # output directory from the environment
    env = dict(os.environ, FLOWBONE_OUT=str(tmp / "env_out"))
    r = run("backbone", *inputs, env=env)
    check(r.returncode == 0 and (tmp / "env_out" / "manifest.json").exists(), "FLOWBONE_OUT is honoured")

    bad = tmp / "bad.csv"
    bad.write_text("year,origin,destination,count\n2008,C01,C01,5\n")
    r = run("validate", "--flows", str(bad), "--meta", str(data / "meta.csv"))
    check(r.returncode == 2, f"self-flow exits 2 (got {r.returncode})")
    check("self-flow" in r.stderr, "self-flow message")

    r = run("pipeline", *inputs, "-o", str(tmp / "x"), "--keep-fraction", "1.5")
    check(r.returncode == 2, f"bad keep fraction exits 2 (got {r.returncode})")

    r = run("pipeline", *inputs, "-o", str(tmp / "x"), "--set", "nonsense=1")
    check(r.returncode == 2, f"unknown key exits 2 (got {r.returncode})")

    blocker = tmp / "blocker"
    blocker.write_text("file")
    r = run("pipeline", *inputs, "-o", str(blocker / "out"))
    check(r.returncode == 4, f"unwritable output exits 4 (got {r.returncode})")

    r = run("validate", "--flows", str(tmp / "missing.csv"), "--meta", str(data / "meta.csv"))
    check(r.returncode == 4, f"missing input exits 4 (got {r.returncode})")

print("ok" if not failures else f"{len(failures)} failures")
sys.exit(1 if failures else 0)
