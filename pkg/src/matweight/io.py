"""Network, trace and report files.

* Network and report files are JSON. Weight entries are written with 17
  significant digits so doubles survive the round trip bit-for-bit.
* Trace files are CSV: a first comment line ``# {manifest json}``, a header
  row, then one row per recorded sample.

Agent ids in files are 1-based; the library is 0-based.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from .dynamics import RunTrace, StopReason
from .graph import MatrixWeightedGraph

NETWORK_FORMAT = "matweight-network"
TRACE_FORMAT = "matweight-trace"
REPORT_FORMAT = "matweight-report"
VERSION = 1


class FileFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def network_to_text(g: MatrixWeightedGraph) -> str:
    directed = any((j, i) not in g.weights for (i, j) in g.weights)
    placeholders = {}
    edges = []
    for idx, ((i, j), w) in enumerate(g.weights.items()):
        key = f"@@W{idx}@@"
        placeholders[key] = "[" + ", ".join(fmt(v) for v in w.ravel()) + "]"
        edges.append({"from": i + 1, "to": j + 1, "weight": key})
    doc = {
        "format": NETWORK_FORMAT,
        "version": VERSION,
        "n": g.n,
        "d": g.d,
        "directed": directed,
        "edges": edges,
        "metadata": _jsonable(dict(g.metadata)),
    }
    text = json.dumps(doc, indent=1, sort_keys=False)
    for key, arr in placeholders.items():
        text = text.replace(f'"{key}"', arr, 1)
    return text + "\n"


def network_from_dict(doc: dict) -> MatrixWeightedGraph:
    if doc.get("format") != NETWORK_FORMAT:
        raise FileFormatError("not a matweight network file")
    if doc.get("version") != VERSION:
        raise FileFormatError(f"unsupported network file version {doc.get('version')!r}")
    n, d = int(doc["n"]), int(doc["d"])
    weights = {}
    for e in doc["edges"]:
        key = (int(e["from"]) - 1, int(e["to"]) - 1)
        if key in weights:
            raise FileFormatError(f"duplicate edge {e['from']}->{e['to']}")
        w = np.array(e["weight"], dtype=float)
        if w.size != d * d:
            raise FileFormatError(f"edge {e['from']}->{e['to']} has {w.size} weight entries, expected {d * d}")
        weights[key] = w.reshape(d, d)
    return MatrixWeightedGraph(n, d, weights, doc.get("metadata") or {})


def write_network(g: MatrixWeightedGraph, path) -> None:
    write_atomic(path, network_to_text(g))


def read_network(path) -> MatrixWeightedGraph:
    with open(path) as f:
        return network_from_dict(json.load(f))


def trace_header(n: int, d: int) -> list[str]:
    return ["step", "selected_agent"] + [f"agent{i + 1}_dim{k + 1}" for i in range(n) for k in range(d)]


def trace_to_text(trace: RunTrace, *, include_sequence: bool = False, extra: dict | None = None) -> str:
    manifest = {
        "format": TRACE_FORMAT,
        "version": VERSION,
        **trace.config,
        "stop_reason": trace.stop_reason.value,
        "steps_run": trace.steps_run,
        **(extra or {}),
    }
    if include_sequence:
        manifest["agent_sequence"] = (trace.agent_sequence + 1).tolist()
    buf = io.StringIO()
    buf.write("# " + json.dumps(_jsonable(manifest), separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(trace.n, trace.d))
    for step, agent, row in zip(trace.sample_steps, trace.sample_agents, trace.samples):
        w.writerow([int(step), int(agent) + 1 if agent >= 0 else -1] + [fmt(v) for v in row])
    return buf.getvalue()


def write_trace(trace: RunTrace, path, **kw) -> None:
    write_atomic(path, trace_to_text(trace, **kw))


def read_trace(path) -> tuple[dict[str, Any], RunTrace]:
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith("# "):
            raise FileFormatError("trace file lacks a manifest line")
        manifest = json.loads(first[2:])
        if manifest.get("format") != TRACE_FORMAT:
            raise FileFormatError("not a matweight trace file")
        reader = csv.reader(f)
        header = next(reader)
        n, d = int(manifest["n"]), int(manifest["d"])
        if header != trace_header(n, d):
            raise FileFormatError("trace header does not match n and d in the manifest")
        rows = [r for r in reader if r]
    width = 2 + n * d
    if any(len(r) != width for r in rows):
        raise FileFormatError(f"trace rows must have exactly {width} fields")
    data = np.array([[float(v) for v in r] for r in rows])
    seq = manifest.get("agent_sequence")
    agents = data[:, 1].astype(np.int64)
    config = {k: v for k, v in manifest.items() if k not in ("format", "version", "stop_reason", "steps_run", "agent_sequence")}
    trace = RunTrace(
        config=config,
        agent_sequence=np.array(seq, dtype=np.int64) - 1 if seq is not None else np.empty(0, dtype=np.int64),
        sample_steps=data[:, 0].astype(np.int64),
        sample_agents=np.where(agents > 0, agents - 1, -1),
        samples=data[:, 2:],
        step_deltas=np.empty(0),
        steps_run=int(manifest["steps_run"]),
        stop_reason=StopReason(manifest["stop_reason"]),
        n=n,
        d=d,
    )
    return manifest, trace


def verdict_to_dict(v) -> dict[str, Any]:
    return {
        "kind": v.kind.value,
        "consensus_vector": None if v.consensus_vector is None else [float(x) for x in v.consensus_vector],
        "partition": None if v.partition is None else [sorted(a + 1 for a in part) for part in v.partition],
        "residual": None if v.residual is None or not np.isfinite(v.residual) else float(v.residual),
        "steps_to_converge": v.steps_to_converge,
    }


def report_to_text(verdict=None, checks=(), extra: dict | None = None) -> str:
    check_dicts = [c.as_dict() for c in checks]
    doc = {
        "format": REPORT_FORMAT,
        "version": VERSION,
        "verdict": None if verdict is None else verdict_to_dict(verdict),
        "checks": check_dicts,
        "all_pass": all(d["pass"] for d in check_dicts if d["applicable"]),
        **(extra or {}),
    }
    return json.dumps(_jsonable(doc), indent=1, allow_nan=False, default=str) + "\n"


def write_report(path, verdict=None, checks=(), extra: dict | None = None) -> None:
    write_atomic(path, report_to_text(verdict, checks, extra))


def write_dimension_csvs(trace: RunTrace, out_dir, prefix: str = "") -> list[Path]:
    """One CSV per state dimension: ``step`` then one column per agent."""
    out_dir = Path(out_dir)
    paths = []
    X = trace.samples.reshape(len(trace.samples), trace.n, trace.d)
    for k in range(trace.d):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step"] + [f"agent{i + 1}" for i in range(trace.n)])
        for step, row in zip(trace.sample_steps, X[:, :, k]):
            w.writerow([int(step)] + [fmt(v) for v in row])
        p = out_dir / f"{prefix}dim{k + 1}.csv"
        write_atomic(p, buf.getvalue())
        paths.append(p)
    return paths
