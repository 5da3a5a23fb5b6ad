"""Line-delimited persistence for repertoires, histories and manifests.

Files are plain text and schema-versioned: the first line is a header
record, every following line one entry. Serialization is deterministic
(sorted keys, shortest-roundtrip floats, no timestamps), so byte-identical
files mean identical runs. Novelty snapshots may hold +inf (no neighbors at
computation time); it is stored as the string "inf" to keep lines strict
JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .core import (
    BehaviorComponentSpec,
    BehaviorVector,
    Bounds,
    Genome,
    GenerationRecord,
    Individual,
    Repertoire,
    RunHistory,
)

REPERTOIRE_SCHEMA = "graspqd.repertoire/1"
HISTORY_SCHEMA = "graspqd.history/1"
CAMPAIGN_SCHEMA = "graspqd.campaign/1"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _novelty_out(value):
    if value is None:
        return None
    if math.isinf(value):
        return "inf"
    return float(value)


def _novelty_in(value):
    if value is None:
        return None
    if value == "inf":
        return math.inf
    return float(value)


def _spec_out(spec: BehaviorComponentSpec) -> dict:
    return {
        "index": spec.index,
        "dim": spec.dim,
        "metric": spec.metric,
        "lower": spec.bounds.lower.tolist(),
        "upper": spec.bounds.upper.tolist(),
    }


def _spec_in(d: dict) -> BehaviorComponentSpec:
    return BehaviorComponentSpec(
        index=int(d["index"]),
        dim=int(d["dim"]),
        metric=d["metric"],
        bounds=Bounds(np.asarray(d["lower"]), np.asarray(d["upper"])),
    )


def write_repertoire(path, repertoire: Repertoire, meta: dict | None = None):
    path = Path(path)
    header = {
        "schema": REPERTOIRE_SCHEMA,
        "components": [_spec_out(s) for s in repertoire.component_specs],
        "count": len(repertoire.individuals),
    }
    if meta:
        header["meta"] = meta
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_dumps(header) + "\n")
        for ind in repertoire.individuals:
            row = {
                "eval_id": ind.eval_id,
                "generation": ind.generation_born,
                "genome": ind.genome.params.tolist(),
                "behavior": [
                    None if c is None else c.tolist() for c in ind.behavior.components
                ],
                "novelty": [_novelty_out(v) for v in ind.novelty],
                "success": bool(ind.success),
                "quality": float(ind.quality),
                "archived": ind.eval_id in repertoire.archived_ids,
            }
            fh.write(_dumps(row) + "\n")


def read_repertoire(path):
    """Returns (Repertoire, header dict)."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != REPERTOIRE_SCHEMA:
            raise ValueError(f"{path} is not a repertoire file (schema {header.get('schema')!r})")
        specs = tuple(_spec_in(d) for d in header["components"])
        individuals = []
        archived = set()
        for line in fh:
            row = json.loads(line)
            behavior = BehaviorVector(
                components=tuple(
                    None if c is None else np.asarray(c, dtype=float)
                    for c in row["behavior"]
                )
            )
            ind = Individual(
                genome=Genome(np.asarray(row["genome"], dtype=float)),
                behavior=behavior,
                novelty=tuple(_novelty_in(v) for v in row["novelty"]),
                success=bool(row["success"]),
                quality=float(row["quality"]),
                eval_id=int(row["eval_id"]),
                generation_born=int(row["generation"]),
            )
            individuals.append(ind)
            if row.get("archived"):
                archived.add(ind.eval_id)
    return (
        Repertoire(component_specs=specs, individuals=individuals, archived_ids=frozenset(archived)),
        header,
    )


def write_history(path, history: RunHistory, meta: dict | None = None):
    path = Path(path)
    header = {"schema": HISTORY_SCHEMA, "count": len(history.records)}
    if meta:
        header["meta"] = meta
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_dumps(header) + "\n")
        for r in history.records:
            fh.write(
                _dumps(
                    {
                        "generation": r.generation,
                        "evaluations": r.evaluations,
                        "successes": r.successes,
                        "repertoire_size": r.repertoire_size,
                    }
                )
                + "\n"
            )


def read_history(path):
    """Returns (RunHistory, header dict)."""
    path = Path(path)
    history = RunHistory()
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != HISTORY_SCHEMA:
            raise ValueError(f"{path} is not a history file (schema {header.get('schema')!r})")
        for line in fh:
            row = json.loads(line)
            history.append(
                GenerationRecord(
                    generation=int(row["generation"]),
                    evaluations=int(row["evaluations"]),
                    successes=int(row["successes"]),
                    repertoire_size=int(row["repertoire_size"]),
                )
            )
    return history, header


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, config_echo: dict, runs: list):
    path = Path(path)
    doc = {"schema": CAMPAIGN_SCHEMA, "config": config_echo, "runs": runs}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_manifest(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != CAMPAIGN_SCHEMA:
        raise ValueError(f"{path} is not a campaign manifest")
    return doc


def verify_campaign_files(campaign_dir) -> list:
    """Recompute digests of a campaign's files; returns mismatched paths."""
    campaign_dir = Path(campaign_dir)
    doc = read_manifest(campaign_dir / "campaign.json")
    bad = []
    for run in doc["runs"]:
        for key in ("repertoire", "history"):
            rel = run.get(f"{key}_file")
            if rel is None:
                continue
            p = campaign_dir / rel
            if not p.exists() or sha256_file(p) != run[f"{key}_sha256"]:
                bad.append(str(p))
    return bad
