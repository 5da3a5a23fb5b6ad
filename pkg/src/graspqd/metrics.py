"""The four run measures, computed offline from histories and repertoires.

coverage: fraction of a uniform grid over a normalized component space
containing at least one defined descriptor from successful individuals.
sample efficiency: successful evaluations / total evaluations.
first success generation: earliest generation with a success, if any.
successful run rate: fraction of runs that ever found a grasp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EvaluationBudgetLedger, Repertoire, RunHistory


def coverage(repertoire: Repertoire, component_index: int, resolution: int) -> float:
    """Occupied fraction of the component's normalized grid (successes only)."""
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    spec = repertoire.component_specs[component_index]
    occupied = set()
    for ind in repertoire.individuals:
        if not ind.success:
            continue
        comp = ind.behavior.components[component_index]
        if comp is None:
            continue
        z = spec.bounds.normalize(spec.bounds.clip(comp))
        cell = tuple(np.minimum((z * resolution).astype(int), resolution - 1))
        occupied.add(cell)
    return len(occupied) / float(resolution ** spec.dim)


def sample_efficiency(ledger: EvaluationBudgetLedger, upto_generation: int | None = None) -> float:
    """Successes / evaluations over the generation prefix. A ledger with no
    evaluations yields 0.0 (the value is undefined; callers can see the zero
    evaluation count in the ledger itself)."""
    rows = ledger.per_generation
    if upto_generation is not None:
        rows = rows[: upto_generation + 1]
    evals = sum(e for e, _ in rows)
    succ = sum(s for _, s in rows)
    if evals == 0:
        return 0.0
    return succ / evals


def sample_efficiency_series(history: RunHistory) -> np.ndarray:
    """Cumulative sample efficiency after each logged generation."""
    evals = np.cumsum([r.evaluations for r in history.records])
    succ = np.cumsum([r.successes for r in history.records])
    return np.where(evals > 0, succ / np.maximum(evals, 1), 0.0)


def first_success_generation(history: RunHistory) -> int | None:
    """Earliest generation index with at least one success; None if the run
    never found a grasp."""
    for record in history.records:
        if record.successes > 0:
            return record.generation
    return None


def successful_run_rate(histories) -> float:
    """Fraction of runs whose first_success_generation is defined."""
    histories = list(histories)
    if not histories:
        raise ValueError("successful_run_rate requires at least one run")
    hits = sum(1 for h in histories if first_success_generation(h) is not None)
    return hits / len(histories)


@dataclass(frozen=True)
class Aggregate:
    """Across-run summary: median and IQR, plus mean and std."""

    median: float
    iqr: float
    mean: float
    std: float
    n: int

    def __str__(self):
        return f"median {self.median:.4g} (IQR {self.iqr:.4g}), mean {self.mean:.4g} +/- {self.std:.4g}"


def aggregate(values) -> Aggregate:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        nan = float("nan")
        return Aggregate(nan, nan, nan, nan, 0)
    q25, q75 = np.percentile(arr, [25, 75])
    return Aggregate(
        median=float(np.median(arr)),
        iqr=float(q75 - q25),
        mean=float(arr.mean()),
        std=float(arr.std(ddof=0)),
        n=int(arr.size),
    )
