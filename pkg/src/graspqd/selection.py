"""Survivor selection over per-component novelties.

multi_bc_select repeatedly (1) draws a behavior component uniformly among
those with at least one eligible remaining candidate, (2) takes the most
novel eligible candidate on that component, (3) removes it from the pool.
Candidates whose components are all undefined can only enter by the uniform
random fill used when no component has eligible candidates left. All argmax
ties break toward the lowest eval_id, so selection is deterministic under a
fixed seed.
"""

from __future__ import annotations

from .core import RngStream


def multi_bc_select(candidates: list, mu: int, n_b: int, rng: RngStream) -> list:
    """Select mu survivors from candidates by per-component novelty."""
    if not candidates:
        raise ValueError("cannot select from an empty candidate list")
    if mu < 1:
        raise ValueError(f"mu must be >= 1, got {mu}")
    n = len(candidates)
    defined = [
        [c.behavior.components[i] is not None for i in range(n_b)] for c in candidates
    ]
    # eligible-candidate count per component, maintained across removals
    counts = [0] * n_b
    for flags in defined:
        for i in range(n_b):
            counts[i] += flags[i]
    removed = [False] * n
    selected = []
    remaining = n
    while len(selected) < mu and remaining:
        eligible = [i for i in range(n_b) if counts[i] > 0]
        if not eligible:
            # Remaining candidates have every component undefined: fill the
            # rest of the population by uniform draws without replacement.
            pool = [j for j in range(n) if not removed[j]]
            need = min(mu - len(selected), len(pool))
            picks = rng.choice(len(pool), size=need, replace=False)
            selected.extend(candidates[pool[j]] for j in picks)
            break
        comp = eligible[int(rng.integers(0, len(eligible)))]
        best_j = -1
        best_key = None
        for j in range(n):
            if removed[j] or not defined[j][comp]:
                continue
            c = candidates[j]
            key = (c.novelty[comp], -c.eval_id)
            if best_key is None or key > best_key:
                best_j, best_key = j, key
        removed[best_j] = True
        remaining -= 1
        for i in range(n_b):
            counts[i] -= defined[best_j][i]
        selected.append(candidates[best_j])
    return selected


def ns_select(candidates: list, mu: int) -> list:
    """The mu candidates with highest single-space novelty; ties break toward
    the lowest eval_id."""
    ranked = sorted(candidates, key=lambda c: (-c.novelty[0], c.eval_id))
    return ranked[:mu]
