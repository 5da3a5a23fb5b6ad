import math

import numpy as np

from graspqd.core import (
    METRIC_EUCLIDEAN,
    METRIC_WRAPPED_ANGLE,
    BehaviorComponentSpec,
    Bounds,
    GenerationRecord,
    Repertoire,
    RunHistory,
)
from graspqd.io import (
    read_history,
    read_repertoire,
    write_history,
    write_repertoire,
)

from conftest import make_individual


def _specs():
    return (
        BehaviorComponentSpec(0, 2, METRIC_EUCLIDEAN, Bounds.uniform(-1.5, 1.5, 2)),
        BehaviorComponentSpec(1, 1, METRIC_WRAPPED_ANGLE, Bounds.uniform(-math.pi, math.pi, 1)),
    )


class TestRepertoireRoundTrip:
    def test_values_preserved_exactly(self, tmp_path):
        specs = _specs()
        inds = [
            make_individual(0, [[0.123456789012345, -1.5], [2.2]],
                            novelty=(0.25, math.inf), success=True, quality=-3.75),
            make_individual(7, [[0.0, 0.0], None], novelty=(1.0, None), generation=4),
        ]
        rep = Repertoire(component_specs=specs, individuals=inds, archived_ids=frozenset({7}))
        path = tmp_path / "rep.jsonl"
        write_repertoire(path, rep, meta={"algorithm": "nsmbs", "seed": 3})
        loaded, header = read_repertoire(path)
        assert header["meta"]["seed"] == 3
        assert loaded.archived_ids == frozenset({7})
        for a, b in zip(inds, loaded.individuals):
            assert a.eval_id == b.eval_id
            assert a.generation_born == b.generation_born
            assert a.success == b.success
            assert a.quality == b.quality
            assert np.array_equal(a.genome.params, b.genome.params)
            assert a.novelty == b.novelty  # includes inf and None
            for ca, cb in zip(a.behavior.components, b.behavior.components):
                assert (ca is None) == (cb is None)
                if ca is not None:
                    assert np.array_equal(ca, cb)
        for sa, sb in zip(specs, loaded.component_specs):
            assert sa.metric == sb.metric
            assert np.array_equal(sa.bounds.lower, sb.bounds.lower)

    def test_write_is_deterministic(self, tmp_path):
        specs = _specs()
        inds = [make_individual(i, [[0.1 * i, 0.0], [0.5]], novelty=(float(i), 0.0))
                for i in range(5)]
        rep = Repertoire(component_specs=specs, individuals=inds)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_repertoire(a, rep, meta={"x": 1})
        write_repertoire(b, rep, meta={"x": 1})
        assert a.read_bytes() == b.read_bytes()


class TestHistoryRoundTrip:
    def test_round_trip(self, tmp_path):
        h = RunHistory()
        h.append(GenerationRecord(0, 10, 1, 1))
        h.append(GenerationRecord(1, 5, 0, 1))
        path = tmp_path / "hist.jsonl"
        write_history(path, h, meta={"seed": 9})
        loaded, header = read_history(path)
        assert header["meta"]["seed"] == 9
        assert loaded.records == h.records
        assert loaded.ledger.consistent()
