import numpy as np
import pytest
import torch
import torch.nn as nn

from dcnas.errors import LutError
from dcnas.models import tiny_macro
from dcnas.profiler import (
    LatencyProtocol,
    LatencyTable,
    build_latency_lut,
    estimate_latency,
    measure_latency,
)
from dcnas.search import get_search_space

from oracles import brute_force_expected_latency

TINY_PROTO = LatencyProtocol(batch_size=1, warmup_iters=1, timed_iters=3,
                             input_shape=(1, 28, 28))


def toy_table(entries_per_layer, overhead=0.0):
    candidates = tuple(f"op{i}" for i in range(len(entries_per_layer[0])))
    entries = {}
    for pos, row in enumerate(entries_per_layer):
        for i, ms in enumerate(row):
            entries[(pos, candidates[i])] = float(ms)
    return LatencyTable(protocol=TINY_PROTO, device_id="test",
                        candidates=candidates, entries=entries,
                        fixed_overhead_ms=overhead)


class TestProtocol:
    def test_defaults_match_measurement_protocol(self):
        proto = LatencyProtocol()
        assert proto.batch_size == 32
        assert proto.warmup_iters == 100
        assert proto.timed_iters == 1000

    @pytest.mark.parametrize("kwargs", [dict(warmup_iters=-1),
                                        dict(timed_iters=0),
                                        dict(batch_size=0)])
    def test_invalid_protocols_rejected(self, kwargs):
        with pytest.raises(ValueError):
            LatencyProtocol(**kwargs)

    def test_round_trip(self):
        proto = LatencyProtocol(batch_size=4, warmup_iters=2, timed_iters=5,
                                input_shape=(3, 32, 32))
        assert LatencyProtocol.from_dict(proto.to_dict()) == proto


class TestMeasure:
    def test_noop_model_smoke(self):
        proto = LatencyProtocol(batch_size=1, warmup_iters=0, timed_iters=1,
                                input_shape=(1, 8, 8))
        result = measure_latency(nn.Identity(), proto)
        assert result.milliseconds > 0
        assert result.protocol == proto

    def test_protocol_echoed(self):
        result = measure_latency(nn.Conv2d(1, 1, 3, padding=1), TINY_PROTO)
        assert result.protocol.timed_iters == 3


class TestEstimate:
    def test_one_hot_equals_exact_sum(self):
        lut = toy_table([[1.0, 5.0], [2.0, 4.0]], overhead=0.5)
        assert estimate_latency([[1, 0], [0, 1]], lut) == pytest.approx(0.5 + 1.0 + 4.0)

    def test_uniform_two_candidates(self):
        lut = toy_table([[1.0, 3.0]])
        assert estimate_latency([[0.5, 0.5]], lut) == pytest.approx(2.0)

    def test_matches_brute_force_expectation(self, rng):
        rows = [rng.random(4) for _ in range(3)]
        weights = [list(r / r.sum()) for r in rows]
        entries = [list(rng.uniform(0.5, 3.0, 4)) for _ in range(3)]
        lut = toy_table(entries, overhead=0.7)
        expected = brute_force_expected_latency(weights, entries, 0.7)
        assert abs(float(estimate_latency(weights, lut)) - expected) < 1e-9

    def test_linear_in_weights(self):
        entries = [[1.0, 2.0, 3.0, 4.0]]
        lut = toy_table(entries)
        w1, w2 = [0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.7]
        mid = [[(a + b) / 2 for a, b in zip(w1, w2)]]
        lhs = estimate_latency(mid, lut)
        rhs = (estimate_latency([w1], lut) + estimate_latency([w2], lut)) / 2
        assert lhs == pytest.approx(rhs)

    def test_monotone_in_single_entry(self):
        slow = toy_table([[1.0, 10.0]])
        fast = toy_table([[1.0, 2.0]])
        w = [[0.5, 0.5]]
        assert estimate_latency(w, slow) > estimate_latency(w, fast)

    def test_missing_entry_raises(self):
        lut = toy_table([[1.0, 2.0]])
        with pytest.raises(LutError):
            estimate_latency([[0.5, 0.5], [0.5, 0.5]], lut)

    def test_torch_weights_keep_gradients(self):
        lut = toy_table([[1.0, 2.0], [3.0, 4.0]], overhead=0.1)
        alpha = torch.tensor([[0.2, 0.8], [0.6, 0.4]], requires_grad=True)
        est = estimate_latency(list(alpha), lut)
        est.backward()
        assert alpha.grad is not None
        assert torch.allclose(alpha.grad, torch.tensor([[1.0, 2.0], [3.0, 4.0]]))


class TestBuildLut:
    def test_two_layer_macro_has_complete_entries(self):
        macro = tiny_macro(2)
        lut = build_latency_lut("size-4", macro, TINY_PROTO, num_classes=10)
        assert len(lut.entries) == 2 * 4
        assert all(ms > 0 for ms in lut.entries.values())
        assert lut.fixed_overhead_ms > 0
        lut.validate()

    def test_round_trip_bit_identical(self, tmp_path):
        macro = tiny_macro(2)
        lut = build_latency_lut("size-4", macro, TINY_PROTO, num_classes=10)
        path = tmp_path / "lut.json"
        lut.save(path)
        loaded = LatencyTable.load(path)
        assert loaded.entries == lut.entries
        assert loaded.fixed_overhead_ms == lut.fixed_overhead_ms
        assert loaded.candidates == lut.candidates
        assert loaded.protocol == lut.protocol

    def test_expansion_six_vs_three_ordering_recorded(self):
        # expectation on the dev machine, reported but not asserted
        macro = tiny_macro(1)
        proto = LatencyProtocol(batch_size=4, warmup_iters=3, timed_iters=10,
                                input_shape=(1, 28, 28))
        lut = build_latency_lut("size-4", macro, proto, num_classes=10)
        e3 = lut.lookup(0, "MB-k3-e3")
        e6 = lut.lookup(0, "MB-k3-e6")
        print(f"\nMB-k3-e3 {e3:.4f} ms vs MB-k3-e6 {e6:.4f} ms "
              f"(expected e6 slower: {'yes' if e6 > e3 else 'NO'})")
        assert e3 > 0 and e6 > 0

    def test_validate_catches_empty(self):
        lut = LatencyTable(protocol=TINY_PROTO, device_id="x",
                           candidates=("a",), entries={})
        with pytest.raises(LutError):
            lut.validate()
