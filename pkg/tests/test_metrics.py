from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scmadec.channel import FrameStream, ebn0_to_n0, transmit_batch
from scmadec.decoder import DecoderConfig, decode_batch
from scmadec.metrics import OPS, PROCEDURES, ComplexityModel, OpCounters, audit, column_for, predict


def run(ref, algo, approx, frames=16, **kw):
    batch = transmit_batch(ref, FrameStream(ref, 3), 0, frames, ebn0_to_n0(ref, 8.0))
    return decode_batch(batch.y, ref, DecoderConfig(algorithm=algo, approximation=approx, **kw), N0=batch.N0)


class TestTable:
    def test_this_work_reference_values(self):
        # M=4, N=4 resources, K=6 users
        t = predict("this_work", 4, 4, 6)
        assert t["init"] == {"ADD": 512, "MUL": 0, "EXP": 0}
        assert t["resource"] == {"ADD": 1536, "MUL": 0, "MAX": 768}
        assert t["layer"] == {"ADD": 0, "MUL": 0, "SWOP": 48}
        assert t["judge"] == {"ADD": 24, "MUL": 0, "MAX": 0}

    def test_dmpa_reference_values(self):
        t = predict("dmpa", 4, 4, 6)
        assert t["init"] == {"ADD": 768, "MUL": 768, "EXP": 256}
        assert t["resource"] == {"ADD": 768, "MUL": 1536, "MAX": 0}
        assert t["layer"] == {"ADD": 48, "MUL": 48, "SWOP": 48}
        assert t["judge"] == {"ADD": 0, "MUL": 24, "MAX": 24}
        assert predict("pruned", 4, 4, 6) == t

    def test_init_amortized_over_t(self):
        t = predict("maxlog", 4, 4, 6, T=3)
        assert t["init"]["ADD"] == Fraction(768, 3)
        assert t["resource"] == predict("maxlog", 4, 4, 6)["resource"]

    @given(st.integers(1, 16), st.integers(1, 8), st.integers(1, 12))
    def test_this_work_never_costlier(self, M, N, K):
        ours, base = predict("this_work", M, N, K), predict("maxlog", M, N, K)
        for proc in ours:
            for op, v in ours[proc].items():
                assert v <= base[proc].get(op, 0)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            ComplexityModel("fastest")
        with pytest.raises(ValueError):
            predict("dmpa", 0, 4, 6)

    def test_column_lookup(self):
        assert column_for("maxlog", "a3") == "this_work"
        assert column_for("dmpa", "exact") == "dmpa"
        assert column_for("dmpa", "a2") is None


class TestAudit:
    @pytest.mark.parametrize("algo,approx", [("maxlog", "a3"), ("maxlog", "exact"), ("dmpa", "exact")])
    @pytest.mark.parametrize("iters", [1, 5])
    def test_counts_match_closed_form(self, ref, algo, approx, iters):
        res = run(ref, algo, approx, max_iterations=iters)
        rep = audit(res.counters, column_for(algo, approx), M=4, N=4, K=6, frames=16,
                    iterations=int(res.iterations.sum()))
        assert rep.ok, rep.to_text()

    def test_early_termination_scales_exactly(self, ref):
        res = run(ref, "dmpa", "exact", frames=300, early_termination=True)
        assert res.iterations.min() < 5
        rep = audit(res.counters, "dmpa", M=4, N=4, K=6, frames=300, iterations=int(res.iterations.sum()))
        assert rep.ok, rep.to_text()
        assert res.counters.get("stability", "DIV") > 0

    def test_mismatch_reported(self, ref):
        res = run(ref, "maxlog", "a3", max_iterations=2)
        rep = audit(res.counters, "this_work", M=4, N=4, K=6, frames=16, iterations=16)
        assert not rep.ok
        assert {r.procedure for r in rep.mismatches} == {"resource", "layer"}
        assert "MISMATCH" in rep.to_text()
        assert rep.to_csv().splitlines()[0] == "column,procedure,op,predicted,measured,ok"

    def test_this_work_uses_no_multiplier(self, ref):
        c = run(ref, "maxlog", "a3", max_iterations=5).counters
        assert c.total("MUL") == c.total("DIV") == c.total("EXP") == 0
        assert c.get("init", "MAG") == 16 * 4 * 64


class TestCounters:
    def test_add_and_get(self):
        c = OpCounters()
        c.add("layer", "SWOP", 3)
        c.add("layer", "SWOP", 4)
        assert c.get("layer", "SWOP") == 7
        assert c.total("SWOP") == 7
        assert set(c.as_dict()) == set(PROCEDURES)
        assert set(c.as_dict()["init"]) == set(OPS)

    def test_unknown_names(self):
        with pytest.raises((KeyError, ValueError)):
            OpCounters().add("fft", "ADD", 1)
        with pytest.raises((KeyError, ValueError)):
            OpCounters().add("init", "SQRT", 1)

    def test_merge_is_sum(self):
        a, b = OpCounters(), OpCounters()
        a.add("init", "ADD", 2)
        b.add("init", "ADD", 5)
        b.add("judge", "CMP", 1)
        s = a + b
        assert s.get("init", "ADD") == 7 and s.get("judge", "CMP") == 1
        assert a.get("init", "ADD") == 2
        assert s.copy() == s
