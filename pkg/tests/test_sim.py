import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scmadec.channel import encode, superpose
from scmadec.decoder import ConfigError, DecoderConfig, all_frames
from scmadec.sim import (
    CSV_COLUMNS,
    OracleError,
    SimPoint,
    SweepConfig,
    TradeoffRow,
    ci95,
    crossing_snr,
    format_tradeoff,
    ml_oracle_decode,
    pareto_front,
    parse_snr_grid,
    read_csv,
    run_sweep,
    simulate_point,
    tradeoff_report,
)
from test_system import random_system


class TestOracle:
    def test_noiseless_all_frames(self, ref):
        frames = all_frames(ref)[::7]
        y = superpose(encode(ref, frames))
        np.testing.assert_array_equal(ml_oracle_decode(y, ref), frames)

    def test_single_user_is_minimum_distance(self, rng):
        system = random_system(3, 2, 8, [(0, 2)], seed=4)
        cw = system.codebook[0]
        for _ in range(20):
            y = rng.normal(size=3) + 1j * rng.normal(size=3)
            want = np.argmin(np.abs(y[None] - cw) ** 2 @ np.ones(3))
            assert ml_oracle_decode(y, system)[0] == want

    def test_ties_to_smallest_frame(self):
        system = random_system(2, 2, 2, [(0, 1)], seed=0)
        mid = system.codebook[0].mean(axis=0)
        assert ml_oracle_decode(mid, system)[0] == 0

    def test_cap(self, ref):
        with pytest.raises(OracleError):
            ml_oracle_decode(np.zeros(ref.K), ref, cap=1000)

    def test_chunking_invariant(self, ref, rng):
        y = rng.normal(size=(30, 4)) + 1j * rng.normal(size=(30, 4))
        np.testing.assert_array_equal(ml_oracle_decode(y, ref), ml_oracle_decode(y, ref, chunk_elems=4096 * 4 * 3))

    def test_fading_gain(self, ref, rng):
        frames = all_frames(ref)[[5, 900, 4000]]
        h = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
        np.testing.assert_array_equal(ml_oracle_decode(h * superpose(encode(ref, frames)), ref, h=h), frames)


class TestGrid:
    def test_range(self):
        assert parse_snr_grid("0:12:2") == (0, 2, 4, 6, 8, 10, 12)
        assert parse_snr_grid("1:2:0.5") == (1.0, 1.5, 2.0)
        assert parse_snr_grid("3, 5,9") == (3.0, 5.0, 9.0)

    @pytest.mark.parametrize("bad", ["0:10:0", "5:1:1", "0:1"])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            parse_snr_grid(bad)


class TestStatistics:
    def test_ci_values(self):
        assert ci95(0, 100) == 0.0
        assert ci95(50, 100) == pytest.approx(1.959964 * 0.05, rel=1e-6)

    @given(st.integers(1, 10**6), st.data())
    def test_ci_shrinks_as_root_n(self, n, data):
        k = data.draw(st.integers(0, n))
        assert ci95(4 * k, 4 * n) == pytest.approx(ci95(k, n) / 2, rel=1e-12, abs=1e-15)

    def test_rate_ordering(self, ref):
        pts = simulate_point(ref, 2.0, [DecoderConfig()], frames=800, seed=1)
        p = pts[0]
        assert p.ber <= p.ser <= p.bler <= 1
        assert p.block_errors > 0

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=40))
    def test_tally_identities(self, pairs):
        a = np.array(pairs)
        p = SimPoint(0.0, "x", J=1, bits_per_symbol=2)
        p.tally(a[:, :1], a[:, 1:])
        assert p.ber <= p.ser == p.bler
        assert p.ser <= 2 * p.ber + 1e-12


class TestSweep:
    def cfg(self, **kw):
        base = dict(snr_db=(4.0, 8.0), frames=300,
                    variants=(DecoderConfig(algorithm="dmpa", early_termination=True), DecoderConfig()),
                    seed=7, batch=128)
        base.update(kw)
        return SweepConfig(**base)

    def test_csv_deterministic(self):
        assert run_sweep(self.cfg()).to_csv() == run_sweep(self.cfg()).to_csv()

    def test_batch_size_irrelevant(self):
        a = run_sweep(self.cfg(batch=1000)).to_csv()
        b = run_sweep(self.cfg(batch=37)).to_csv()
        strip = lambda t: [ln for ln in t.splitlines() if not ln.startswith("# config")]
        assert strip(a) == strip(b)

    def test_csv_layout(self, tmp_path):
        out = tmp_path / "s.csv"
        res = run_sweep(self.cfg(out=str(out), oracle=True))
        text = out.read_text()
        assert text == res.to_csv()
        header = [ln for ln in text.splitlines() if ln.startswith("#")]
        assert any("Eb/N0" in ln for ln in header)
        assert header[-1].startswith("# config: {")
        rows = read_csv(text)
        assert tuple(rows[0]) == CSV_COLUMNS
        assert [r["variant"] for r in rows[:3]] == ["dmpa-exact-i5-et", "maxlog-exact-i5", "ml"]
        assert all(int(r["frames"]) == 300 for r in rows)

    def test_config_echo_round_trip(self):
        cfg = self.cfg(stop_errors=10, noise_reduction="hadamard")
        assert SweepConfig.from_dict(json.loads(cfg.dumps())) == cfg

    def test_duplicate_names(self):
        cfg = self.cfg(variants=(DecoderConfig(), DecoderConfig()))
        assert cfg.variant_names() == ["maxlog-exact-i5", "maxlog-exact-i5#2"]

    def test_stop_errors(self):
        res = run_sweep(self.cfg(snr_db=(0.0,), frames=5000, stop_errors=20))
        for p in res.points:
            assert p.block_errors >= 20
            assert p.frames < 5000

    def test_variants_share_frames(self):
        cfg = self.cfg(variants=(DecoderConfig(), DecoderConfig()), snr_db=(4.0,))
        a, b = run_sweep(cfg, keep_frames=True).points
        np.testing.assert_array_equal(a.errors_per_frame, b.errors_per_frame)

    def test_ml_beats_message_passing(self):
        res = run_sweep(self.cfg(snr_db=(6.0,), frames=1500, oracle=True))
        assert res.get("ml", 6.0).block_errors <= res.get("maxlog-exact-i5", 6.0).block_errors

    @pytest.mark.parametrize("kw", [dict(snr_db=()), dict(frames=0), dict(batch=0), dict(fading="rician"),
                                    dict(variants=()), dict(stop_errors=0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            self.cfg(**kw)


class TestCrossing:
    def test_log_interpolation(self):
        assert crossing_snr([8, 10], [2e-2, 5e-3], 1e-2) == pytest.approx(9.0)

    def test_exact_hit(self):
        assert crossing_snr([0, 2, 4], [0.5, 0.01, 0.001]) == 2

    def test_not_reached(self):
        assert crossing_snr([0, 2, 4], [0.5, 0.2, 0.05]) is None

    def test_already_below(self):
        assert crossing_snr([6, 8], [1e-3, 1e-4]) is None

    def test_zero_rate_uses_half_event(self):
        # 0 errors in 1000 frames acts as a rate of 5e-4
        x = crossing_snr([0, 2], [0.05, 0.0], 1e-2, [1000, 1000])
        want = 2 * (math.log10(0.05) - math.log10(0.01)) / (math.log10(0.05) - math.log10(5e-4))
        assert x == pytest.approx(want)

    def test_unsorted_input(self):
        assert crossing_snr([10, 8], [5e-3, 2e-2]) == pytest.approx(9.0)

    def test_report_and_front(self):
        rows = [TradeoffRow("a", 10.0, 5.0, 100.0), TradeoffRow("b", 10.2, 3.0, 80.0),
                TradeoffRow("c", 10.5, 4.0, 90.0), TradeoffRow("d", None, None, None)]
        assert pareto_front(rows) == ["a", "b"]
        text = format_tradeoff(rows)
        assert "not reached" in text and text.count("\n") == 4

    def test_tradeoff_from_sweep(self):
        cfg = SweepConfig(snr_db=(0.0, 14.0), frames=400, variants=(DecoderConfig(),), seed=2)
        (row,) = tradeoff_report(run_sweep(cfg))
        assert row.reached and 0 < row.crossing_db < 14
        assert row.mean_iters == pytest.approx(5.0)

    def test_ml_row_has_no_cost(self):
        cfg = SweepConfig(snr_db=(0.0, 14.0), frames=300, variants=(DecoderConfig(),), seed=2, oracle=True)
        rows = tradeoff_report(run_sweep(cfg))
        ml = rows[-1]
        assert ml.variant == "ml" and ml.reached and ml.mean_iters is None
        assert pareto_front(rows) == ["maxlog-exact-i5"]
        assert format_tradeoff(rows).splitlines()[-1].split()[-2:] == ["-", "-"]
