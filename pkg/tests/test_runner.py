import math

import numpy as np
import pytest

from src.core.rng import derive_seed, partition, substream
from src.core.runner import WeightSums, collect_until, run_batches, run_sums
from src.models.records import EstimateRecord, ScheduleKind, TiltSchedule


def _uniform_sums(rng, size):
    return WeightSums.of(rng.random(size))


class TestStreams:
    def test_partition(self):
        assert partition(10, 4) == [4, 4, 2]
        assert partition(8, 4) == [4, 4]
        assert partition(3, 10) == [3]
        assert partition(0, 4) == []

    def test_substreams_are_reproducible_and_distinct(self):
        a = substream(7, 0).random(5)
        assert np.array_equal(a, substream(7, 0).random(5))
        assert not np.array_equal(a, substream(7, 1).random(5))
        assert not np.array_equal(a, substream(8, 0).random(5))

    def test_derive_seed(self):
        assert derive_seed(1, 0) == derive_seed(1, 0)
        assert derive_seed(1, 0) != derive_seed(1, 1)
        assert 0 <= derive_seed(123, 4) < 2 ** 64


class TestRunner:
    def test_thread_count_does_not_change_result(self):
        one = run_sums(_uniform_sums, 10_000, seed=5, threads=1, batch_size=700)
        many = run_sums(_uniform_sums, 10_000, seed=5, threads=4, batch_size=700)
        assert one == many
        assert one.n == 10_000

    def test_batches_in_index_order(self):
        parts = run_batches(lambda rng, size: size, 2_500, seed=1, threads=3, batch_size=1_000)
        assert parts == [1_000, 1_000, 500]

    def test_settings_defaults(self, monkeypatch):
        monkeypatch.setenv("PERPWATCH_BATCH_SIZE", "300")
        monkeypatch.setenv("PERPWATCH_THREADS", "2")
        parts = run_batches(lambda rng, size: size, 1_000, seed=1)
        assert parts == [300, 300, 300, 100]

    def test_collect_until(self):
        def batch(rng, size):
            return int((rng.random(size) < 0.1).sum())

        one = collect_until(batch, lambda k: k, 500, seed=3, max_batches=100, threads=1, batch_size=1_000)
        many = collect_until(batch, lambda k: k, 500, seed=3, max_batches=100, threads=4, batch_size=1_000)
        assert one == many
        assert sum(one) >= 500
        assert sum(one[:-1]) < 500

    def test_collect_until_cap(self, caplog):
        parts = collect_until(lambda rng, size: 0, lambda k: k, 10, seed=3, max_batches=5,
                              threads=2, batch_size=10)
        assert len(parts) == 5
        assert any("上限" in r.getMessage() for r in caplog.records)


class TestEstimateRecord:
    def test_from_sums(self):
        w = np.array([0.0, 1.0, 3.0, 0.0])
        rec = EstimateRecord.from_sums(float(w.sum()), float((w * w).sum()), 4, n_censored=1)
        assert rec.value == 1.0
        assert rec.stderr == pytest.approx(w.std(ddof=1) / 2.0, rel=1e-12)
        assert rec.ess == pytest.approx(16.0 / 10.0)
        assert rec.censored_weight == 0.25
        assert rec.low_confidence

    def test_zero_weights(self):
        rec = EstimateRecord.from_sums(0.0, 0.0, 100)
        assert rec.value == 0.0 and rec.stderr == 0.0 and rec.ess == 0.0

    def test_dict_round_trip(self):
        rec = EstimateRecord.from_sums(3.0, 5.0, 10, 2, {"target": "ruin", "n_max": 20})
        data = rec.to_dict()
        assert data["target"] == "ruin" and data["low_confidence"] is True
        assert EstimateRecord.from_dict(data) == rec

    def test_weight_sums_add(self):
        total = WeightSums(1.0, 2.0, 3, 1) + WeightSums(0.5, 0.25, 2, 0)
        assert total == WeightSums(1.5, 2.25, 5, 1)


class TestSchedule:
    def test_two_phase(self):
        s = TiltSchedule.two_phase(2.0, 3, 1.0, 2)
        assert [s.tilt_at(i) for i in range(1, 8)] == [2.0, 2.0, 2.0, 1.0, 1.0, 0.0, 0.0]
        assert TiltSchedule.from_dict(s.to_dict()) == s

    def test_constant_and_untilted(self):
        c = TiltSchedule.constant(1.5, 2)
        assert [c.tilt_at(i) for i in (1, 2, 3)] == [1.5, 1.5, 0.0]
        assert c.is_tilted
        u = TiltSchedule.untilted()
        assert u.kind == ScheduleKind.UNTILTED and not u.is_tilted
        assert u.to_dict() == {"kind": "untilted"}

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            TiltSchedule.constant(-1.0, 3)
        with pytest.raises(ValueError):
            TiltSchedule.two_phase(1.0, -1, 1.0, 2)


def test_stderr_matches_sample_std():
    rng = np.random.default_rng(0)
    w = rng.exponential(size=1000)
    rec = EstimateRecord.from_sums(float(w.sum()), float((w * w).sum()), w.size)
    assert rec.stderr == pytest.approx(w.std(ddof=1) / math.sqrt(w.size), rel=1e-9)
