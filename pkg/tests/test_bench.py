import csv

import pytest

from trustchain.bench import (
    CSV_HEADER,
    DEFAULT_COUNTS,
    bench_run,
    bench_size,
    expected_siblings,
    simulate_confirmation_latency,
    synthetic_sbom,
)
from trustchain.merkle import build_levels


def tree_height(n):
    """Brute force: build an n-leaf tree and count its levels."""
    return len(build_levels([bytes([i % 256]) * 32 for i in range(n)])) - 1


class TestSynthetic:
    def test_shape(self):
        sbom, raw = synthetic_sbom(3)
        assert [(a.path, a.value) for a in sbom.attributes] == [
            ("pkg/0/field", "value0"), ("pkg/1/field", "value1"), ("pkg/2/field", "value2"),
        ]
        assert raw

    def test_count(self):
        assert len(synthetic_sbom(500)[0].attributes) == 500


class TestSiblings:
    @pytest.mark.parametrize("n, k", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4), (500, 9), (512, 9), (513, 10)])
    def test_ceil_log2(self, n, k):
        assert expected_siblings(n) == k == tree_height(n)

    @pytest.mark.parametrize("n", [1, 500])
    def test_measured_path(self, n):
        assert bench_size(n, runs=1).proof_sibling_count == expected_siblings(n)


class TestBenchRun:
    def test_default_axis_writes_ten_rows(self, tmp_path):
        out = tmp_path / "bench.csv"
        records = bench_run(runs=2, out=out)
        rows = list(csv.reader(out.open()))
        assert tuple(rows[0]) == CSV_HEADER
        assert [int(r[0]) for r in rows[1:]] == list(DEFAULT_COUNTS)
        assert [int(r[4]) for r in rows[1:]] == [expected_siblings(n) for n in DEFAULT_COUNTS]
        assert all(r.vc_generation_ms > 0 and r.proof_verification_ms > 0 for r in records)

    def test_vc_generation_monotone(self):
        times = [r.vc_generation_ms for r in bench_run(runs=60)]
        assert times == sorted(times), times


class TestLatency:
    def test_mean_in_band(self):
        report = simulate_confirmation_latency(100, 12, seed=0)
        assert len(report.latencies) == 100
        assert 6 <= report.mean <= 18

    def test_latencies_bounded_by_interval(self):
        report = simulate_confirmation_latency(100, 12, seed=3)
        assert all(0 <= x <= 12 for x in report.latencies)

    def test_deterministic(self):
        assert simulate_confirmation_latency(seed=4) == simulate_confirmation_latency(seed=4)

    def test_scales_with_interval(self):
        short = simulate_confirmation_latency(100, 2, seed=0).mean
        long = simulate_confirmation_latency(100, 30, seed=0).mean
        assert short < long
