import json

from tap.bench import SIZE_ORDER, Workload, run_bench, scaling_check

SMALL = Workload(users=24, regions=3, epochs=3, window=2, seed=3)


def test_bench_records_every_query():
    summary = run_bench(SMALL, repetitions=1, windows=(1, 3))
    (records,) = summary.records
    assert [r.query for r in records] == ["lookup", "sum", "count", "average", "min", "max", "median", "p05",
                                          "audit"]
    for r in records:
        assert r.proof_size > 0
        assert min(r.prefix_gen, r.prefix_verify, r.sum_gen, r.sum_verify, r.other) >= 0
        assert abs(r.categories - r.total) < 1e-6
    assert set(summary.group_sizes()) == set(SIZE_ORDER)
    assert summary.window_monotone()
    assert summary.audit_bytes_per_epoch() == summary.sizes()["audit"] / 2
    json.dumps(summary.to_dict())


def test_scaling_report_shape():
    report = scaling_check(sizes=(40, 160), users=20, fixed_range_epochs=2, probes=2)
    assert [p.rows for p in report.points] == [40, 160]
    assert report.row_ratio == 4
    # the fixed range is already complete at the first point, so its proof cannot change size
    assert report.size_growth <= 32 * 32
    json.dumps(report.to_dict())
