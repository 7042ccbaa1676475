import math
import statistics
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from support import KEY, TABLE2, brute_quantiles, full_spec, table2_schema, table2_server
from tap.bulletin import Bulletin
from tap.errors import (BucketTooSmall, DuplicateUser, EmptyRange, EpochOutOfOrder, GammaExceeded, InvalidQuantile,
                        SchemaError, UnknownEpoch, ValueOutOfRange, VerificationError)
from tap.prefix_tree import RangeSpec
from tap.proofs import BucketAbsenceProof, LookupProof, NonExistenceProof
from tap.server import TapServer, quantile_ok
from tap.store import RowStore
from tap.verifier import Verifier, monitor

ALL_VALUES = [v for *_, v in TABLE2]
EPOCH0 = RangeSpec(0, 0, ((0, 255),))


def test_full_range_sum_and_moments(t2_server, t2_schema):
    proof = t2_server.query_aggregate(full_spec(t2_schema))
    res = Verifier(t2_schema).check_aggregate(full_spec(t2_schema), proof, t2_server.bulletin.get(1))
    assert res.count == len(ALL_VALUES)
    assert res.sums == (sum(ALL_VALUES), sum(v * v for v in ALL_VALUES))
    assert res.mean == statistics.mean(ALL_VALUES)
    assert math.isclose(res.stddev, statistics.stdev(ALL_VALUES), abs_tol=1e-9)


def test_sub_range_sums_match_scan(t2_server, t2_schema):
    v = Verifier(t2_schema)
    d = t2_server.bulletin.get(1)
    for spec in (EPOCH0, RangeSpec(1, 1, ((1, 1),)), RangeSpec(0, 1, ((0, 0),))):
        expected = [val for t, _, ty, val in TABLE2 if spec.t_min <= t <= spec.t_max
                    and spec.types[0][0] <= t2_schema.types[0].code(ty) <= spec.types[0][1]]
        res = v.check_aggregate(spec, t2_server.query_aggregate(spec), d)
        assert res.count == len(expected) and res.sums[0] == sum(expected)


def test_aggregate_at_older_snapshot(t2_server, t2_schema):
    spec = full_spec(t2_schema)
    proof = t2_server.query_aggregate(spec, at=0)
    res = Verifier(t2_schema).check_aggregate(spec, proof, t2_server.bulletin.get(0))
    assert res.count == 3
    with pytest.raises(VerificationError):
        Verifier(t2_schema).check_aggregate(spec, proof, t2_server.bulletin.get(1))


def test_empty_range_aggregate(t2_server, t2_schema):
    spec = RangeSpec(5, 9, ((0, 255),))
    res = Verifier(t2_schema).check_aggregate(spec, t2_server.query_aggregate(spec), t2_server.bulletin.get(1))
    assert res.count == 0 and res.sums == (0, 0)


@pytest.mark.parametrize("candidate", range(0, 41))
def test_median_candidates_against_oracle(t2_server, t2_schema, candidate):
    spec = full_spec(t2_schema)
    truth = brute_quantiles(ALL_VALUES, 0.5)
    proof = t2_server.query_quantile(spec, "1/2", candidate=candidate)
    ok = Verifier(t2_schema).verify_quantile(spec, "1/2", proof, t2_server.bulletin.get(1))
    assert ok == (candidate in truth)


def test_quantile_default_is_largest_qualifying(t2_server, t2_schema):
    spec = full_spec(t2_schema)
    for q in ("0", "1/20", "1/4", "1/2", "3/4", "1"):
        proof = t2_server.query_quantile(spec, q)
        got = Verifier(t2_schema).check_quantile(spec, q, proof, t2_server.bulletin.get(1))
        assert got == max(x for x in ALL_VALUES if quantile_ok(sorted(ALL_VALUES), x, Fraction(q)))


def test_quantile_rejects_bad_q(t2_server, t2_schema):
    with pytest.raises(InvalidQuantile):
        t2_server.query_quantile(full_spec(t2_schema), "3/2")
    with pytest.raises(InvalidQuantile):
        t2_server.query_quantile(full_spec(t2_schema), "abc")


def test_min_and_max(t2_server, t2_schema):
    v = Verifier(t2_schema)
    d = t2_server.bulletin.get(1)
    full = full_spec(t2_schema)
    assert v.check_minmax(EPOCH0, t2_server.query_minmax(EPOCH0, "min"), d, "min") == 11
    assert v.check_minmax(full, t2_server.query_minmax(full, "max"), d, "max") == 36
    assert v.check_minmax(full, t2_server.query_minmax(full, "min"), d, "min") == min(ALL_VALUES)


@pytest.mark.parametrize("mode,claim", [("min", 12), ("min", 10), ("max", 35), ("max", 37)])
def test_dishonest_extremes_rejected(t2_server, t2_schema, mode, claim):
    full = full_spec(t2_schema)
    proof = t2_server.query_minmax(full, mode, claim=claim)
    assert not Verifier(t2_schema).verify_minmax(full, proof, t2_server.bulletin.get(1), mode)


def test_minmax_over_empty_range(t2_server):
    with pytest.raises(EmptyRange):
        t2_server.query_minmax(RangeSpec(5, 6, ((0, 255),)), "min")


def test_lookup_and_absence(t2_server, t2_schema):
    v = Verifier(t2_schema)
    d = t2_server.bulletin.get(1)
    res = ("residential",)
    for t, user, ty, value in TABLE2:
        proof = t2_server.lookup(user, (ty,), t)
        assert isinstance(proof, LookupProof)
        assert v.check_lookup(proof, user, (ty,), t, t2_server.epoch_secret(user, t), d) == value
    bob = t2_server.lookup("Bob", res, 0)
    assert not v.verify_lookup(bob, "Bob", res, 0, t2_server.epoch_secret("Bob", 0), d, expected_value=25)
    assert not v.verify_lookup(bob, "Bob", res, 0, t2_server.epoch_secret("Bob", 1), d)
    assert not v.verify_lookup(bob, "Alice", res, 0, t2_server.epoch_secret("Bob", 0), d)

    dave = t2_server.lookup("Dave", res, 0)
    assert isinstance(dave, NonExistenceProof)
    v.check_nonexistence(dave, "Dave", res, 0, d)
    assert not v.verify_nonexistence(dave, "Bob", res, 0, d)

    erin = t2_server.lookup("Erin", ("industrial",), 0)
    assert isinstance(erin, BucketAbsenceProof)
    v.check_nonexistence(erin, "Erin", ("industrial",), 0, d)
    assert not v.verify_nonexistence(erin, "Erin", ("industrial",), 1, d)


def test_lookup_outside_snapshot(t2_server):
    with pytest.raises(UnknownEpoch):
        t2_server.lookup("Bob", ("residential",), 1, at=0)


def test_insert_validation():
    server = TapServer(table2_schema(gamma=40), KEY)
    with pytest.raises(EpochOutOfOrder):
        server.insert_epoch(1, [])
    with pytest.raises(DuplicateUser):
        server.insert_epoch(0, [("a", ("residential",), 1), ("a", ("industrial",), 2)])
    with pytest.raises(GammaExceeded):
        server.insert_epoch(0, [("a", ("residential",), 41)])
    with pytest.raises(ValueOutOfRange):
        server.insert_epoch(0, [("a", ("residential",), -1)])
    with pytest.raises(SchemaError):
        server.insert_epoch(0, [("a", ("commercial",), 1)])
    assert server.epoch == -1 and len(server.store) == 0
    server.insert_epoch(0, [("a", ("residential",), 40)])
    assert server.epoch == 0


def test_min_bucket_size_policy():
    server = table2_server(table2_schema(min_bucket_size=2))
    with pytest.raises(BucketTooSmall):
        server.query_aggregate(full_spec(server.schema))
    spec = RangeSpec(0, 1, ((0, 0),))
    assert server.query_aggregate(spec) is not None


def test_empty_epochs_publish_digests():
    server = TapServer(table2_schema(), KEY)
    d0 = server.insert_epoch(0, [])
    assert d0 == server.bulletin.get(-1)
    server.insert_epoch(1, [("a", ("residential",), 3)])
    assert server.bulletin.epochs() == [-1, 0, 1]


def test_restart_replays_same_digests(tmp_path):
    schema = table2_schema()
    bulletin, store = Bulletin(tmp_path / "b.bin"), RowStore(tmp_path / "rows.bin")
    first = TapServer(schema, KEY, bulletin, store)
    for t in (0, 1):
        first.insert_epoch(t, [(u, (ty,), v) for tt, u, ty, v in TABLE2 if tt == t])
    again = TapServer(schema, KEY, Bulletin(tmp_path / "b.bin"), RowStore(tmp_path / "rows.bin"))
    assert again.epoch == 1
    assert again.digest(0) == first.digest(0) and again.digest(1) == first.digest(1)
    proof = again.query_aggregate(full_spec(schema))
    assert Verifier(schema).check_aggregate(full_spec(schema), proof, first.bulletin.get(1)).count == 8


def test_monitor_fixture(t2_server, t2_schema):
    v = Verifier(t2_schema)
    res = ("residential",)

    def run(user, expected):
        seeds = {t: t2_server.epoch_secret(user, t) for t in expected}
        return monitor(v, lambda t: t2_server.lookup(user, res, t, at=t), t2_server.bulletin.get, user, res,
                       expected, seeds)

    assert run("Dave", {0: None, 1: 26}).clean
    assert run("Bob", {0: 24, 1: 26}).clean
    wrong = run("Bob", {0: 24, 1: 27})
    assert not wrong.clean and wrong.findings[1].status == "mismatch"
    missing = run("Dave", {0: 5, 1: 26})
    assert missing.findings[0].status == "missing"
    surprise = run("Bob", {0: None})
    assert surprise.findings[0].status == "unexpected-presence"


def test_swapped_proofs_fail_cleanly(t2_server, t2_schema):
    v = Verifier(t2_schema)
    d = t2_server.bulletin.get(1)
    full = full_spec(t2_schema)
    agg = t2_server.query_aggregate(full)
    assert not v.verify_minmax(full, agg, d, "min")
    assert not v.verify_quantile(full, "1/2", agg, d)
    assert not v.verify_lookup(agg, "Bob", ("residential",), 0, 1, d)


@given(st.lists(st.integers(10, 30), min_size=1, max_size=8), st.lists(st.integers(0, 40), max_size=6),
       st.sampled_from(["1/4", "1/2", "3/4"]))
def test_quantile_robust_to_few_injected_values(honest, injected, q):
    q = Fraction(q)
    data = honest + injected
    n, f = len(data), len(injected)
    server = TapServer(table2_schema(), KEY)
    server.insert_epoch(0, [(f"u{i}", ("residential",), v) for i, v in enumerate(data)])
    spec = full_spec(server.schema)
    proved = Verifier(server.schema).check_quantile(spec, q, server.query_quantile(spec, q), server.digest(0))
    for x in brute_quantiles(data, q) | {proved}:
        if f < n * q:
            assert x >= min(honest)
        if f < n * (1 - q):
            assert x <= max(honest)


def test_enough_injected_values_move_the_quantile():
    honest = [20, 21, 22, 23]
    for q in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
        f = 1
        while f < max(q, 1 - q) * (len(honest) + f):
            f += 1
        low, high = brute_quantiles(honest + [0] * f, q), brute_quantiles(honest + [40] * f, q)
        assert min(low) < min(honest) or max(high) > max(honest)
