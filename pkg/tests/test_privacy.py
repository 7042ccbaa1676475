import itertools
from fractions import Fraction

import numpy as np
import pytest

from leakage import (QUANTILES, USERS, all_sorted_buckets, bucket_values, determined, determined_by_sums,
                     honest_observation, observed_from_proof)
from support import table2_schema, table2_server


@pytest.fixture(scope="module")
def sum_only_server():
    return table2_server(table2_schema(z=1))


@pytest.mark.parametrize("f", range(len(USERS) + 1))
def test_sum_query_determines_rest_iff_fewer_than_two_unknown(sum_only_server, f):
    for known in itertools.combinations(USERS, f):
        assert determined_by_sums(sum_only_server, known) == (len(USERS) - f < 2), known


def test_squared_sums_pin_down_two_unknowns(t2_server):
    # with the second power sum published, any two unknowns are fixed as a multiset
    for known in itertools.combinations(USERS, 2):
        assert determined_by_sums(t2_server, known)
    # on this bucket even three unknowns can be fixed: only {26, 26, 27} fits once Alice is known
    assert [k for k in itertools.combinations(USERS, 1) if determined_by_sums(t2_server, k)] == [("Alice",)]
    assert not determined_by_sums(t2_server, ())


@pytest.fixture(scope="module")
def space():
    buckets = all_sorted_buckets()
    return buckets, {q: honest_observation(buckets, q) for q in QUANTILES}


def test_model_matches_real_proofs(t2_server, space):
    buckets, obs = space
    truth = np.array(sorted(bucket_values(t2_server).values()))
    row = int(np.flatnonzero((buckets == truth).all(1))[0])
    for q in QUANTILES:
        assert tuple(int(a[row]) for a in obs[q]) == observed_from_proof(t2_server, q)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_k_quantile_queries_reveal_at_most_k_values(t2_server, space, k):
    buckets, obs = space
    for qs in itertools.combinations(QUANTILES, k):
        mask = np.ones(len(buckets), dtype=bool)
        for q in qs:
            seen = observed_from_proof(t2_server, q)
            mask &= (obs[q][0] == seen[0]) & (obs[q][1] == seen[1]) & (obs[q][2] == seen[2])
        positions, values = determined(buckets, mask)
        assert len(values) <= k, (qs, positions, values)


def test_tied_leaves_share_one_revealed_value(t2_server, space):
    # the median 26 is held by two leaves; one query fixes both, but only one value
    buckets, obs = space
    seen = observed_from_proof(t2_server, Fraction(1, 2))
    mask = (obs[Fraction(1, 2)][0] == seen[0]) & (obs[Fraction(1, 2)][1] == seen[1]) \
        & (obs[Fraction(1, 2)][2] == seen[2])
    positions, values = determined(buckets, mask)
    assert positions == [1, 2] and values == {26}


def test_integer_gaps_can_force_an_extra_value():
    # two revealed values two apart with one leaf between them fix that leaf too
    buckets = all_sorted_buckets()
    truth = np.array([5, 10, 11, 12])
    obs = {q: honest_observation(buckets, q) for q in (Fraction(1, 4), Fraction(1))}
    row = int(np.flatnonzero((buckets == truth).all(1))[0])
    mask = np.ones(len(buckets), dtype=bool)
    for o in obs.values():
        mask &= (o[0] == o[0][row]) & (o[1] == o[1][row]) & (o[2] == o[2][row])
    _, values = determined(buckets, mask)
    assert values == {10, 11, 12}
