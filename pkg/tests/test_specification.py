import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forceagg.evidence import HardAssignment, TypeUniverse, build_conflict_matrix, make_report
from forceagg.specification import (
    ClusterPartition,
    credibility,
    credibility_table,
    extract_cores,
    plausibility,
    reports_by_id,
)

from conftest import random_instance

XY = TypeUniverse(("X", "Y"))


def setup(groups):
    """groups: list of clusters, each a list of (id, labels, mass)."""
    reps = [make_report(rid, XY, labels, mass) for g in groups for rid, labels, mass in g]
    part = ClusterPartition(len(groups), tuple(tuple(rid for rid, _, _ in g) for g in groups))
    return reps, part, build_conflict_matrix(reps)


class TestPartition:
    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            ClusterPartition(2, (("a", "b"), ("b",)))

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            ClusterPartition(3, (("a",), ("b",)))

    def test_roundtrip(self):
        a = HardAssignment({"a": 2, "b": 1, "c": 2}, 2)
        p = ClusterPartition.from_assignment(a, ["a", "b", "c"])
        assert p.members == (("b",), ("a", "c"))
        assert p.to_assignment() == a


class TestPlausibility:
    def test_alone(self):
        _, part, j = setup([[("a", "X", 0.5)], []])
        assert plausibility("a", 1, part, j) == 1.0
        assert plausibility("a", 2, part, j) == 1.0

    def test_one_disjoint(self):
        _, part, j = setup([[("a", "X", 0.5)], [("b", "Y", 0.5)]])
        assert plausibility("a", 2, part, j) == pytest.approx(0.75)

    def test_compatible(self):
        _, part, j = setup([[("a", ["X", "Y"], 0.9), ("b", "X", 0.9), ("c", "Y", 0.9)]])
        assert plausibility("a", 1, part, j) == 1.0


class TestCredibility:
    def test_single_cluster_conflict_free(self):
        _, part, j = setup([[("a", "X", 0.9), ("b", "X", 0.8)]])
        assert credibility("a", 1, part, j) == 1.0

    def test_ambiguous(self):
        _, part, j = setup([[("a", ["X", "Y"], 0.9), ("b", "X", 0.8)], [("c", "Y", 0.8)]])
        assert credibility("a", 1, part, j) == pytest.approx(0.5)

    def test_one_over_one_point_one(self):
        # other-cluster plausibility exp(-J) = 0.1 needs s_a s_c = 0.9
        _, part, j = setup([[("a", "X", 0.95)],
                            [("c", "Y", 0.9 / 0.95)]])
        pls_other = plausibility("a", 2, part, j)
        assert pls_other == pytest.approx(0.1)
        assert credibility("a", 1, part, j) == pytest.approx(1 / 1.1, abs=1e-3)

    def test_near_exclusive_is_one(self):
        groups = [[("a", "X", 0.999), ("b", "X", 0.999)],
                  [(f"y{i}", "Y", 0.999) for i in range(3)]]
        _, part, j = setup(groups)
        assert credibility("a", 1, part, j) == pytest.approx(1.0, abs=1e-3)

    def test_table_matches_scalar(self):
        reps, k = random_instance(np.random.default_rng(5), k_range=(3, 3))
        j = build_conflict_matrix(reps)
        part = ClusterPartition.from_assignment(
            HardAssignment({r.id: i % k + 1 for i, r in enumerate(reps)}, k), j.ids)
        for rec in credibility_table(part, j):
            assert rec.credibility == pytest.approx(credibility(rec.report_id, rec.home, part, j), rel=1e-12)
            for b in range(k):
                assert rec.plausibilities[b] == pytest.approx(plausibility(rec.report_id, b + 1, part, j))


class TestCores:
    def test_conflict_free_singletons_all_core(self):
        _, part, j = setup([[("a", "X", 0.9)], [("b", "Y", 0.9)]])
        cores = extract_cores(part, j, 0.5)
        assert cores.cores == (("a",), ("b",)) and cores.non_cores == ((), ())

    def test_ambiguous_report_non_core(self):
        _, part, j = setup([[("a", ["X", "Y"], 0.9), ("b", "X", 0.8)], [("c", "Y", 0.8)]])
        cores = extract_cores(part, j, 0.6)
        assert "a" in cores.non_cores[0] and "b" in cores.cores[0]

    def test_even_split_at_default_threshold_stays_out(self):
        _, part, j = setup([[("a", ["X", "Y"], 0.9), ("b", "X", 0.8)], [("c", "Y", 0.8)]])
        assert "a" in extract_cores(part, j).non_cores[0]

    def test_threshold_one_empties_cores(self):
        _, part, j = setup([[("a", "X", 0.9)], [("b", "Y", 0.9)]])
        cores = extract_cores(part, j, 1.0)
        assert cores.cores == ((), ()) and cores.empty_cores == [1, 2]

    @pytest.mark.parametrize("t", [0.0, -0.1, 1.1])
    def test_invalid_threshold(self, t):
        _, part, j = setup([[("a", "X", 0.9)]])
        with pytest.raises(ValueError):
            extract_cores(part, j, t)

    def test_duplicate_ids(self):
        r = make_report("a", XY, "X", 0.5)
        with pytest.raises(ValueError):
            reports_by_id([r, r])


def random_partition(seed):
    rng = np.random.default_rng(seed)
    reps, k = random_instance(rng, k_range=(2, 3))
    j = build_conflict_matrix(reps)
    labels = rng.integers(0, k, size=len(reps))
    return ClusterPartition.from_assignment(HardAssignment.from_labels(j.ids, labels, k), j.ids), j, rng


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_credibility_bounds(seed):
    part, j, _ = random_partition(seed)
    for rec in credibility_table(part, j):
        assert 0.0 <= rec.credibility <= rec.plausibilities[rec.home - 1] + 1e-15
        assert all(0.0 < p <= 1.0 for p in rec.plausibilities)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_threshold_shrinks_cores(seed, t1, t2):
    part, j, _ = random_partition(seed)
    lo, hi = sorted((t1, t2))
    a, b = extract_cores(part, j, lo), extract_cores(part, j, hi)
    for big, small in zip(a.cores, b.cores):
        assert set(small) <= set(big)
    for c, nc, members in zip(b.cores, b.non_cores, part.members):
        assert sorted(c + nc) == sorted(members) and not set(c) & set(nc)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_relabel_invariance(seed):
    part, j, rng = random_partition(seed)
    perm = rng.permutation(part.k)
    relabeled = ClusterPartition(part.k, tuple(part.members[p] for p in perm))
    before = {rec.report_id: rec.credibility for rec in credibility_table(part, j)}
    after = {rec.report_id: rec.credibility for rec in credibility_table(relabeled, j)}
    assert before == pytest.approx(after, rel=1e-12)
