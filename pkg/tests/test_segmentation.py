import random
from fractions import Fraction

import pytest

from segmoba.baselines import brute_force_min_cost
from segmoba.prefix import Prefix, Rule, RuleSet
from segmoba.segmentation import (LengthHistogram, PlanError, Segment, _cost_matrix_unit,
                                  _cost_matrix_weighted, build_cost_matrix, depth_bound, dp_split,
                                  hash_cost, parse_plan, plan_cost, tree_cost)

OPTIMAL_PLAN = [Segment(0, 1), Segment(2, 4), Segment(5, 8)]


def random_ruleset(rng, width, n, weighted=False):
    rules = {}
    for _ in range(n):
        length = rng.randint(0, width)
        p = Prefix((rng.getrandbits(length) if length else 0) << (width - length), length)
        w = Fraction(rng.randint(1, 9), rng.randint(1, 4)) if weighted else 1
        rules[p] = Rule(p, 1, w)
    return RuleSet(width, rules.values())


def test_depth_bound():
    assert [depth_bound(n) for n in (1, 2, 3, 4, 5, 8, 9, 12)] == [1, 2, 3, 3, 4, 4, 5, 5]


def test_histogram(ref_table):
    h = LengthHistogram.from_ruleset(ref_table)
    assert h.count == [0, 0, 2, 1, 1, 1, 6, 1, 0]
    assert h.weight_sum == h.count


@pytest.mark.parametrize("seg,expected", [((5, 8), 12), ((3, 4), 4), ((0, 2), 2)])
def test_hash_cost(ref_table, seg, expected):
    assert hash_cost(LengthHistogram.from_ruleset(ref_table), Segment(*seg)) == expected


def test_tree_cost(ref_table):
    assert tree_cost(ref_table, Segment(2, 4)) == 1 + 1 + 4
    assert tree_cost(ref_table, Segment(0, 1)) == 0
    assert tree_cost(ref_table, Segment(4, 4)) == 1  # D alone


def test_cost_matrix_examples(ref_table):
    C = build_cost_matrix(ref_table)
    assert C[2, 4] == 10
    assert C.hash_part[2][4] == 4 and C.tree_part[2][4] == 6
    assert C[0, 8] == 12 + 5 * 12 == 72


def test_cost_matrix_empty():
    C = build_cost_matrix(RuleSet(8))
    assert all(C[x, y] == 0 for x in range(9) for y in range(x, 9))


def brute_matrix(rs):
    """Cell-by-cell evaluation straight from the two cost definitions."""
    h = LengthHistogram.from_ruleset(rs)
    w = rs.width
    return {(x, y): hash_cost(h, Segment(x, y)) + tree_cost(rs, Segment(x, y))
            for x in range(w + 1) for y in range(x, w + 1)}


@pytest.mark.parametrize("width,n", [(8, 12), (10, 200), (16, 500), (128, 300)])
def test_matrix_paths_match_direct_evaluation(width, n):
    rs = random_ruleset(random.Random(width * n), width, n)
    direct = brute_matrix(rs)
    for C in (_cost_matrix_unit(rs), _cost_matrix_weighted(rs)):
        assert {k: C[k] for k in direct} == direct


def test_weighted_matrix_matches_direct_evaluation():
    rs = random_ruleset(random.Random(3), 10, 150, weighted=True)
    C = build_cost_matrix(rs)
    direct = brute_matrix(rs)
    assert {k: C[k] for k in direct} == direct
    assert any(isinstance(v, Fraction) for v in direct.values())


def test_weights_shift_cost():
    p1, p2 = Prefix(0, 8), Prefix(1, 8)
    light = RuleSet(8, [Rule(p1, 1), Rule(p2, 1)])
    heavy = RuleSet(8, [Rule(p1, 1, 5), Rule(p2, 1)])
    assert build_cost_matrix(heavy)[0, 8] == 6 + 2 * 6
    assert build_cost_matrix(light)[0, 8] == 2 + 2 * 2


def test_dp_reference_plan(ref_table):
    C = build_cost_matrix(ref_table)
    table, plan = dp_split(C)
    assert plan == OPTIMAL_PLAN
    assert plan_cost(plan, C) == table.S[0][8] == 0 + 10 + 22


def test_dp_empty():
    C = build_cost_matrix(RuleSet(8))
    table, plan = dp_split(C)
    assert plan == [Segment(0, 8)]
    assert table.S[0][8] == 0


def test_plan_cost_examples(ref_table):
    C = build_cost_matrix(ref_table)
    # hash parts 2 + 4 + 12; tree parts: {A,B} one tree of 2, {C,D} split on 3 bits, [5,8] as above
    assert plan_cost([Segment(0, 2), Segment(3, 4), Segment(5, 8)], C) == (2 + 4) + (4 + 2) + (12 + 10)
    assert plan_cost([Segment(0, 8)], C) == C[0, 8]


@pytest.mark.parametrize("plan", [
    [Segment(0, 3), Segment(5, 8)],
    [Segment(1, 8)],
    [Segment(0, 7)],
    [Segment(0, 4), Segment(4, 8)],
    [],
])
def test_plan_cost_rejects_bad_plans(ref_table, plan):
    with pytest.raises(PlanError):
        plan_cost(plan, build_cost_matrix(ref_table))


def test_parse_plan():
    assert parse_plan("0-1,2-4,5-8", 8) == OPTIMAL_PLAN
    with pytest.raises(PlanError):
        parse_plan("0-1,3-8", 8)


@pytest.mark.parametrize("seed", range(40))
def test_dp_matches_brute_force(seed):
    rng = random.Random(seed)
    width = rng.randint(1, 10)
    rs = random_ruleset(rng, width, rng.randint(0, 60), weighted=seed % 3 == 0)
    C = build_cost_matrix(rs)
    table, plan = dp_split(C)
    best, _ = brute_force_min_cost(C)
    assert table.S[0][width] == best == plan_cost(plan, C)


def test_split_table_properties():
    rs = random_ruleset(random.Random(5), 12, 300)
    C = build_cost_matrix(rs)
    table, _ = dp_split(C)
    S = table.S
    for x in range(13):
        for y in range(x, 13):
            assert S[x][y] <= C[x, y]
            for k in range(x, y):
                assert S[x][y] <= S[x][k] + S[k + 1][y]


def test_empty_length_range_merges_left_for_free():
    rng = random.Random(9)
    rules = {}
    for _ in range(80):
        length = rng.choice([2, 3, 9, 10])
        p = Prefix(rng.getrandbits(length) << (12 - length), length)
        rules[p] = Rule(p, 1)
    rs = RuleSet(12, rules.values())
    C = build_cost_matrix(rs)
    # lengths 4..8 hold no rules: extending a left neighbour over them costs nothing
    for u in range(0, 4):
        assert C[u, 8] == C[u, 3]
    _, plan = dp_split(C)
    for s in plan:
        empty = all(LengthHistogram.from_ruleset(rs).count[l] == 0 for l in range(s.lo, s.hi + 1))
        if empty and s.lo > 0:
            pytest.fail(f"plan {plan} isolates empty segment {s}")


def test_brute_force_w1():
    rs = RuleSet(1, [Rule(Prefix(0, 0), 1), Rule(Prefix(1, 1), 1)])
    C = build_cost_matrix(rs)
    best, plan = brute_force_min_cost(C)
    assert best == min(C[0, 1], C[0, 0] + C[1, 1])


def test_brute_force_refuses_wide():
    with pytest.raises(ValueError):
        brute_force_min_cost(build_cost_matrix(RuleSet(17)))
