import io

import pytest

from segmoba.baselines import linear_lookup
from segmoba.engine import SegMobaTree
from segmoba.prefix import PrefixRelation, RuleSet, prefix_relation, serialize_ruleset
from segmoba.workload import (GenConfig, GenError, TraceConfig, apply_updates, gen_ruleset, gen_trace,
                              gen_update_stream, parse_histogram, read_trace, read_updates, write_trace,
                              write_updates)


def test_ruleset_is_deterministic():
    cfg = GenConfig(128, 2000, {48: 0.2, 64: 0.5, 128: 0.3}, seed=7)
    assert serialize_ruleset(gen_ruleset(cfg)) == serialize_ruleset(gen_ruleset(cfg))
    other = GenConfig(128, 2000, {48: 0.2, 64: 0.5, 128: 0.3}, seed=8)
    assert serialize_ruleset(gen_ruleset(cfg)) != serialize_ruleset(gen_ruleset(other))


def test_all_length_64():
    rs = gen_ruleset(GenConfig(128, 100_000, {64: 1.0}, seed=1))
    assert len(rs) == 100_000
    assert {r.prefix.length for r in rs} == {64}


def test_histogram_within_two_percent():
    target = {32: 0.05, 48: 0.15, 64: 0.4, 96: 0.25, 128: 0.15}
    rs = gen_ruleset(GenConfig(128, 5000, target, seed=3))
    for length, frac in target.items():
        got = sum(1 for r in rs if r.prefix.length == length) / len(rs)
        assert abs(got - frac) <= 0.02


def test_extending_base_ruleset(ref_table):
    cfg = GenConfig(8, 40, {5: 0.2, 7: 0.5, 8: 0.3}, seed=2, base_ruleset=ref_table)
    rs = gen_ruleset(cfg)
    assert len(rs) == 40
    for r in rs:
        assert any(prefix_relation(b.prefix, r.prefix, 8) in (PrefixRelation.EQUAL,
                                                             PrefixRelation.FIRST_CONTAINS_SECOND)
                   for b in ref_table)


def test_impossible_histogram():
    with pytest.raises(GenError):
        gen_ruleset(GenConfig(8, 10, {2: 1.0}))


@pytest.mark.parametrize("kwargs", [
    dict(length_histogram={64: 0.5}),
    dict(rule_count=0),
    dict(length_histogram={200: 1.0}),
])
def test_bad_configs(kwargs):
    with pytest.raises(GenError):
        GenConfig(**kwargs)


def test_parse_histogram():
    assert parse_histogram("64:0.5, 96:0.5") == {64: 0.5, 96: 0.5}
    with pytest.raises(GenError):
        parse_histogram("64")


def test_trace_repeat_blocks(ref_table):
    t = gen_trace(ref_table, TraceConfig(50, repeat_factor=100, seed=7))
    assert len(t) == 5000
    for i in range(0, 5000, 100):
        assert len(set(t[i:i + 100])) == 1


def test_trace_all_matched(ref_table):
    rules = list(ref_table)
    for ip in gen_trace(ref_table, TraceConfig(500, seed=1)):
        assert linear_lookup(rules, ip, 8) is not None


def test_trace_deterministic(ref_table):
    cfg = TraceConfig(200, repeat_factor=2, match_fraction=0.5, seed=9)
    assert gen_trace(ref_table, cfg) == gen_trace(ref_table, cfg)


def test_trace_needs_rules():
    with pytest.raises(GenError):
        gen_trace(RuleSet(8), TraceConfig(5))
    assert len(gen_trace(RuleSet(8), TraceConfig(5, match_fraction=0.0))) == 5


def test_trace_file_roundtrip():
    rs = gen_ruleset(GenConfig(128, 100, {64: 1.0}, seed=1))
    t = gen_trace(rs, TraceConfig(50, seed=1))
    buf = io.StringIO()
    write_trace(t, 128, buf)
    assert ":" in buf.getvalue().splitlines()[0]
    assert read_trace(io.StringIO(buf.getvalue()), 128) == t


def test_update_stream_two_ops(ref_table):
    ups = gen_update_stream(ref_table, 2, seed=1)
    assert [u.op for u in ups] == ["D", "I"]
    assert ups[0].prefix in ref_table
    assert ups[1].rule.prefix not in ref_table


def test_update_stream_deterministic_and_bounded(ref_table):
    a = gen_update_stream(ref_table, 301, seed=4)
    assert a == gen_update_stream(ref_table, 301, seed=4)
    size = len(ref_table)
    live = {r.prefix for r in ref_table}
    for u in a:
        if u.op == "D":
            live.remove(u.prefix)
        else:
            assert u.rule.prefix not in live
            live.add(u.rule.prefix)
        assert abs(len(live) - size) <= 1


def test_update_stream_roundtrip_and_rebuild():
    rs = gen_ruleset(GenConfig(128, 1500, {48: 0.3, 64: 0.4, 128: 0.3}, seed=5))
    ups = gen_update_stream(rs, 3000, seed=6)
    buf = io.StringIO()
    write_updates(ups, 128, buf)
    again = list(read_updates(io.StringIO(buf.getvalue()), 128))
    assert [(u.op, u.target) for u in again] == [(u.op, u.target) for u in ups]

    engine = SegMobaTree.build(rs)
    apply_updates(engine, again)
    final = {r.prefix: r for r in rs}
    for u in ups:
        if u.op == "D":
            del final[u.prefix]
        else:
            final[u.rule.prefix] = u.rule
    fresh = SegMobaTree.build(RuleSet(128, final.values()))
    for ip in gen_trace(RuleSet(128, final.values()), TraceConfig(2000, seed=3, match_fraction=0.9)):
        assert engine.lookup(ip) == fresh.lookup(ip)
