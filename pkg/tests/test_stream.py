import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchlab.bernstein import Moment
from sketchlab.rng import RandomSource
from sketchlab.stream import (CARDINALITY, SUM, Bernstein, Delete, ExactSum, ExactTracker, Inc,
                              Insert, KeyRange, KeySet, ResetKey, ResetPred, StreamParseError,
                              exact_statistic, format_op, generate_stream, insert_delete_cycles,
                              parse_stream, parse_stream_file, to_cardinality_stream,
                              weighted_incs, write_stream_file)


def test_apply_examples():
    tr = ExactTracker()
    tr.apply(Inc(7, 3))
    assert tr.values == {7: 3}
    tr.apply(ResetKey(7))
    assert tr.values == {}
    tr = ExactTracker()
    tr.apply(Inc(1, 2)).apply(Inc(2, 5)).apply(ResetPred(KeyRange(1, 1)))
    assert tr.values == {2: 5}
    assert tr.t == 3


def test_exact_statistic_examples():
    values = {1: 2.0, 2: 5.0}
    assert exact_statistic(values, SUM) == 7
    assert exact_statistic(values, CARDINALITY) == 2
    assert exact_statistic({1: 4.0}, Bernstein(Moment(0.5))) == 2


def test_negative_and_overflowing_increments_rejected():
    with pytest.raises(ValueError):
        Inc(1, -1.0)
    with pytest.raises(ValueError):
        Inc(1, math.inf)
    tr = ExactTracker()
    tr.apply(Inc(1, 1e308))
    with pytest.raises(OverflowError):
        tr.apply(Inc(1, 1e308))


def test_key_range_checked():
    with pytest.raises(ValueError):
        Insert(-1)
    with pytest.raises(ValueError):
        ResetKey(1 << 64)
    Insert((1 << 64) - 1)


def test_to_cardinality_stream():
    assert to_cardinality_stream(Insert(3)) == [ResetKey(3), Inc(3, 1.0)]
    assert to_cardinality_stream(Delete(3)) == [ResetKey(3)]
    assert to_cardinality_stream(Inc(3, 2.5)) == [Inc(3, 2.5)]


def test_zero_increment_is_noop():
    tr = ExactTracker()
    tr.apply(Inc(4, 0.0))
    assert tr.values == {}
    assert tr.statistic(CARDINALITY) == 0


def test_generators():
    rng = RandomSource(0)
    ops = generate_stream("distinct:3", rng)
    assert len({op.key for op in ops}) == 3 and all(isinstance(op, Insert) for op in ops)
    ops = insert_delete_cycles(1, 2, rng)
    k = ops[0].key
    assert ops == [Insert(k), Delete(k), Insert(k), Delete(k)]
    assert generate_stream("distinct:0", rng) == []
    with pytest.raises(ValueError):
        generate_stream("bogus:1", rng)


def test_weighted_incs_range_over_many_seeds():
    for seed in range(10**4):
        ops = weighted_incs(2, 1.0, 4.0, RandomSource(seed))
        assert len(ops) == 2
        assert all(1.0 <= op.delta <= 4.0 for op in ops)


def test_generator_determinism():
    a = generate_stream("oscillate:20:3", RandomSource(11))
    b = generate_stream("oscillate:20:3", RandomSource(11))
    assert a == b


def test_parse_examples(tmp_path):
    assert list(parse_stream(["INC 7 3.5", "RST 7"])) == [Inc(7, 3.5), ResetKey(7)]
    assert list(parse_stream(["# c", "INS 2"])) == [Insert(2)]
    with pytest.raises(StreamParseError) as err:
        list(parse_stream(["INC 7 -1"]))
    assert err.value.lineno == 1
    with pytest.raises(StreamParseError) as err:
        list(parse_stream(["INS 1", "", "FOO 2"]))
    assert err.value.lineno == 3
    path = tmp_path / "s.txt"
    path.write_text("RSTR 1 5\nRSTS 3 9\nDEL 4\n")
    ops = parse_stream_file(path)
    assert ops == [ResetPred(KeyRange(1, 5)), ResetPred(KeySet([3, 9])), Delete(4)]


keys = st.integers(0, 7)
ops_strategy = st.lists(st.one_of(
    st.builds(Inc, keys, st.floats(0, 100, allow_nan=False)),
    st.builds(ResetKey, keys),
    st.builds(Insert, keys),
    st.builds(Delete, keys),
    st.builds(lambda a, b: ResetPred(KeyRange(min(a, b), max(a, b))), keys, keys),
    st.builds(lambda ks: ResetPred(KeySet(ks)), st.lists(keys, max_size=3)),
), max_size=60)


def naive_replay(ops):
    values, history = {}, []
    for op in ops:
        for sub in to_cardinality_stream(op):
            if isinstance(sub, Inc):
                values[sub.key] = values.get(sub.key, 0.0) + sub.delta
            elif isinstance(sub, ResetKey):
                values.pop(sub.key, None)
            else:
                for k in [k for k in values if k in sub.pred]:
                    del values[k]
        history.append({k: v for k, v in values.items() if v > 0})
    return history


@given(ops_strategy)
def test_tracker_matches_naive_replay(ops):
    tr = ExactTracker()
    peak_card = peak_sum = 0.0
    for op, expect in zip(ops, naive_replay(ops)):
        tr.apply(op)
        assert tr.values == expect
        assert all(v > 0 for v in tr.values.values())
        card, total = len(expect), math.fsum(expect.values())
        assert tr.statistic(CARDINALITY) == card
        assert tr.statistic(SUM) == total
        peak_card, peak_sum = max(peak_card, card), max(peak_sum, total)
        assert tr.prefix_max[CARDINALITY] == peak_card
        assert tr.prefix_max[SUM] == peak_sum


@given(st.lists(st.one_of(st.builds(Insert, keys), st.builds(Delete, keys)), max_size=60))
def test_cardinality_reduction_equivalence(ops):
    direct, translated = ExactTracker(), ExactTracker()
    for op in ops:
        direct.apply(op)
        for sub in to_cardinality_stream(op):
            translated.apply(sub)
        assert translated.statistic(SUM) == direct.statistic(CARDINALITY)


@given(ops_strategy)
def test_text_round_trip(ops):
    lines = [format_op(op) for op in ops]
    assert list(parse_stream(lines)) == ops


def test_write_and_read_file(tmp_path):
    ops = [Inc(1, 0.1), Insert(2), Delete(2), ResetPred(KeyRange(0, 9))]
    write_stream_file(ops, tmp_path / "x.txt")
    assert parse_stream_file(tmp_path / "x.txt") == ops


@settings(max_examples=200)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), max_size=40))
def test_exact_sum_is_fsum(xs):
    acc = ExactSum()
    for x in xs:
        acc.add(x)
    assert acc.value == math.fsum(xs)
    for x in xs[::2]:
        acc.add(-x)
    assert acc.value == math.fsum(xs[1::2])
