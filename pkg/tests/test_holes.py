import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saratoga.holes import HoleTracker, RangeBeyondEnd, subtract_ranges


class BitmapOracle:
    """One boolean per byte; the trivially-correct reassembly map."""

    def __init__(self, size: int):
        self.size = size
        self.bits = bytearray(size)

    def mark(self, offset: int, length: int):
        for i in range(offset, offset + length):
            self.bits[i] = 1

    def ranges(self):
        out, start = [], None
        for i, b in enumerate(self.bits):
            if b and start is None:
                start = i
            elif not b and start is not None:
                out.append((start, i))
                start = None
        if start is not None:
            out.append((start, self.size))
        return out

    def holes(self):
        out, start = [], None
        for i, b in enumerate(self.bits):
            if not b and start is None:
                start = i
            elif b and start is not None:
                out.append((start, i))
                start = None
        if start is not None:
            out.append((start, self.size))
        return out

    def complete(self):
        return all(self.bits)


class TestExamples:
    def test_two_marks_leave_middle_hole(self):
        t = HoleTracker(3000)
        t.mark_received(0, 1000)
        t.mark_received(2000, 1000)
        assert t.hole_list() == [(1000, 2000)]

    def test_overlap_merges(self):
        t = HoleTracker(100)
        t.mark_received(0, 50)
        t.mark_received(25, 50)
        assert t.ranges == [(0, 75)]
        assert t.hole_list() == [(75, 100)]

    def test_fresh_tracker_is_one_big_hole(self):
        assert HoleTracker(10).hole_list() == [(0, 10)]

    def test_fully_received_has_no_holes(self):
        t = HoleTracker(10)
        t.mark_received(0, 10)
        assert t.hole_list() == []
        assert t.is_complete()

    def test_hole_truncation(self):
        t = HoleTracker(1000)
        for i in range(100):
            t.mark_received(10 * i + 5, 5)  # 100 gaps of 5 bytes
        holes = t.hole_list(64)
        assert len(holes) == 64
        assert holes == t.hole_list()[:64]

    def test_empty_file_complete_immediately(self):
        assert HoleTracker(0).is_complete()

    def test_streaming_never_completes(self):
        t = HoleTracker(None)
        t.mark_received(0, 10)
        assert not t.is_complete()

    def test_streaming_bounded_by_high_water(self):
        t = HoleTracker(None)
        t.mark_received(100, 50)
        assert t.high_water == 150
        assert t.hole_list() == [(0, 100)]

    def test_mark_beyond_end_rejected(self):
        t = HoleTracker(100)
        with pytest.raises(RangeBeyondEnd):
            t.mark_received(90, 20)

    def test_zero_length_rejected(self):
        with pytest.raises(ValueError):
            HoleTracker(10).mark_received(0, 0)

    def test_mark_returns_new_subranges(self):
        t = HoleTracker(100)
        assert t.mark_received(10, 20) == [(10, 30)]
        assert t.mark_received(10, 20) == []
        assert t.mark_received(5, 30) == [(5, 10), (30, 35)]

    def test_adjacent_ranges_merge(self):
        t = HoleTracker(100)
        t.mark_received(0, 10)
        t.mark_received(10, 10)
        assert t.ranges == [(0, 20)]

    def test_near_128_bit_top(self):
        top = 2**128 - 1
        t = HoleTracker(top)
        t.mark_received(top - 5, 5)
        t.mark_received(0, 1)
        assert t.hole_list(2) == [(1, top - 5)]
        assert t.high_water == top
        t2 = HoleTracker(None)
        t2.mark_received(2**64, 1000)
        assert t2.hole_list(1) == [(0, 2**64)]


def _random_ops(seed: int, space: int, n_ops: int):
    rng = random.Random(seed)
    for _ in range(n_ops):
        off = rng.randrange(space)
        length = rng.randrange(1, min(space - off, 4096) + 1)
        yield off, length


class TestBitmapOracle:
    @pytest.mark.parametrize("seed", range(20))
    def test_random_ops_match_oracle(self, seed):
        space = 64 * 1024
        t = HoleTracker(space)
        oracle = BitmapOracle(space)
        for off, length in _random_ops(seed, space, 500):
            t.mark_received(off, length)
            oracle.mark(off, length)
        assert t.ranges == oracle.ranges()
        assert t.hole_list() == oracle.holes()
        assert t.is_complete() == oracle.complete()

    @given(st.lists(st.tuples(st.integers(0, 4095), st.integers(1, 512)),
                    max_size=60))
    @settings(max_examples=200)
    def test_hypothesis_ops_match_oracle(self, ops):
        space = 4096 + 512
        t = HoleTracker(space)
        oracle = BitmapOracle(space)
        for off, length in ops:
            t.mark_received(off, length)
            oracle.mark(off, length)
            assert t.ranges == oracle.ranges()
        assert t.hole_list() == oracle.holes()
        assert t.is_complete() == oracle.complete()

    def test_unknown_size_oracle(self):
        space = 8192
        t = HoleTracker(None)
        oracle = BitmapOracle(space)
        for off, length in _random_ops(11, space - 4096, 300):
            t.mark_received(off, length)
            oracle.mark(off, length)
        hw = t.high_water
        assert t.hole_list() == [h for h in oracle.holes() if h[0] < hw]


class TestProperties:
    def test_order_insensitive(self):
        marks = list(_random_ops(3, 10000, 80))
        trackers = []
        for seed in (1, 2, 3):
            rng = random.Random(seed)
            t = HoleTracker(10000)
            for off, length in rng.sample(marks, len(marks)):
                t.mark_received(off, length)
            trackers.append(t.ranges)
        assert trackers[0] == trackers[1] == trackers[2]

    def test_monotone_growth_and_completion(self):
        t = HoleTracker(5000)
        seen = 0
        complete_seen = False
        for off, length in _random_ops(5, 5000, 400):
            t.mark_received(off, length)
            assert t.received_bytes >= seen
            seen = t.received_bytes
            if complete_seen:
                assert t.is_complete()
            complete_seen = t.is_complete()
        t.mark_received(0, 5000)
        assert t.is_complete()

    def test_hole_list_well_formed(self):
        t = HoleTracker(100_000)
        for off, length in _random_ops(8, 100_000, 200):
            t.mark_received(off, length)
            holes = t.hole_list(10)
            assert len(holes) <= 10
            prev_end = -1
            for s, e in holes:
                assert s < e
                assert s > prev_end
                prev_end = e

    def test_invariant_ranges_disjoint_nonadjacent(self):
        t = HoleTracker(None)
        for off, length in _random_ops(13, 1 << 20, 500):
            t.mark_received(off, length)
            prev_end = None
            for s, e in t.ranges:
                assert s < e
                if prev_end is not None:
                    assert s > prev_end + 0  # disjoint
                    assert s - prev_end >= 1  # separated by at least a byte
                prev_end = e


class TestSubtractRanges:
    def test_basic(self):
        assert subtract_ranges([(0, 100)], [(20, 30), (50, 60)]) == \
            [(0, 20), (30, 50), (60, 100)]

    def test_no_overlap(self):
        assert subtract_ranges([(0, 10)], [(20, 30)]) == [(0, 10)]

    def test_full_cover(self):
        assert subtract_ranges([(5, 10)], [(0, 100)]) == []

    def test_multi_outer(self):
        got = subtract_ranges([(0, 10), (20, 30)], [(5, 25)])
        assert got == [(0, 5), (25, 30)]
