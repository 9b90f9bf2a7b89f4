"""Receiver-side reassembly map.

Tracks which byte ranges of a transfer have arrived, reports the gaps for
negative-acknowledgement status packets, and detects completion. Ranges are
half-open ``[start, end)``. The canonical structure is an ordered list of
disjoint, non-adjacent intervals so that offsets anywhere in the 128-bit
space cost the same; a per-byte bitmap exists only as a test oracle.
"""

from __future__ import annotations

import bisect

MAX_OFFSET_SPACE = 1 << 128


class RangeBeyondEnd(ValueError):
    """A marked range extends past the declared transfer size."""


def subtract_ranges(
    ranges: list[tuple[int, int]], cut: list[tuple[int, int]]
) -> list[tuple[int, int]]:
    """Set difference of two sorted disjoint half-open range lists."""
    out: list[tuple[int, int]] = []
    j = 0
    for start, end in ranges:
        pos = start
        while j < len(cut) and cut[j][1] <= pos:
            j += 1
        k = j
        while k < len(cut) and cut[k][0] < end:
            c_start, c_end = cut[k]
            if c_start > pos:
                out.append((pos, c_start))
            pos = max(pos, c_end)
            if c_end >= end:
                break
            k += 1
        if pos < end:
            out.append((pos, end))
    return out


class HoleTracker:
    """Ordered set of received byte ranges with gap reporting.

    ``expected_size`` is the declared transfer size, or ``None`` for a
    stream whose end is unknown. Gaps are reported below ``expected_size``
    when known, otherwise below the high-water mark (one past the highest
    received byte): the tail beyond what has arrived is not yet lost.
    """

    def __init__(self, expected_size: int | None = None):
        if expected_size is not None and not 0 <= expected_size < MAX_OFFSET_SPACE:
            raise ValueError("expected_size out of 128-bit range")
        self.expected_size = expected_size
        self._starts: list[int] = []
        self._ends: list[int] = []

    @property
    def ranges(self) -> list[tuple[int, int]]:
        return list(zip(self._starts, self._ends))

    @property
    def high_water(self) -> int:
        return self._ends[-1] if self._ends else 0

    @property
    def received_bytes(self) -> int:
        return sum(e - s for s, e in zip(self._starts, self._ends))

    def set_expected_size(self, size: int) -> None:
        """Late size declaration (metadata arriving after data)."""
        if not 0 <= size < MAX_OFFSET_SPACE:
            raise ValueError("expected_size out of 128-bit range")
        if self.high_water > size:
            raise RangeBeyondEnd(f"already received past offset {size}")
        self.expected_size = size

    def mark_received(self, offset: int, length: int) -> list[tuple[int, int]]:
        """Record ``[offset, offset+length)`` as received.

        Returns the sub-ranges that were newly covered (empty when the whole
        range was already present), which makes duplicate detection free.
        Idempotent and order-insensitive.
        """
        if length < 1:
            raise ValueError("length must be >= 1")
        if offset < 0 or offset + length > MAX_OFFSET_SPACE:
            raise ValueError("range outside 128-bit space")
        end = offset + length
        if self.expected_size is not None and end > self.expected_size:
            raise RangeBeyondEnd(
                f"[{offset}, {end}) beyond declared size {self.expected_size}")

        # Merge with every range intersecting or touching [offset, end).
        lo = bisect.bisect_left(self._ends, offset)
        hi = bisect.bisect_right(self._starts, end)
        if lo == hi:
            new = [(offset, end)]
            merged_start, merged_end = offset, end
        else:
            new = subtract_ranges(
                [(offset, end)], list(zip(self._starts[lo:hi], self._ends[lo:hi])))
            merged_start = min(offset, self._starts[lo])
            merged_end = max(end, self._ends[hi - 1])
        self._starts[lo:hi] = [merged_start]
        self._ends[lo:hi] = [merged_end]
        return new

    def hole_list(self, max_holes: int | None = None) -> list[tuple[int, int]]:
        """First ``max_holes`` gaps below the reporting bound, ascending."""
        if max_holes is not None and max_holes < 1:
            raise ValueError("max_holes must be >= 1")
        bound = self.expected_size if self.expected_size is not None else self.high_water
        holes: list[tuple[int, int]] = []
        pos = 0
        for start, end in zip(self._starts, self._ends):
            if start >= bound:
                break
            if start > pos:
                holes.append((pos, start))
                if max_holes is not None and len(holes) == max_holes:
                    return holes
            pos = max(pos, end)
        if pos < bound:
            holes.append((pos, bound))
        return holes

    def is_complete(self) -> bool:
        """True iff the declared size is known and fully covered."""
        if self.expected_size is None:
            return False
        if self.expected_size == 0:
            return True
        return (len(self._starts) == 1
                and self._starts[0] == 0
                and self._ends[0] == self.expected_size)

    def contiguous_prefix(self) -> int:
        """Length of the received prefix starting at offset 0."""
        if self._starts and self._starts[0] == 0:
            return self._ends[0]
        return 0

    def __repr__(self) -> str:
        return (f"HoleTracker(size={self.expected_size}, "
                f"ranges={len(self._starts)}, high_water={self.high_water})")
