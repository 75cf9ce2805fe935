"""Marker-filler combinatorics for binary windows.

A marker is an occurrence of the block 011.  Occurrences cannot overlap
(any two starts are at least 3 apart), so the indices between the first
and last marker of a window split uniquely into alternating markers and
maximal gaps (fillers).  A length-2 filler equal to 10 or 01 is special;
it carries one bit (1 for 10, 0 for 01).  An 8-block of the form
011 01 011 or 011 10 011 is "good": it pins a special filler at its
fourth position.

Intervals touching the window boundary are censored, never classified:
a marker or filler could straddle the edge, so edge intervals carry no
statistics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MARKER = (0, 1, 1)
GOOD_BLOCKS = ((0, 1, 1, 0, 1, 0, 1, 1), (0, 1, 1, 1, 0, 0, 1, 1))
GOOD_WIDTH = 8


def _as_bits(values) -> np.ndarray:
    bits = np.asarray(values)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("window is not binary")
    return bits.astype(np.uint8)


def find_marker_starts(bits) -> np.ndarray:
    """Relative start offsets of every 011 occurrence."""
    b = _as_bits(bits)
    if len(b) < 3:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero((b[:-2] == 0) & (b[1:-1] == 1) & (b[2:] == 1))


@dataclass(frozen=True)
class MarkerDecomposition:
    """Partition of a window into markers, fillers and censored edges.

    Intervals are inclusive (lo, hi) pairs of absolute indices.  ``special``
    lists (initial index, bit) for the length-2 fillers 10 and 01.
    ``boundary_flags`` = (left, right) marks whether the corresponding edge
    interval was censored (nonempty and unclassifiable).
    """

    start: int
    length: int
    markers: tuple[tuple[int, int], ...]
    fillers: tuple[tuple[int, int], ...]
    special: tuple[tuple[int, int], ...]
    boundary_flags: tuple[bool, bool]
    censored: tuple[tuple[int, int], ...]

    @property
    def stop(self) -> int:
        return self.start + self.length

    def special_positions(self) -> np.ndarray:
        return np.array([p for p, _ in self.special], dtype=np.int64)

    def to_json(self) -> dict:
        labels = [("marker", iv) for iv in self.markers]
        labels += [("special" if iv in {(p, p + 1) for p, _ in self.special}
                    else "filler", iv) for iv in self.fillers]
        labels += [("censored", iv) for iv in self.censored]
        labels.sort(key=lambda t: t[1][0])
        return {
            "start": self.start,
            "length": self.length,
            "intervals": [{"label": lab, "lo": iv[0], "hi": iv[1]}
                          for lab, iv in labels],
        }


def decompose(w) -> MarkerDecomposition:
    """Locate markers, interior fillers and special fillers of a window."""
    bits = _as_bits(w.values)
    start = w.start
    n = len(bits)
    mk = find_marker_starts(bits)
    if len(mk) == 0:
        censored = ((start, start + n - 1),) if n else ()
        return MarkerDecomposition(start, n, (), (), (), (True, True), censored)

    markers = tuple((start + int(s), start + int(s) + 2) for s in mk)
    fillers = []
    special = []
    for (a_lo, a_hi), (b_lo, _) in zip(markers[:-1], markers[1:]):
        if b_lo - a_hi <= 1:
            continue  # adjacent markers, empty gap
        gap = (a_hi + 1, b_lo - 1)
        fillers.append(gap)
        if gap[1] - gap[0] == 1:
            x0 = bits[gap[0] - start]
            x1 = bits[gap[1] - start]
            if (x0, x1) == (1, 0):
                special.append((gap[0], 1))
            elif (x0, x1) == (0, 1):
                special.append((gap[0], 0))

    censored = []
    left = markers[0][0] > start
    if left:
        censored.append((start, markers[0][0] - 1))
    right = markers[-1][1] < start + n - 1
    if right:
        censored.append((markers[-1][1] + 1, start + n - 1))
    return MarkerDecomposition(start, n, markers, tuple(fillers),
                               tuple(special), (left, right), tuple(censored))


def special_fillers(d: MarkerDecomposition) -> list[tuple[int, int]]:
    """(initial index, bit) for each special filler, in index order."""
    return list(d.special)


def good_intervals(w, offset: int = 0) -> list[int]:
    """Starts 8n + offset, fully inside the window, whose 8 symbols form
    one of the two good blocks."""
    bits = _as_bits(w.values)
    n = len(bits)
    if n < GOOD_WIDTH:
        return []
    first = w.start + ((offset - w.start) % 8)
    starts = np.arange(first, w.start + n - GOOD_WIDTH + 1, 8, dtype=np.int64)
    if len(starts) == 0:
        return []
    rel = starts - w.start
    block = np.stack([bits[rel + j] for j in range(GOOD_WIDTH)], axis=1)
    ok = np.zeros(len(starts), dtype=bool)
    for g in GOOD_BLOCKS:
        ok |= (block == np.array(g, dtype=np.uint8)).all(axis=1)
    return [int(s) for s in starts[ok]]


def good_prob(m, i: int) -> float:
    """Exact product-measure probability that the 8-block starting at i is
    good (sum over the two admissible blocks)."""
    p = m.block(i, GOOD_WIDTH)
    total = 0.0
    for g in GOOD_BLOCKS:
        total += float(np.prod(p[np.arange(GOOD_WIDTH), list(g)]))
    return total


def good_prob_lower(m, span: tuple[int, int]) -> float:
    """Infimum of good_prob over block starts in the inclusive range."""
    lo, hi = span
    p = m.block(lo, hi - lo + GOOD_WIDTH)
    q = np.zeros(hi - lo + 1)
    for g in GOOD_BLOCKS:
        prod = np.ones(hi - lo + 1)
        for j, sym in enumerate(g):
            prod *= p[j:j + hi - lo + 1, sym]
        q += prod
    return float(q.min())
