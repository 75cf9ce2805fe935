"""Deterministic, seed-driven sampling of finite windows.

Randomness is counter-based: every coordinate of every labelled stream maps
to a fixed 128-bit Philox counter block, so a window's content depends only
on (root seed, label, coordinate index) and never on the order in which
coordinates are drawn or on how work is split across workers.  Negative
indices are supported by a fixed counter offset.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .markers import find_marker_starts

_COUNTER_OFFSET = 1 << 62  # room for indices in [-2^62, 2^62)
_BLOCK = 4                 # doubles per Philox counter block


class RejectionBudgetError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""

    def __init__(self, attempts: int, accepted: int):
        self.attempts = attempts
        self.accepted = accepted
        self.acceptance_rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"rejection budget exhausted after {attempts} attempts "
            f"(acceptance rate {self.acceptance_rate:.3g})")


@dataclass(frozen=True)
class SeedStream:
    """Root of a family of independent, reproducible substreams.

    Substreams are keyed by a text label; within a labelled stream each
    integer coordinate owns one counter block.  Identical (root, label,
    index) triples always reproduce identical draws.
    """

    root_seed: int

    def _key(self, label: str) -> np.ndarray:
        payload = (int(self.root_seed) % (1 << 64)).to_bytes(8, "little") \
            + label.encode("utf-8")
        digest = hashlib.blake2b(payload, digest_size=16).digest()
        return np.frombuffer(digest, dtype=np.uint64)

    def uniforms(self, label: str, start: int, count: int,
                 per_coord: int = 1) -> np.ndarray:
        """Uniform[0,1) draws aligned to coordinates start..start+count-1.

        ``per_coord`` (at most 4) values are produced per coordinate, all
        from that coordinate's own counter block, so overlapping requests
        agree wherever their coordinates overlap.
        """
        if not 1 <= per_coord <= _BLOCK:
            raise ValueError("per_coord must be in 1..4")
        bg = Philox(key=self._key(label))
        bg.advance(start + _COUNTER_OFFSET)
        u = Generator(bg).random(count * _BLOCK)
        return u.reshape(count, _BLOCK)[:, :per_coord]

    def generator(self, label: str, index: int = 0) -> Generator:
        """A bulk generator for sequential use (rejection loops, MC)."""
        return Generator(Philox(key=self._key(f"{label}#{index}")))

    def matrix(self, label: str, rows: int, cols: int) -> np.ndarray:
        """Bulk (rows, cols) uniform draws from one labelled stream."""
        return self.generator(label).random((rows, cols))


@dataclass(frozen=True)
class Window:
    """A finite sample together with its index range and provenance."""

    start: int
    values: np.ndarray
    seed: int | None = None
    source: str = ""

    def __len__(self) -> int:
        return len(self.values)

    @property
    def stop(self) -> int:
        """One past the last index."""
        return self.start + len(self.values)

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.stop - 1)

    def value_at(self, n: int):
        if not self.start <= n < self.stop:
            raise IndexError(f"index {n} outside window {self.span}")
        return self.values[n - self.start]

    def items(self):
        for i, v in enumerate(self.values):
            yield self.start + i, v

    def shifted(self, delta: int) -> "Window":
        """Same content anchored ``delta`` indices later."""
        return Window(self.start + delta, self.values, self.seed,
                      f"{self.source}>>{delta}" if self.source else "")


def window_to_csv(w: Window, path) -> None:
    """Export a window as ``index,value`` rows."""
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "value"])
        for n, v in w.items():
            writer.writerow([n, repr(v) if isinstance(v, float) else int(v)])


def _span_length(span: tuple[int, int]) -> int:
    lo, hi = span
    if hi < lo:
        raise ValueError(f"empty index range {span}")
    return hi - lo + 1


def sample_window(m, span: tuple[int, int], seeds: SeedStream,
                  label: str = "window") -> Window:
    """Independent coordinates, coordinate n distributed per marginal(n)."""
    lo, _ = span
    length = _span_length(span)
    u = seeds.uniforms(label, lo, length)[:, 0]
    p = m.block(lo, length)
    if p.shape[1] == 2:
        sym = (u >= p[:, 0]).astype(np.int64)
    else:
        cdf = np.cumsum(p, axis=1)
        sym = (u[:, None] >= cdf[:, :-1]).sum(axis=1)
    if m.alphabet == tuple(range(len(m.alphabet))):
        values = sym
    else:
        values = np.array([m.alphabet[s] for s in sym])
    return Window(lo, values, seeds.root_seed, m.description)


def _piecewise_inverse_cdf(edges: np.ndarray, vals: np.ndarray,
                           u: np.ndarray) -> np.ndarray:
    """Exact inverse CDF of a piecewise-constant density (closed form)."""
    lens = np.diff(edges)
    masses = vals * lens
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    total = cum[-1]
    # guard against rounding: u is in [0, total)
    uu = np.minimum(u * total, np.nextafter(total, 0.0))
    piece = np.searchsorted(cum, uu, side="right") - 1
    piece = np.clip(piece, 0, len(vals) - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(vals[piece] > 0,
                          (uu - cum[piece]) / vals[piece], 0.0)
    return edges[piece] + offset


def sample_density_window(d, span: tuple[int, int], seeds: SeedStream,
                          label: str = "density") -> Window:
    """Coordinate n sampled by exact inverse CDF of the density at n."""
    lo, _ = span
    length = _span_length(span)
    u = seeds.uniforms(label, lo, length)[:, 0]
    out = np.empty(length, dtype=float)
    for i in range(length):
        n = lo + i
        edges = d.piece_edges(n)
        vals = d.piece_values(n)
        out[i] = _piecewise_inverse_cdf(edges, vals, u[i:i + 1])[0]
    return Window(lo, out, seeds.root_seed, d.description)


def sample_density_iid(d, n: int, count: int, seeds: SeedStream,
                       label: str = "density-iid") -> np.ndarray:
    """Many independent draws from the single density at index n."""
    u = seeds.generator(label, n).random(count)
    return _piecewise_inverse_cdf(d.piece_edges(n), d.piece_values(n), u)


def _window_has_marker(bits: np.ndarray) -> bool:
    return len(find_marker_starts(bits)) > 0


def sample_conditioned_filler(m, span: tuple[int, int], seeds: SeedStream,
                              budget: int = 10 ** 6,
                              label: str = "filler") -> Window:
    """Sample the product law conditioned on containing no 011 block.

    Plain rejection: windows are drawn from the unconditioned product law
    until one avoids 011.  Ranges of length < 3 need no conditioning and
    are accepted immediately.
    """
    if len(m.alphabet) != 2:
        raise ValueError("conditioned filler sampling needs two symbols")
    lo, _ = span
    length = _span_length(span)
    p0 = m.block(lo, length)[:, 0]
    gen = seeds.generator(label, lo)
    attempts = 0
    chunk = 8
    while attempts < budget:
        take = min(chunk, budget - attempts)
        chunk = min(chunk * 4, 4096)
        u = gen.random((take, length))
        bits = (u >= p0).astype(np.uint8)
        attempts += take
        if length < 3:
            return Window(lo, bits[0], seeds.root_seed,
                          f"filler({m.description})")
        ok = ~np.any((bits[:, :-2] == 0) & (bits[:, 1:-1] == 1)
                     & (bits[:, 2:] == 1), axis=1)
        hit = np.flatnonzero(ok)
        if len(hit):
            return Window(lo, bits[hit[0]], seeds.root_seed,
                          f"filler({m.description})")
    raise RejectionBudgetError(attempts, 0)
