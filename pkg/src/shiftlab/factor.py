"""End-to-end i.i.d. factor construction for binary product windows.

Stages:
  1. special fillers carry one fair bit each (1 for content 10, 0 for 01);
  2. each fair-bit position is expanded into d+1 low-entropy bits by a
     bounded-window code calibrated so (d+1) H(beta) = log 2;
  3. the Meshalkin matching assigns every other integer to a special
     filler, which hands each partner one unused bit of its tuple and
     keeps one for itself.

The split code reads a window of 2*radius+1 fair bits around each stream
position, compresses it through a keyed hash into a uniform value, and
decodes that value through the exact inverse CDF of the product law
Bernoulli(1-beta)^(d+1).  Each tuple therefore has exactly the target
joint law; distinct tuples share window bits, and the hash is what keeps
their empirical dependence below test resolution.  The code is
deterministic given (bits, spec, seeds) and translation equivariant in the
stream index.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import stattests
from .markers import MarkerDecomposition, decompose, good_prob_lower
from .matching import (MatchingAssignment, good_to_ab, meshalkin_match,
                       required_d)
from .measures import FiniteProductMeasure, sum_with_tail
from .sampling import SeedStream, Window, sample_window

LOG2 = math.log(2.0)


def binary_entropy(b: float) -> float:
    """H(b) in nats; H(0) = H(1) = 0."""
    if b <= 0.0 or b >= 1.0:
        return 0.0
    return -(b * math.log(b) + (1.0 - b) * math.log(1.0 - b))


def beta_for(dplus1: int) -> float:
    """The unique beta in (0, 1/2] with H(beta) = log(2)/dplus1 (bisection)."""
    if dplus1 < 1:
        raise ValueError("dplus1 must be >= 1")
    if dplus1 == 1:
        return 0.5  # H is flat at 1/2, bisection would stall short of it
    target = LOG2 / dplus1
    lo, hi = 0.0, 0.5
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FairBitStream:
    """Fair bits in window order: bit k sits at special-filler initial
    position positions[k]."""

    positions: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        if len(self.positions) != len(self.bits):
            raise ValueError("positions and bits must align")
        if len(self.positions) > 1 and np.any(np.diff(self.positions) <= 0):
            raise ValueError("positions must be strictly increasing")

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class SplitCodeSpec:
    """Parameters of the entropy-splitting code.

    d is the matching capacity (tuples have d+1 bits), beta0 the bit bias,
    radius the half-width of the fair-bit window each tuple reads.
    """

    d: int
    beta0: float
    radius: int = 64

    def __post_init__(self):
        if not 0.0 < self.beta0 <= 0.5:
            raise ValueError("beta0 must lie in (0, 1/2]")
        if abs((self.d + 1) * binary_entropy(self.beta0) - LOG2) > 1e-10:
            raise ValueError("entropy balance (d+1) H(beta0) = log 2 violated")

    @classmethod
    def for_capacity(cls, d: int, radius: int = 64) -> "SplitCodeSpec":
        return cls(d=d, beta0=beta_for(d + 1), radius=radius)


@dataclass(frozen=True)
class SplitTuples:
    """Per-special-filler coded tuples; rows align with stream positions."""

    positions: np.ndarray        # special-filler initial indices
    tuples: np.ndarray           # (K, d+1) uint8; rows only valid where mask
    valid: np.ndarray            # bool mask (False near stream edges)


def bias_square_sum(m: FiniteProductMeasure, N: int) -> float:
    """Sum over |i| <= N of (r_i - 1/2)^2 where r_i is the conditional
    probability of 01 against {01, 10} across the bond (i, i+1)."""
    if len(m.alphabet) != 2:
        raise ValueError("two-symbol alphabet required")
    p = m.block(-N, 2 * N + 2)[:, 0]   # P(0) at indices -N .. N+1
    p01 = p[:-1] * (1.0 - p[1:])
    p10 = (1.0 - p[:-1]) * p[1:]
    den = p01 + p10
    if np.any(den == 0.0):
        i = -N + int(np.argwhere(den == 0.0)[0][0])
        raise ZeroDivisionError(f"degenerate marginals at bond ({i}, {i + 1})")
    return float(np.sum((p01 / den - 0.5) ** 2))


def bias_square_report(m: FiniteProductMeasure, N: int) -> dict:
    value, tail = sum_with_tail(lambda nn: bias_square_sum(m, nn), N)
    return {"family": m.description, "N": N, "value": value,
            "tail_increment": tail}


def extract_fair_bits(w: Window) -> FairBitStream:
    """One bit per non-censored special filler, in index order."""
    dec = decompose(w)
    if not dec.special:
        return FairBitStream(np.empty(0, dtype=np.int64),
                             np.empty(0, dtype=np.uint8))
    pos = np.array([p for p, _ in dec.special], dtype=np.int64)
    bits = np.array([b for _, b in dec.special], dtype=np.uint8)
    return FairBitStream(pos, bits)


def _window_uniforms(bits: np.ndarray, radius: int, key: bytes) -> np.ndarray:
    """Hash each sliding window of 2*radius+1 bits to a uniform in [0, 1)."""
    W = 2 * radius + 1
    wins = np.lib.stride_tricks.sliding_window_view(bits, W)
    packed = np.packbits(wins, axis=1)
    out = np.empty(len(packed))
    for i in range(len(packed)):
        h = hashlib.blake2b(packed[i].tobytes(), digest_size=8, key=key).digest()
        out[i] = (int.from_bytes(h, "little") >> 11) * 2.0 ** -53
    return out


def _decode_tuples(u: np.ndarray, dplus1: int, beta0: float) -> np.ndarray:
    """Exact inverse CDF of Bernoulli(1-beta0)^dplus1 applied to uniforms."""
    out = np.empty((len(u), dplus1), dtype=np.uint8)
    uu = u.copy()
    for j in range(dplus1):
        zero = uu < beta0
        out[:, j] = np.where(zero, 0, 1)
        uu = np.where(zero, uu / beta0, (uu - beta0) / (1.0 - beta0))
    return out


def psi_split(z: FairBitStream, spec: SplitCodeSpec,
              seeds: SeedStream) -> SplitTuples:
    """Expand each fair bit into a (d+1)-tuple of beta0-biased bits.

    Tuples whose window would reach past the ends of the stream are
    censored.  The map depends only on window content and the seed, so it
    commutes with translation of the stream.
    """
    K = len(z)
    dplus1 = spec.d + 1
    tuples = np.zeros((K, dplus1), dtype=np.uint8)
    valid = np.zeros(K, dtype=bool)
    if K >= 2 * spec.radius + 1:
        key = hashlib.blake2b(
            int(seeds.root_seed).to_bytes(8, "little") + b"|split-code",
            digest_size=16).digest()
        u = _window_uniforms(np.asarray(z.bits, dtype=np.uint8),
                             spec.radius, key)
        tuples[spec.radius:K - spec.radius] = _decode_tuples(
            u, dplus1, spec.beta0)
        valid[spec.radius:K - spec.radius] = True
    return SplitTuples(np.asarray(z.positions, dtype=np.int64), tuples, valid)


def spread_bits(dec: MarkerDecomposition, assignment: MatchingAssignment,
                split: SplitTuples) -> Window:
    """Hand one coded bit to every matched integer.

    Each special filler keeps bit 0 of its own tuple; its matched partners
    take bits 1, 2, ... in ascending index order.  Positions with no
    resolved source are censored and encoded as -1.
    """
    n = dec.length
    start = dec.start
    out = np.full(n, -1, dtype=np.int8)

    pos = split.positions
    rank_of = {int(p): k for k, p in enumerate(pos)}
    cap = split.tuples.shape[1] - 1
    if assignment.d > cap:
        raise AssertionError("matching capacity exceeds tuple width - 1")

    ok_own = split.valid
    out[pos[ok_own] - start] = split.tuples[ok_own, 0]

    if len(assignment.b_indices):
        b = assignment.b_indices
        a = assignment.a_indices
        rank = np.array([rank_of.get(int(x), -1) for x in a], dtype=np.int64)
        if np.any(rank < 0):
            raise AssertionError("assignment references an unknown a-index")
        order = np.lexsort((b, rank))
        b, rank = b[order], rank[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(rank)) + 1])
        lens = np.diff(np.concatenate([starts, [len(rank)]]))
        slot = 1 + np.arange(len(rank)) - np.repeat(starts, lens)
        if np.any(slot > cap):
            raise AssertionError("tuple exhaustion: more partners than bits")
        usable = split.valid[rank]
        out[b[usable] - start] = split.tuples[rank[usable], slot[usable]]

    return Window(start, out, None, "factor-output")


def censored_mask(w: Window) -> np.ndarray:
    return np.asarray(w.values) < 0


@dataclass(frozen=True)
class FactorResult:
    output: Window
    diagnostics: dict


def run_iid_factor(m: FiniteProductMeasure, span: tuple[int, int],
                   seeds: SeedStream, radius: int = 64,
                   interior_fraction: float = 0.1) -> FactorResult:
    """Compose the full factor map on a sampled window and report
    diagnostics: q, d, beta0, censoring fraction and the three-part
    uniformity suite on the interior output."""
    lo, hi = span
    probs = m.block(lo, hi - lo + 1)
    if probs.min() <= 0.0:
        raise ValueError("measure violates the Doeblin condition on the range")
    q = good_prob_lower(m, span)
    if q <= 0.0:
        raise ValueError("good-block probability vanishes on the range")
    d = required_d(q)
    spec = SplitCodeSpec.for_capacity(d, radius)

    w = sample_window(m, span, seeds, label="factor-input")
    dec = decompose(w)
    zprime, _z = good_to_ab(w)
    assignment = meshalkin_match(zprime, d)
    assignment.check_capacity()
    stream = extract_fair_bits(w)
    split = psi_split(stream, spec, seeds)
    out = spread_bits(dec, assignment, split)

    mask = censored_mask(out)
    n = len(out)
    margin = max(1, int(interior_fraction * n))
    inner = np.asarray(out.values[margin:n - margin])
    inner = inner[inner >= 0].astype(np.uint8)
    tests = stattests.uniformity_suite(inner, 1.0 - spec.beta0)
    diagnostics = {
        "q": q,
        "d": d,
        "beta0": spec.beta0,
        "radius": radius,
        "specials": int(len(stream)),
        "censor_fraction": float(mask.mean()),
        "interior_bits": int(len(inner)),
        "tests": tests,
    }
    return FactorResult(out, diagnostics)
