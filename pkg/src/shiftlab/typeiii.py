"""Step-density families with prescribed log-ratio lattices, and the
piecewise-linear coordinate map that converts one lattice into another.

The base family takes the three values {lambda, 1, 1/lambda} on nested
intervals A_n = (0, a_n) and B_n = (1 - lambda a_n, 1); every density
ratio across a generation step then lies on the lattice generated by
log lambda.  The map h moves mass from two slanted pieces onto the A and
B regions; its pushforward g_n takes values whose generation ratios lie
on the lattice of log lambda' instead, where p = (lambda' - lambda) /
(1 - lambda') calibrates the slopes.

Also here: the disjoint-support mixture of two such families on [-1, 0)
and [0, 1], the erasure map that replaces the negative side by uniform
coordinates (extracting bits from safe-zone hits and spreading them with
the Meshalkin matching), and the coordinatewise lift of h to the negative
side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .matching import ABSequence, meshalkin_match
from .measures import DensityFamily, log_damped
from .sampling import Window

_REINDEX_SEARCH_LIMIT = 10_000


@dataclass(frozen=True)
class TypeIIISpec:
    """Base step-density family: value lambda on A_n = (0, a_n), 1/lambda
    on B_n = (1 - lambda a_n, 1), 1 elsewhere; identically 1 where a_n = 0
    (all n <= 1 for the default sequence)."""

    lam: float
    a: Callable[[int], float] = log_damped
    description: str = "f-family"

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")

    def a_n(self, n: int) -> float:
        v = float(self.a(n))
        if v < 0:
            raise ValueError("perturbation lengths must be nonnegative")
        if v * (1.0 + self.lam) >= 1.0:
            raise ValueError(f"A_{n} and B_{n} overlap (a_n = {v})")
        return v

    def intervals(self, n: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """(A_n, B_n) as open intervals; empty when a_n = 0."""
        a = self.a_n(n)
        return (0.0, a), (1.0 - self.lam * a, 1.0)


def f_density(spec: TypeIIISpec, n: int, u) -> np.ndarray:
    """Evaluate the base density at index n (vectorized over u)."""
    u = np.asarray(u, dtype=float)
    a = spec.a_n(n)
    out = np.ones_like(u)
    if a > 0.0:
        out = np.where((u > 0.0) & (u < a), spec.lam, out)
        out = np.where((u > 1.0 - spec.lam * a) & (u < 1.0), 1.0 / spec.lam, out)
    return out


def f_family(spec: TypeIIISpec) -> DensityFamily:
    def breaks(n: int):
        a = spec.a_n(n)
        return [a, 1.0 - spec.lam * a] if a > 0.0 else []

    return DensityFamily(
        support=(0.0, 1.0),
        density=lambda n, u: f_density(spec, n, u),
        breakpoints=breaks,
        description=f"{spec.description}(lam={spec.lam})",
    )


@dataclass(frozen=True)
class HMapSpec:
    """Slope data for the coordinate map h, with the perturbation sequence
    re-indexed so that a_1 (1 + p) < 1/2 and a_n = 0 for n <= 0."""

    lam: float
    lam_prime: float
    a_base: Callable[[int], float] = log_damped
    shift: int = field(default=-1)

    def __post_init__(self):
        if not 0.0 < self.lam < self.lam_prime < 1.0:
            raise ValueError("need 0 < lambda < lambda' < 1")
        if self.shift < 0:
            object.__setattr__(self, "shift", self._find_shift())
        head = self.a_base(1 + self.shift)
        if head <= 0 or head * (1.0 + self.p) >= 0.5:
            raise ValueError("re-indexing failed to produce a_1 (1+p) < 1/2")

    @property
    def p(self) -> float:
        return (self.lam_prime - self.lam) / (1.0 - self.lam_prime)

    def _find_shift(self) -> int:
        p = self.p
        for s in range(_REINDEX_SEARCH_LIMIT):
            head = self.a_base(1 + s)
            if head > 0 and head * (1.0 + p) < 0.5:
                return s
        raise ValueError("no admissible re-indexing found")

    def a(self, n: int) -> float:
        """Re-indexed sequence: a(n) = a_base(n + shift) for n >= 1, else 0."""
        return float(self.a_base(n + self.shift)) if n >= 1 else 0.0

    @property
    def a1(self) -> float:
        return self.a(1)

    def family(self) -> TypeIIISpec:
        """The base family expressed in the re-indexed numbering."""
        return TypeIIISpec(self.lam, self.a, description="f-family-reindexed")

    def support_pieces(self) -> list[tuple[float, float]]:
        """Closure components of the common support of the pushforwards."""
        a1, p, lam = self.a1, self.p, self.lam
        return [(0.0, a1),
                (a1 + p * a1, 1.0 - (lam + p) * a1),
                (1.0 - lam * a1, 1.0)]


def h_apply(spec: HMapSpec, x) -> np.ndarray:
    """The piecewise-linear map: slope 1/p from (a1, a1 + p a1) onto
    (0, a1); slope -lambda/p from (1 - lam a1 - p a1, 1 - lam a1) onto
    (1 - lam a1, 1); identity elsewhere (including the finitely many
    non-differentiability points)."""
    x = np.asarray(x, dtype=float)
    a1, p, lam = spec.a1, spec.p, spec.lam
    out = x.copy()
    b1 = (x > a1) & (x < a1 + p * a1)
    out[b1] = (x[b1] - a1) / p
    hi = 1.0 - lam * a1
    b2 = (x > hi - p * a1) & (x < hi)
    out[b2] = hi + lam * (hi - x[b2]) / p
    return out


def pushforward_density(spec: TypeIIISpec, hspec: HMapSpec, n: int, v) -> np.ndarray:
    """Density of h(U) for U distributed per the re-indexed base family:
    sum of f(u)/|h'(u)| over the at most two preimage branches."""
    if abs(spec.lam - hspec.lam) > 1e-15:
        raise ValueError("spec and hspec must share lambda")
    v = np.asarray(v, dtype=float)
    fam = hspec.family()
    a1, p, lam = hspec.a1, hspec.p, hspec.lam
    out = np.zeros_like(v)

    # identity branch wherever v itself lies outside the two slanted domains
    hi = 1.0 - lam * a1
    in_b1_dom = (v > a1) & (v < a1 + p * a1)
    in_b2_dom = (v > hi - p * a1) & (v < hi)
    ident = ~(in_b1_dom | in_b2_dom)
    out[ident] += f_density(fam, n, v[ident])

    # branch 1 preimage: v in (0, a1)  <-  u = a1 + p v, |h'| = 1/p
    img1 = (v > 0.0) & (v < a1)
    u1 = a1 + p * v[img1]
    out[img1] += f_density(fam, n, u1) * p

    # branch 2 preimage: v in (1 - lam a1, 1)  <-  u = hi - p (v - hi)/lam
    img2 = (v > hi) & (v < 1.0)
    u2 = hi - p * (v[img2] - hi) / lam
    out[img2] += f_density(fam, n, u2) * (p / lam)
    return out


def g_pieces(hspec: HMapSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form piece edges and values of the pushforward at index n."""
    a1, p, lam = hspec.a1, hspec.p, hspec.lam
    an = hspec.a(n)
    if an > 0.0:
        edges = [0.0, an, a1, a1 + p * a1, 1.0 - (lam + p) * a1,
                 1.0 - lam * a1, 1.0 - lam * an, 1.0]
        vals = [lam + p, 1.0 + p, 0.0, 1.0, 0.0,
                1.0 + p / lam, (1.0 + p) / lam]
    else:
        edges = [0.0, a1, a1 + p * a1, 1.0 - (lam + p) * a1,
                 1.0 - lam * a1, 1.0]
        vals = [1.0 + p, 0.0, 1.0, 0.0, 1.0 + p / lam]
    return np.array(edges), np.array(vals)


def g_closed_form(hspec: HMapSpec, n: int, v) -> np.ndarray:
    """Piecewise listing of the pushforward density (independent of the
    change-of-variables computation; used as its cross-check)."""
    v = np.asarray(v, dtype=float)
    edges, vals = g_pieces(hspec, n)
    idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, len(vals) - 1)
    out = vals[idx]
    return np.where((v <= edges[0]) | (v >= edges[-1]), 0.0, out)


def g_family(hspec: HMapSpec) -> DensityFamily:
    return DensityFamily(
        support=(0.0, 1.0),
        density=lambda n, v: g_closed_form(hspec, n, v),
        breakpoints=lambda n: [float(e) for e in g_pieces(hspec, n)[0][1:-1]],
        description=f"g-family(lam={hspec.lam},lam'={hspec.lam_prime})",
    )


def ratio_profile(spec: TypeIIISpec, hspec: HMapSpec, n: int, v: float) -> float:
    """g_{n-1}(v) / g_n(v), defined on the support away from breakpoints;
    always one of {lambda', 1, 1/lambda'}."""
    v = float(v)
    pieces = hspec.support_pieces()
    if not any(lo < v < hi for lo, hi in pieces):
        raise ValueError(f"{v} is outside the support of the pushforwards")
    for m in (n - 1, n):
        edges, _ = g_pieces(hspec, m)
        if np.any(np.abs(edges - v) < 1e-13):
            raise ValueError(f"{v} sits on a breakpoint of generation {m}")
    num = float(pushforward_density(spec, hspec, n - 1, v))
    den = float(pushforward_density(spec, hspec, n, v))
    return num / den


# ---------------------------------------------------------------------------
# Mixtures on [-1, 1] and the erasing / lifting factor maps
# ---------------------------------------------------------------------------

def shift_family(fam: DensityFamily, delta: float) -> DensityFamily:
    lo, hi = fam.support
    return DensityFamily(
        support=(lo + delta, hi + delta),
        density=lambda n, u: fam.density(n, np.asarray(u, dtype=float) - delta),
        breakpoints=lambda n: [b + delta for b in fam.breakpoints(n)],
        description=f"{fam.description}{delta:+g}",
    )


def mix_disjoint(rho: DensityFamily, nu: DensityFamily) -> DensityFamily:
    """Equal-weight mixture of a family on [0, 1] and one on [-1, 0)."""
    if nu.support[1] > rho.support[0] + 1e-15:
        raise ValueError("supports overlap")

    def dens(n: int, u):
        u = np.asarray(u, dtype=float)
        neg = u < rho.support[0]
        out = np.empty_like(u)
        out[neg] = 0.5 * np.asarray(nu.density(n, u[neg]), dtype=float)
        out[~neg] = 0.5 * np.asarray(rho.density(n, u[~neg]), dtype=float)
        return out

    return DensityFamily(
        support=(nu.support[0], rho.support[1]),
        density=dens,
        breakpoints=lambda n: sorted(
            list(nu.breakpoints(n)) + [rho.support[0]] + list(rho.breakpoints(n))),
        description=f"mix({nu.description},{rho.description})",
    )


def safe_zone(spec: TypeIIISpec, start_index: int = 2) -> tuple[float, float]:
    """Largest interval on which every density of the family equals 1:
    the complement of A_n and B_n at the widest generation."""
    (_, a_hi), (b_lo, _) = spec.intervals(start_index)
    return (a_hi, b_lo)


def _digit_shares(t: np.ndarray, shares: int, bits_per: int) -> np.ndarray:
    """Split the binary expansion of t in [0, 1) into integer shares."""
    total = shares * bits_per
    ints = np.floor(t * float(1 << total)).astype(np.int64)
    ints = np.clip(ints, 0, (1 << total) - 1)
    out = np.empty((len(t), shares), dtype=np.int64)
    mask = (1 << bits_per) - 1
    for j in range(shares):
        out[:, j] = (ints >> (bits_per * (shares - 1 - j))) & mask
    return out


def erase_negative_side(w: Window, zone: tuple[float, float],
                        d: int = 2) -> tuple[Window, dict]:
    """Replace every negative coordinate by a uniform [-1, 0) value.

    Coordinates landing in the safe zone are uniform there; their binary
    digits are split into d+1 equal shares.  Each safe coordinate keeps one
    share for itself and hands the others to the negative coordinates the
    Meshalkin matching (capacity d, run on the subsequence of negative
    indices) assigns to it.  Unresolved coordinates come back as NaN.

    The map is deterministic and commutes with index translation; d = 2
    keeps 17 digit bits per share, far below any test's resolution.
    """
    lo, hi = zone
    if not -1.0 <= lo < hi <= 0.0:
        raise ValueError("safe zone must be a subinterval of [-1, 0)")
    values = np.asarray(w.values, dtype=float)
    out = values.copy()
    neg_pos = np.flatnonzero(values < 0.0)
    info = {"nu_indices": int(len(neg_pos)), "safe_hits": 0,
            "censored": 0, "capacity": d}
    if len(neg_pos) == 0:
        return Window(w.start, out, w.seed, f"erased({w.source})"), info

    sub_vals = values[neg_pos]
    is_safe = (sub_vals >= lo) & (sub_vals < hi)
    info["safe_hits"] = int(is_safe.sum())
    if not is_safe.any():
        out[neg_pos] = np.nan
        info["censored"] = int(len(neg_pos))
        return Window(w.start, out, w.seed, f"erased({w.source})"), info

    bits_per = 51 // (d + 1)
    t = (sub_vals[is_safe] - lo) / (hi - lo)
    shares = _digit_shares(t, d + 1, bits_per)
    scale = float(1 << bits_per)

    z = ABSequence.from_bools(0, is_safe)
    assignment = meshalkin_match(z, d)

    replaced = np.full(len(neg_pos), np.nan)
    safe_rank = {int(s): k for k, s in enumerate(np.flatnonzero(is_safe))}
    replaced[is_safe] = -1.0 + (shares[:, 0] + 0.5) / scale

    if len(assignment.b_indices):
        b = assignment.b_indices
        a = assignment.a_indices
        rank = np.array([safe_rank[int(x)] for x in a], dtype=np.int64)
        order = np.lexsort((b, rank))
        b, rank = b[order], rank[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(rank)) + 1])
        lens = np.diff(np.concatenate([starts, [len(rank)]]))
        slot = 1 + np.arange(len(rank)) - np.repeat(starts, lens)
        replaced[b] = -1.0 + (shares[rank, slot] + 0.5) / scale

    info["censored"] = int(np.isnan(replaced).sum())
    out[neg_pos] = replaced
    return Window(w.start, out, w.seed, f"erased({w.source})"), info


def lift_lambda_on_negative(w: Window, hspec: HMapSpec) -> Window:
    """Apply the shifted coordinate map on [-1, 0); leave [0, 1] alone."""
    values = np.asarray(w.values, dtype=float)
    out = values.copy()
    neg = values < 0.0
    out[neg] = h_apply(hspec, values[neg] + 1.0) - 1.0
    return Window(w.start, out, w.seed, f"lifted({w.source})")


def generation_log_ratios(fam: DensityFamily, n: int) -> list[float]:
    """All log density ratios between generations n-1 and n, computed
    exactly from the common refinement of their pieces."""
    lo, hi = fam.support
    edges = sorted(set([lo, hi])
                   | {b for b in fam.breakpoints(n - 1) if lo < b < hi}
                   | {b for b in fam.breakpoints(n) if lo < b < hi})
    mids = 0.5 * (np.array(edges[:-1]) + np.array(edges[1:]))
    v_prev = np.asarray(fam.density(n - 1, mids), dtype=float)
    v_cur = np.asarray(fam.density(n, mids), dtype=float)
    keep = (v_prev > 0) & (v_cur > 0)
    ratios = np.log(v_prev[keep]) - np.log(v_cur[keep])
    return sorted(set(np.round(ratios, 12).tolist()))
