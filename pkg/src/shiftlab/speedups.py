"""Blocking isomorphisms and ergodic-index diagnostics.

The k-step composition of the shift is conjugate, via the blocking map
zeta, to the plain shift on k-blocks; interleaving k independent copies
gives the direct product the same block alphabet.  Whether the two block
laws (eta: consecutive marginals; kappa: one marginal repeated) are
Kakutani-equivalent is what separates ergodic powers from dissipative
ones, and for the half-stationary family the separating statistic is the
Hellinger-type sum S(k, c) of squared perturbation increments.

Everything here reports truncated sums with auditable tails; nothing
certifies an infinite-time property.  Conservativity appears only as a
proxy (c sqrt(k) against a caller-supplied assumed critical value).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measures import (FiniteProductMeasure, SequenceSpec, inverse_sqrt,
                       make_mu_pc, nu_c_zero_mass, rpm)
from .sampling import Window

MAX_BLOCK_WIDTH = 20


@dataclass(frozen=True)
class BlockedWindow:
    """A window over the k-block alphabet; block n holds k base symbols."""

    start: int
    blocks: np.ndarray
    k: int

    def __post_init__(self):
        if self.blocks.ndim != 2 or self.blocks.shape[1] != self.k:
            raise ValueError("blocks must be an (N, k) array")

    def __len__(self) -> int:
        return len(self.blocks)


def zeta(w: Window, k: int) -> BlockedWindow:
    """Group coordinates kn .. kn+k-1 into block n (trimming the window to
    whole blocks)."""
    if k < 1:
        raise ValueError("k must be positive")
    lo, hi = w.span
    n_lo = math.ceil(lo / k)
    n_hi = math.floor((hi - k + 1) / k)
    if n_hi < n_lo:
        return BlockedWindow(n_lo, np.empty((0, k), dtype=np.asarray(w.values).dtype), k)
    vals = np.asarray(w.values)
    rel = n_lo * k - lo
    count = n_hi - n_lo + 1
    return BlockedWindow(n_lo, vals[rel:rel + count * k].reshape(count, k), k)


def unblock(bw: BlockedWindow) -> Window:
    return Window(bw.start * bw.k, bw.blocks.reshape(-1), None, "unblocked")


def pi_interleave(ws: list[Window]) -> BlockedWindow:
    """Block n = (x_n^1, ..., x_n^k) from k windows over the same range."""
    spans = {w.span for w in ws}
    if len(spans) != 1:
        raise ValueError("windows must share an index range")
    vals = np.stack([np.asarray(w.values) for w in ws], axis=1)
    return BlockedWindow(ws[0].start, vals, len(ws))


def de_interleave(bw: BlockedWindow) -> list[Window]:
    return [Window(bw.start, bw.blocks[:, i].copy(), None, f"component-{i}")
            for i in range(bw.k)]


# ---------------------------------------------------------------------------
# Block marginals and the block Kakutani sum
# ---------------------------------------------------------------------------

def _check_width(k: int) -> None:
    if not 1 <= k <= MAX_BLOCK_WIDTH:
        raise ValueError(f"block width {k} outside 1..{MAX_BLOCK_WIDTH}")


def _block_law(p0: np.ndarray) -> np.ndarray:
    """Joint law over 2^k patterns from per-slot P(0); bit 1 of the pattern
    index is the last block symbol (first symbol is most significant)."""
    k = len(p0)
    law = np.ones(1)
    for j in range(k):
        law = np.concatenate([law * p0[j], law * (1.0 - p0[j])]) \
            .reshape(2, -1).T.reshape(-1)
    return law


def eta_marginal(m: FiniteProductMeasure, k: int, n: int) -> np.ndarray:
    """Law of block n under blocking: product of marginals kn .. kn+k-1."""
    _check_width(k)
    p0 = m.block(k * n, k)[:, 0]
    return _block_law(p0)


def kappa_marginal(m: FiniteProductMeasure, k: int, n: int) -> np.ndarray:
    """Law of block n under interleaving: the marginal at kn, repeated."""
    _check_width(k)
    p0 = np.full(k, m.block(k * n, 1)[0, 0])
    return _block_law(p0)


def gamma_marginal(spec: SequenceSpec, c: float, k: int, n: int) -> np.ndarray:
    """Marginal of the k-dilated family: p + c a_{kn}, clamped like the
    base family."""
    m0 = spec.marginal_zero(k * n, c)
    return np.array([m0, 1.0 - m0])


@dataclass(frozen=True)
class BlockKakutaniResult:
    total: float
    bound: float
    per_n_violations: tuple[int, ...]

    @property
    def bound_holds(self) -> bool:
        return not self.per_n_violations


def block_kakutani_sum(m: FiniteProductMeasure, k: int, N: int) -> BlockKakutaniResult:
    """Sum over |n| <= N and all 2^k blocks of (eta_n(B) - kappa_n(B))^2,
    together with the increment bound k^2 sum_l (m0(kn+l-1) - m0(kn))^2 and
    a per-n check that every block's squared gap obeys it."""
    _check_width(k)
    if len(m.alphabet) != 2:
        raise ValueError("two-symbol alphabet required")
    ns = np.arange(-N, N + 1)
    p0 = m.block(-N * k, (2 * N + 1) * k)[:, 0].reshape(2 * N + 1, k)
    total = 0.0
    bound_total = 0.0
    violations: list[int] = []
    for row, n in enumerate(ns):
        eta = _block_law(p0[row])
        kap = _block_law(np.full(k, p0[row, 0]))
        sq = (eta - kap) ** 2
        bound_n = (k ** 2) * float(np.sum((p0[row] - p0[row, 0]) ** 2))
        total += float(sq.sum())
        bound_total += bound_n
        if float(sq.max()) > bound_n + 1e-15:
            violations.append(int(n))
    return BlockKakutaniResult(total, bound_total, tuple(violations))


# ---------------------------------------------------------------------------
# Hellinger sums and the dissipativity proxy for the half-stationary family
# ---------------------------------------------------------------------------

def hellinger_S(c: float, k: int, N: int) -> float:
    """Sum over |n| <= N of (a_{n-k}(c) - a_n(c))^2 for the half-stationary
    perturbation a_n(c) = c/sqrt(n) (active for n >= 1 while below 1/2)."""
    if k == 0:
        return 0.0
    n = np.arange(-N, N + 1)
    return float(np.sum((nu_c_zero_mass(n - k, c) - nu_c_zero_mass(n, c)) ** 2))


@dataclass(frozen=True)
class DissipativityReport:
    c: float
    K: int
    summands: np.ndarray          # exp(-S(k)/2) for k = 1..K
    partial_sums: np.ndarray
    last_decade_increment: float  # partial(K) - partial(K // 10)
    tail_slope: float             # log-summand regression slope on [K/10, K]

    @property
    def partial(self) -> float:
        return float(self.partial_sums[-1])


def _hellinger_all_k(c: float, K: int, support: int) -> np.ndarray:
    """S(k) for k = 1..K with the perturbation truncated beyond ``support``
    (exact for the truncated sequence, via FFT autocorrelation)."""
    a = nu_c_zero_mass(np.arange(1, support + 1), c)
    A = float(np.dot(a, a))
    size = 1
    while size < 2 * support:
        size *= 2
    fa = np.fft.rfft(a, size)
    ac = np.fft.irfft(fa * np.conj(fa), size)[:K + 1]
    return 2.0 * A - 2.0 * ac[1:K + 1]


def dissipativity_partial(c: float, K: int, support_mult: int = 10) -> DissipativityReport:
    """Partial sums of sum_k exp(-S(k, c)/2) with a tail-exponent fit.

    S is computed with the perturbation truncated at support_mult * K,
    which leaves a relative error O(1/support_mult^2) in the exponents.
    The tail slope is the least-squares slope of log summand against
    log k over k in [K/10, K].
    """
    if K < 10:
        raise ValueError("K must be at least 10")
    S = _hellinger_all_k(c, K, support_mult * K)
    summands = np.exp(-S / 2.0)
    partial = np.cumsum(summands)
    lo = max(K // 10, 1)
    ks = np.arange(1, K + 1)
    sel = ks >= lo
    slope = float(np.polyfit(np.log(ks[sel]), np.log(summands[sel]), 1)[0])
    return DissipativityReport(
        c=c, K=K, summands=summands, partial_sums=partial,
        last_decade_increment=float(partial[-1] - partial[lo - 1]),
        tail_slope=slope)


# ---------------------------------------------------------------------------
# RPM scaling identities and the index bracket
# ---------------------------------------------------------------------------

def rpm_scaling_identity(p: float, q: float, c: float, dsmall: float,
                         a: Callable[[int], float] = inverse_sqrt,
                         N: int = 1000, tol: float = 1e-15) -> dict:
    """Check the two coordinatewise mixing identities

      rpm(mu^(p,c), dsmall/c, (p, 1-p))  ==  mu^(p, dsmall)
      rpm(mu^(q,c), p/q,      (0, 1))    ==  mu^(p, p c / q)

    for |n| <= N.  Equality is exact off the finitely many coordinates
    where exactly one side clamps; those indices are listed.
    """
    if not (0.0 < dsmall <= c):
        raise ValueError("need 0 < dsmall <= c")
    if not (0.0 < p <= q <= 0.5):
        raise ValueError("need 0 < p <= q <= 1/2")
    spec_p = SequenceSpec(p, a)
    spec_q = SequenceSpec(q, a)

    def compare(lhs: FiniteProductMeasure, rhs: FiniteProductMeasure):
        l0 = lhs.block(-N, 2 * N + 1)[:, 0]
        r0 = rhs.block(-N, 2 * N + 1)[:, 0]
        diff = np.abs(l0 - r0)
        mismatched = np.flatnonzero(diff > 1e-12) - N
        agree = diff[diff <= 1e-12]
        max_err = float(agree.max()) if len(agree) else 0.0
        return max_err, [int(i) for i in mismatched]

    lhs1 = rpm(make_mu_pc(spec_p, c), dsmall / c, (p, 1.0 - p))
    rhs1 = make_mu_pc(spec_p, dsmall)
    err1, clamp1 = compare(lhs1, rhs1)

    lhs2 = rpm(make_mu_pc(spec_q, c), p / q, (0.0, 1.0))
    rhs2 = make_mu_pc(spec_p, p * c / q)
    err2, clamp2 = compare(lhs2, rhs2)

    return {
        "p": p, "q": q, "c": c, "dsmall": dsmall, "N": N,
        "identity_rescale": {"max_error": err1, "clamp_mismatch": clamp1,
                             "pass": err1 <= tol},
        "identity_thin": {"max_error": err2, "clamp_mismatch": clamp2,
                          "pass": err2 <= tol},
    }


@dataclass(frozen=True)
class IndexRow:
    k: int
    c_scaled: float
    conservative_proxy: bool
    hellinger: float
    dissipativity_partial: float
    tail_slope: float


@dataclass(frozen=True)
class IndexReport:
    c: float
    d_assumed: float
    rows: tuple[IndexRow, ...]
    implied_index: int


def index_report(c: float, d_assumed: float, kmax: int,
                 diag_K: int = 100) -> IndexReport:
    """Classify each power k <= kmax by comparing c sqrt(k) against an
    assumed critical value, with Hellinger/dissipativity diagnostics for
    the rescaled parameter.  The implied ergodic index is the largest k
    whose rescaled parameter stays below the assumed critical value
    (0 when even k = 1 falls outside)."""
    if c <= 0 or d_assumed <= 0:
        raise ValueError("c and d_assumed must be positive")
    rows = []
    for k in range(1, kmax + 1):
        ck = c * math.sqrt(k)
        rep = dissipativity_partial(ck, diag_K)
        rows.append(IndexRow(
            k=k,
            c_scaled=ck,
            conservative_proxy=bool(ck < d_assumed),
            hellinger=float(hellinger_S(ck, diag_K, 10 * diag_K)),
            dissipativity_partial=rep.partial,
            tail_slope=rep.tail_slope,
        ))
    implied = 0
    for row in rows:
        if row.conservative_proxy:
            implied = row.k
        else:
            break
    return IndexReport(c=c, d_assumed=d_assumed, rows=tuple(rows),
                       implied_index=implied)
