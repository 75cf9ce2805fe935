"""Product measures on bi-infinite sequence spaces.

Measures are given by lazy marginal families: a callable ``n -> probability
vector`` over a fixed finite alphabet (no infinite data is ever stored).
Index ranges are always explicit, inclusive ``(lo, hi)`` pairs, and every
diagnostic that truncates a sum over the integers reports the partial sum
together with its last-decade increment so convergence can be audited.

The module provides:
  * ``FiniteProductMeasure`` / ``DensityFamily`` / ``SequenceSpec`` types,
  * the built-in marginal families (half-stationary ``nu_c``, perturbed
    ``mu^(p,c)``, plain i.i.d.),
  * log Radon-Nikodym partial sums for shifts and transpositions,
  * Kakutani-style squared-distance sums,
  * the random-insertion (RI) and randomized-product-measure (RPM)
    operations, which mix a measure coordinatewise with an external
    i.i.d. source.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

PROB_TOL = 1e-12
DENSITY_TOL = 1e-10


class ZeroMassError(ValueError):
    """A log-RN evaluation hit a symbol with zero marginal mass."""


def _as_vector(v) -> np.ndarray:
    return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class FiniteProductMeasure:
    """Product measure with finitely many symbols per coordinate.

    ``marginal`` maps an integer index to a probability vector aligned with
    ``alphabet``.  ``marginal_block``, when provided, returns the stacked
    vectors for a contiguous index range in one call; the built-in families
    supply vectorized blocks so that sampling a 10^6-coordinate window does
    not pay one Python call per coordinate.

    ``doeblin_delta`` is a claimed uniform lower bound on all marginal
    masses (0 means "unknown"); it is re-checked on every queried index.
    """

    alphabet: tuple
    marginal: Callable[[int], Sequence[float]]
    doeblin_delta: float = 0.0
    description: str = ""
    marginal_block: Callable[[int, int], np.ndarray] | None = None

    def probs(self, n: int) -> np.ndarray:
        p = _as_vector(self.marginal(n))
        self._validate(p.reshape(1, -1), n)
        return p

    def block(self, start: int, length: int) -> np.ndarray:
        """Marginals for indices ``start .. start+length-1`` as an (L, A) array."""
        if length < 0:
            raise ValueError("length must be nonnegative")
        if self.marginal_block is not None:
            p = np.asarray(self.marginal_block(start, length), dtype=float)
        else:
            p = np.stack([_as_vector(self.marginal(start + i)) for i in range(length)]) \
                if length else np.empty((0, len(self.alphabet)))
        self._validate(p, start)
        return p

    def _validate(self, p: np.ndarray, start: int) -> None:
        if p.shape[-1] != len(self.alphabet):
            raise ValueError(
                f"marginal length {p.shape[-1]} != alphabet size {len(self.alphabet)}")
        if np.any(p < 0):
            n = start + int(np.argwhere(p < 0)[0][0])
            raise ValueError(f"negative mass in marginal at index {n}")
        s = p.sum(axis=-1)
        if np.any(np.abs(s - 1.0) > PROB_TOL):
            n = start + int(np.argmax(np.abs(s - 1.0)))
            raise ValueError(f"marginal at index {n} sums to {s.max()!r}, not 1")
        if self.doeblin_delta > 0 and np.any(p < self.doeblin_delta - 1e-15):
            n = start + int(np.argwhere(p < self.doeblin_delta - 1e-15)[0][0])
            raise ValueError(
                f"marginal mass at index {n} falls below claimed Doeblin "
                f"bound {self.doeblin_delta}")

    def point_mass(self, n: int, symbol) -> float:
        return float(self.probs(n)[self.alphabet.index(symbol)])

    def symbol_index(self, symbol) -> int:
        return self.alphabet.index(symbol)


@dataclass(frozen=True)
class DensityFamily:
    """Indexed family of piecewise-constant probability densities.

    ``density(n, u)`` accepts scalars or numpy arrays for ``u``;
    ``breakpoints(n)`` lists the interior discontinuities in increasing
    order.  Between consecutive breakpoints the density is constant, which
    makes integration and inverse-CDF sampling exact.
    """

    support: tuple[float, float]
    density: Callable[[int, np.ndarray], np.ndarray]
    breakpoints: Callable[[int], Sequence[float]]
    description: str = ""

    def piece_edges(self, n: int) -> np.ndarray:
        lo, hi = self.support
        inner = [b for b in self.breakpoints(n) if lo < b < hi]
        return np.array([lo, *inner, hi], dtype=float)

    def piece_values(self, n: int) -> np.ndarray:
        edges = self.piece_edges(n)
        mids = 0.5 * (edges[:-1] + edges[1:])
        return np.asarray(self.density(n, mids), dtype=float)

    def integral(self, n: int) -> float:
        """Exact integral (sum of value * length over the pieces)."""
        edges = self.piece_edges(n)
        return float(np.dot(self.piece_values(n), np.diff(edges)))

    def validate(self, n: int) -> None:
        vals = self.piece_values(n)
        if np.any(vals < 0):
            raise ValueError(f"negative density at index {n}")
        total = self.integral(n)
        if abs(total - 1.0) > DENSITY_TOL:
            raise ValueError(f"density at index {n} integrates to {total!r}")

    def point_mass(self, n: int, u: float) -> float:
        return float(self.density(n, np.asarray(u, dtype=float)))


@dataclass(frozen=True)
class SequenceSpec:
    """A base probability ``p`` plus a perturbation sequence ``a(n)``.

    Marginals built from a spec clamp back to ``p`` whenever the perturbed
    value leaves the open interval (0, 1); the closed endpoints are clamped
    too, so no marginal mass can reach 0.
    """

    p: float
    a: Callable[[int], float]
    description: str = ""

    def marginal_zero(self, n: int, c: float = 1.0) -> float:
        v = self.p + c * self.a(n)
        return v if 0.0 < v < 1.0 else self.p

    def check_decay(self, lo: int, hi: int) -> bool:
        """Loose decay probe: |a| at the range ends is <= its interior max."""
        vals = np.abs(self.a_block(lo, hi - lo + 1))
        if len(vals) < 3:
            return True
        return bool(max(vals[0], vals[-1]) <= vals.max() + 1e-15)

    def a_block(self, start: int, length: int) -> np.ndarray:
        return np.array([self.a(start + i) for i in range(length)], dtype=float)


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------

def inverse_sqrt(n: int) -> float:
    """a_n = 1/sqrt(n) for n >= 1, else 0."""
    return 1.0 / math.sqrt(n) if n >= 1 else 0.0


def log_damped(n: int) -> float:
    """a_n = 1/((n+4) log(n+4)) for n >= 2, else 0."""
    return 1.0 / ((n + 4) * math.log(n + 4)) if n >= 2 else 0.0


def iid(vector) -> FiniteProductMeasure:
    """I.i.d. measure on {0, 1, ..., len(vector)-1}."""
    v = _as_vector(vector)
    alphabet = tuple(range(len(v)))

    def block(start: int, length: int) -> np.ndarray:
        return np.tile(v, (length, 1))

    return FiniteProductMeasure(
        alphabet=alphabet,
        marginal=lambda n: v,
        doeblin_delta=float(v.min()) if v.min() > 0 else 0.0,
        description=f"iid{tuple(round(x, 12) for x in v)}",
        marginal_block=block,
    )


def iid_binary(p0: float) -> FiniteProductMeasure:
    return iid((p0, 1.0 - p0))


def nu_c_zero_mass(n, c):
    """Perturbation of the half-stationary family, vectorized over ``n``."""
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    pos = n >= 1
    with np.errstate(divide="ignore"):
        val = np.where(pos, c / np.sqrt(np.where(pos, n, 1.0)), 0.0)
    keep = pos & (val < 0.5)
    out[keep] = val[keep]
    return out


def make_nu_c(c: float) -> FiniteProductMeasure:
    """Half-stationary binary measure: marginal(n)(0) = 1/2 + c/sqrt(n)
    for n >= 1 as long as the perturbation stays below 1/2, and 1/2
    elsewhere."""
    if c <= 0:
        raise ValueError("c must be positive")

    def marg(n: int):
        a = nu_c_zero_mass(np.array([n]), c)[0]
        return (0.5 + a, 0.5 - a)

    def block(start: int, length: int) -> np.ndarray:
        a = nu_c_zero_mass(np.arange(start, start + length), c)
        return np.column_stack([0.5 + a, 0.5 - a])

    return FiniteProductMeasure(
        alphabet=(0, 1),
        marginal=marg,
        doeblin_delta=0.0,
        description=f"nu_c(c={c})",
        marginal_block=block,
    )


def make_mu_pc(spec: SequenceSpec, c: float) -> FiniteProductMeasure:
    """Binary measure with marginal(n)(0) = p + c*a_n, clamped to p whenever
    the perturbed value leaves (0, 1)."""
    if not 0.0 < spec.p < 1.0:
        raise ValueError("spec.p must lie in (0, 1)")

    def marg(n: int):
        m0 = spec.marginal_zero(n, c)
        return (m0, 1.0 - m0)

    def block(start: int, length: int) -> np.ndarray:
        raw = spec.p + c * spec.a_block(start, length)
        m0 = np.where((raw > 0.0) & (raw < 1.0), raw, spec.p)
        return np.column_stack([m0, 1.0 - m0])

    return FiniteProductMeasure(
        alphabet=(0, 1),
        marginal=marg,
        doeblin_delta=0.0,
        description=f"mu(p={spec.p},c={c})",
        marginal_block=block,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def doeblin_delta(m: FiniteProductMeasure, span: tuple[int, int]) -> float:
    """Infimum of all marginal masses over the inclusive index range.

    Returns 0 (with a warning naming the first offending index) if some
    mass vanishes on the range.
    """
    lo, hi = span
    p = m.block(lo, hi - lo + 1)
    if np.any(p == 0.0):
        n = lo + int(np.argwhere(p == 0.0)[0][0])
        warnings.warn(f"zero marginal mass at index {n}", RuntimeWarning)
        return 0.0
    return float(p.min())


def kakutani_shift_sum(m: FiniteProductMeasure, k: int, N: int) -> float:
    """Sum over |n| <= N of (marginal(n)(0) - marginal(n-k)(0))^2.

    Nondecreasing in N; identically zero for i.i.d. measures and for k = 0.
    """
    if len(m.alphabet) != 2:
        raise ValueError("kakutani_shift_sum needs a two-symbol alphabet")
    if k == 0:
        return 0.0
    cur = m.block(-N, 2 * N + 1)[:, 0]
    lag = m.block(-N - k, 2 * N + 1)[:, 0]
    return float(np.sum((cur - lag) ** 2))


def sum_with_tail(partial: Callable[[int], float], N: int) -> tuple[float, float]:
    """Evaluate a truncated sum at N and report (value, last-decade increment)."""
    value = partial(N)
    prev = partial(max(N // 10, 1))
    return value, value - prev


def shift_sum_report(m: FiniteProductMeasure, k: int, N: int) -> dict:
    """JSON-ready record for the Kakutani shift diagnostic."""
    value, tail = sum_with_tail(lambda nn: kakutani_shift_sum(m, k, nn), N)
    return {
        "family": m.description,
        "k": k,
        "N": N,
        "value": value,
        "tail_increment": tail,
    }


def log_rn_shift(m, k: int, w) -> float:
    """Finite-window log Radon-Nikodym partial sum for the k-step shift:
    sum over window indices n of log(m_{n-k}(x_n) / m_n(x_n)).

    Works for both finite-alphabet measures and density families.
    """
    total = 0.0
    for n, x in w.items():
        num = m.point_mass(n - k, x)
        den = m.point_mass(n, x)
        if num <= 0.0 or den <= 0.0:
            raise ZeroMassError(f"zero mass at index {n} (symbol {x!r})")
        total += math.log(num) - math.log(den)
    return total


def log_rn_swap(m, i: int, j: int, xi, xj) -> float:
    """Log RN derivative of the transposition (i j) at values (xi, xj):
    log[m_i(xj) m_j(xi)] - log[m_i(xi) m_j(xj)]."""
    if i == j:
        return 0.0
    vals = [m.point_mass(i, xj), m.point_mass(j, xi),
            m.point_mass(i, xi), m.point_mass(j, xj)]
    if any(v <= 0.0 for v in vals):
        raise ZeroMassError(f"zero mass in swap ({i} {j})")
    return math.log(vals[0]) + math.log(vals[1]) - math.log(vals[2]) - math.log(vals[3])


# ---------------------------------------------------------------------------
# RI / RPM operations
# ---------------------------------------------------------------------------

def rpm(m: FiniteProductMeasure, p: float, alpha) -> FiniteProductMeasure:
    """Randomized product measure: each coordinate keeps m with probability
    p and is replaced by an independent alpha-draw otherwise, so
    marginal(n) = p * m.marginal(n) + (1-p) * alpha, exactly."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    av = _as_vector(alpha)
    if len(av) != len(m.alphabet):
        raise ValueError("alpha must live on the same alphabet")

    def block(start: int, length: int) -> np.ndarray:
        return p * m.block(start, length) + (1.0 - p) * av

    return FiniteProductMeasure(
        alphabet=m.alphabet,
        marginal=lambda n: p * np.asarray(m.probs(n)) + (1.0 - p) * av,
        doeblin_delta=0.0,
        description=f"rpm({m.description},p={p})",
        marginal_block=block,
    )


def ri(m: FiniteProductMeasure, p: float, alpha) -> FiniteProductMeasure:
    """Random insertion: the coin that decides "keep or replace" is kept in
    the output, which therefore lives on alphabet x {H, T} with
    mass(n)(a, H) = p * m_n(a) and mass(n)(a, T) = (1-p) * alpha(a)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    av = _as_vector(alpha)
    if len(av) != len(m.alphabet):
        raise ValueError("alpha must live on the same alphabet")
    alphabet = tuple((a, side) for side in ("H", "T") for a in m.alphabet)

    def block(start: int, length: int) -> np.ndarray:
        base = m.block(start, length)
        return np.hstack([p * base, (1.0 - p) * np.tile(av, (length, 1))])

    return FiniteProductMeasure(
        alphabet=alphabet,
        marginal=lambda n: np.concatenate(
            [p * np.asarray(m.probs(n)), (1.0 - p) * av]),
        doeblin_delta=0.0,
        description=f"ri({m.description},p={p})",
        marginal_block=block,
    )


def forget_coin(mri: FiniteProductMeasure) -> FiniteProductMeasure:
    """Marginalize the {H, T} coordinate of a random-insertion measure.

    The result agrees exactly with the corresponding RPM measure, which is
    how the "RPM is a measure-preserving factor of RI" identity is checked.
    """
    half = len(mri.alphabet) // 2
    base_alphabet = tuple(a for a, side in mri.alphabet[:half])

    def block(start: int, length: int) -> np.ndarray:
        full = mri.block(start, length)
        return full[:, :half] + full[:, half:]

    return FiniteProductMeasure(
        alphabet=base_alphabet,
        marginal=lambda n: np.asarray(mri.probs(n))[:half]
        + np.asarray(mri.probs(n))[half:],
        doeblin_delta=0.0,
        description=f"forget_coin({mri.description})",
        marginal_block=block,
    )


# ---------------------------------------------------------------------------
# Textual family specs (CLI / config entry point)
# ---------------------------------------------------------------------------

def parse_measure(text: str) -> FiniteProductMeasure:
    """Build a measure from a compact textual spec.

    Formats:
      ``iid:<p0>``        i.i.d. binary with P(0) = p0
      ``nu_c:<c>``        half-stationary family with parameter c
      ``mu:<p>,<c>``      p + c/sqrt(n) family (clamped)
    """
    name, _, rest = text.partition(":")
    try:
        if name == "iid":
            return iid_binary(float(rest))
        if name == "nu_c":
            return make_nu_c(float(rest))
        if name == "mu":
            p_str, c_str = rest.split(",")
            return make_mu_pc(SequenceSpec(float(p_str), inverse_sqrt), float(c_str))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad measure spec {text!r}: {exc}") from exc
    raise ValueError(f"unknown measure family {name!r}")
