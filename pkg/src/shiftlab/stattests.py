"""Shared statistical acceptance tests (chi-square, KS, serial correlation).

Chi-square helpers pool low-expectation categories (Cochran rule) before
computing the statistic, which matters for the heavily skewed block laws
the factor pipeline produces.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def pool_expected(counts, expected, min_expected: float = 5.0):
    """Merge categories (ascending by expectation) until all pooled cells
    have expectation >= min_expected.  Returns (counts, expected) arrays."""
    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(expected, dtype=float)
    order = np.argsort(expected)
    pc, pe = [], []
    acc_c = acc_e = 0.0
    for i in order:
        acc_c += counts[i]
        acc_e += expected[i]
        if acc_e >= min_expected:
            pc.append(acc_c)
            pe.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0.0:
        if not pc:
            pc, pe = [acc_c], [acc_e]
        else:
            pc[-1] += acc_c
            pe[-1] += acc_e
    return np.array(pc), np.array(pe)


def chi_square_pooled(counts, expected, min_expected: float = 5.0):
    """Chi-square GOF with category pooling; returns (stat, p_value, dof)."""
    pc, pe = pool_expected(counts, expected, min_expected)
    if len(pc) < 2:
        return 0.0, 1.0, 0
    # rescale to identical totals (pooling keeps them equal up to rounding)
    pe = pe * pc.sum() / pe.sum()
    stat = float(np.sum((pc - pe) ** 2 / pe))
    dof = len(pc) - 1
    return stat, float(stats.chi2.sf(stat, dof)), dof


def chi_square_fair_bits(bits) -> tuple[float, float]:
    """Chi-square of a bit vector against the fair coin."""
    bits = np.asarray(bits)
    n = len(bits)
    ones = int(bits.sum())
    stat, p, _ = chi_square_pooled([n - ones, ones], [n / 2, n / 2])
    return stat, p


def serial_correlations(x, lags: int = 8) -> np.ndarray:
    """Pearson autocorrelations r_1..r_lags of a numeric sequence."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    den = float(np.dot(xc, xc))
    if den == 0.0:
        return np.zeros(lags)
    return np.array([float(np.dot(xc[:-k], xc[k:]) / den)
                     for k in range(1, lags + 1)])


def ks_uniform(values, lo: float, hi: float) -> tuple[float, float]:
    """Kolmogorov-Smirnov test of values against Uniform(lo, hi)."""
    u = (np.asarray(values, dtype=float) - lo) / (hi - lo)
    res = stats.kstest(u, "uniform")
    return float(res.statistic), float(res.pvalue)


def block_chi_square(bits, block_len: int, p_one: float,
                     min_expected: float = 5.0):
    """Chi-square of non-overlapping blocks against the i.i.d. block law."""
    bits = np.asarray(bits, dtype=np.int64)
    nb = len(bits) // block_len
    if nb == 0:
        return 0.0, 1.0, 0
    blocks = bits[:nb * block_len].reshape(nb, block_len)
    pat = np.zeros(nb, dtype=np.int64)
    for j in range(block_len):
        pat = pat * 2 + blocks[:, j]
    counts = np.bincount(pat, minlength=2 ** block_len)
    probs = np.empty(2 ** block_len)
    for b in range(2 ** block_len):
        pr = 1.0
        for j in range(block_len):
            bit = (b >> (block_len - 1 - j)) & 1
            pr *= p_one if bit else (1.0 - p_one)
        probs[b] = pr
    return chi_square_pooled(counts, probs * nb, min_expected)


def frequency_zscore(bits, p_one: float) -> float:
    """Standardized deviation of the empirical frequency of ones."""
    bits = np.asarray(bits)
    n = len(bits)
    se = math.sqrt(p_one * (1.0 - p_one) / n)
    return (float(bits.mean()) - p_one) / se


def uniformity_suite(bits, p_one: float, *, alpha: float = 0.001,
                     freq_sigmas: float = 4.0, max_abs_r: float = 0.01,
                     lags: int = 8) -> list[dict]:
    """The three-part acceptance suite for a claimed i.i.d. bit law:
    per-symbol frequency (z test), 3-block chi-square, and lag-1..lags
    serial correlations.  Returns one record per test."""
    z = frequency_zscore(bits, p_one)
    stat3, p3, _ = block_chi_square(bits, 3, p_one)
    rs = serial_correlations(bits, lags)
    rmax = float(np.max(np.abs(rs))) if len(rs) else 0.0
    return [
        {"name": "frequency", "statistic": z, "p_value": None,
         "pass": bool(abs(z) <= freq_sigmas)},
        {"name": "chi_square_3_blocks", "statistic": stat3, "p_value": p3,
         "pass": bool(p3 >= alpha)},
        {"name": "serial_correlation", "statistic": rmax, "p_value": None,
         "pass": bool(rmax < max_abs_r)},
    ]
