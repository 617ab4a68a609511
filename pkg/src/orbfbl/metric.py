"""The ORBGRAND decoding metric and Hoeffding-decomposition diagnostics.

For a candidate codeword ``x`` and LLRs ``l`` the metric is

    D(x, y) = (1/n^2) * sum_i r_i * 1(sgn(l_i) x_i < 0),

with ``r_i`` the rank of ``|l_i|`` (1 = least reliable).  The integer
``s = n^2 D`` is carried exactly.  Equal reliabilities are ranked by ascending
position, and ``sgn(0) = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import BinaryInputChannel, compute_mu

_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class MetricSample:
    s: int
    n: int

    @property
    def d(self) -> float:
        return self.s / self.n**2

    @property
    def d_exact(self) -> Fraction:
        return Fraction(self.s, self.n**2)


def ranks(reliabilities) -> np.ndarray:
    """Ranks 1..n of ``reliabilities`` (smallest = 1, ties by index)."""
    r = np.asarray(reliabilities)
    order = np.argsort(r, kind="stable")
    out = np.empty(r.shape[0], dtype=np.int64)
    out[order] = np.arange(1, r.shape[0] + 1)
    return out


def hard_decision(llrs) -> np.ndarray:
    """+1 where llr >= 0, else -1."""
    return np.where(np.asarray(llrs) >= 0, 1, -1).astype(np.int8)


def orb_metric(codeword, llrs) -> MetricSample:
    """Exact ORBGRAND metric of a +-1 codeword against an LLR vector."""
    codeword = np.asarray(codeword)
    llrs = np.asarray(llrs, dtype=float)
    if codeword.shape != llrs.shape or codeword.ndim != 1:
        raise ValueError(f"codeword shape {codeword.shape} != llr shape {llrs.shape}")
    disagree = hard_decision(llrs) != codeword
    r = ranks(np.abs(llrs))
    return MetricSample(int(r[disagree].sum()), llrs.shape[0])


def _metric_sums(lam: np.ndarray, err: np.ndarray) -> np.ndarray:
    """Row-wise s = sum_i rank_i * E_i for reliability/error matrices.

    Reliabilities are nonnegative, so their float64 bit patterns sort like
    the values; the error flag rides in the lowest mantissa bit and one plain
    sort yields the errors in rank order.  This departs from the index
    tie-break of :func:`ranks` only for reliabilities within one ulp of each
    other.
    """
    keys = np.ascontiguousarray(lam, dtype=np.float64).view(np.int64)
    keys = (keys & ~np.int64(1)) | err.astype(np.int64)
    keys.sort(axis=1)
    k = np.arange(1, lam.shape[1] + 1, dtype=np.float64)
    return np.rint((keys & 1).astype(np.float64) @ k).astype(np.int64)


def sample_metric_sums(channel: BinaryInputChannel, n: int, size: int, rng) -> np.ndarray:
    """``size`` i.i.d. draws of the transmitted-codeword metric ``s = n^2 D(X, Y)``."""
    rows = max(1, _CHUNK_ELEMS // n)
    out = np.empty(size, dtype=np.int64)
    for start in range(0, size, rows):
        m = min(rows, size - start)
        lam, err = channel.sample_reliability((m, n), rng)
        out[start : start + m] = _metric_sums(lam, err)
    return out


def sample_transmitted_metric(channel: BinaryInputChannel, n: int, rng) -> MetricSample:
    """One draw: uniform codeword, channel output, metric of the sent codeword."""
    return MetricSample(int(sample_metric_sums(channel, n, 1, rng)[0]), n)


@dataclass(frozen=True)
class HoeffdingDiagnostics:
    """Per-rep pieces of D = (1 - 1/n)(M_n1 + M_n2 + mu) + sum(E)/n^2.

    ``g_values`` has shape (reps, n); ``m_n`` and ``m_n2`` have shape (reps,).
    ``varsigma`` is the Monte Carlo mean of the U-statistic M_n, an unbiased
    estimate of the kernel mean (which equals mu).
    """

    g_values: np.ndarray
    k_values: np.ndarray
    m_n: np.ndarray
    m_n2: np.ndarray
    varsigma: float


def hoeffding_diagnostics(channel: BinaryInputChannel, n: int, reps: int, rng) -> HoeffdingDiagnostics:
    """Sample the first-order projections g(Z_i) and degenerate term M_{n,2}."""
    if n < 2:
        raise ValueError("U-statistic needs n >= 2")
    mu = compute_mu(channel)
    lam, err = channel.sample_reliability((reps, n), rng)
    s = _metric_sums(lam, err)
    if channel.vectorized_stats:
        psi_vals, a_vals = channel.psi(lam), channel.a(lam)
    else:
        psi_vals = np.vectorize(channel.psi, otypes=[float])(lam)
        a_vals = np.vectorize(channel.a, otypes=[float])(lam)
    g = 0.5 * (err * psi_vals + a_vals) - mu
    d = s / n**2
    r1 = err.sum(axis=1) / n**2
    m_n = (d - r1) / (1.0 - 1.0 / n)
    m_n1 = 2.0 * g.mean(axis=1)
    m_n2 = m_n - m_n1 - mu
    return HoeffdingDiagnostics(g, 2.0 * g, m_n, m_n2, float(m_n.mean()))
