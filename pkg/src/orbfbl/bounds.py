"""Finite-blocklength bounds and approximations for ORBGRAND and ML decoding.

* ORB-RCU: E[min{1, (M-1) F(n^2 D(X, Y))}] with F the exact CDF of zeta_n,
  estimated by Monte Carlo over the transmitted-codeword metric.
* ORB-NA: Q((n I_ORB - ln(M-1) + ln(n)/2) / sqrt(n V_ORB)).
* ML benchmarks: the RCU relaxation E[min{1, (M-1) e^{-i(X;Y)}}] by Monte
  Carlo and the classical (C, V) normal approximation.

Code sizes are handled as ``log_m = ln M`` throughout; ``M`` itself is only
materialised when it fits comfortably in 64 bits.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .channel import (
    BinaryInputChannel,
    capacity_and_dispersion as _capacity_and_dispersion,
    reliability_model,
)
from .errors import DomainError, InfeasibleError, SearchCapError
from .metric import sample_metric_sums
from .numerics import LN2, log1pexp, log_m_minus_1, qfunc, qinv
from .tail import log_lookup, tail_table

DEFAULT_SAMPLES = 2_000_000
DEFAULT_SHARDS = 8
N_SEARCH_CAP = 100_000
_Z95 = 1.959963984540054
_LOG_M_INT_LIMIT = 62 * LN2


class Method(str, enum.Enum):
    ORB_RCU_MC = "ORB_RCU_MC"
    ORB_NA = "ORB_NA"
    ML_RCU_RELAX_MC = "ML_RCU_RELAX_MC"
    ML_NA = "ML_NA"
    NA_CONVERSE = "NA_CONVERSE"

    @property
    def is_mc(self) -> bool:
        return self in (Method.ORB_RCU_MC, Method.ML_RCU_RELAX_MC)


def m_from_log(log_m: float) -> int | None:
    """Integer M for ln M below ~62 bits, else None."""
    if log_m >= _LOG_M_INT_LIMIT:
        return None
    return int(round(math.exp(log_m)))


def log_m_for_rate(rate: float, n: int) -> float:
    """ln ceil(e^{n R}), exact while the ceiling is representable."""
    x = rate * n
    if x < _LOG_M_INT_LIMIT:
        return math.log(math.ceil(math.exp(x)))
    return x


def _as_log_m(m, log_m) -> float:
    if (m is None) == (log_m is None):
        raise ValueError("give exactly one of m or log_m")
    if m is not None:
        if m < 1:
            raise DomainError("codebook size must be >= 1")
        return math.log(m)
    return float(log_m)


@dataclass(frozen=True)
class BoundEstimate:
    """A bound value with its 95% half-width (0 for closed forms)."""

    method: Method
    n: int
    log_m: float
    value: float
    half_width: float = 0.0
    samples: int = 0
    seed: int | None = None
    std_error: float = 0.0

    @property
    def m(self) -> int | None:
        return m_from_log(self.log_m)

    @property
    def upper(self) -> float:
        return self.value + self.half_width

    @property
    def resolved(self) -> bool:
        """False when a Monte Carlo value sits within 3 SE of zero."""
        return not (self.samples and self.value <= 3.0 * self.std_error)

    def to_json(self) -> dict:
        return {
            "method": self.method.value,
            "n": self.n,
            "M": self.m,
            "rate_nats": self.log_m / self.n,
            "value": self.value,
            "half_width": self.half_width,
            "samples": self.samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class OperatingPoint:
    n: int
    log_m: float
    epsilon: float
    method: Method

    @property
    def m(self) -> int | None:
        return m_from_log(self.log_m)

    @property
    def rate(self) -> float:
        return self.log_m / self.n

    def to_json(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["M"] = self.m
        d["rate_nats"] = self.rate
        return d


# -- Monte Carlo plumbing -------------------------------------------------------


def _shard_counts(samples: int, shards: int) -> list[int]:
    base, extra = divmod(samples, shards)
    return [base + (1 if k < extra else 0) for k in range(shards)]


def _sharded(draw, samples: int, seed: int, shards: int, key=()) -> np.ndarray:
    """Run ``draw(rng, count)`` on independent substreams and concatenate in shard order.

    Output depends only on (seed, key, samples, shards), not on thread count.
    """
    seqs = np.random.SeedSequence([seed, *key]).spawn(shards)
    counts = _shard_counts(samples, shards)
    workers = max(1, min(shards, os.cpu_count() or 1))
    jobs = [(np.random.default_rng(sq), c) for sq, c in zip(seqs, counts)]
    if workers == 1:
        parts = [draw(rng, c) for rng, c in jobs]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: draw(*job), jobs))
    return np.concatenate(parts)


class RcuSamples:
    """Per-sample log-probabilities ``ln P_k`` whose clipped mean is an RCU value.

    The RCU-type bound at code size M is ``mean(min{1, (M-1) P_k})``; the
    samples do not depend on M, so one draw serves every M at a given n.
    """

    def __init__(self, method: Method, n: int, log_p: np.ndarray, seed: int):
        self.method, self.n, self.log_p, self.seed = method, n, log_p, seed

    def estimate(self, m=None, *, log_m=None) -> BoundEstimate:
        lm = _as_log_m(m, log_m)
        lm1 = log_m_minus_1(lm)
        if lm1 == -math.inf:
            terms = np.zeros_like(self.log_p)
        else:
            terms = np.exp(np.minimum(lm1 + self.log_p, 0.0))
        k = terms.size
        value = float(np.mean(terms))
        se = float(np.std(terms, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        return BoundEstimate(self.method, self.n, lm, value, _Z95 * se, k, self.seed, se)


def orb_rcu_samples(channel, n, samples=DEFAULT_SAMPLES, seed=0, shards=DEFAULT_SHARDS) -> RcuSamples:
    """Draw ln F(n^2 D(X, Y)) for the ORB-RCU bound using the exact tail table."""
    table = tail_table(n)
    log_f = table.log_cdf
    draw = lambda rng, c: log_f[sample_metric_sums(channel, n, c, rng)]  # noqa: E731
    return RcuSamples(Method.ORB_RCU_MC, n, _sharded(draw, samples, seed, shards, key=(n, 0)), seed)


def orb_rcu(channel, n, m=None, *, log_m=None, samples=DEFAULT_SAMPLES, seed=0,
            shards=DEFAULT_SHARDS) -> BoundEstimate:
    """Monte Carlo ORB-RCU bound at blocklength n and code size M."""
    lm = _as_log_m(m, log_m)
    if lm == 0.0:
        return BoundEstimate(Method.ORB_RCU_MC, n, 0.0, 0.0, 0.0, samples, seed)
    return orb_rcu_samples(channel, n, samples, seed, shards).estimate(log_m=lm)


def _info_density_sums(channel: BinaryInputChannel, n: int, count: int, rng) -> np.ndarray:
    rows = max(1, 4_000_000 // n)
    out = np.empty(count)
    for start in range(0, count, rows):
        k = min(rows, count - start)
        x, l = channel.sample_llrs((k, n), rng)
        out[start : start + k] = np.sum(LN2 - log1pexp(-x * l), axis=1)
    return out


def ml_rcu_samples(channel, n, samples=DEFAULT_SAMPLES, seed=0, shards=DEFAULT_SHARDS) -> RcuSamples:
    """Draw -i(X^n; Y^n) for the relaxed ML RCU bound."""
    draw = lambda rng, c: -_info_density_sums(channel, n, c, rng)  # noqa: E731
    return RcuSamples(Method.ML_RCU_RELAX_MC, n, _sharded(draw, samples, seed, shards, key=(n, 1)), seed)


def ml_rcu_relaxed(channel, n, m=None, *, log_m=None, samples=DEFAULT_SAMPLES, seed=0,
                   shards=DEFAULT_SHARDS) -> BoundEstimate:
    """Monte Carlo E[min{1, (M-1) exp(-i(X;Y))}]."""
    lm = _as_log_m(m, log_m)
    if lm == 0.0:
        return BoundEstimate(Method.ML_RCU_RELAX_MC, n, 0.0, 0.0, 0.0, samples, seed)
    return ml_rcu_samples(channel, n, samples, seed, shards).estimate(log_m=lm)


# -- normal approximations ------------------------------------------------------


def _na_epsilon(first: float, second: float, n: int, log_m: float) -> float:
    if second <= 0.0:
        raise DomainError("dispersion must be positive for the normal approximation")
    lm1 = log_m_minus_1(log_m)
    return float(qfunc((n * first - lm1 + 0.5 * math.log(n)) / math.sqrt(n * second)))


def orb_na_epsilon(channel, n, m=None, *, log_m=None) -> float:
    """ORBGRAND normal approximation of the ORB-RCU error probability."""
    model = reliability_model(channel)
    return _na_epsilon(model.i_orb, model.v_orb, n, _as_log_m(m, log_m))


def ml_na_epsilon(channel, n, m=None, *, log_m=None) -> float:
    c, v = capacity_and_dispersion(channel)
    return _na_epsilon(c, v, n, _as_log_m(m, log_m))


def _na_rate(first: float, second: float, n: int, epsilon: float) -> float:
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    return first - math.sqrt(second / n) * float(qinv(epsilon)) + math.log(n) / (2 * n)


def orb_na_rate(channel, n, epsilon) -> float:
    """I_ORB - sqrt(V_ORB / n) Q^{-1}(eps) + ln(n) / (2n) in nats per channel use."""
    model = reliability_model(channel)
    return _na_rate(model.i_orb, model.v_orb, n, epsilon)


def na_converse_rate(channel, n, epsilon) -> float:
    """Classical normal approximation C - sqrt(V / n) Q^{-1}(eps) + ln(n) / (2n)."""
    c, v = capacity_and_dispersion(channel)
    return _na_rate(c, v, n, epsilon)


def capacity_and_dispersion(channel) -> tuple[float, float]:
    """Uniform-input capacity C (nats) and dispersion V (nats^2)."""
    return _capacity_and_dispersion(channel)


# -- inversion: max rate and min blocklength -----------------------------------


def _na_params(channel, method):
    if method is Method.ORB_NA:
        model = reliability_model(channel)
        return model.i_orb, model.v_orb
    return capacity_and_dispersion(channel)


def _na_max_log_m(first, second, n, epsilon) -> float:
    # Largest M with ln(M - 1) <= L.
    big_l = n * first - math.sqrt(n * second) * float(qinv(epsilon)) + 0.5 * math.log(n)
    if big_l < _LOG_M_INT_LIMIT - 1:
        return math.log(math.floor(1.0 + math.exp(big_l)))
    return big_l + math.log1p(math.exp(-big_l))


def _bisect_log_m(predicate, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Largest ln M in [lo, hi] with predicate true, assuming monotonicity."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _bound_predicate(channel, n, epsilon, method, samples, seed, shards):
    """Callable ``ln M -> bound <= eps`` (MC methods use the upper 95% limit)."""
    if method is Method.ORB_NA:
        return lambda lm: orb_na_epsilon(channel, n, log_m=lm) <= epsilon
    if method is Method.ML_NA:
        return lambda lm: ml_na_epsilon(channel, n, log_m=lm) <= epsilon
    if method is Method.ORB_RCU_MC:
        draws = orb_rcu_samples(channel, n, samples, seed, shards)
    elif method is Method.ML_RCU_RELAX_MC:
        draws = ml_rcu_samples(channel, n, samples, seed, shards)
    else:
        raise ValueError(f"method {method} cannot be inverted")
    return lambda lm: draws.estimate(log_m=lm).upper <= epsilon


def max_rate(channel, n, epsilon, method=Method.ORB_NA, *, samples=DEFAULT_SAMPLES, seed=0,
             shards=DEFAULT_SHARDS, bisect=False) -> OperatingPoint:
    """Largest code size whose bound stays at or below ``epsilon``.

    NA methods invert in closed form unless ``bisect`` is set; Monte Carlo
    methods bisect on ln M against the upper confidence limit.
    """
    method = Method(method)
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    if method in (Method.ORB_NA, Method.ML_NA) and not bisect:
        first, second = _na_params(channel, method)
        lm = _na_max_log_m(first, second, n, epsilon)
        if lm < LN2 - 1e-12:
            raise InfeasibleError(f"{method.value}: M = 2 already exceeds eps = {epsilon} at n = {n}")
        return OperatingPoint(n, lm, epsilon, method)
    pred = _bound_predicate(channel, n, epsilon, method, samples, seed, shards)
    if not pred(LN2):
        raise InfeasibleError(f"{method.value}: M = 2 already exceeds eps = {epsilon} at n = {n}")
    hi = 2.0 * n * LN2 + 10.0
    return OperatingPoint(n, _bisect_log_m(pred, LN2, hi), epsilon, method)


def _na_blocklength_guess(first, second, rate, epsilon) -> int:
    """Continuous solution of first - sqrt(second/n) Q^-1 + ln(n)/(2n) = rate."""
    gap = first - rate
    if gap <= 0:
        raise InfeasibleError("target rate is not below the first-order rate")
    q = float(qinv(epsilon))
    n = max(2.0, second * q * q / gap**2) if q > 0 else 2.0
    for _ in range(100):
        f = first - math.sqrt(second / n) * q + math.log(n) / (2 * n) - rate
        if abs(f) < 1e-12:
            break
        df = 0.5 * math.sqrt(second) * q * n**-1.5 + (1 - math.log(n)) / (2 * n * n)
        n = max(2.0, n - f / df) if df > 0 else n * 1.25
    return max(2, int(round(n)))


def min_blocklength(channel, rate_fraction, epsilon, method=Method.ORB_NA, *,
                    samples=DEFAULT_SAMPLES, seed=0, shards=DEFAULT_SHARDS, probe_log=None) -> int:
    """Smallest n with bound(n, ceil(e^{R n})) <= eps, R = rate_fraction * C.

    The search starts at the ORB-NA prediction, widens the bracket by 25%
    steps until the predicate flips and then bisects on integers.  Probes are
    appended to ``probe_log`` as ``(n, BoundEstimate-or-value, ok)`` when given.
    """
    method = Method(method)
    if not 0.0 < rate_fraction < 1.0:
        raise DomainError("rate_fraction must lie in (0, 1)")
    capacity, _ = capacity_and_dispersion(channel)
    rate = rate_fraction * capacity
    first, second = _na_params(channel, Method.ML_NA if method in (Method.ML_NA, Method.ML_RCU_RELAX_MC)
                               else Method.ORB_NA)

    def ok(n: int) -> bool:
        if n > N_SEARCH_CAP:
            raise SearchCapError(f"no blocklength up to {N_SEARCH_CAP} meets the target")
        lm = log_m_for_rate(rate, n)
        if method is Method.ORB_NA:
            val = orb_na_epsilon(channel, n, log_m=lm)
            res = val <= epsilon
        elif method is Method.ML_NA:
            val = ml_na_epsilon(channel, n, log_m=lm)
            res = val <= epsilon
        elif method is Method.ORB_RCU_MC:
            val = orb_rcu(channel, n, log_m=lm, samples=samples, seed=seed, shards=shards)
            res = val.upper <= epsilon
        elif method is Method.ML_RCU_RELAX_MC:
            val = ml_rcu_relaxed(channel, n, log_m=lm, samples=samples, seed=seed, shards=shards)
            res = val.upper <= epsilon
        else:
            raise ValueError(f"method {method} cannot be inverted")
        if probe_log is not None:
            probe_log.append((n, val, res))
        return res

    n0 = _na_blocklength_guess(first, second, rate, epsilon)
    if ok(n0):
        hi = n0
        lo = max(1, int(n0 / 1.25))
        while lo > 1 and ok(lo):
            hi = lo
            lo = max(1, int(lo / 1.25))
        if lo == 1 and ok(1):
            return 1
    else:
        lo = n0
        hi = int(math.ceil(n0 * 1.25))
        while not ok(hi):
            lo = hi
            hi = int(math.ceil(hi * 1.25))
    # invariant: ok(hi) true, ok(lo) false
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
