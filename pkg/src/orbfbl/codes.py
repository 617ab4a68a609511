"""ORBGRAND decoder simulation.

Error patterns are sets of rank values; pattern weight is the sum of its
ranks.  The stream is ordered by weight, then by number of flips, then
lexicographically, so the first codeword the decoder hits minimises the
ORBGRAND metric.  Ensemble simulations decode i.i.d. uniform +-1 codebooks
by direct metric minimisation (equivalent to the untruncated decoder).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .bounds import BoundEstimate, Method, _Z95
from .channel import BinaryInputChannel
from .errors import SizeGuardError
from .metric import hard_decision, ranks

MAX_ENSEMBLE_M = 2**16
MAX_ENSEMBLE_N = 64


@dataclass(frozen=True)
class ErrorPattern:
    flip_set: tuple[int, ...]

    @property
    def weight(self) -> int:
        return sum(self.flip_set)


def _distinct_parts(total: int, parts: int, smallest: int, largest: int) -> Iterator[tuple[int, ...]]:
    """Increasing tuples of ``parts`` distinct integers in [smallest, largest] summing to ``total``,
    in lexicographic order."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    # the remaining parts-1 values are > first, so first <= (total - (parts-1)parts/2) / parts
    top = min(largest, (total - parts * (parts - 1) // 2) // parts)
    for first in range(smallest, top + 1):
        rest = total - first
        # largest achievable sum of the remaining parts
        if rest > (parts - 1) * largest - (parts - 1) * (parts - 2) // 2:
            continue
        for tail in _distinct_parts(rest, parts - 1, first + 1, largest):
            yield (first, *tail)


def ep_stream(n: int, max_queries: int | None = None) -> Iterator[ErrorPattern]:
    """Yield error patterns in ORBGRAND query order (at most ``max_queries``)."""
    if max_queries is not None and max_queries < 1:
        raise ValueError("max_queries must be >= 1")
    emitted = 0
    for w in range(n * (n + 1) // 2 + 1):
        max_parts = int((math.isqrt(8 * w + 1) - 1) // 2)  # 1 + 2 + ... + k <= w
        for k in range(0 if w == 0 else 1, max_parts + 1):
            for flips in _distinct_parts(w, k, 1, n):
                if max_queries is not None and emitted >= max_queries:
                    return
                yield ErrorPattern(flips)
                emitted += 1


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Binary linear code in systematic form G = [I_k | P], H = [P^T | I_{n-k}]."""

    generator: np.ndarray
    parity: np.ndarray

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @classmethod
    def random_systematic(cls, n: int, k: int, rng) -> "LinearCode":
        p = rng.integers(0, 2, size=(k, n - k), dtype=np.uint8)
        g = np.concatenate([np.eye(k, dtype=np.uint8), p], axis=1)
        h = np.concatenate([p.T, np.eye(n - k, dtype=np.uint8)], axis=1)
        return cls(g, h)

    def encode(self, message) -> np.ndarray:
        return (np.asarray(message, dtype=np.int64) @ self.generator % 2).astype(np.uint8)

    def syndrome(self, bits) -> np.ndarray:
        return (self.parity.astype(np.int64) @ np.asarray(bits, dtype=np.int64) % 2).astype(np.uint8)

    def is_codeword(self, bits) -> bool:
        return not self.syndrome(bits).any()

    def codewords(self) -> np.ndarray:
        msgs = (np.arange(2**self.k)[:, None] >> np.arange(self.k)[::-1]) & 1
        return (msgs @ self.generator % 2).astype(np.uint8)


def bpsk(bits) -> np.ndarray:
    """Bit 0 -> +1, bit 1 -> -1."""
    return 1 - 2 * np.asarray(bits, dtype=np.int8)


@dataclass(frozen=True)
class DecodeResult:
    bits: np.ndarray | None
    queries: int

    @property
    def success(self) -> bool:
        return self.bits is not None


def orbgrand_decode(code: LinearCode, llrs, max_queries: int | None = None) -> DecodeResult:
    """Walk error patterns from the hard decision until the syndrome vanishes."""
    llrs = np.asarray(llrs, dtype=float)
    n = code.n
    hard = (hard_decision(llrs) < 0).astype(np.uint8)
    # position holding rank r is order[r - 1]
    order = np.empty(n, dtype=np.int64)
    order[ranks(np.abs(llrs)) - 1] = np.arange(n)
    # syndromes as integers so a flip is one XOR
    weights = 1 << np.arange(code.parity.shape[0], dtype=np.int64)
    col_syn = (code.parity.astype(np.int64) * weights[:, None]).sum(axis=0)
    base = int(code.syndrome(hard).astype(np.int64) @ weights)
    queries = 0
    for ep in ep_stream(n, max_queries):
        queries += 1
        syn = base
        for r in ep.flip_set:
            syn ^= int(col_syn[order[r - 1]])
        if syn == 0:
            bits = hard.copy()
            bits[order[np.array(ep.flip_set, dtype=np.int64) - 1]] ^= 1
            return DecodeResult(bits, queries)
    return DecodeResult(None, queries)


def ml_decode(codebook, llrs) -> int:
    """Index maximising sum_i x_i l_i; lowest index wins ties.

    sum_i ln q_{x_i}(y_i) = const + (1/2) sum_i x_i l_i for any binary-input
    channel, so this is exact ML for equiprobable codewords.
    """
    scores = np.asarray(codebook, dtype=float) @ np.asarray(llrs, dtype=float)
    return int(np.argmax(scores))


@dataclass(frozen=True)
class EnsembleResult:
    """Frame-error statistics over random codebooks (message index 0 sent)."""

    n: int
    m: int
    frames_per_codebook: int
    orb_errors: np.ndarray
    ml_errors: np.ndarray | None
    seed: int
    snr_db: float | None = None

    @property
    def frames(self) -> int:
        return self.frames_per_codebook * self.orb_errors.size

    @property
    def fer(self) -> float:
        return float(self.orb_errors.sum()) / self.frames if self.frames else 0.0

    @property
    def std_error(self) -> float:
        # codebooks are i.i.d. draws; the per-codebook FER spread gives the SE
        if self.orb_errors.size < 2:
            p = self.fer
            return math.sqrt(p * (1 - p) / max(self.frames, 1))
        per = self.orb_errors / self.frames_per_codebook
        return float(np.std(per, ddof=1) / math.sqrt(per.size))

    @property
    def ml_fer(self) -> float | None:
        if self.ml_errors is None:
            return None
        return float(self.ml_errors.sum()) / self.frames if self.frames else 0.0

    def to_json(self) -> dict:
        out = {"n": self.n, "M": self.m, "snr_db": self.snr_db, "frames": self.frames,
               "errors": int(self.orb_errors.sum()), "fer": self.fer, "std_error": self.std_error,
               "codebooks": int(self.orb_errors.size), "seed": self.seed}
        if self.ml_errors is not None:
            out["ml_errors"] = int(self.ml_errors.sum())
            out["ml_fer"] = self.ml_fer
        return out

    def as_estimate(self) -> BoundEstimate:
        se = self.std_error
        return BoundEstimate(Method.ORB_RCU_MC, self.n, math.log(self.m), self.fer,
                             _Z95 * se, self.frames, self.seed, se)


def _ensemble_block(channel, codebook, frames, rng, with_ml):
    m, n = codebook.shape
    x = codebook[0]
    y = channel.sample(np.broadcast_to(x, (frames, n)).astype(float), rng)
    llr = channel.llr(y)
    hard = np.where(llr >= 0, 1.0, -1.0)
    order = np.argsort(np.abs(llr), axis=1, kind="stable")
    r = np.empty_like(order)
    np.put_along_axis(r, order, np.arange(1, n + 1)[None, :], axis=1)
    # s_j = sum_i r_i 1(h_i != c_ji) = (sum_i r_i - sum_i r_i h_i c_ji) / 2
    cb = codebook.astype(float)
    s = (n * (n + 1) / 2 - (r * hard) @ cb.T) / 2
    s = np.rint(s)
    # ties with the transmitted codeword count as errors
    orb_err = (s[:, 1:] <= s[:, :1]).any(axis=1) if m > 1 else np.zeros(frames, bool)
    ml_err = None
    if with_ml:
        ml_err = np.argmax(llr @ cb.T, axis=1) != 0
    return orb_err, ml_err


def simulate_ensemble_fer(channel: BinaryInputChannel, n: int, m: int, codebooks: int,
                          frames_per_codebook: int, seed: int = 0, with_ml: bool = False) -> EnsembleResult:
    """Frame error rate of untruncated ORBGRAND over i.i.d. uniform +-1 codebooks."""
    if m > MAX_ENSEMBLE_M or n > MAX_ENSEMBLE_N:
        raise SizeGuardError(f"ensemble simulation limited to M <= {MAX_ENSEMBLE_M}, n <= {MAX_ENSEMBLE_N}")
    if m < 1:
        raise ValueError("M must be >= 1")
    seqs = np.random.SeedSequence([seed, n, m]).spawn(codebooks)
    batch = max(1, 2_000_000 // (m * n))

    def run(sq):
        rng = np.random.default_rng(sq)
        cb = 1 - 2 * rng.integers(0, 2, size=(m, n), dtype=np.int8)
        oe_total = me_total = done = 0
        while done < frames_per_codebook:
            f = min(batch, frames_per_codebook - done)
            oe, me = _ensemble_block(channel, cb, f, rng, with_ml)
            oe_total += int(oe.sum())
            if with_ml:
                me_total += int(me.sum())
            done += f
        return oe_total, me_total

    workers = max(1, min(codebooks, os.cpu_count() or 1))
    if workers == 1:
        counts = [run(sq) for sq in seqs]
    else:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(run, seqs))
    orb = np.array([c[0] for c in counts], dtype=np.int64)
    ml = np.array([c[1] for c in counts], dtype=np.int64) if with_ml else None
    return EnsembleResult(n, m, frames_per_codebook, orb, ml, seed, getattr(channel, "snr_db", None))


@dataclass(frozen=True)
class LinearCodeRun:
    n: int
    k: int
    frames: int
    errors: int
    failures: int
    total_queries: int
    seed: int
    snr_db: float | None = None

    @property
    def fer(self) -> float:
        return self.errors / self.frames if self.frames else 0.0

    @property
    def avg_queries(self) -> float:
        return self.total_queries / self.frames if self.frames else 0.0

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "snr_db": self.snr_db, "frames": self.frames,
                "errors": self.errors, "fer": self.fer, "avg_queries": self.avg_queries,
                "failures": self.failures, "seed": self.seed}


def simulate_linear_code(channel: BinaryInputChannel, code: LinearCode, frames: int,
                         max_queries: int | None = None, seed: int = 0) -> LinearCodeRun:
    """ORBGRAND on a fixed linear code with random messages; failures count as errors."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, code.n, code.k]))
    errors = failures = queries = 0
    for _ in range(frames):
        msg = rng.integers(0, 2, size=code.k)
        cw = code.encode(msg)
        llr = channel.llr(channel.sample(bpsk(cw).astype(float), rng))
        res = orbgrand_decode(code, llr, max_queries)
        queries += res.queries
        if not res.success:
            failures += 1
            errors += 1
        elif not np.array_equal(res.bits, cw):
            errors += 1
    return LinearCodeRun(code.n, code.k, frames, errors, failures, queries, seed,
                         getattr(channel, "snr_db", None))
