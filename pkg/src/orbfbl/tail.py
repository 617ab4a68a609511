"""Distribution of zeta_n = sum_{i=1}^n i*B_i with i.i.d. fair Bernoulli B_i.

``F(s) = Pr[zeta_n <= s]`` is the probability that an independent random
codeword scores at least as well as metric value ``s`` under ORBGRAND ranking.
Tables are exact (up to floating point) by dynamic programming over the
integer support ``0..n(n+1)/2``.  Below ``LOG_DOMAIN_THRESHOLD`` the pmf is
held as plain doubles; above it the smallest masses (2^-n) would underflow,
so a log-sum-exp recursion is used.
"""

from __future__ import annotations

import functools
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, SizeGuardError
from .numerics import LN2
from .saddlepoint import D_MIN, solve_saddlepoint

MAX_N = 5000
LOG_DOMAIN_THRESHOLD = 900
LD_D_MAX = 0.2499

CACHE_ENV = "ORBFBL_CACHE_DIR"
_MAGIC = b"ZTAB"
_VERSION = 1
_HEADER = struct.Struct("<4sIIB")


@dataclass(frozen=True, eq=False)
class TailTable:
    """CDF of zeta_n over its full support.

    ``values[s]`` is ``Pr[zeta_n <= s]`` when ``mode == "linear"`` and its
    natural log when ``mode == "log"``.
    """

    n: int
    values: np.ndarray
    mode: str

    @property
    def total(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def cdf(self) -> np.ndarray:
        return self.values if self.mode == "linear" else np.exp(self.values)

    @property
    def log_cdf(self) -> np.ndarray:
        if self.mode == "log":
            return self.values
        with np.errstate(divide="ignore"):
            return np.log(self.values)


def _pmf_linear(n: int) -> np.ndarray:
    total = n * (n + 1) // 2
    pmf = np.zeros(total + 1)
    pmf[0] = 1.0
    top = 0
    for i in range(1, n + 1):
        # new[s] = (old[s] + old[s - i]) / 2; commutative adds keep pmf symmetric bitwise.
        shifted = pmf[: top + 1].copy()
        pmf[: top + i + 1] *= 0.5
        pmf[i : top + i + 1] += 0.5 * shifted
        top += i
    return pmf


def _log_pmf(n: int) -> np.ndarray:
    total = n * (n + 1) // 2
    logp = np.full(total + 1, -np.inf)
    logp[0] = 0.0
    top = 0
    for i in range(1, n + 1):
        old = logp[: top + 1].copy()
        logp[: top + i + 1] -= LN2
        logp[i : top + i + 1] = np.logaddexp(logp[i : top + i + 1], old - LN2)
        top += i
    return logp


def exact_cdf_table(n: int, mode: str | None = None) -> TailTable:
    """Build the exact CDF table of zeta_n.

    ``mode`` is ``"linear"``, ``"log"`` or ``None`` (linear up to n = 900,
    log above).  Cost is O(n^3) time and O(n^2) memory.
    """
    if not 1 <= n <= MAX_N:
        raise SizeGuardError(f"tail table requested for n={n}; supported range is 1..{MAX_N}")
    if mode is None:
        mode = "linear" if n <= LOG_DOMAIN_THRESHOLD else "log"
    if mode == "linear":
        cdf = np.cumsum(_pmf_linear(n))
        return TailTable(n, cdf, "linear")
    if mode == "log":
        return TailTable(n, np.logaddexp.accumulate(_log_pmf(n)), "log")
    raise ValueError(f"unknown table mode {mode!r}")


def lookup(table: TailTable, s: int) -> float:
    """Pr[zeta_n <= s] for integer s in 0..T."""
    if not 0 <= s <= table.total:
        raise IndexError(f"s={s} outside support 0..{table.total}")
    v = float(table.values[s])
    return v if table.mode == "linear" else math.exp(v)


def log_lookup(table: TailTable, s):
    """ln Pr[zeta_n <= s]; vectorised over integer arrays."""
    s = np.asarray(s)
    if s.size and (s.min() < 0 or s.max() > table.total):
        raise IndexError("metric value outside table support")
    return table.log_cdf[s]


def ld_cdf(n: int, d: float) -> float:
    """Strong large-deviation approximation A(d) e^{-n I(d)} / sqrt(n) of Pr[zeta_n <= n^2 d]."""
    if d > LD_D_MAX:
        raise DomainError(f"d={d} too close to 1/4: prefactor A(d) diverges")
    sol = solve_saddlepoint(d, d_min=D_MIN)
    return sol.prefactor * math.exp(-n * sol.rate) / math.sqrt(n)


# -- disk cache ---------------------------------------------------------------


def _cache_path(cache_dir: Path, n: int, mode: str) -> Path:
    return Path(cache_dir) / f"ztab_n{n}_{mode}.bin"


def save_table(table: TailTable, path) -> None:
    """Write a table as ``ZTAB`` header + little-endian float64 payload."""
    header = _HEADER.pack(_MAGIC, _VERSION, table.n, 0 if table.mode == "linear" else 1)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(table.values, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_table(path) -> TailTable:
    raw = Path(path).read_bytes()
    magic, version, n, mode = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not a ZTAB v{_VERSION} file")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(float)
    if values.size != n * (n + 1) // 2 + 1:
        raise ValueError(f"{path}: truncated table")
    return TailTable(n, values, "linear" if mode == 0 else "log")


@functools.lru_cache(maxsize=8)
def _memo_table(n: int, mode: str | None) -> TailTable:
    return exact_cdf_table(n, mode)


def tail_table(n: int, mode: str | None = None, cache_dir=None) -> TailTable:
    """Exact table with in-process memoisation and optional on-disk cache.

    The disk cache lives in ``cache_dir`` or, if unset, ``$ORBFBL_CACHE_DIR``;
    with neither given only the in-memory cache is used.
    """
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    if mode is None:
        mode = "linear" if n <= LOG_DOMAIN_THRESHOLD else "log"
    if cache_dir:
        path = _cache_path(cache_dir, n, mode)
        if path.exists():
            return load_table(path)
        table = _memo_table(n, mode)
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        save_table(table, path)
        return table
    return _memo_table(n, mode)
