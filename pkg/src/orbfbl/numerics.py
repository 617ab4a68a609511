"""Small numerical helpers: Gaussian tail, guarded quadrature, stable logs."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, special

from .errors import QuadratureError

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
# 21-point Gauss-Kronrod panels: 1e6 evaluations ~ 47,600 subintervals.
QUAD_LIMIT = 1_000_000 // 21

LN2 = math.log(2.0)


def qfunc(x):
    """Gaussian tail probability Q(x) = Pr[N(0,1) > x]."""
    return special.ndtr(-np.asarray(x, dtype=float))[()]


def qinv(p):
    """Inverse of :func:`qfunc` on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("qinv requires 0 < p < 1")
    return (-special.ndtri(p))[()]


def log1pexp(z):
    """ln(1 + e^z) without overflow."""
    return np.logaddexp(0.0, z)


def log_m_minus_1(log_m: float) -> float:
    """ln(M - 1) from ln M; -inf for M = 1."""
    if log_m <= 0.0:
        return -math.inf
    return log_m + math.log1p(-math.exp(-log_m))


def quad(f, a, b, points=None, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL):
    """Adaptive Gauss-Kronrod quadrature that raises instead of warning.

    Panel boundaries in ``points`` (e.g. the LLR sign change) are honoured.
    """
    if points is not None:
        points = [p for p in points if a < p < b]
        if not points:
            points = None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                f, a, b, points=points, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    if not math.isfinite(val):
        raise QuadratureError(f"quadrature on [{a}, {b}] returned {val}")
    return val
