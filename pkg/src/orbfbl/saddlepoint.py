r"""Limiting CGF of the competing-codeword metric and its Legendre transform.

The competing metric is ``H_n = zeta_n / n**2`` with ``zeta_n = sum_i i*B_i`` and
fair Bernoulli ``B_i``.  Its normalised CGF converges to

.. math:: K(\theta) = \int_0^1 \ln\frac{1 + e^{\theta x}}{2}\,dx ,

and the left tail ``Pr[H_n <= d]`` for ``d < 1/4`` is governed by the
saddlepoint ``theta_d < 0`` solving ``K'(theta_d) = d``.

Only the left-tail orientation is implemented.  The sign-flipped quantities
used for right-tail statements follow from ``theta_d = -tilde_theta(-d)`` and
``tilde_K(t) = K(-t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError, SaddlepointError
from .numerics import LN2, log1pexp

D_MIN = 1e-4
THETA_CAP = 700.0
ROOT_TOL = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_PI2 = math.pi**2


def _nodes(theta: float):
    # Integrand poles sit at distance pi/|theta| from [0, 1]; keep panel width
    # below that so 32-point Gauss-Legendre stays at machine precision.
    m = max(1, math.ceil(abs(theta) / 3.0))
    edges = np.linspace(0.0, 1.0, m + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    w = (half[:, None] * _GL_WEIGHTS).ravel()
    return x, w


def cgf(theta: float) -> float:
    """K(theta) in nats."""
    theta = float(theta)
    if theta < -THETA_CAP:
        return -LN2 + _PI2 / (12.0 * -theta)
    if theta > THETA_CAP:
        return 0.5 * theta - LN2 + _PI2 / (12.0 * theta)
    x, w = _nodes(theta)
    return float(np.dot(w, log1pexp(theta * x))) - LN2


def cgf_d1(theta: float) -> float:
    """K'(theta) = int_0^1 x e^{theta x} / (1 + e^{theta x}) dx."""
    theta = float(theta)
    if theta < -THETA_CAP:
        return _PI2 / (12.0 * theta * theta)
    if theta > THETA_CAP:
        return 0.5 - _PI2 / (12.0 * theta * theta)
    x, w = _nodes(theta)
    return float(np.dot(w, x * special.expit(theta * x)))


def cgf_d2(theta: float) -> float:
    """K''(theta) = int_0^1 x^2 e^{theta x} / (1 + e^{theta x})^2 dx."""
    theta = float(theta)
    if abs(theta) > THETA_CAP:
        return _PI2 / (6.0 * abs(theta) ** 3)
    x, w = _nodes(theta)
    p = special.expit(theta * x)
    return float(np.dot(w, x * x * p * (1.0 - p)))


def finite_n_cgf(theta: float, n: int) -> float:
    """Exact normalised CGF K_n(theta) = (1/n) sum_i ln((1 + e^{theta i/n}) / 2)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    i = np.arange(1, n + 1, dtype=float)
    return float(np.sum(log1pexp(theta * i / n) - LN2) / n)


def trapezoid_correction(theta: float) -> float:
    """First-order term H(theta) = 0.5 ln((1 + e^theta) / 2) so that
    K_n = K + H/n + O(theta^2 / n^2)."""
    return 0.5 * (float(log1pexp(theta)) - LN2)


@dataclass(frozen=True)
class SaddlepointSolution:
    d: float
    theta_d: float
    k: float
    kpp: float
    rate: float
    prefactor: float


def prefactor(theta: float, kpp: float) -> float:
    """A(d) = sqrt((1 + e^theta) / (4 pi K'' theta^2)) evaluated at theta = theta_d."""
    if theta == 0.0:
        return math.inf
    return math.sqrt((1.0 + math.exp(theta)) / (4.0 * math.pi * kpp * theta * theta))


def _find_root(d: float) -> float:
    f = lambda t: cgf_d1(t) - d  # noqa: E731
    hi = -1e-8
    if f(hi) < 0.0:
        # d within ~1e-9 of 1/4: the root lies in [-1e-8, 0].
        lo, hi = hi, 0.0
    else:
        lo = -1.0
        while f(lo) > 0.0:
            hi = lo
            lo *= 4.0
            if lo < -1e300:
                raise SaddlepointError(f"cannot bracket K'(theta) = {d}", bracket=(lo, hi))
    theta = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return theta


def solve_saddlepoint(d: float, d_min: float = D_MIN) -> SaddlepointSolution:
    """Solve K'(theta) = d for d in [d_min, 1/4) and bundle the derived quantities.

    ``d_min`` guards the regime where e^{-n I(d)} is far below double
    precision; pass ``d_min=0`` to lift it (the asymptotic CGF forms are used
    once |theta| exceeds 700).
    """
    d = float(d)
    if not (d < 0.25) or d < d_min or d <= 0.0:
        raise DomainError(f"saddlepoint target d={d} outside [{d_min}, 1/4)")
    theta = _find_root(d)
    if abs(cgf_d1(theta) - d) > ROOT_TOL:
        raise SaddlepointError(f"root of K'(theta) = {d} not resolved to {ROOT_TOL}")
    k = cgf(theta)
    kpp = cgf_d2(theta)
    rate = max(theta * d - k, 0.0)
    return SaddlepointSolution(d, theta, k, kpp, rate, prefactor(theta, kpp))


def rate_function(d: float, d_min: float = D_MIN) -> float:
    """Legendre transform I(d) = sup_theta {theta d - K(theta)} for d in (0, 1/4)."""
    return solve_saddlepoint(d, d_min=d_min).rate


def rate_derivatives(sol: SaddlepointSolution) -> tuple[float, float]:
    """(I'(d), I''(d)) = (theta_d, 1 / K''(theta_d))."""
    return sol.theta_d, 1.0 / sol.kpp
