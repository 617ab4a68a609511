"""Binary-input memoryless channels and their single-letter ORBGRAND statistics.

Inputs are equiprobable on {+1, -1}.  For an output ``y`` the LLR is
``l(y) = ln(q_plus(y) / q_minus(y))``, the reliability is ``Lambda = |l|`` and
the hard-decision error indicator is ``E = 1(sgn(l) * x < 0)`` with
``sgn(0) = +1``.  The statistics below are

* ``psi(t)``      CDF of Lambda (``Psi(Lambda)`` is uniform on [0, 1]);
* ``mu``          E[E * Psi(Lambda)], the limit of the transmitted metric;
* ``a(lam)``      Pr[E = 1, Lambda >= lam];
* ``sigma_sq``    Var(E * Psi(Lambda) + a(Lambda)), the metric's CLT variance;
* ``i_orb``       I(mu), the Legendre rate at mu (ORBGRAND GMI);
* ``v_orb``       theta_mu^2 * sigma_sq, the ORBGRAND dispersion.

SNR convention for BPSK-AWGN: ``snr_db = -10 log10(sigma_z^2)`` with unit
symbol energy, i.e. ``Y = X + Z``, ``Z ~ N(0, 10^(-snr_db/10))``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .errors import DegenerateChannelError, DomainError
from .numerics import LN2, log1pexp, quad
from .saddlepoint import cgf, solve_saddlepoint

_TAIL_SIGMAS = 9.0  # Gaussian mass beyond 9 sigma is ~1e-19
_PIECES_PER_PANEL = 256
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


class _RunningIntegral:
    """F(c) = int_{edges[0]}^c f for a vectorised f, via 20-point Gauss-Legendre pieces.

    ``edges`` must contain every point where f is not smooth.
    """

    def __init__(self, f, edges):
        self.f = f
        self.edges = edges
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        vals = f(mid[:, None] + half[:, None] * _GL_X[None, :])
        self.cum = np.concatenate([[0.0], np.cumsum(half * (vals @ _GL_W))])

    def __call__(self, c: float) -> float:
        e = self.edges
        k = int(np.clip(np.searchsorted(e, c, side="right") - 1, 0, e.size - 2))
        a = e[k]
        if c <= a:
            return float(self.cum[k])
        half = 0.5 * (c - a)
        return float(self.cum[k] + half * (self.f(a + half + half * _GL_X) @ _GL_W))


class BinaryInputChannel:
    """Channel given by conditional output densities.

    Subclasses (or :class:`DensityChannel`) provide ``q_plus``, ``q_minus``,
    ``support`` and optionally ``sample``.  The generic reliability statistics
    here work for arbitrary densities by locating level sets of ``|llr|`` and
    integrating with adaptive quadrature; closed forms override them where
    available.
    """

    support: tuple[float, float]
    vectorized_stats = False  # psi / a accept arrays

    def q_plus(self, y):
        raise NotImplementedError

    def q_minus(self, y):
        raise NotImplementedError

    def llr(self, y):
        with np.errstate(divide="ignore"):
            return np.log(self.q_plus(y)) - np.log(self.q_minus(y))

    def sample(self, x, rng):
        """Draw outputs for an array of +-1 inputs."""
        raise NotImplementedError(f"{type(self).__name__} has no sampler")

    def output_density(self, y):
        return 0.5 * (self.q_plus(y) + self.q_minus(y))

    # -- sampling ------------------------------------------------------------

    def sample_llrs(self, shape, rng):
        """Draw uniform inputs and return ``(x, llr)`` arrays of ``shape``."""
        x = 1 - 2 * rng.integers(0, 2, size=shape, dtype=np.int8)
        return x, self.llr(self.sample(x, rng))

    def sample_reliability(self, shape, rng):
        """Return ``(Lambda, E)`` for i.i.d. channel uses."""
        x, l = self.sample_llrs(shape, rng)
        e = np.where(l >= 0, x < 0, x > 0)
        return np.abs(l), e

    # -- panel structure of |llr| -------------------------------------------

    @functools.cached_property
    def _panels(self) -> np.ndarray:
        """Breakpoints splitting ``support`` into pieces where |llr| is monotone."""
        lo, hi = self.support
        grid = np.linspace(lo, hi, 4097)
        lam = np.abs(self.llr(grid))
        llr_vals = self.llr(grid)
        sign = np.sign(llr_vals)
        roots = [optimize.brentq(self.llr, grid[k], grid[k + 1], xtol=1e-14)
                 for k in np.nonzero(sign[:-1] * sign[1:] < 0)[0]]
        extrema = []
        slope = np.sign(np.diff(lam))
        for k in np.nonzero(slope[:-1] * slope[1:] < 0)[0]:
            a, b = grid[k], grid[k + 2]
            sgn = 1.0 if slope[k] < 0 else -1.0  # local min vs local max
            res = optimize.minimize_scalar(
                lambda y: sgn * abs(float(self.llr(y))), bounds=(a, b), method="bounded",
                options={"xatol": 1e-13},
            )
            extrema.append(float(res.x))
        # a zero of llr is also a minimum of |llr|; the root is the sharper estimate
        tol = 1e-6 * (hi - lo)
        inner = list(roots)
        for v in extrema:
            if all(abs(v - r) > tol for r in roots):
                inner.append(v)
        inner = [v for v in sorted(inner) if lo + tol < v < hi - tol]
        pts = np.array([lo, *inner, hi])
        return pts

    @functools.cached_property
    def _kinks(self) -> list[float]:
        """Points where |llr| hits the value of an interior extremum.

        Psi and a have square-root kinks at those levels, so integrands that
        compose them with |llr| get extra quadrature breakpoints there.
        """
        p = self._panels
        levels = [abs(float(self.llr(v))) for v in p[1:-1]]
        out = []
        for c in levels:
            if c <= 1e-9:
                continue
            g = lambda y: abs(float(self.llr(y))) - c  # noqa: E731
            for a, b in zip(p[:-1], p[1:]):
                ga, gb = g(a), g(b)
                if ga * gb < 0:
                    out.append(optimize.brentq(g, a, b, xtol=1e-14))
        return sorted(out)

    @functools.cached_property
    def _fine_edges(self) -> np.ndarray:
        p = self._panels
        parts = [np.linspace(a, b, _PIECES_PER_PANEL + 1)[:-1] for a, b in zip(p[:-1], p[1:])]
        return np.concatenate([*parts, p[-1:]])

    @functools.cached_property
    def _density_integral(self) -> _RunningIntegral:
        return _RunningIntegral(self.output_density, self._fine_edges)

    @functools.cached_property
    def _error_integral(self) -> _RunningIntegral:
        f = lambda y: 0.5 * np.minimum(self.q_plus(y), self.q_minus(y))  # noqa: E731
        return _RunningIntegral(f, self._fine_edges)

    def _sublevel_intervals(self, t: float, above: bool = False):
        """Intervals of ``support`` where |llr| <= t (or >= t when ``above``)."""
        lam = lambda y: abs(float(self.llr(y))) - t  # noqa: E731
        out = []
        p = self._panels
        for a, b in zip(p[:-1], p[1:]):
            fa, fb = lam(a), lam(b)
            ina, inb = (fa >= 0, fb >= 0) if above else (fa <= 0, fb <= 0)
            if ina and inb:
                out.append((a, b))
            elif ina or inb:
                c = optimize.brentq(lam, a, b, xtol=1e-14)
                out.append((a, c) if ina else (c, b))
        return out

    @staticmethod
    def _integrate_over(big_f, intervals):
        return sum(big_f(b) - big_f(a) for a, b in intervals if b > a)

    # -- reliability statistics (generic quadrature) ------------------------

    def psi(self, t: float) -> float:
        val = self._integrate_over(self._density_integral, self._sublevel_intervals(t))
        return min(max(val, 0.0), 1.0)

    def a(self, lam: float) -> float:
        return max(self._integrate_over(self._error_integral, self._sublevel_intervals(lam, above=True)), 0.0)

    def error_posterior(self, y):
        """Pr[E = 1 | Y = y] = 1 / (1 + e^{|llr(y)|})."""
        return special.expit(-np.abs(self.llr(y)))

    def mu_integrals(self) -> tuple[float, float]:
        """The two halves of mu: regions q_plus < q_minus and q_plus > q_minus."""
        p = self._panels
        neg, pos = 0.0, 0.0
        for a, b in zip(p[:-1], p[1:]):
            mid = 0.5 * (a + b)
            l_mid = float(self.llr(mid))
            if l_mid < 0:
                neg += quad(lambda y: self.psi(abs(float(self.llr(y)))) * self.q_plus(y), a, b,
                            points=self._kinks)
            elif l_mid > 0:
                pos += quad(lambda y: self.psi(abs(float(self.llr(y)))) * self.q_minus(y), a, b,
                            points=self._kinks)
        return 0.5 * neg, 0.5 * pos

    def mu(self) -> float:
        neg, pos = self.mu_integrals()
        return neg + pos

    def w_moments(self) -> tuple[float, float]:
        """E[W] and E[W^2] for W = E Psi(Lambda) + a(Lambda), conditioning on Y."""
        def cond(y, power):
            lam = abs(float(self.llr(y)))
            p, ps, av = float(self.error_posterior(y)), self.psi(lam), self.a(lam)
            m = p * ps + av if power == 1 else p * ps * ps + 2 * p * ps * av + av * av
            return m * self.output_density(y)
        p = self._panels
        k = self._kinks
        m1 = sum(quad(lambda y: cond(y, 1), a, b, points=k) for a, b in zip(p[:-1], p[1:]))
        m2 = sum(quad(lambda y: cond(y, 2), a, b, points=k) for a, b in zip(p[:-1], p[1:]))
        return m1, m2

    def information_density_moments(self) -> tuple[float, float]:
        """E[i(X;Y)] and E[i(X;Y)^2] for uniform inputs."""
        def idens(y, x):
            l = self.llr(y)
            return LN2 - log1pexp(-x * l)
        pts = list(self._panels)
        lo, hi = self.support
        out = []
        for power in (1, 2):
            f = lambda y: 0.5 * (  # noqa: E731
                self.q_plus(y) * idens(y, 1.0) ** power + self.q_minus(y) * idens(y, -1.0) ** power
            )
            out.append(quad(f, lo, hi, points=pts))
        return out[0], out[1]

    def is_degenerate(self) -> bool:
        lo, hi = self.support
        grid = np.linspace(lo, hi, 2001)
        return bool(np.all(np.abs(self.llr(grid)) < 1e-12))


class DensityChannel(BinaryInputChannel):
    """Channel defined by user-supplied density callables.

    ``q_plus`` and ``q_minus`` must accept numpy arrays.
    """

    def __init__(self, q_plus, q_minus, support, sampler=None, name="density"):
        self._qp, self._qm = q_plus, q_minus
        self.support = (float(support[0]), float(support[1]))
        self._sampler = sampler
        self.name = name

    def q_plus(self, y):
        return self._qp(y)

    def q_minus(self, y):
        return self._qm(y)

    def sample(self, x, rng):
        if self._sampler is None:
            return super().sample(x, rng)
        return self._sampler(x, rng)

    def __repr__(self):
        return f"DensityChannel({self.name!r})"


@dataclass(frozen=True)
class BpskAwgnChannel(BinaryInputChannel):
    """BPSK over AWGN: Y = X + Z, Var(Z) = 10^(-snr_db/10)."""

    snr_db: float
    noise_variance: float = field(init=False)
    vectorized_stats = True

    def __post_init__(self):
        object.__setattr__(self, "noise_variance", 10.0 ** (-self.snr_db / 10.0))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.noise_variance)

    @property
    def support(self):
        s = _TAIL_SIGMAS * self.sigma
        return (-1.0 - s, 1.0 + s)

    def q_plus(self, y):
        return stats.norm.pdf(y, 1.0, self.sigma)

    def q_minus(self, y):
        return stats.norm.pdf(y, -1.0, self.sigma)

    def llr(self, y):
        return 2.0 * np.asarray(y) / self.noise_variance

    def sample(self, x, rng):
        return x + self.sigma * rng.standard_normal(np.shape(x))

    def sample_reliability(self, shape, rng):
        # (Lambda, E) has the same law under X = +1 and X = -1, so condition on +1.
        y = 1.0 + self.sigma * rng.standard_normal(shape)
        return np.abs(y) * (2.0 / self.noise_variance), y < 0

    @functools.cached_property
    def _panels(self):
        lo, hi = self.support
        return np.array([lo, 0.0, hi])

    def is_degenerate(self) -> bool:
        return False

    # Closed forms in u = |y| = t * sigma^2 / 2.

    def psi(self, t):
        u = np.asarray(t, dtype=float) * self.noise_variance / 2.0
        s = self.sigma
        return (special.ndtr((u - 1.0) / s) - special.ndtr((-u - 1.0) / s))[()]

    def a(self, lam):
        u = np.asarray(lam, dtype=float) * self.noise_variance / 2.0
        return special.ndtr(-(u + 1.0) / self.sigma)[()]

    def _psi_u(self, u):
        s = self.sigma
        return special.ndtr((u - 1.0) / s) - special.ndtr((-u - 1.0) / s)

    def _mix_u(self, u):
        # density of |Y| at u
        s = self.sigma
        return (stats.norm.pdf(u, 1.0, s) + stats.norm.pdf(u, -1.0, s))

    def mu_integrals(self):
        # By symmetry the two halves coincide: int_{y<0} Psi q_plus = int_{y>0} Psi q_minus.
        s = self.sigma
        hi = 1.0 + _TAIL_SIGMAS * s
        half = quad(lambda u: self._psi_u(u) * stats.norm.pdf(u, -1.0, s), 0.0, hi)
        return 0.5 * half, 0.5 * half

    def w_moments(self):
        s2 = self.noise_variance
        s = self.sigma
        hi = 1.0 + _TAIL_SIGMAS * s

        def cond(u, power):
            p = special.expit(-2.0 * u / s2)
            ps = self._psi_u(u)
            av = special.ndtr(-(u + 1.0) / s)
            m = p * ps + av if power == 1 else p * ps * ps + 2 * p * ps * av + av * av
            return 0.5 * m * self._mix_u(u)

        # |Y| density is twice the symmetric half-line density.
        m1 = 2.0 * quad(lambda u: cond(u, 1), 0.0, hi)
        m2 = 2.0 * quad(lambda u: cond(u, 2), 0.0, hi)
        return m1, m2

    def information_density_moments(self):
        s2 = self.noise_variance
        s = self.sigma
        lo, hi = 1.0 - _TAIL_SIGMAS * s, 1.0 + _TAIL_SIGMAS * s
        idens = lambda y: LN2 - log1pexp(-2.0 * y / s2)  # noqa: E731
        m1 = quad(lambda y: idens(y) * stats.norm.pdf(y, 1.0, s), lo, hi, points=[0.0])
        m2 = quad(lambda y: idens(y) ** 2 * stats.norm.pdf(y, 1.0, s), lo, hi, points=[0.0])
        return m1, m2


# -- module-level operations ----------------------------------------------------


def psi(channel: BinaryInputChannel, t: float) -> float:
    """Pr[|L| <= t]."""
    if t < 0:
        raise DomainError("reliability threshold must be >= 0")
    if math.isinf(t):
        return 1.0
    return float(channel.psi(t))


def _require_informative(channel):
    if channel.is_degenerate():
        raise DegenerateChannelError(f"{channel!r} has q_plus == q_minus")


def compute_mu(channel: BinaryInputChannel) -> float:
    """mu = E[Psi(Lambda) E]."""
    _require_informative(channel)
    neg, pos = channel.mu_integrals()
    return neg + pos


def compute_a(channel: BinaryInputChannel, lam: float) -> float:
    """a(lam) = Pr[E = 1, Lambda >= lam]; nonincreasing in lam."""
    if lam < 0:
        raise DomainError("reliability threshold must be >= 0")
    if math.isinf(lam):
        return 0.0
    return float(channel.a(lam))


def compute_sigma_sq(channel: BinaryInputChannel) -> float:
    """Var(E Psi(Lambda) + a(Lambda))."""
    if channel.is_degenerate():
        return 0.0
    m1, m2 = channel.w_moments()
    return max(m2 - m1 * m1, 0.0)


@dataclass(frozen=True)
class ReliabilityModel:
    """Single-letter ORBGRAND statistics of one channel."""

    channel: BinaryInputChannel
    mu: float
    sigma_sq: float
    theta_mu: float
    i_orb: float
    v_orb: float

    def psi(self, t):
        return psi(self.channel, t)

    def a_fn(self, lam):
        return compute_a(self.channel, lam)


def i_orb_inf_form(channel: BinaryInputChannel) -> float:
    """ln 2 - inf_{theta<0} { int_0^1 ln(1+e^{theta t}) dt - theta * (mu_neg + mu_pos) }.

    Evaluated independently of the saddlepoint solver: the inner integral by
    adaptive quadrature, the infimum by bounded scalar minimisation.
    """
    neg, pos = channel.mu_integrals()

    def objective(theta):
        inner = quad(lambda t: float(log1pexp(theta * t)), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)
        return inner - theta * neg - theta * pos

    mu = neg + pos
    # Bracket from the large-|theta| asymptote K'(theta) ~ pi^2 / (12 theta^2).
    lo = -max(10.0, 4.0 * math.pi / math.sqrt(12.0 * mu))
    res = optimize.minimize_scalar(objective, bounds=(lo, 0.0), method="bounded",
                                   options={"xatol": 1e-10, "maxiter": 500})
    return LN2 - float(res.fun)


@functools.lru_cache(maxsize=256)
def reliability_model(channel: BinaryInputChannel) -> ReliabilityModel:
    """Compute mu, sigma^2, theta_mu, I_ORB and V_ORB for a channel."""
    mu = compute_mu(channel)
    sigma_sq = compute_sigma_sq(channel)
    if mu <= 0.0:
        # mu underflowed (noiseless limit): I(mu) -> ln 2 and V_ORB -> 0.
        return ReliabilityModel(channel, 0.0, sigma_sq, -math.inf, LN2, 0.0)
    sol = solve_saddlepoint(mu, d_min=0.0)
    i_orb = sol.theta_d * mu - cgf(sol.theta_d)
    return ReliabilityModel(channel, mu, sigma_sq, sol.theta_d, i_orb, sol.theta_d**2 * sigma_sq)


def compute_i_orb_v_orb(channel: BinaryInputChannel, check: bool = True) -> tuple[float, float]:
    """(I_ORB, V_ORB) in (nats, nats^2).

    With ``check`` the Legendre value is compared against the explicit
    inf-form; a mismatch above 1e-8 points at a quadrature problem.
    """
    model = reliability_model(channel)
    if check and model.mu > 1e-6:
        alt = i_orb_inf_form(channel)
        if abs(alt - model.i_orb) > 1e-8:
            raise ArithmeticError(
                f"I_ORB forms disagree: Legendre {model.i_orb!r} vs inf-form {alt!r}"
            )
    return model.i_orb, model.v_orb


def capacity_and_dispersion(channel: BinaryInputChannel) -> tuple[float, float]:
    """Uniform-input mutual information C and information-density variance V."""
    m1, m2 = channel.information_density_moments()
    return m1, max(m2 - m1 * m1, 0.0)
