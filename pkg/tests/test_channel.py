import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from conftest import gaussian_density_channel
from orbfbl.channel import (
    BpskAwgnChannel,
    DensityChannel,
    capacity_and_dispersion,
    compute_a,
    compute_i_orb_v_orb,
    compute_mu,
    compute_sigma_sq,
    i_orb_inf_form,
    psi,
    reliability_model,
)
from orbfbl.errors import DegenerateChannelError, DomainError


def _mc_reliability(channel, count, seed):
    rng = np.random.default_rng(seed)
    lam, err = channel.sample_reliability((count,), rng)
    return lam, err


# -- BPSK-AWGN closed forms ---------------------------------------------------


def test_noise_variance_convention():
    assert BpskAwgnChannel(0.0).noise_variance == 1.0
    assert BpskAwgnChannel(10.0).noise_variance == pytest.approx(0.1, rel=1e-15)


def test_llr_and_symmetry(awgn0):
    ch = BpskAwgnChannel(2.0)
    y = np.linspace(-4, 4, 41)
    assert np.array_equal(ch.llr(y), 2 * y / ch.noise_variance)
    assert np.allclose(ch.q_plus(y), ch.q_minus(-y), rtol=0, atol=1e-300)
    direct = np.log(ch.q_plus(y) / ch.q_minus(y))
    assert np.allclose(direct, ch.llr(y), rtol=0, atol=1e-12)


def test_densities_normalised():
    for ch in (BpskAwgnChannel(-5.0), BpskAwgnChannel(0.0), BpskAwgnChannel(12.0)):
        lo, hi = ch.support
        for q in (ch.q_plus, ch.q_minus):
            assert abs(integrate.quad(q, lo, hi, points=[-1, 0, 1], limit=200)[0] - 1.0) <= 1e-10


def test_psi_limits(awgn0):
    assert psi(awgn0, 0.0) == 0.0
    assert psi(awgn0, math.inf) == 1.0
    with pytest.raises(DomainError):
        psi(awgn0, -1e-3)


def test_psi_at_empirical_median(awgn0):
    lam, _ = _mc_reliability(awgn0, 10**6, 11)
    assert abs(psi(awgn0, float(np.median(lam))) - 0.5) <= 2e-3


def test_psi_nondecreasing(awgn0):
    t = np.linspace(0, 40, 400)
    assert np.all(np.diff(awgn0.psi(t)) >= 0)


def test_psi_uniformity_ks(awgn0):
    lam, _ = _mc_reliability(awgn0, 10**6, 12)
    u = awgn0.psi(lam)
    assert stats.kstest(u, "uniform").pvalue > 0.01
    assert abs(u.mean() - 0.5) <= 3 * u.std() / math.sqrt(u.size)


def test_mu_noiseless_limit():
    assert compute_mu(BpskAwgnChannel(30.0)) < 1e-3


def test_mu_matches_monte_carlo(awgn0):
    vals = []
    rng = np.random.default_rng(13)
    for _ in range(10):
        lam, err = awgn0.sample_reliability((10**6,), rng)
        vals.append(awgn0.psi(lam) * err)
    v = np.concatenate(vals)
    se = v.std() / math.sqrt(v.size)
    assert abs(compute_mu(awgn0) - v.mean()) <= 3 * se


def test_mu_strictly_inside_quarter():
    for snr in range(-10, 21):
        assert 0.0 < compute_mu(BpskAwgnChannel(float(snr))) < 0.25


def test_mu_nonincreasing_in_snr():
    mus = [compute_mu(BpskAwgnChannel(s)) for s in np.arange(-5.0, 15.01, 0.5)]
    assert np.all(np.diff(mus) <= 0)


def test_a_limits_and_monotone(awgn0):
    assert compute_a(awgn0, math.inf) == 0.0
    grid = np.linspace(0.0, 12.0, 20)
    vals = [compute_a(awgn0, t) for t in grid]
    assert np.all(np.diff(vals) <= 0)
    with pytest.raises(DomainError):
        compute_a(awgn0, -1.0)


def test_a_zero_matches_hard_decision_rate(awgn0):
    _, err = _mc_reliability(awgn0, 4 * 10**6, 14)
    p = err.mean()
    se = math.sqrt(p * (1 - p) / err.size)
    assert abs(compute_a(awgn0, 0.0) - p) <= 3 * se


def test_a_zero_is_mean_error_posterior(awgn0):
    f = lambda y: special.expit(-abs(2 * y)) * awgn0.output_density(y)  # noqa: E731
    val = integrate.quad(f, -12, 12, points=[-1, 0, 1], limit=200, epsabs=1e-13)[0]
    assert abs(compute_a(awgn0, 0.0) - val) <= 1e-8


def test_sigma_sq_matches_monte_carlo(awgn0):
    rng = np.random.default_rng(15)
    parts = []
    for _ in range(10):
        lam, err = awgn0.sample_reliability((10**6,), rng)
        parts.append(err * awgn0.psi(lam) + awgn0.a(lam))
    w = np.concatenate(parts)
    var = w.var()
    # standard error of a sample variance
    se = math.sqrt((np.mean((w - w.mean()) ** 4) - var**2) / w.size)
    sigma_sq = compute_sigma_sq(awgn0)
    assert abs(sigma_sq - var) <= 3 * se
    assert sigma_sq <= np.mean(w**2)


def test_sigma_sq_vanishes_noiseless():
    assert compute_sigma_sq(BpskAwgnChannel(40.0)) < 1e-12


def test_reference_values_0db(awgn0):
    m = reliability_model(awgn0)
    assert m.mu == pytest.approx(0.0393248, rel=2e-6)
    assert m.sigma_sq == pytest.approx(0.0168806, rel=5e-6)
    assert m.theta_mu == pytest.approx(-4.38357, rel=2e-6)
    assert m.i_orb == pytest.approx(0.335978, rel=2e-6)
    assert m.v_orb == pytest.approx(0.324373, rel=5e-6)
    assert m.v_orb == m.theta_mu**2 * m.sigma_sq


def test_i_orb_high_snr():
    assert reliability_model(BpskAwgnChannel(15.0)).i_orb >= 0.68


@pytest.mark.parametrize("snr", [0.0, 1.0, 2.0, 3.0])
def test_i_orb_two_forms_agree(snr):
    ch = BpskAwgnChannel(snr)
    assert abs(i_orb_inf_form(ch) - reliability_model(ch).i_orb) <= 1e-8
    compute_i_orb_v_orb(ch)


def test_i_orb_below_capacity():
    for snr in np.arange(-6.0, 12.01, 0.5):
        ch = BpskAwgnChannel(float(snr))
        assert reliability_model(ch).i_orb <= capacity_and_dispersion(ch)[0]


def test_v_orb_unimodal():
    v = np.array([reliability_model(BpskAwgnChannel(float(s))).v_orb for s in np.arange(-6.0, 12.01, 0.5)])
    signs = np.sign(np.diff(v))
    assert np.count_nonzero(signs[1:] != signs[:-1]) == 1
    assert signs[0] > 0 and signs[-1] < 0


def test_mu_underflow_is_noiseless_limit():
    m = reliability_model(BpskAwgnChannel(60.0))
    assert m.mu == 0.0 and m.i_orb == math.log(2) and m.v_orb == 0.0


def test_capacity_monte_carlo(awgn0):
    rng = np.random.default_rng(16)
    parts = []
    for _ in range(10):
        y = 1.0 + rng.standard_normal(10**6)
        parts.append(math.log(2) - np.logaddexp(0.0, -2.0 * y))
    i = np.concatenate(parts)
    c, v = capacity_and_dispersion(awgn0)
    assert abs(c - i.mean()) <= 3 * i.std() / math.sqrt(i.size)
    assert c == pytest.approx(0.336831, rel=2e-6)
    assert v == pytest.approx(0.316946, rel=5e-6)


def test_capacity_limits():
    assert capacity_and_dispersion(BpskAwgnChannel(40.0))[0] >= 0.692
    c, v = capacity_and_dispersion(BpskAwgnChannel(-40.0))
    assert c < 1e-4 and v < 1e-3


# -- generic density path --------------------------------------------------------


def test_degenerate_channel_rejected():
    f = lambda y: 0.5 * np.exp(-np.abs(np.asarray(y, float)))  # noqa: E731
    ch = DensityChannel(f, f, (-40.0, 40.0), name="useless")
    with pytest.raises(DegenerateChannelError):
        compute_mu(ch)
    assert compute_sigma_sq(ch) == 0.0


def test_generic_path_matches_closed_form():
    ref = BpskAwgnChannel(1.0)
    gen = gaussian_density_channel(ref.sigma, ref.sigma, "bpsk-generic")
    assert compute_mu(gen) == pytest.approx(compute_mu(ref), abs=1e-12)
    assert compute_sigma_sq(gen) == pytest.approx(compute_sigma_sq(ref), abs=1e-12)
    for t in (0.0, 0.3, 2.0, 9.0):
        assert gen.psi(t) == pytest.approx(float(ref.psi(t)), abs=1e-12)
        assert gen.a(t) == pytest.approx(float(ref.a(t)), abs=1e-12)
    c1, v1 = capacity_and_dispersion(gen)
    c2, v2 = capacity_and_dispersion(ref)
    assert c1 == pytest.approx(c2, abs=1e-10) and v1 == pytest.approx(v2, abs=1e-10)


def test_asymmetric_channel_normalised(asym_channel):
    lo, hi = asym_channel.support
    for q in (asym_channel.q_plus, asym_channel.q_minus):
        assert abs(integrate.quad(q, lo, hi, limit=200)[0] - 1.0) <= 1e-10
    # |llr| is not monotone in y: the panel finder must see the interior extrema
    assert len(asym_channel._panels) >= 4


def test_asymmetric_psi_uniform(asym_channel):
    lam, _ = _mc_reliability(asym_channel, 4000, 17)
    u = np.array([asym_channel.psi(float(x)) for x in lam])
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_asymmetric_mu_sigma_monte_carlo(asym_channel):
    lam, err = _mc_reliability(asym_channel, 6000, 18)
    ps = np.array([asym_channel.psi(float(x)) for x in lam])
    av = np.array([asym_channel.a(float(x)) for x in lam])
    v = ps * err
    assert abs(compute_mu(asym_channel) - v.mean()) <= 3 * v.std() / math.sqrt(v.size)
    w = v + av
    se = math.sqrt((np.mean((w - w.mean()) ** 4) - w.var() ** 2) / w.size)
    assert abs(compute_sigma_sq(asym_channel) - w.var()) <= 3 * se


def test_asymmetric_a_zero(asym_channel):
    _, err = _mc_reliability(asym_channel, 10**6, 19)
    p = err.mean()
    assert abs(compute_a(asym_channel, 0.0) - p) <= 3 * math.sqrt(p * (1 - p) / err.size)


def test_asymmetric_forms_agree(asym_channel):
    i_orb, v_orb = compute_i_orb_v_orb(asym_channel)
    c, _ = capacity_and_dispersion(asym_channel)
    assert 0.0 < i_orb <= c
    m = reliability_model(asym_channel)
    assert v_orb == m.theta_mu**2 * m.sigma_sq
    assert 0.0 < m.mu < 0.25
