import math
from itertools import product

import numpy as np
import pytest
from scipy import special, stats

from gwldp.errors import ConfigError, DomainError, TruncationError
from gwldp.gw.harmonic import (geom_harmonic_closed, harmonic_expectation, harmonic_moment,
                               local_bound_constant)
from gwldp.gw.martingale import (MartingaleLimitModel, laplace_complement, laplace_exact,
                                 sample_W)
from gwldp.gw.offspring import CenteredOffspring, OffspringLaw
from gwldp.gw.series import (Q_of, compose, geom_pmf_closed, pmf_Zn, q_k, q_vector,
                             series_mul, series_reciprocal)

LAWS = [OffspringLaw.binary(0.5), OffspringLaw.binary(0.3), OffspringLaw.geom_shift(0.5),
        OffspringLaw.two_point(3, 0.5), OffspringLaw.zeta_shift(1.5, 200),
        OffspringLaw.custom([0.0, 0.3, 0.3, 0.4])]


def test_offspring_constants():
    b = OffspringLaw.binary(0.5)
    assert b.m == 1.5 and b.p1 == 0.5
    assert b.gamma == pytest.approx(math.log(2) / math.log(1.5))
    g = OffspringLaw.geom_shift(0.5)
    assert g.m == 2.0 and g.gamma == pytest.approx(1.0)
    assert g.variance == pytest.approx(2.0)
    t = OffspringLaw.two_point(3, 0.5)
    assert t.m == 2.0 and t.gamma == pytest.approx(1.0) and t.d == 2
    assert b.d == 1


@pytest.mark.parametrize("off", LAWS, ids=lambda o: o.label)
def test_generating_function_consistency(off):
    s = np.array([0.1, 0.5, 0.9])
    c = off.coefficients(4000)
    assert np.allclose(off.f(s), np.polynomial.polynomial.polyval(s, c), rtol=1e-12)
    u = np.array([1e-9, 1e-3, 0.5])
    assert np.allclose(off.complement_f(u), 1 - off.f(1 - u), rtol=1e-6)
    h = 1e-6
    assert off.f_prime(0.5) == pytest.approx((off.f(0.5 + h) - off.f(0.5 - h)) / (2 * h),
                                             rel=1e-6)
    assert off.f_prime(1.0) == pytest.approx(off.m, rel=1e-9)


def test_offspring_validation():
    with pytest.raises(ConfigError):
        OffspringLaw.custom([0.1, 0.4, 0.5])
    with pytest.raises(ConfigError):
        OffspringLaw.custom([0.0, 0.0, 1.0])  # p1 = 0
    with pytest.raises(ConfigError):
        OffspringLaw.geom_shift(1.2)
    with pytest.raises(ConfigError):
        OffspringLaw("poisson")


def test_offspring_dict_round_trip():
    for off in LAWS:
        assert OffspringLaw.from_dict(off.to_dict()) == off


def test_pmf_sf_moment():
    g = OffspringLaw.geom_shift(0.5)
    assert g.pmf(3) == pytest.approx(0.125)
    assert g.sf(3) == pytest.approx(0.25)
    assert g.moment(1.0) == pytest.approx(2.0)
    b = OffspringLaw.binary(0.5)
    assert b.sf(2) == 0.5 and b.sf(3) == 0.0
    assert b.moment(-1.0) == pytest.approx(0.75)


def test_pmf_z2_binary_by_enumeration():
    off = OffspringLaw.binary(0.5)
    brute = {}
    for z1, w1 in ((1, 0.5), (2, 0.5)):
        for kids in product((1, 2), repeat=z1):
            w = w1 * 0.5 ** z1
            brute[sum(kids)] = brute.get(sum(kids), 0.0) + w
    pm = pmf_Zn(off, 2, 10)
    for k, p in brute.items():
        assert pm.probs[k] == pytest.approx(p, abs=1e-15)
    assert pm.tail_mass == pytest.approx(0.0, abs=1e-15)


def test_geometric_series_matches_closed_form():
    for n in (1, 3, 6):
        pm = pmf_Zn(OffspringLaw.geom_shift(0.5), n, 3000)
        assert np.allclose(pm.probs, geom_pmf_closed(0.5, n, 3000), rtol=1e-10, atol=1e-15)


def test_series_helpers():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([0.5, 0.0, 1.0, 4.0])
    assert np.allclose(series_mul(a, b, 3), np.convolve(a, b)[:4])
    c = np.array([1.0, -0.5])  # 1/(1 - s/2) = sum (s/2)**k
    assert np.allclose(series_reciprocal(c, 6), 0.5 ** np.arange(7))
    g = np.zeros(6)
    g[1] = 1.0
    off = OffspringLaw.binary(0.5)
    assert np.allclose(compose(off, g, 5), off.coefficients(5))


def test_series_truncation_guard():
    pm = pmf_Zn(OffspringLaw.two_point(3, 0.5), 5, 20)
    with pytest.raises(TruncationError):
        pm.require(1e-6)


@pytest.mark.parametrize("off", LAWS, ids=lambda o: o.label)
def test_schroder_identities(off):
    assert off.m ** -off.gamma == pytest.approx(off.p1, rel=1e-14)
    assert q_k(off, 1).value == 1.0
    for s in (0.2, 0.5, 0.8):
        lhs = Q_of(off, float(off.f(s))).value
        rhs = off.p1 * Q_of(off, s).value
        assert lhs == pytest.approx(rhs, rel=1e-6)


def test_geometric_q_and_Q_closed_form():
    off = OffspringLaw.geom_shift(0.5)
    q, _ = q_vector(off, 20)
    assert np.allclose(q[1:], 1.0, atol=1e-6)
    assert Q_of(off, 0.5).value == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        Q_of(off, 1.0)


def test_laplace_transform_geometric():
    off = OffspringLaw.geom_shift(0.5)
    lam = np.array([1e-4, 0.3, 1.0, 7.0, 1e3])
    assert np.allclose(laplace_exact(off, lam), 1 / (1 + lam), rtol=1e-9)
    assert np.allclose(laplace_complement(off, lam), lam / (1 + lam), rtol=1e-9)
    model = MartingaleLimitModel(off, n_samples=1000)
    assert model.laplace_W(2.5) == pytest.approx(1 / 3.5, rel=1e-5)


def test_laplace_functional_equation():
    off = OffspringLaw.binary(0.5)
    lam = np.array([0.2, 1.0, 5.0])
    lhs = laplace_exact(off, off.m * lam)
    rhs = off.f(laplace_exact(off, lam))
    assert np.allclose(lhs, rhs, rtol=1e-9)


def test_mellin_moments_geometric():
    model = MartingaleLimitModel(OffspringLaw.geom_shift(0.5), n_samples=1000)
    for e in (-0.5, -0.2, 0.3, 0.7):
        assert model.moment_mellin(e) == pytest.approx(special.gamma(1 + e), rel=1e-6)
    assert model.moment_W(1.0).value == 1.0
    with pytest.raises(DomainError):
        model.moment_W(-1.5)


def test_mellin_against_samples_binary():
    model = MartingaleLimitModel(OffspringLaw.binary(0.5), n_samples=200_000)
    for e in (-0.5, 0.5):
        mc = model.moment_samples(e)
        assert model.moment_mellin(e) == pytest.approx(mc.value, abs=5 * mc.stderr + 2e-3)


def test_w_samples_geometric_are_exponential():
    w = sample_W(OffspringLaw.geom_shift(0.5), 18, 100_000, 4)
    assert stats.kstest(w, "expon").pvalue > 1e-3
    assert abs(w.mean() - 1) < 4 * w.std() / math.sqrt(w.size)


def test_w_samples_deterministic():
    a = sample_W(OffspringLaw.binary(0.5), 10, 5000, 9)
    b = sample_W(OffspringLaw.binary(0.5), 10, 5000, 9)
    assert np.array_equal(a, b)


def test_omega_window_is_labelled_heuristic():
    model = MartingaleLimitModel(OffspringLaw.geom_shift(0.5), n_samples=200_000)
    win = model.omega_window(0.01, 0.1, points=5, n_boot=5)
    # omega(u) = exp(-u) for W ~ Exp(1), gamma = 1
    assert win.inf_est == pytest.approx(math.exp(-0.1), rel=0.1)
    assert win.sup_est == pytest.approx(math.exp(-0.01), rel=0.1)
    assert "heuristic" in win.label


def test_harmonic_closed_form_geometric():
    off = OffspringLaw.geom_shift(0.5)
    for n in (1, 5, 12):
        val, _, _ = harmonic_expectation(off, -1.0, 1.0, n)
        assert val == pytest.approx(geom_harmonic_closed(0.5, n), rel=1e-10)


def test_harmonic_moment_reference_kinds():
    off = OffspringLaw.geom_shift(0.5)
    model = MartingaleLimitModel(off, n_samples=1000)
    res = harmonic_moment(off, -0.5, 1.0, 12, model=model)
    assert res.reference_kind == "limit_moment"
    assert res.ratio == pytest.approx(1.0, rel=0.02)
    res = harmonic_moment(off, -1.0, 1.0, 14, model=model)
    assert res.reference_kind == "harmonic_sum"
    with pytest.raises(DomainError):
        harmonic_moment(off, -1.5, 1.0, 5, model=model)


def test_local_bound_constant_finite():
    off = OffspringLaw.binary(0.5)
    lb = local_bound_constant(off, range(1, 9), 400)
    assert 0 < lb.C < 10 and set(lb.per_n) == set(range(1, 9))
    geo = local_bound_constant(OffspringLaw.geom_shift(0.5), [3, 6], 500, closed_form=True)
    assert geo.C <= 1.0 + 1e-12


def test_centered_offspring_summand():
    law = CenteredOffspring(OffspringLaw.two_point(3, 0.5))
    assert law.shift == pytest.approx(-2.0)
    assert law.tail_right(0.5) == pytest.approx(0.5)
    assert law.tail_right(1.5) == 0.0
