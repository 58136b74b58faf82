import math

import numpy as np
import pytest
from scipy import special
from scipy.stats import levy_stable

from gwldp.errors import CalibrationFailure, ConfigError, DomainError
from gwldp.laws import LatticeSign, symmetric_pareto
from gwldp.norming import NormingSequence
from gwldp.rng import Stream
from gwldp.stable import (CdfTable, StableLaw, build_table, calibrate, cms_transform,
                          ks_distance, shipped_tables, tail_constant)


@pytest.mark.parametrize("alpha,skew", [(1.5, 0.0), (1.5, -1.0), (1.2, 1.0), (0.8, 0.0),
                                        (1.8, -1.0), (0.8, 1.0)])
def test_table_cdf_matches_scipy(alpha, skew):
    x = np.array([-4.0, -1.0, -0.2, 0.0, 0.5, 2.0, 8.0])
    ours = StableLaw(alpha, skew).cdf(x)
    ref = levy_stable.cdf(x, alpha, skew)
    assert np.max(np.abs(ours - ref)) < 5e-4


def test_scale_enters_linearly():
    U = StableLaw(1.5, 0.0, 2.5)
    assert U.cdf(2.5) == pytest.approx(StableLaw(1.5).cdf(1.0), abs=1e-12)
    assert U.tail_cdf(2.5) == pytest.approx(1 - U.cdf(2.5))


def test_cauchy_cdf_closed_form():
    U = StableLaw(1.0)
    assert U.cdf(1.0) == pytest.approx(0.75, abs=1e-15)
    assert U.cdf(-1.0) == pytest.approx(0.25, abs=1e-15)


def test_levy_cdf_closed_form():
    U = StableLaw(0.5, 1.0)
    x = 3.0
    assert U.cdf(x) == pytest.approx(special.erfc(math.sqrt(1 / (2 * x))), rel=1e-14)


def test_sampler_cauchy_quartiles():
    x = StableLaw(1.0).sample(Stream.derive(4, 0), 400_000)
    assert np.mean(x <= 1.0) == pytest.approx(0.75, abs=4 * math.sqrt(0.75 * 0.25 / x.size))


@pytest.mark.parametrize("alpha,skew", [(1.5, 0.0), (1.2, -1.0), (0.8, 1.0)])
def test_sampler_matches_scipy(alpha, skew):
    x = StableLaw(alpha, skew).sample(Stream.derive(8, 1), 50_000)
    grid = np.array([-2.0, -0.5, 0.3, 1.5])
    emp = np.array([np.mean(x <= g) for g in grid])
    ref = levy_stable.cdf(grid, alpha, skew)
    assert np.all(np.abs(emp - ref) < 4 * np.sqrt(ref * (1 - ref) / x.size) + 1e-4)


def test_cms_symmetric_alpha_two_limit_is_gaussian_scale():
    # alpha -> 2 gives N(0, 2 scale**2); check the variance on a trimmed sample
    u = Stream.derive(2, 0).uniform(400_000)
    x = cms_transform(1.999, 0.0, u[0::2], u[1::2])
    core = x[np.abs(x) < 6]
    assert np.var(core) == pytest.approx(2.0, rel=0.03)


def test_tail_constant():
    assert tail_constant(1.0) == pytest.approx(2 / math.pi)
    a = 1.5
    assert tail_constant(a) == pytest.approx(
        1 / (special.gamma(1 - a) * math.cos(math.pi * a / 2)))
    c_plus, c_minus = StableLaw(1.5, -1.0).tail_constants()
    assert c_plus == 0.0 and c_minus == pytest.approx(tail_constant(1.5))
    # P(U > x) x**alpha -> C_alpha / 2 for the symmetric law
    x = 200.0
    assert (1 - levy_stable.cdf(x, a, 0.0)) * x ** a == pytest.approx(
        tail_constant(a) / 2, rel=0.02)


def test_invalid_parameters():
    with pytest.raises(ConfigError):
        StableLaw(2.0)
    with pytest.raises(ConfigError):
        StableLaw(1.0, 0.5)
    with pytest.raises(ConfigError):
        StableLaw(1.5, 0.0, -1.0)


def test_cdf_table_scalar_and_extrapolation():
    tab = build_table(1.3, 0.0, draws=200_000, seed=3)
    assert isinstance(tab, CdfTable)
    assert np.ndim(tab.cdf(0.3)) == 0
    far = tab.cdf(np.array([-1e6, 1e6]))
    assert 0 < far[0] < 1e-6 and 1 - 1e-6 < far[1] < 1


def test_shipped_tables_present():
    pairs = set(shipped_tables())
    for a in (0.8, 1.2, 1.5, 1.8):
        for s in (-1.0, 0.0, 1.0):
            assert (a, s) in pairs


def test_ks_distance_exact_uniform():
    x = (np.arange(1, 101) - 0.5) / 100
    assert ks_distance(x, lambda z: z) == pytest.approx(0.005, abs=1e-12)


def test_calibrate_recovers_scale_for_exact_stable_input():
    true = StableLaw(1.5, 0.0, 1.7)
    draws = true.sample(Stream.derive(12, 0), 40_000)
    law = symmetric_pareto(1.5)
    nseq = NormingSequence(1.5)
    fit = calibrate(law, nseq, k=1, sums=draws * nseq.b(1))
    assert fit.scale == pytest.approx(1.7, rel=0.02)
    assert fit.ks < 0.01


def test_calibrate_rejects_bad_fit():
    law = symmetric_pareto(1.5)
    sums = np.linspace(-1, 1, 1000) ** 3 * 1e-6
    with pytest.raises(CalibrationFailure):
        calibrate(law, NormingSequence(1.5), k=1, sums=sums)
    with pytest.raises(DomainError):
        calibrate(LatticeSign(), NormingSequence(1.5), k=1, sums=sums)
