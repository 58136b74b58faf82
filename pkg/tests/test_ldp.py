import math

import numpy as np
import pytest
from scipy import stats

from gwldp.errors import DomainError, HypothesisError, Unclassifiable
from gwldp.gw.offspring import OffspringLaw
from gwldp.gw.series import pmf_Zn
from gwldp.laws import (LatticeSign, SlowlyVarying, SummandLaw, spectrally_negative,
                        symmetric_pareto)
from gwldp.ldp.estimate import (MIN_REPLICATES, estimate_ldp, estimate_ldp_grid,
                                semi_exact, weighted_tail_sum)
from gwldp.ldp.lotka import (check_hypotheses, co_prediction, identity_ks, lotka_nagaev,
                             phi_exact)
from gwldp.ldp.regime import Prediction, classify_regime, left_tail_ratio
from gwldp.ldp.sweep import log_trend, run_sweep, z_score
from gwldp.norming import NormingSequence, ThresholdSequence

GEOM = OffspringLaw.geom_shift(0.5)


def _two_point_phi(k, eps):
    # values {1, 3}: sum = k + 2 Bin(k, 1/2), deviation from 2k is 2B - k
    j = np.arange(k + 1)
    far = np.abs(2 * j - k) > eps * k * (1 + 1e-12)
    return float(stats.binom.pmf(j[far], k, 0.5).sum())


def test_estimate_matches_semi_exact(backend):
    off, law = OffspringLaw.binary(0.5), symmetric_pareto(1.5)
    mc = estimate_ldp(off, law, 1.0, 2, 100_000, 3, backend=backend)
    se = semi_exact(off, law, 1.0, 2, reps_per_k=100_000, seed=4, backend=backend)
    assert abs(mc.p_hat - se.p_hat) < 4 * math.hypot(mc.stderr, se.stderr)
    assert mc.discard_rate == 0.0 and mc.accepted


def test_lattice_semi_exact_is_exact_and_matches_simulation():
    off, law = OffspringLaw.binary(0.5), LatticeSign()
    se = semi_exact(off, law, 0.2, 3)
    assert se.method == "semi_exact/exact" and se.stderr == 0.0
    pm = pmf_Zn(off, 3, 8)
    brute = sum(pm.probs[k] * law.prob_sum_at_least(k, 0.2 * k) for k in range(1, 9))
    assert se.p_hat == pytest.approx(brute, rel=1e-14)
    mc = estimate_ldp(off, law, 0.2, 3, 200_000, 8)
    assert abs(mc.p_hat - se.p_hat) < 4 * mc.stderr


def test_weighted_tail_sum_exact_for_lattice():
    law = LatticeSign()
    ks, w = [1, 2, 5], [0.2, 0.3, 0.5]
    res = weighted_tail_sum(law, ks, w, 0.5, 1000, 0)
    # P(S_1 >= .5) = 1/2, P(S_2 >= 1) = 1/4, P(S_5 >= 2.5) = P(Bin >= 4) = 6/32
    assert res.exact and res.value == pytest.approx(0.2 / 2 + 0.3 / 4 + 0.5 * 6 / 32)


def test_weighted_tail_sum_monte_carlo_single_k():
    law = symmetric_pareto(1.5)
    res = weighted_tail_sum(law, [1], [1.0], 2.0, 200_000, 1)
    assert res.value == pytest.approx(law.tail_right(2.0), abs=4 * res.stderr)


def test_grid_uses_common_random_numbers():
    law = symmetric_pareto(1.5)
    grid = estimate_ldp_grid(GEOM, law, [0.5, 1.0, 2.0], 3, MIN_REPLICATES, 2)
    p = [g.p_hat for g in grid]
    assert p[0] >= p[1] >= p[2]
    assert estimate_ldp(GEOM, law, 1.0, 3, MIN_REPLICATES, 2).p_hat == p[1]


def test_estimate_input_errors():
    with pytest.raises(DomainError):
        estimate_ldp(GEOM, symmetric_pareto(1.5), 1.0, 0, MIN_REPLICATES, 0)
    with pytest.raises(DomainError):
        estimate_ldp(GEOM, symmetric_pareto(1.5), 1.0, 2, 10, 0)


def test_rare_event_is_flagged_unreliable():
    est = estimate_ldp(GEOM, symmetric_pareto(1.5), 1e6, 2, MIN_REPLICATES, 0)
    assert est.unreliable


@pytest.mark.parametrize("off,law,eps,expected", [
    (GEOM, symmetric_pareto(0.8), ThresholdSequence("diverging", 4.0, 1.0), "Main2"),
    (GEOM, symmetric_pareto(1.5), ThresholdSequence("constant", 6.0), "Main3_iv"),
    (GEOM, spectrally_negative(1.5, 1.6), ThresholdSequence("geometric_decay", 1.0, 0.15),
     "Main3_i"),
    (OffspringLaw.binary(0.5), spectrally_negative(1.5, 1.8),
     ThresholdSequence("geometric_decay", 1.0, 0.15), "Main3_i"),
    (GEOM, spectrally_negative(1.5, 1.95), ThresholdSequence("geometric_decay", 1.0, 0.15),
     "Main3_ii"),
    (GEOM, symmetric_pareto(1.5), ThresholdSequence("clt_scale", x=0.5), "MainX"),
    (OffspringLaw.two_point(3, 0.5), spectrally_negative(1.5, 3.0),
     ThresholdSequence("constant", 1.0), "SCmain3"),
], ids=lambda v: v if isinstance(v, str) else None)
def test_classify_regime(off, law, eps, expected):
    pred = classify_regime(off, law, None, eps, evaluate=False)
    assert pred.theorem_id == expected
    assert all(c.passed for c in pred.checks)
    assert pred.normalizer_formula
    assert pred.heuristic == (expected == "Main3_ii")


def test_unclassifiable_carries_checks():
    eps = ThresholdSequence("diverging", 1.0, 2.0, form="polynomial")
    with pytest.raises(Unclassifiable) as info:
        classify_regime(GEOM, symmetric_pareto(1.5), None, eps, evaluate=False)
    assert info.value.prediction.theorem_id == "None"
    assert info.value.prediction.checks


def test_main3_iv_normalizer_and_value():
    law = symmetric_pareto(1.5)
    pred = classify_regime(GEOM, law, None, ThresholdSequence("constant", 6.0))
    # a_n = m**(n/2) 6**1.5 / L with L = 1/2; I_1.5 = E[W**-0.5] = sqrt(pi) for W ~ Exp(1)
    assert pred.a_n(4) == pytest.approx(2 ** 2 * 6 ** 1.5 / 0.5, rel=1e-12)
    assert pred.prediction.value == pytest.approx(math.sqrt(math.pi), rel=5e-3)


def test_log_trend_exact_exponential():
    ns = np.arange(3, 9)
    vals = 3.0 * np.exp(0.2 * ns)
    tr = log_trend(ns, vals, 0.01 * vals)
    assert tr.slope == pytest.approx(0.2, rel=1e-12)
    assert tr.stderr == pytest.approx(0.01 / math.sqrt(np.sum((ns - ns.mean()) ** 2)))
    assert not tr.contains_zero
    assert log_trend([1], [1.0], [0.1]) is None


def test_z_score():
    val = Prediction("value", 2.0, 2.0, {"stderr": 0.3})
    assert z_score(2.5, 0.4, val) == pytest.approx(1.0)
    box = Prediction("heuristic", 1.0, 2.0, {})
    assert z_score(1.5, 0.1, box) == 0.0
    assert z_score(2.5, 0.25, box) == pytest.approx(2.0)
    assert z_score(0.5, 0.25, box) == pytest.approx(-2.0)
    assert math.isnan(z_score(1.0, 0.1, None))


def test_run_sweep_small():
    pred = classify_regime(GEOM, symmetric_pareto(1.5), None,
                           ThresholdSequence("constant", 6.0))
    table = run_sweep(pred, [2, 3], MIN_REPLICATES, seed=1)
    assert [r.n for r in table.rows] == [2, 3]
    assert table.to_csv().splitlines()[0].startswith("n,a_n,p_hat")
    r = table.rows[0]
    assert r.normalized == pytest.approx(r.a_n * r.p_hat)


def test_phi_exact_against_binomial():
    off = OffspringLaw.two_point(3, 0.5)
    phi = phi_exact(off, 30, 0.45)
    assert phi[0] == 0.0
    for k in range(1, 31):
        assert phi[k] == pytest.approx(_two_point_phi(k, 0.45), abs=1e-14)


def test_co_prediction_against_generation_limit():
    # q_k = lim m**(gamma n) P(Z_n = k); gamma = 1, m = 2 for this law
    off = OffspringLaw.two_point(3, 0.5)
    pred = co_prediction(off, 0.45)
    K, n = pred.details["K"], 24
    pm = pmf_Zn(off, n, K)
    ref = math.fsum(2.0 ** n * pm.probs[k] * _two_point_phi(k, 0.45) for k in range(1, K + 1))
    assert pred.value == pytest.approx(ref, rel=1e-6)


def test_identity_between_ratio_and_random_sum(backend):
    ks = identity_ks(OffspringLaw.two_point(3, 0.5), 3, 40_000, 6, backend=backend)
    assert ks < 0.02


def test_hypothesis_errors():
    with pytest.raises(HypothesisError):
        check_hypotheses(OffspringLaw.two_point(3, 0.5), "UpperDeviation")
    with pytest.raises(HypothesisError):
        check_hypotheses(OffspringLaw.geom_shift(0.5), "AbsoluteDeviation")
    with pytest.raises(HypothesisError):
        lotka_nagaev(OffspringLaw.geom_shift(0.5), "CLT", [2], MIN_REPLICATES, x=0.5)
    with pytest.raises(HypothesisError):  # gamma = 0.48 < beta - 1
        check_hypotheses(OffspringLaw.zeta_shift(1.5, 200), "UpperDeviation")
    assert check_hypotheses(OffspringLaw.zeta_shift(1.3, 200), "UpperDeviation")


def test_period_flags():
    cm2 = classify_regime(OffspringLaw.two_point(3, 0.5), SummandLaw(2.0, 0.8, 0.3, 0.3), None,
                          ThresholdSequence("diverging", 1.0, 2.0), evaluate=False)
    assert cm2.theorem_id == "Cmain2" and cm2.extra["flags"] == ["exploratory_period"]
    d3 = classify_regime(OffspringLaw.custom([0, 0.5, 0, 0, 0.5]), symmetric_pareto(1.5), None,
                         ThresholdSequence("constant", 6.0), evaluate=False)
    assert d3.extra["flags"] == ["untested_period"]
    assert classify_regime(GEOM, symmetric_pareto(1.5), None, ThresholdSequence("constant", 6.0),
                           evaluate=False).extra["flags"] == []


def test_left_tail_ratio_check():
    # pure power tail: the ratio is exactly 1 for every n
    law = symmetric_pareto(1.5)
    vals = left_tail_ratio(law, NormingSequence.for_law(law))
    assert all(v == pytest.approx(1.0, rel=1e-12) for _, v in vals)
    # an increasing slowly varying factor pushes it below 1
    law = symmetric_pareto(1.5, L=SlowlyVarying("log_power", 1.0, 0.5))
    pred = classify_regime(GEOM, law, None, ThresholdSequence("constant", 6.0), evaluate=False)
    check = next(c for c in pred.checks if c.name == "B_left_tail_ratio")
    assert check.passed
    assert all(v < 1 for _, v in left_tail_ratio(law, pred.nseq))
