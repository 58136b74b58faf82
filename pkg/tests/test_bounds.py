import math

import pytest

from gwldp.bounds import (KINDS, bound_na2_special, bound_na3b, bound_na16, bound_prokhorov,
                          best_na16, envelope, fit_prokhorov_constant, prokhorov_shape,
                          verify_bounds, write_csv)
from gwldp.errors import DomainError
from gwldp.laws import symmetric_pareto, two_sided


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.5])
@pytest.mark.parametrize("x", [1.5, 4.0, 30.0])
def test_bounds_dominate_single_summand(alpha, x):
    # k = 1: P(S_1 >= x) is the right tail itself
    law = symmetric_pareto(alpha)
    exact = law.tail_right(x)
    for r in (1.0, 2.0, 3.0):
        for t in (0.5, 1.0):
            assert bound_na3b(law, 1, x, r, t).raw >= exact
    assert bound_na2_special(law, 1, x).raw >= exact
    assert envelope(law, 1, x) >= min(1.0, exact)


def test_na3b_closed_form_pareto_1_5():
    law = symmetric_pareto(1.5)
    k, x, r = 10, 40.0, 2.0
    y = x / r
    A = 1.5 * (1 - y ** -0.5)  # E[X; 1 <= X <= y] for density 0.75 y**-2.5
    expected = k * 0.5 * y ** -1.5 + (math.e * k * A / x) ** r
    assert bound_na3b(law, k, x, r, 1.0).raw == pytest.approx(expected, rel=1e-10)


def test_na16_validity_conditions():
    law = symmetric_pareto(1.5)
    rep = bound_na16(law, 10, 1e4, None, 1.2)
    assert rep.valid
    assert rep.params["y"] ** 1.2 == pytest.approx(4 * 10 * law.A_t_plus(1.2))
    assert not bound_na16(law, 10, 1e4, None, 1.6).valid  # A_t infinite for t >= alpha
    assert not bound_na16(law, 10, 1e4, 1.0, 1.2).valid   # y too small
    assert not bound_na16(law, 10, 1.0, None, 1.2).valid  # x <= y
    assert not bound_na16(law, 10, 1e4, None, 0.5).valid
    assert best_na16(law, 10, 1e4).valid


def test_prokhorov_needs_constant():
    law = symmetric_pareto(1.5)
    rep = bound_prokhorov(law, 5, 10.0)
    assert not rep.valid and rep.params["shape"] == pytest.approx(prokhorov_shape(law, 5, 10.0))
    assert bound_prokhorov(law, 5, 10.0, 2.0).raw == pytest.approx(2 * rep.raw)


def test_na2_special_needs_symmetry():
    assert not bound_na2_special(two_sided(1.5, 0.7), 5, 10.0).valid


def test_value_is_clamped():
    rep = bound_na3b(symmetric_pareto(0.8), 1000, 10.0)
    assert rep.raw > 1 and rep.value == 1.0 and rep.clamped


def test_domain_errors():
    law = symmetric_pareto(1.5)
    with pytest.raises(DomainError):
        bound_na3b(law, 0, 1.0)
    with pytest.raises(DomainError):
        bound_na3b(law, 1, -1.0)
    with pytest.raises(DomainError):
        bound_na3b(law, 1, 1.0, t=1.5)


def test_small_grid_has_no_violations(tmp_path, backend):
    laws = {"p0.8": symmetric_pareto(0.8), "p1.5": symmetric_pareto(1.5)}
    fits = {k: fit_prokhorov_constant(v, ks=(5, 30), reps=20_000, backend=backend)
            for k, v in laws.items()}
    rows = verify_bounds(laws, ks=(10, 100), ratios=(2.0, 10.0), reps=50_000, seed=5,
                         prokhorov_fits=fits, backend=backend)
    assert len(rows) == 2 * 2 * 2 * len(KINDS)
    valid = [r for r in rows if r.valid]
    assert valid and all(r.passed for r in valid)
    path = tmp_path / "b.csv"
    write_csv(rows, path)
    assert path.read_text().splitlines()[0] == "law_id,kind,k,x,bound,empirical,stderr,pass"
