import math

import pytest
from hypothesis import given, settings, strategies as st

from splitplot.correlation import CorrelationStructure
from splitplot.design import cell_plan, parallel, shares, stepped_wedge
from splitplot.effects import Estimand, Model
from splitplot.errors import InfeasibleError, ValidationError
from splitplot.normal import norm_cdf, norm_ppf
from splitplot.power import (PowerQuery, SolveFor, detectable_delta, power_for,
                             required_cell_size, required_cluster_multiplier, variance_floor,
                             z_sum)
from splitplot.variance import EffectQuery, effect_variance
from splitplot.verify import multiplier_loop

BLOCK = CorrelationStructure(1.0, 0.24, 0.192)


def test_power_formula():
    v = 0.01
    expected = norm_cdf(0.3 / 0.1 - norm_ppf(0.975))
    assert power_for(v, 0.3) == pytest.approx(expected, rel=1e-15)
    assert power_for(v, -0.3) == power_for(v, 0.3)
    assert power_for(math.inf, 0.3) == pytest.approx(0.025, rel=1e-12)


@given(st.floats(1e-6, 10.0), st.floats(0.001, 0.2), st.floats(0.5, 0.99))
def test_detectable_delta_inverts_power(var, alpha, target):
    delta = detectable_delta(var, alpha, target)
    assert power_for(var, delta, alpha) == pytest.approx(target, rel=1e-10)
    assert delta == pytest.approx(math.sqrt(var) * z_sum(alpha, target), rel=1e-14)


@pytest.mark.parametrize("kw", [dict(delta=0.0), dict(alpha=0.0), dict(alpha=1.0),
                                dict(target_power=1.0), dict(target_power=0.01)])
def test_query_validation(kw):
    args = dict(delta=0.3, alpha=0.05, target_power=0.8, solve_for=SolveFor.CELL_SIZE)
    args.update(kw)
    with pytest.raises(ValidationError):
        PowerQuery(**args)


def test_required_cell_size_is_minimal():
    d = shares()
    q = EffectQuery(Estimand.CLUSTER, Model.WITH_INTERACTION)
    r = required_cell_size(d, BLOCK, 0.5, q, 0.35)
    assert r.value == 7
    assert r.power >= 0.8 > r.power_below


def test_huge_delta_gives_one():
    d = shares()
    for model in Model:
        for e in (Estimand.CLUSTER, Estimand.INDIVIDUAL):
            r = required_cell_size(d, BLOCK, 0.5, EffectQuery(e, model), 10.0)
            assert r.value == 1 and math.isnan(r.power_below)


def test_infeasible_reports_floor():
    d = stepped_wedge(3)
    q = EffectQuery(Estimand.CLUSTER, Model.NO_INTERACTION)
    floor = variance_floor(d, BLOCK, q)
    assert floor > 0
    with pytest.raises(InfeasibleError) as exc:
        required_cell_size(d, BLOCK, 0.5, q, 0.05)
    assert exc.value.variance_floor == pytest.approx(floor)
    assert "variance floor" in str(exc.value)


@pytest.mark.parametrize("seed", range(4))
def test_multiplier_matches_loop(seed):
    T = 3 + seed
    d = stepped_wedge(T) if seed % 2 else parallel(T, 2)
    q = EffectQuery([Estimand.CLUSTER, Estimand.INTERACTION][seed % 2])
    got = required_cluster_multiplier(d, 4, BLOCK, 0.5, q, 0.3)
    assert got.value == multiplier_loop(d, 4, BLOCK, 0.5, q, 0.3)
    v1 = effect_variance(d, cell_plan(d, 4, 0.5), BLOCK, q).value
    assert got.variance == pytest.approx(v1 / got.value)
