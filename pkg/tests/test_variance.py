import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from splitplot import oracle
from splitplot.correlation import CorrelationStructure
from splitplot.design import TrialDesign, cell_plan, parallel, shares, stepped_wedge
from splitplot.effects import Estimand, Model
from splitplot.errors import DegenerateDesignError, ValidationError
from splitplot.variance import (EffectQuery, contrast_covariance, effect_variance,
                                interaction_ratio_check, v_lcrt, v_lcrt_limit,
                                v_lcrt_variable)
from splitplot.verify import ESTIMANDS

BLOCK = CorrelationStructure(1.0, 0.24, 0.192)


def test_v_lcrt_hand_value():
    # sw:3, independent unit-variance errors: OLS gives 2.0
    assert v_lcrt(stepped_wedge(3), 1, CorrelationStructure(1.0, 0.0, 0.0)) == 2.0


def test_v_lcrt_matches_lcrt_gls():
    d = shares()
    for m in (1, 4, 17):
        ref = oracle.lcrt_gls(d, np.full((25, 6), m), BLOCK).var("cluster")
        assert v_lcrt(d, m, BLOCK) == pytest.approx(ref, rel=1e-12)


def test_v_lcrt_limit():
    d = shares()
    assert v_lcrt(d, 10**8, BLOCK) == pytest.approx(v_lcrt_limit(d, BLOCK), rel=1e-6)
    assert v_lcrt_limit(d, CorrelationStructure(1.0, 0.0, 0.0)) == 0.0
    # exchangeable parallel design is 0/0 at the limit
    p = parallel(3, 4)
    ex = CorrelationStructure(1.0, 0.2, 0.2)
    assert v_lcrt_limit(p, ex) == pytest.approx(v_lcrt(p, 10**9, ex), rel=1e-6)


@pytest.mark.parametrize("X", [np.zeros((3, 3)), np.ones((3, 3))])
def test_degenerate_designs(X):
    d = TrialDesign.from_matrix(X)
    with pytest.raises(DegenerateDesignError, match="degenerate design"):
        effect_variance(d, cell_plan(d, 2, 0.5), BLOCK, EffectQuery())


def test_confounded_cluster_effect_is_degenerate():
    d = TrialDesign(3, (((0, 1, 1), 2), ((0, 1, 1), 2)))
    with pytest.raises(DegenerateDesignError):
        v_lcrt(d, 3, BLOCK)


def test_query_rules():
    with pytest.raises(ValidationError):
        EffectQuery(Estimand.INTERACTION, Model.NO_INTERACTION)
    q = EffectQuery("cluster-marginal", "no-interaction")
    assert q.estimand is Estimand.CLUSTER


def test_decomposition_and_formula_id():
    d = shares()
    r = effect_variance(d, cell_plan(d, 4, 0.5), BLOCK, EffectQuery())
    assert r.formula_id == "equal-m/interaction/cluster"
    assert r.value == r.v_lcrt_part + r.inflation_part
    assert r.v_lcrt_part == pytest.approx(v_lcrt(d, 4, BLOCK))
    ind = effect_variance(d, cell_plan(d, 4, 0.5), BLOCK, EffectQuery(Estimand.INDIVIDUAL))
    assert ind.inflation_part == 0.0 and ind.v_lcrt_part == ind.value


def test_variable_v_lcrt_sources():
    d = stepped_wedge(3)
    sz = np.array([[1, 2, 3], [3, 2, 1]])
    plan = cell_plan(d, sz, 0.5)
    q = EffectQuery()
    r = effect_variance(d, plan, BLOCK, q)
    assert r.formula_id.startswith("variable-m/")
    assert r.v_lcrt_part == pytest.approx(v_lcrt_variable(d, sz, BLOCK))
    with pytest.raises(ValidationError, match="V_LCRT unavailable"):
        effect_variance(d, plan, BLOCK, q, v_lcrt_source=None)
    custom = effect_variance(d, plan, BLOCK, q, v_lcrt_source=lambda *a: 1.0)
    assert custom.v_lcrt_part == 1.0


def test_interaction_ratios_shares():
    d = shares()
    a, b = interaction_ratio_check(d, cell_plan(d, 4, 0.5), BLOCK)
    assert a == pytest.approx(2.0, rel=1e-14)
    assert b == pytest.approx(0.5, rel=1e-14)


def test_contrast_covariance_matches_oracle():
    d = shares()
    plan = cell_plan(d, 4, 0.5)
    cc = contrast_covariance(d, plan, BLOCK)
    g = oracle.full_gls(d, plan, BLOCK)
    # contrasts in raw coding: beta_i, beta_c, beta_c + beta_i + beta_ic
    W = np.zeros((3, len(g.labels)))
    W[0, g.index("individual")] = 1
    W[1, g.index("cluster")] = 1
    W[2, [g.index("individual"), g.index("interaction"), g.index("cluster")]] = 1
    assert np.allclose(cc.matrix, W @ g.matrix @ W.T, rtol=1e-12, atol=1e-15)


@st.composite
def configs(draw):
    n = draw(st.integers(2, 5))
    T = draw(st.integers(1, 4))
    X = np.array(draw(st.lists(st.lists(st.integers(0, 1), min_size=T, max_size=T),
                               min_size=n, max_size=n)))
    variable = draw(st.booleans())
    if variable:
        sizes = np.array(draw(st.lists(st.lists(st.sampled_from([2, 4, 6]), min_size=T,
                                                max_size=T), min_size=n, max_size=n)))
    else:
        sizes = draw(st.sampled_from([2, 4, 6]))
    w = draw(st.sampled_from([0.0, 0.05, 0.2, 0.24, 0.5]))
    b = w * draw(st.sampled_from([0.0, 0.5, 0.8, 1.0]))
    return X, sizes, CorrelationStructure(draw(st.sampled_from([1.0, 3.0])), w, b)


@given(configs())
@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
def test_closed_forms_match_full_gls(cfg):
    X, sizes, corr = cfg
    d = TrialDesign.from_matrix(X)
    plan = cell_plan(d, sizes, 0.5)
    try:
        for model, estimands in ESTIMANDS.items():
            g = oracle.full_gls(d, plan, corr, model)
            for e in estimands:
                got = effect_variance(d, plan, corr, EffectQuery(e, model)).value
                assert got == pytest.approx(g.estimand_variance(e), rel=1e-8)
    except (DegenerateDesignError, oracle.InestimableError):
        # both sides must agree the design is degenerate
        with pytest.raises((DegenerateDesignError, oracle.InestimableError)):
            for model in Model:
                oracle.collapsed_gls(d, plan, corr, model)
                effect_variance(d, plan, corr, EffectQuery(Estimand.CLUSTER, model))


@given(configs(), st.sampled_from([0.0, 0.3, 0.9]))
@settings(max_examples=60, deadline=None)
def test_bpicc_does_not_touch_individual_level(cfg, frac):
    X, sizes, corr = cfg
    d = TrialDesign.from_matrix(X)
    plan = cell_plan(d, sizes, 0.5)
    other = CorrelationStructure(corr.sigma2_total, corr.wpicc, corr.wpicc * frac)
    try:
        for key in [(Estimand.INDIVIDUAL, Model.WITH_INTERACTION),
                    (Estimand.INTERACTION, Model.WITH_INTERACTION),
                    (Estimand.INDIVIDUAL, Model.NO_INTERACTION)]:
            q = EffectQuery(*key)
            assert (effect_variance(d, plan, corr, q).value
                    == effect_variance(d, plan, other, q).value)
    except DegenerateDesignError:
        pass


@given(st.integers(3, 12), st.integers(1, 40))
@settings(max_examples=40, deadline=None)
def test_variances_decrease_in_m(T, m):
    d = stepped_wedge(T)
    for model, estimands in ESTIMANDS.items():
        for e in estimands:
            q = EffectQuery(e, model)
            a = effect_variance(d, cell_plan(d, m, 0.5), BLOCK, q).value
            b = effect_variance(d, cell_plan(d, m + 1, 0.5), BLOCK, q).value
            assert b < a
