import warnings

import numpy as np
import pytest

from splitplot import oracle
from splitplot.correlation import CorrelationStructure
from splitplot.design import TrialDesign, cell_plan, shares, stepped_wedge
from splitplot.effects import Estimand, Model, Parametrisation
from splitplot.errors import InestimableError, ValidationError

BLOCK = CorrelationStructure(1.0, 0.24, 0.192)


def test_shares_frozen_values():
    # frozen from full_gls; individual variance is also (1 - 0.24) / (25 * 4 * 6 * 0.5 * 0.5)
    d = shares()
    g = oracle.full_gls(d, cell_plan(d, 4, 0.5), BLOCK)
    assert g.var("individual") == pytest.approx(0.010133333333333338, rel=1e-12)
    assert g.var("interaction") == pytest.approx(0.020266666666666665, rel=1e-12)
    assert g.var("cluster") == pytest.approx(0.0213407713498623, rel=1e-12)
    assert g.estimand_variance(Estimand.CLUSTER_MARGINAL) == pytest.approx(
        0.016274104683195623, rel=1e-12)


def test_variable_size_frozen_values():
    d = stepped_wedge(3, 2)
    sz = np.array([[2, 4, 6], [4, 4, 2], [6, 2, 2], [2, 2, 4]])
    g = oracle.full_gls(d, cell_plan(d, sz, 0.5), CorrelationStructure(2.0, 0.1, 0.05))
    assert g.var("individual") == pytest.approx(0.4, rel=1e-12)
    assert g.var("interaction") == pytest.approx(0.7272727272727271, rel=1e-12)
    assert g.var("cluster") == pytest.approx(1.0330434698930284, rel=1e-12)


@pytest.mark.parametrize("model", list(Model))
@pytest.mark.parametrize("par", list(Parametrisation))
def test_full_equals_collapsed(model, par):
    d = stepped_wedge(4)
    sz = np.array([[2, 4, 6, 2], [6, 6, 2, 4], [4, 2, 2, 2]])
    plan = cell_plan(d, sz, 0.5)
    f = oracle.full_gls(d, plan, BLOCK, model, par).matrix
    c = oracle.collapsed_gls(d, plan, BLOCK, model, par).matrix
    assert np.max(np.abs(f - c)) / np.max(np.abs(f)) < 1e-10


def test_centred_cluster_is_marginal():
    d = shares()
    plan = cell_plan(d, 4, 0.5)
    raw = oracle.full_gls(d, plan, BLOCK, parametrisation=Parametrisation.RAW)
    cen = oracle.collapsed_gls(d, plan, BLOCK, parametrisation=Parametrisation.CENTRED)
    assert cen.var("cluster") == pytest.approx(
        raw.estimand_variance(Estimand.CLUSTER_MARGINAL), rel=1e-12)


def test_sherman_morrison_matches_dense():
    cm = oracle.collapsed_matrices(np.array([3, 5, 2]), 0.2, BLOCK)
    dense = np.linalg.inv(cm.Sigma)
    assert np.allclose(cm.Sigma_inverse(), dense, rtol=1e-12, atol=1e-12)


def test_inestimable_names_direction():
    # every cluster has the same pattern: cluster effect confounded with periods
    d = TrialDesign(3, (((0, 1, 1), 3),))
    with pytest.raises(InestimableError) as exc:
        oracle.collapsed_gls(d, cell_plan(d, 2, 0.5), BLOCK)
    assert "cluster" in str(exc.value)


def test_full_needs_integral_split():
    d = stepped_wedge(3)
    with pytest.raises(ValidationError):
        oracle.full_gls(d, cell_plan(d, 3, 0.5), BLOCK)


def test_simulation_is_order_independent(tmp_path):
    d = stepped_wedge(3)
    plan = cell_plan(d, 4, 0.5)
    eff = oracle.TrueEffects(0.3, 0.2, -0.1)
    a = oracle.simulate_trial(d, plan, BLOCK, eff, seed=7, replicate=3)
    oracle.simulate_trial(d, plan, BLOCK, eff, seed=7, replicate=1)
    b = oracle.simulate_trial(d, plan, BLOCK, eff, seed=7, replicate=3)
    assert np.array_equal(a.y, b.y)
    # exactly pi_z * m treated per cell
    for i in range(2):
        for j in range(3):
            sel = (a.cluster == i) & (a.period == j)
            assert a.z[sel].sum() == 2
    a.to_csv(tmp_path / "t.csv")
    head = (tmp_path / "t.csv").read_text().splitlines()
    assert head[0] == "cluster,period,individual,x,z,y"
    assert len(head) == 1 + 24


def test_fit_recovers_noise_free_effects():
    d = stepped_wedge(4)
    plan = cell_plan(d, 4, 0.5)
    eff = oracle.TrueEffects(0.3, 0.2, -0.1, (0.0, 0.1, 0.2, 0.3))
    tiny = CorrelationStructure(1e-20, 0.2, 0.1)
    data = oracle.simulate_trial(d, plan, tiny, eff, seed=1)
    est = oracle.fit_gls(data, d, plan, tiny)
    assert np.allclose(est, eff.vector(Model.WITH_INTERACTION, 4), atol=1e-8)


def test_monte_carlo_small():
    d = stepped_wedge(3, 2)
    plan = cell_plan(d, 4, 0.5)
    eff = oracle.TrueEffects(0.3, 0.2, -0.1)
    emp = oracle.empirical_estimator_cov(d, plan, BLOCK, eff, 400, seed=3)
    ref = oracle.full_gls(d, plan, BLOCK)
    ratio = np.diag(emp.matrix) / np.diag(ref.matrix)
    assert np.all(np.abs(ratio - 1) < 0.25)
    assert emp.unbiased(eff.vector(Model.WITH_INTERACTION, 3))
