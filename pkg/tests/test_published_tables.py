"""Why the delta = 0.2 published table is not reproduced by minimal integer m.

Every printed value there is 1 mod 10. Searching m over the grid 1, 11, 21, ...
reproduces the table except one cell whose power at the printed value rounds to
0.80 at two decimals but lies below 0.80.
"""
import numpy as np
import pytest

from splitplot.correlation import CorrelationStructure
from splitplot.design import cell_plan, shares
from splitplot.effects import TABLE_ROWS, Estimand, Model
from splitplot.power import power_for
from splitplot.variance import EffectQuery, effect_variance
from splitplot.verify import PUBLISHED_TABLES, SHARES_SCENARIOS


def grid_size(corr, q, delta, step, target=0.8):
    d = shares()
    m = 1
    while power_for(effect_variance(d, cell_plan(d, m, 0.5), corr, q).value, delta) < target:
        m += step
    return m


def power_at(corr, q, m, delta):
    d = shares()
    return power_for(effect_variance(d, cell_plan(d, m, 0.5), corr, q).value, delta)


def test_printed_values_on_step_ten_grid():
    vals = np.array([PUBLISHED_TABLES[0.2][s] for s in SHARES_SCENARIOS])
    assert np.all(vals % 10 == 1)


@pytest.mark.parametrize("scenario", list(SHARES_SCENARIOS))
def test_grid_search_explains_table(scenario):
    corr = CorrelationStructure(1.0, *SHARES_SCENARIOS[scenario])
    published = PUBLISHED_TABLES[0.2][scenario]
    for (model, est), printed in zip(TABLE_ROWS, published):
        q = EffectQuery(est, model)
        got = grid_size(corr, q, 0.2, 10)
        if got != printed:
            # the single mismatch: printed one grid step lower at power 0.799
            assert (scenario, model, est) == ("block-exchangeable", Model.WITH_INTERACTION,
                                              Estimand.CLUSTER)
            assert got == printed + 10
            p = power_at(corr, q, printed, 0.2)
            assert 0.795 <= p < 0.8 and round(p, 2) == 0.80
