"""
Estimator variances for a stepped-wedge trial with a nested individual factor
=============================================================================

A cluster-level intervention is rolled out over periods while, inside every
cluster-period, a fraction ``pi_z`` of individuals also receives an
individual-level intervention. This script prints the variance of each
treatment-effect estimator and how it splits into the single-intervention
part and the inflation caused by the interaction term.
"""

# %%
# Build the design and the correlation structure. ``wpicc`` is the
# correlation between two people in the same cluster and period, ``bpicc``
# the correlation across periods of the same cluster.
from splitplot import (CorrelationStructure, EffectQuery, Estimand, Model, cell_plan,
                       effect_variance, stepped_wedge)

design = stepped_wedge(5, clusters=3)
print(design.matrix.astype(int))
corr = CorrelationStructure(sigma2_total=1.0, wpicc=0.1, bpicc=0.08)
plan = cell_plan(design, 10, pi_z=0.5)

# %%
# Each query names an estimand and an outcome model.
for model in Model:
    for est in Estimand:
        if est is Estimand.INTERACTION and model is Model.NO_INTERACTION:
            continue
        r = effect_variance(design, plan, corr, EffectQuery(est, model))
        print(f"{r.formula_id:42s} var={r.value:.5f}  base={r.v_lcrt_part:.5f}  "
              f"inflation={r.inflation_part:.5f}")

# %%
# The individual-level variances do not move when only the between-period
# correlation changes.
other = CorrelationStructure(1.0, 0.1, 0.0)
q = EffectQuery(Estimand.INTERACTION)
print(effect_variance(design, plan, corr, q).value == effect_variance(design, plan, other, q).value)
