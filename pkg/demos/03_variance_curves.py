"""
Variance curves and the interaction crossover
=============================================

With few individuals per cell the cluster-level effect is estimated more
precisely than the interaction. The interaction variance keeps falling as
``1/m`` while the cluster-level variance levels off, so the order flips.
"""

# %%
import numpy as np

from splitplot import CorrelationStructure, EffectQuery, Estimand, cell_plan, effect_variance, shares

design = shares()
corr = CorrelationStructure(1.0, 0.24, 0.192)
ms = np.arange(1, 31)
v_c = np.array([effect_variance(design, cell_plan(design, m, 0.5), corr,
                                EffectQuery(Estimand.CLUSTER)).value for m in ms])
v_ic = np.array([effect_variance(design, cell_plan(design, m, 0.5), corr,
                                 EffectQuery(Estimand.INTERACTION)).value for m in ms])
print("first m with var(interaction) < var(cluster):", ms[np.argmax(v_ic < v_c)])

# %%
# Now hold m fixed and raise the within-period ICC with the between/within
# ratio fixed at 0.8. Higher clustering hurts the cluster-level estimate and
# helps the individual-level ones.
for w in (0.02, 0.05, 0.1, 0.2, 0.4):
    c = CorrelationStructure(1.0, w, 0.8 * w)
    plan = cell_plan(design, 10, 0.5)
    a = effect_variance(design, plan, c, EffectQuery(Estimand.CLUSTER)).value
    b = effect_variance(design, plan, c, EffectQuery(Estimand.INTERACTION)).value
    print(f"wpicc={w:.2f}  cluster={a:.5f}  interaction={b:.5f}")

# %%
# The CLI writes the same sweep as CSV for plotting elsewhere:
#
#   splitplot curve --design shares --sweep m --from 1 --to 30 \
#       --wpicc 0.24 --bpicc 0.192 --delta 0.2 --out curve.csv
