"""
Power and required cluster-period size
======================================

Power uses normal quantiles. The required cell size is the smallest ``m``
reaching the target; the cluster multiplier is the number of copies of the
whole design.
"""

# %%
from splitplot import (CorrelationStructure, EffectQuery, Estimand, Model, cell_plan,
                       effect_variance, power_for, required_cell_size,
                       required_cluster_multiplier, shares)
from splitplot.errors import InfeasibleError

design = shares()
block = CorrelationStructure(1.0, 0.24, 0.192)

# %%
# Required cell sizes for every estimand at delta = 0.35 SD.
for model, est in [(Model.WITH_INTERACTION, Estimand.CLUSTER),
                   (Model.WITH_INTERACTION, Estimand.INDIVIDUAL),
                   (Model.WITH_INTERACTION, Estimand.INTERACTION),
                   (Model.NO_INTERACTION, Estimand.CLUSTER),
                   (Model.NO_INTERACTION, Estimand.INDIVIDUAL)]:
    r = required_cell_size(design, block, 0.5, EffectQuery(est, model), delta=0.35)
    print(f"{model.value:15s} {est.value:12s} m={r.value:3d} power={r.power:.3f} "
          f"(at m-1: {r.power_below:.3f})")

# %%
# Power at a fixed design.
v = effect_variance(design, cell_plan(design, 4, 0.5), block, EffectQuery()).value
print("power at m=4:", round(power_for(v, 0.35), 4))

# %%
# The cluster-level variance has a floor as m grows, so small effects can be
# out of reach whatever the cell size. Adding clusters still helps.
q = EffectQuery(Estimand.CLUSTER, Model.NO_INTERACTION)
try:
    required_cell_size(design, block, 0.5, q, delta=0.05)
except InfeasibleError as exc:
    print(exc)
print("copies of the design needed at m=20:",
      required_cluster_multiplier(design, 20, block, 0.5, q, delta=0.05).value)
