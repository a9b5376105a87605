"""Power, detectable effect sizes and required sample sizes for two-sided tests.

All calculations use normal quantiles; no small-sample correction is applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .design import TrialDesign, cell_plan
from .effects import Estimand, Model
from .errors import InfeasibleError, ValidationError
from .normal import norm_cdf, norm_ppf
from .variance import EffectQuery, effect_variance, v_lcrt_limit

DEFAULT_M_MAX = 10**6


class SolveFor(str, Enum):
    POWER = "power"
    CELL_SIZE = "cell-size"
    CLUSTER_MULTIPLIER = "cluster-multiplier"
    DELTA = "delta"


@dataclass(frozen=True)
class PowerQuery:
    """Effect size, test level and target power, with one quantity left unknown."""

    delta: float = None
    alpha: float = 0.05
    target_power: float = 0.8
    solve_for: SolveFor = SolveFor.POWER

    def __post_init__(self):
        object.__setattr__(self, "solve_for", SolveFor(self.solve_for))
        _check_alpha(self.alpha)
        if self.solve_for is not SolveFor.POWER:
            _check_power(self.target_power, self.alpha)
        if self.solve_for is not SolveFor.DELTA:
            if self.delta is None or not abs(self.delta) > 0:
                raise ValidationError("delta must be nonzero")


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


def _check_power(power, alpha):
    if not 0.0 < power < 1.0:
        raise ValidationError(f"power must lie in (0, 1), got {power}")
    if power <= alpha / 2:
        raise ValidationError(f"target power {power} must exceed alpha/2 = {alpha / 2}")


def z_sum(alpha, power):
    """``z_{1 - alpha/2} + z_{power}``."""
    return norm_ppf(1.0 - alpha / 2.0) + norm_ppf(power)


def power_for(variance, delta, alpha=0.05):
    """Power of the two-sided level-``alpha`` test for an effect ``delta``."""
    _check_alpha(alpha)
    if not variance > 0:
        raise ValidationError(f"variance must be > 0, got {variance}")
    if math.isinf(variance):
        return norm_cdf(-norm_ppf(1.0 - alpha / 2.0))
    return norm_cdf(abs(delta) / math.sqrt(variance) - norm_ppf(1.0 - alpha / 2.0))


def detectable_delta(variance, alpha=0.05, target_power=0.8):
    """Smallest effect detected with ``target_power`` at the given estimator variance."""
    _check_alpha(alpha)
    _check_power(target_power, alpha)
    if not variance > 0:
        raise ValidationError(f"variance must be > 0, got {variance}")
    return math.sqrt(variance) * z_sum(alpha, target_power)


@dataclass(frozen=True)
class SizeResult:
    """Minimal integer answer with achieved power at it and at one less."""

    value: int
    power: float
    power_below: float   # nan when value is 1
    variance: float


def _variance_at_m(d, m, corr, pi_z, q):
    return effect_variance(d, cell_plan(d, m, pi_z), corr, q).value


def variance_floor(d, corr, q):
    """Limit of the estimator variance as the cell size grows."""
    if q.estimand in (Estimand.CLUSTER, Estimand.CLUSTER_MARGINAL):
        return v_lcrt_limit(d, corr)
    return 0.0


def required_cell_size(d: TrialDesign, corr, pi_z, q: EffectQuery, delta, alpha=0.05,
                       target_power=0.8, m_max=DEFAULT_M_MAX) -> SizeResult:
    """Smallest equal cell size reaching the target power.

    Variances decrease monotonically in the cell size, so the search doubles
    until the target is reached and then bisects.
    """
    PowerQuery(delta, alpha, target_power, SolveFor.CELL_SIZE)
    if m_max < 1:
        raise ValidationError(f"m_max must be >= 1, got {m_max}")

    def pw(m):
        return power_for(_variance_at_m(d, m, corr, pi_z, q), delta, alpha)

    def infeasible():
        floor = variance_floor(d, corr, q)
        limit = power_for(floor, delta, alpha) if floor > 0 else 1.0
        return InfeasibleError(
            f"infeasible: no cell size up to {m_max} reaches power {target_power:g} "
            f"(variance floor as m grows is {floor:.6g}, limiting power {limit:.4f})",
            variance_floor=floor)

    lo, hi = 0, 1
    while pw(hi) < target_power:
        if hi >= m_max:
            raise infeasible()
        lo, hi = hi, min(2 * hi, m_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pw(mid) >= target_power:
            hi = mid
        else:
            lo = mid
    return SizeResult(hi, pw(hi), pw(hi - 1) if hi > 1 else math.nan,
                      _variance_at_m(d, hi, corr, pi_z, q))


def required_cluster_multiplier(d: TrialDesign, m, corr, pi_z, q: EffectQuery, delta,
                                alpha=0.05, target_power=0.8) -> SizeResult:
    """Number of copies of the design (clusters per sequence) reaching the target power.

    Every variance scales as the reciprocal of the number of copies, so the
    answer is ``ceil(var_1 * ((z_{1-alpha/2} + z_power) / delta)^2)``.
    """
    PowerQuery(delta, alpha, target_power, SolveFor.CLUSTER_MULTIPLIER)
    plan = cell_plan(d, m, pi_z)
    var1 = effect_variance(d, plan, corr, q).value
    k = max(1, math.ceil(var1 * (z_sum(alpha, target_power) / delta) ** 2))
    # absorb rounding at the boundary so the answer is minimal under power_for
    while k > 1 and power_for(var1 / (k - 1), delta, alpha) >= target_power:
        k -= 1
    while power_for(var1 / k, delta, alpha) < target_power:
        k += 1
    return SizeResult(k, power_for(var1 / k, delta, alpha),
                      power_for(var1 / (k - 1), delta, alpha) if k > 1 else math.nan,
                      var1 / k)

