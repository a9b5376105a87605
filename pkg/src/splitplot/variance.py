"""Closed-form variances of the treatment-effect estimators.

The cluster-level effect variance splits into the variance the same design
would have as a single-intervention longitudinal cluster randomised trial
(``v_lcrt``) plus an inflation term. The individual-level and interaction
variances depend only on the within-period ICC and on observation counts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .correlation import CorrelationStructure
from .design import CellPlan, TrialDesign, summarize
from .effects import Estimand, Model
from .errors import DegenerateDesignError, ValidationError

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class EffectQuery:
    """Which estimand, under which outcome model."""

    estimand: Estimand = Estimand.CLUSTER
    model: Model = Model.WITH_INTERACTION

    def __post_init__(self):
        estimand = Estimand.parse(self.estimand)
        model = Model.parse(self.model)
        if estimand is Estimand.INTERACTION and model is not Model.WITH_INTERACTION:
            raise ValidationError("the interaction effect needs the model with interaction")
        if model is Model.NO_INTERACTION and estimand is Estimand.CLUSTER_MARGINAL:
            # marginal and conditional cluster effects coincide without interaction
            estimand = Estimand.CLUSTER
        object.__setattr__(self, "estimand", estimand)
        object.__setattr__(self, "model", model)

    @property
    def label(self):
        return f"{self.model.value}/{self.estimand.value}"


@dataclass(frozen=True)
class VarianceResult:
    """Estimator variance split into a base term and an inflation term.

    For the conditional cluster effect under the interaction model the base
    is the single-intervention variance and the inflation is the price of
    estimating the cluster effect at individual-level control. For every
    other estimand the inflation is zero and the base is the whole variance.
    """

    value: float
    v_lcrt_part: float
    inflation_part: float
    formula_id: str


def _check_estimable(s):
    if not 0.0 < s.pi_x < 1.0:
        raise DegenerateDesignError(
            f"degenerate design: pi_x = {s.pi_x:g}, the cluster-level treatment needs "
            "both arms")


def v_lcrt(d: TrialDesign, m, corr: CorrelationStructure) -> float:
    """Cluster-treatment effect variance of the single-intervention trial, equal cell size ``m``.

    Closed form for the block-exchangeable structure, evaluated on the
    cluster-expanded design so that every cluster is its own sequence. Cell
    means of one cluster have exchangeable correlation
    ``r = m * bpicc / (1 + (m - 1) * wpicc)`` across periods; the
    ``r``-coefficient in the denominator is
    ``B^2 + S (T - 1) B - (T - 1) E - S C``.
    """
    if m < 1:
        raise ValidationError(f"cell size must be >= 1, got {m}")
    s = summarize(d)
    _check_estimable(s)
    n, T = s.n, s.T
    S = n
    B, C, E = s.B, s.C, s.E
    rho_ct, rho_c = corr.wpicc, corr.bpicc
    r = m * rho_c / (1.0 + (m - 1) * rho_ct)
    den = S * B - E + (B * B + S * (T - 1) * B - (T - 1) * E - S * C) * r
    num = S * S * (1.0 - r) * (1.0 + (T - 1) * r) * (1.0 + (m - 1) * rho_ct)
    if den <= DEGENERATE_TOL * max(1.0, S * B):
        raise DegenerateDesignError(
            "degenerate design: the cluster-level effect is confounded with period effects")
    return corr.sigma2_total / (n * m) * num / den


def v_lcrt_limit(d: TrialDesign, corr: CorrelationStructure) -> float:
    """Limit of :func:`v_lcrt` as the cell size grows without bound."""
    if corr.wpicc == 0.0:
        return 0.0
    s = summarize(d)
    _check_estimable(s)
    n, T = s.n, s.T
    S, B, C, E = n, s.B, s.C, s.E
    r = corr.bpicc / corr.wpicc
    den = S * B - E + (B * B + S * (T - 1) * B - (T - 1) * E - S * C) * r
    if den <= DEGENERATE_TOL * max(1.0, S * B):
        # 0/0 at r = 1 (e.g. exchangeable parallel designs): evaluate far out instead
        return v_lcrt(d, 1e9, corr)
    return corr.sigma2_total / n * S * S * (1.0 - r) * (1.0 + (T - 1) * r) * corr.wpicc / den


def v_lcrt_variable(d: TrialDesign, sizes, corr: CorrelationStructure) -> float:
    """Single-intervention variance with unequal cell sizes, by GLS on cell means."""
    s = summarize(d)
    _check_estimable(s)
    try:
        return oracle.lcrt_gls(d, sizes, corr).var("cluster")
    except oracle.InestimableError as exc:
        raise DegenerateDesignError(f"degenerate design: {exc}") from None


def _equal_size_variances(s, m, corr, pi_z):
    """Individual and interaction variances plus the cluster inflation, equal cell sizes."""
    base = (1.0 - corr.wpicc) * corr.sigma2_total / (s.n * m * s.T * pi_z * (1.0 - pi_z))
    return {
        (Model.WITH_INTERACTION, Estimand.INDIVIDUAL): base / (1.0 - s.pi_x),
        (Model.WITH_INTERACTION, Estimand.INTERACTION): base / (s.pi_x * (1.0 - s.pi_x)),
        (Model.NO_INTERACTION, Estimand.INDIVIDUAL): base,
        "inflation": pi_z * pi_z * base / (s.pi_x * (1.0 - s.pi_x)),
    }


def _variable_size_variances(plan, corr):
    s2e = (1.0 - corr.wpicc) * corr.sigma2_total
    pz = plan.pi_z
    n_obs, n1, n0 = plan.n_obs, plan.n_x1, plan.n_x0
    return {
        (Model.WITH_INTERACTION, Estimand.INDIVIDUAL): s2e / (pz * (1.0 - pz) * n0),
        (Model.WITH_INTERACTION, Estimand.INTERACTION):
            s2e * n_obs / (pz * (1.0 - pz) * n1 * n0),
        (Model.NO_INTERACTION, Estimand.INDIVIDUAL): s2e / (pz * (1.0 - pz) * n_obs),
        "inflation": s2e * pz * n_obs / ((1.0 - pz) * n1 * n0),
    }


def effect_variance(d: TrialDesign, plan: CellPlan, corr: CorrelationStructure,
                    q: EffectQuery, v_lcrt_source="gls") -> VarianceResult:
    """Variance of one treatment-effect estimator.

    Parameters
    ----------
    d, plan, corr
        Design, cell sizes with individual allocation, and outcome covariance.
    q : EffectQuery
        Target estimand and model.
    v_lcrt_source : {"gls", None} or callable
        How to obtain the single-intervention variance when cell sizes vary:
        ``"gls"`` fits the cell-mean GLS, a callable is called as
        ``f(d, sizes, corr)``, and None refuses. Ignored for equal cell sizes.

    Returns
    -------
    VarianceResult
    """
    if plan.sizes.shape != (d.n_clusters, d.periods):
        raise ValidationError(
            f"cell plan has shape {plan.sizes.shape}, design is "
            f"{(d.n_clusters, d.periods)}")
    s = summarize(d)
    _check_estimable(s)
    m = plan.m
    if m is not None:
        parts = _equal_size_variances(s, m, corr, plan.pi_z)
        regime = "equal-m"
    else:
        if plan.n_x1 == 0 or plan.n_x0 == 0:
            raise DegenerateDesignError("degenerate design: an arm has no observations")
        parts = _variable_size_variances(plan, corr)
        regime = "variable-m"
    key = (q.model, q.estimand)
    fid = f"{regime}/{q.model.value}/{q.estimand.value}"
    if key in parts:
        value = parts[key]
        return VarianceResult(value, value, 0.0, fid)
    # cluster-level estimands need the single-intervention variance
    if m is not None:
        lcrt = v_lcrt(d, m, corr)
    elif v_lcrt_source is None:
        raise ValidationError("V_LCRT unavailable for unequal cells: no v_lcrt_source given")
    elif v_lcrt_source == "gls":
        lcrt = v_lcrt_variable(d, plan.sizes, corr)
    elif callable(v_lcrt_source):
        lcrt = float(v_lcrt_source(d, plan.sizes, corr))
    else:
        raise ValidationError(f"unknown v_lcrt_source {v_lcrt_source!r}")
    if q.model is Model.WITH_INTERACTION and q.estimand is Estimand.CLUSTER:
        infl = parts["inflation"]
        return VarianceResult(lcrt + infl, lcrt, infl, fid)
    return VarianceResult(lcrt, lcrt, 0.0, fid)


def interaction_ratio_check(d: TrialDesign, plan: CellPlan, corr: CorrelationStructure):
    """Return ``(var_I interaction / var_I no interaction, var_I / var_IC)``.

    With equal cell sizes these are ``1 / (1 - pi_x)`` and ``pi_x``.
    """
    if not plan.is_uniform:
        raise ValidationError("interaction_ratio_check needs equal cell sizes")
    vi_int = effect_variance(d, plan, corr, EffectQuery(Estimand.INDIVIDUAL,
                                                        Model.WITH_INTERACTION)).value
    vi_no = effect_variance(d, plan, corr, EffectQuery(Estimand.INDIVIDUAL,
                                                       Model.NO_INTERACTION)).value
    vic = effect_variance(d, plan, corr, EffectQuery(Estimand.INTERACTION,
                                                     Model.WITH_INTERACTION)).value
    return vi_int / vi_no, vi_int / vic


CONTRAST_LABELS = ("individual", "cluster", "combined")


@dataclass(frozen=True)
class ContrastCovariance:
    """Joint covariance of the three contrasts against the double-control arm.

    Rows and columns are the individual-level effect, the conditional
    cluster-level effect, and the combined effect
    ``beta_c + beta_i + beta_ic``.
    """

    matrix: np.ndarray
    K_star: float
    labels: tuple = CONTRAST_LABELS

    def var(self, label):
        i = self.labels.index(label)
        return float(self.matrix[i, i])


def contrast_transform(pi_z):
    """Maps (individual, interaction, marginal cluster) estimates to the three contrasts."""
    return np.array([[1.0, 0.0, 0.0],
                     [0.0, -pi_z, 1.0],
                     [1.0, 1.0 - pi_z, 1.0]])


def contrast_covariance(d: TrialDesign, plan: CellPlan,
                        corr: CorrelationStructure) -> ContrastCovariance:
    if not plan.is_uniform:
        raise ValidationError("contrast_covariance needs equal cell sizes")
    s = summarize(d)
    _check_estimable(s)
    m, pz, px = plan.m, plan.pi_z, s.pi_x
    K = (1.0 - corr.wpicc) * corr.sigma2_total / (s.n * m * s.T * pz * (1.0 - pz))
    K_star = K / (px * (1.0 - px))
    base = np.array([[K_star * px, -K_star * px, 0.0],
                     [-K_star * px, K_star, 0.0],
                     [0.0, 0.0, v_lcrt(d, m, corr)]])
    L = contrast_transform(pz)
    cov = L @ base @ L.T
    return ContrastCovariance((cov + cov.T) / 2, K_star)
