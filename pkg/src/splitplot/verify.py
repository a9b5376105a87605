"""Verification suite: closed forms against the dense GLS oracle, and Monte Carlo.

:func:`run_verification` returns a :class:`VerificationReport` with one
:class:`CheckResult` per property. Published-table reproduction is reported
alongside but does not gate the overall verdict: it compares against
printed, rounded values rather than against an independent computation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import oracle, variance
from .correlation import CorrelationStructure, coefficients, patterned_matrix
from .design import TrialDesign, cell_plan, shares, stepped_wedge, summarize
from .effects import TABLE_ROWS, Estimand, Model, Parametrisation
from .power import power_for, required_cell_size, required_cluster_multiplier
from .variance import EffectQuery, effect_variance

ORACLE_RTOL = 1e-8
DUAL_PATH_RTOL = 1e-10
IDENTITY_RTOL = 1e-12
MC_RTOL = 0.10

ICC_PAIRS = ((0.0, 0.0), (0.2, 0.2), (0.24, 0.192))
SHARES_SCENARIOS = {"exchangeable": (0.2, 0.2), "block-exchangeable": (0.24, 0.192)}
#: printed required cell sizes, rows in TABLE_ROWS order
PUBLISHED_TABLES = {
    0.35: {"exchangeable": (6, 3, 6, 4, 2), "block-exchangeable": (7, 3, 5, 5, 2)},
    0.2: {"exchangeable": (21, 11, 21, 21, 11), "block-exchangeable": (71, 11, 21, 61, 11)},
}
KNOWN_DISCREPANCIES = {
    (0.35, "block-exchangeable", Model.WITH_INTERACTION, Estimand.INTERACTION):
        "computed 6 (power at 5 is below 0.80), printed 5",
}

ESTIMANDS = {
    Model.WITH_INTERACTION: (Estimand.CLUSTER, Estimand.CLUSTER_MARGINAL,
                             Estimand.INDIVIDUAL, Estimand.INTERACTION),
    Model.NO_INTERACTION: (Estimand.CLUSTER, Estimand.INDIVIDUAL),
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: worst {self.worst:.3e} "
                f"(tolerance {self.tolerance:.0e}){' - ' + self.detail if self.detail else ''}")


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failing(self):
        return [c.name for c in self.checks if not c.passed]

    def text(self):
        lines = [c.line() for c in self.checks]
        if self.notes:
            lines.append("")
            lines += self.notes
        lines.append("")
        lines.append("overall: " + ("PASS" if self.passed else
                                    "FAIL (" + ", ".join(self.failing()) + ")"))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Config:
    design: TrialDesign
    plan: object
    corr: CorrelationStructure

    def describe(self):
        m = self.plan.m
        sizes = f"m={m}" if m is not None else "variable m"
        return (f"n={self.design.n_clusters} T={self.design.periods} {sizes} "
                f"pi_z={self.plan.pi_z} wpicc={self.corr.wpicc} bpicc={self.corr.bpicc}")


def _random_design(rng, n, T):
    """Random 0/1 design with both arms present and the cluster effect estimable."""
    while True:
        X = rng.integers(0, 2, size=(n, T))
        if X.min() == X.max():
            continue
        # identical rows would confound treatment with period
        if np.all(X == X[0]):
            continue
        return TrialDesign.from_matrix(X)


def random_configs(rng, count, integral=True):
    """Random configurations: n <= 8, T <= 5, cell sizes <= 6, both size regimes.

    With ``integral`` every ``pi_z * m_ij`` is whole so the individual-level
    model can be built; otherwise sizes are drawn freely from 1..6.
    """
    out = []
    for k in range(count):
        n = int(rng.integers(2, 9))
        T = int(rng.integers(1, 6))
        d = _random_design(rng, n, T)
        pi_z = float(rng.choice([0.2, 0.5]))
        if integral:
            choices = [5] if pi_z == 0.2 else [2, 4, 6]
        else:
            choices = list(range(1, 7))
        if k % 2 == 0:
            sizes = int(rng.choice(choices))
        else:
            sizes = rng.choice(choices, size=(n, T))
            if pi_z == 0.5 or not integral:
                # make sure the variable branch really varies
                sizes[0, 0] = choices[0]
                sizes[-1, -1] = choices[-1]
        wp, bp = ICC_PAIRS[int(rng.integers(len(ICC_PAIRS)))]
        corr = CorrelationStructure(float(rng.choice([1.0, 2.5])), wp, bp)
        out.append(Config(d, cell_plan(d, sizes, pi_z), corr))
    return out


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def oracle_variances(cfg, method="full"):
    """All estimand variances for a configuration from the oracle, keyed (model, estimand)."""
    fn = oracle.full_gls if method == "full" else oracle.collapsed_gls
    out = {}
    for model, estimands in ESTIMANDS.items():
        cov = fn(cfg.design, cfg.plan, cfg.corr, model, Parametrisation.RAW)
        for e in estimands:
            out[model, e] = cov.estimand_variance(e)
    return out


def closed_form_variances(cfg):
    out = {}
    for model, estimands in ESTIMANDS.items():
        for e in estimands:
            out[model, e] = effect_variance(cfg.design, cfg.plan, cfg.corr,
                                            EffectQuery(e, model)).value
    return out


def check_closed_form_vs_oracle(configs, method="full", name=None):
    worst, where = 0.0, ""
    for cfg in configs:
        ref = oracle_variances(cfg, method)
        got = closed_form_variances(cfg)
        for key, v in ref.items():
            err = _rel(got[key], v)
            if not err <= worst:
                worst, where = err, f"{key[0].value}/{key[1].value} at {cfg.describe()}"
    name = name or f"closed_form_vs_{method}_gls"
    return CheckResult(name, worst <= ORACLE_RTOL, worst, ORACLE_RTOL,
                       f"{len(configs)} configurations; worst at {where}")


def check_full_vs_collapsed(configs):
    worst, count = 0.0, 0
    for cfg in configs:
        if cfg.plan.is_uniform:
            continue
        count += 1
        for model in Model:
            for par in Parametrisation:
                f = oracle.full_gls(cfg.design, cfg.plan, cfg.corr, model, par).matrix
                c = oracle.collapsed_gls(cfg.design, cfg.plan, cfg.corr, model, par).matrix
                worst = max(worst, float(np.max(np.abs(f - c)) / np.max(np.abs(f))))
    return CheckResult("full_vs_collapsed_gls", worst <= DUAL_PATH_RTOL, worst,
                       DUAL_PATH_RTOL, f"{count} variable-size configurations")


def check_sherman_morrison(configs):
    worst = 0.0
    for cfg in configs:
        for i in range(cfg.design.n_clusters):
            cm = oracle.collapsed_matrices(cfg.plan.sizes[i], cfg.plan.pi_z, cfg.corr)
            dense = np.linalg.inv(cm.Sigma)
            worst = max(worst, float(np.max(np.abs(cm.Sigma_inverse() - dense))
                                     / np.max(np.abs(dense))))
    return CheckResult("sherman_morrison_vs_dense_inverse", worst <= DUAL_PATH_RTOL, worst,
                       DUAL_PATH_RTOL)


def check_coefficient_inverse(configs):
    worst = 0.0
    for cfg in configs:
        m = cfg.plan.m
        if m is None or m * cfg.design.periods > 200:
            continue
        k = coefficients(cfg.corr, m, cfg.design.periods)
        T = cfg.design.periods
        prod = patterned_matrix(k.a1, k.b1, k.c1, m, T) @ patterned_matrix(k.a2, k.b2, k.c2, m, T)
        worst = max(worst, float(np.max(np.abs(prod - np.eye(m * T)))))
    return CheckResult("patterned_inverse_coefficients", worst <= 1e-10, worst, 1e-10)


def check_identities(configs):
    """Analytic identities between the closed forms, all at 1e-12 relative."""
    worst, where = 0.0, ""

    def note(err, what):
        nonlocal worst, where
        if err > worst:
            worst, where = err, what

    for cfg in configs:
        d, plan, corr = cfg.design, cfg.plan, cfg.corr
        px = summarize(d).pi_x
        v = closed_form_variances(cfg)
        vi_int = v[Model.WITH_INTERACTION, Estimand.INDIVIDUAL]
        vi_no = v[Model.NO_INTERACTION, Estimand.INDIVIDUAL]
        vic = v[Model.WITH_INTERACTION, Estimand.INTERACTION]
        vc = v[Model.WITH_INTERACTION, Estimand.CLUSTER]
        vcm = v[Model.WITH_INTERACTION, Estimand.CLUSTER_MARGINAL]
        if plan.is_uniform:
            note(_rel(vi_int, vi_no / (1 - px)), "var_I interaction ratio")
            note(_rel(vi_int, px * vic), "var_I = pi_x var_IC")
        note(_rel(vc - vcm, plan.pi_z ** 2 * vic), "conditional minus marginal")
        # bpicc perturbation must leave the individual-level variances untouched
        other = CorrelationStructure(corr.sigma2_total, corr.wpicc, corr.bpicc * 0.5)
        pert = closed_form_variances(Config(d, plan, other))
        for key in ((Model.WITH_INTERACTION, Estimand.INDIVIDUAL),
                    (Model.WITH_INTERACTION, Estimand.INTERACTION),
                    (Model.NO_INTERACTION, Estimand.INDIVIDUAL)):
            if pert[key] != v[key]:
                note(math.inf, "bpicc perturbation changed " + key[1].value)
        if plan.is_uniform:
            # variable-size formulas evaluated on the same equal sizes
            vv = variance._variable_size_variances(plan, corr)
            eq = variance._equal_size_variances(summarize(d), plan.m, corr, plan.pi_z)
            for key in vv:
                note(_rel(vv[key], eq[key]), f"variable-size reduction {key}")
            note(_rel(variance.v_lcrt_variable(d, plan.sizes, corr),
                      variance.v_lcrt(d, plan.m, corr)), "V_LCRT cell-mean GLS reduction")
    return CheckResult("analytic_identities", worst <= IDENTITY_RTOL, worst, IDENTITY_RTOL,
                       f"worst: {where}" if where else "")


def check_lcrt_spot():
    d = stepped_wedge(3)
    v = variance.v_lcrt(d, 1, CorrelationStructure(1.0, 0.0, 0.0))
    return CheckResult("v_lcrt_spot_sw3", abs(v - 2.0) <= 1e-12, abs(v - 2.0), 1e-12,
                       f"V_LCRT = {v!r}")


def multiplier_loop(d, m, corr, pi_z, q, delta, alpha=0.05, target=0.8, k_max=10_000):
    """Smallest replication factor by explicit replication of the design."""
    for k in range(1, k_max + 1):
        dk = d.replicate(k)
        v = effect_variance(dk, cell_plan(dk, m, pi_z), corr, q).value
        if power_for(v, delta, alpha) >= target:
            return k
    raise RuntimeError("replication loop did not terminate")


def check_multiplier(rng, count=3):
    worst = 0.0
    details = []
    for _ in range(count):
        T = int(rng.integers(3, 8))
        d = stepped_wedge(T)
        m = int(rng.integers(2, 20))
        wp = float(rng.choice([0.05, 0.1, 0.24]))
        corr = CorrelationStructure(1.0, wp, 0.8 * wp)
        q = EffectQuery(rng.choice([e.value for e in (Estimand.CLUSTER, Estimand.INDIVIDUAL,
                                                      Estimand.INTERACTION)]),
                        Model.WITH_INTERACTION)
        delta = float(rng.choice([0.2, 0.3, 0.5]))
        got = required_cluster_multiplier(d, m, corr, 0.5, q, delta).value
        ref = multiplier_loop(d, m, corr, 0.5, q, delta)
        worst = max(worst, abs(got - ref))
        details.append(f"{got}/{ref}")
    return CheckResult("cluster_multiplier_vs_replication", worst == 0, float(worst), 0.0,
                       "formula/loop " + ", ".join(details))


MC_DESIGN = dict(T=4, clusters=3, m=6, pi_z=0.5, wpicc=0.24, bpicc=0.192)


def monte_carlo_check(replicates=2000, seed=20240101):
    """Empirical GLS estimator covariance against the analytic covariance."""
    p = MC_DESIGN
    d = stepped_wedge(p["T"], p["clusters"])
    plan = cell_plan(d, p["m"], p["pi_z"])
    corr = CorrelationStructure(1.0, p["wpicc"], p["bpicc"])
    effects = oracle.TrueEffects(0.3, 0.2, -0.1, tuple(0.1 * j for j in range(p["T"])))
    emp = oracle.empirical_estimator_cov(d, plan, corr, effects, replicates, seed)
    ref = oracle.full_gls(d, plan, corr)
    ratios = np.diag(emp.matrix) / np.diag(ref.matrix)
    worst = float(np.max(np.abs(ratios - 1)))
    unbiased = emp.unbiased(effects.vector(Model.WITH_INTERACTION, p["T"]))
    return CheckResult("monte_carlo_covariance", worst <= MC_RTOL and unbiased, worst, MC_RTOL,
                       f"{replicates} replicates, seed {seed}, means "
                       f"{'within' if unbiased else 'NOT within'} 4 SE of truth")


def shares_table(delta, alpha=0.05, target=0.8, pi_z=0.5, scenarios=None):
    """Required cell sizes for SharES: {scenario: [SizeResult per TABLE_ROWS]}."""
    d = shares()
    out = {}
    for name, (wp, bp) in (scenarios or SHARES_SCENARIOS).items():
        corr = CorrelationStructure(1.0, wp, bp)
        out[name] = [required_cell_size(d, corr, pi_z, EffectQuery(e, mdl), delta, alpha, target)
                     for mdl, e in TABLE_ROWS]
    return out


def grid_cell_size(d, corr, pi_z, q, delta, step, alpha=0.05, target=0.8, m_max=10**5):
    """First m on the grid 1, 1 + step, ... reaching the target power."""
    m = 1
    while power_for(effect_variance(d, cell_plan(d, m, pi_z), corr, q).value,
                    delta, alpha) < target:
        m += step
        if m > m_max:
            raise RuntimeError("grid search did not terminate")
    return m


def table_notes(tolerance=1):
    """Comparison lines for the published SharES tables (informational)."""
    lines = ["published SharES tables (pi_z = 0.5 assumed; informational, not gating):"]
    for delta, published in PUBLISHED_TABLES.items():
        computed = shares_table(delta)
        for scen, values in published.items():
            got = [r.value for r in computed[scen]]
            ok = all(abs(g - p) <= tolerance for g, p in zip(got, values))
            lines.append(f"  delta={delta} {scen}: computed {tuple(got)} printed {values} "
                         f"-> {'within' if ok else 'OUTSIDE'} +/-{tolerance}")
            for (mdl, e), g, p in zip(TABLE_ROWS, got, values):
                msg = KNOWN_DISCREPANCIES.get((delta, scen, mdl, e))
                if msg:
                    lines.append(f"    known discrepancy {mdl.value}/{e.value}: {msg}")
            if not ok:
                wp, bp = SHARES_SCENARIOS[scen]
                corr = CorrelationStructure(1.0, wp, bp)
                grid = tuple(grid_cell_size(shares(), corr, 0.5, EffectQuery(e, mdl), delta, 10)
                             for mdl, e in TABLE_ROWS)
                lines.append(f"    search over m = 1, 11, 21, ... gives {grid}")
    return lines


def run_verification(seed=12345, replicates=2000, sweep=200, tables=True):
    rng = np.random.default_rng(seed)
    integral = random_configs(rng, sweep, integral=True)
    free = random_configs(rng, sweep, integral=False)
    report = VerificationReport()
    report.checks += [
        check_closed_form_vs_oracle(integral, "full"),
        check_closed_form_vs_oracle(free, "collapsed"),
        check_full_vs_collapsed(integral),
        check_sherman_morrison(free),
        check_coefficient_inverse(integral + free),
        check_identities(integral + free),
        check_lcrt_spot(),
        check_multiplier(rng),
    ]
    if replicates:
        report.checks.append(monte_carlo_check(replicates, seed))
    if tables:
        report.notes += table_notes()
    return report
