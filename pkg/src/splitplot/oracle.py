"""Brute-force reference computations.

Everything here is assembled from first principles with dense matrices:

* :func:`full_gls` builds the individual-level design matrix and
  block-exchangeable covariance of every cluster and inverts the summed GLS
  information matrix.
* :func:`collapsed_gls` works on the means of each (cluster, period,
  individual-arm) group, inverting each cluster's covariance with the
  Sherman-Morrison formula.
* :func:`lcrt_gls` is the single-intervention longitudinal cluster trial on
  cluster-period means.
* :func:`simulate_trial` and :func:`empirical_estimator_cov` draw data from
  the random-effects model and refit the GLS estimator, for Monte-Carlo
  checks of the analytic covariances.

Fixed effects are labelled ``individual``, ``interaction``, ``cluster`` and
``period_1`` ... ``period_T``. Under the centred parametrisation the
``cluster`` column estimates the marginal cluster-level effect.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .correlation import CorrelationStructure
from .design import CellPlan, TrialDesign
from .effects import Estimand, Model, Parametrisation
from .errors import InestimableError, ValidationError

DEFAULT_MAX_OBS = 20_000
CONDITION_WARNING = 1e12


@dataclass(frozen=True)
class GLSCovariance:
    """Covariance matrix of GLS fixed-effect estimators with effect labels."""

    labels: Tuple[str, ...]
    matrix: np.ndarray
    parametrisation: Parametrisation = Parametrisation.RAW
    pi_z: Optional[float] = None

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no fixed effect {label!r}; have {self.labels}") from None

    def var(self, label):
        i = self.index(label)
        return float(self.matrix[i, i])

    def cov(self, a, b):
        return float(self.matrix[self.index(a), self.index(b)])

    def contrast(self, weights):
        """Variance of ``sum(w * beta)`` for a mapping label -> weight."""
        w = np.zeros(len(self.labels))
        for label, value in weights.items():
            w[self.index(label)] = value
        return float(w @ self.matrix @ w)

    def estimand_variance(self, estimand):
        """Variance of the estimator of one of the four named estimands."""
        estimand = Estimand.parse(estimand)
        if estimand in (Estimand.INDIVIDUAL, Estimand.INTERACTION):
            return self.var(estimand.value)
        if "interaction" not in self.labels:
            return self.var("cluster")
        pz = self.pi_z
        # beta_c = marginal - pi_z * beta_ic
        want_marginal = estimand is Estimand.CLUSTER_MARGINAL
        have_marginal = self.parametrisation is Parametrisation.CENTRED
        if want_marginal == have_marginal:
            return self.var("cluster")
        sign = 1.0 if want_marginal else -1.0
        return self.contrast({"cluster": 1.0, "interaction": sign * pz})


def _effect_labels(model, T):
    labels = ["individual"]
    if model is Model.WITH_INTERACTION:
        labels.append("interaction")
    labels.append("cluster")
    return tuple(labels) + tuple(f"period_{j + 1}" for j in range(T))


def _solve_information(info, labels):
    """Invert a GLS information matrix, naming the null direction if singular."""
    diag = np.diag(info).copy()
    zero = diag <= 0
    if np.any(zero):
        direction = {labels[i]: 1.0 for i in np.flatnonzero(zero)}
        raise InestimableError(
            "inestimable effect: no information on " + ", ".join(direction), direction)
    scale = 1.0 / np.sqrt(diag)
    corr = info * scale[:, None] * scale[None, :]
    evals, evecs = np.linalg.eigh(corr)
    if evals[0] < 1e-10 * evals[-1]:
        v = evecs[:, 0] * scale
        v /= np.max(np.abs(v))
        direction = {labels[i]: round(float(v[i]), 6)
                     for i in range(len(labels)) if abs(v[i]) > 1e-6}
        desc = " + ".join(f"{w:g}*{k}" for k, w in direction.items())
        raise InestimableError(f"inestimable effect: information is singular along {desc}",
                               direction)
    cond = evals[-1] / evals[0]
    if cond > CONDITION_WARNING:
        warnings.warn(f"GLS information matrix is ill-conditioned (condition {cond:.3g})",
                      RuntimeWarning, stacklevel=3)
    factor = linalg.cho_factor(corr)
    inv = linalg.cho_solve(factor, np.eye(len(labels)))
    inv = inv * scale[:, None] * scale[None, :]
    return (inv + inv.T) / 2


@dataclass
class FullModelMatrices:
    """Per-cluster individual-level design matrices and covariances."""

    labels: Tuple[str, ...]
    D: list
    Sigma: list
    parametrisation: Parametrisation
    pi_z: float

    def information(self):
        info = np.zeros((len(self.labels),) * 2)
        for D_i, S_i in zip(self.D, self.Sigma):
            info += D_i.T @ linalg.cho_solve(linalg.cho_factor(S_i), D_i)
        return info


def _cluster_individuals(x_row, sizes_row, pi_z):
    """Per-observation (x, z, period) for one cluster, control individuals first in each cell."""
    period, z, x = [], [], []
    for j, m in enumerate(sizes_row):
        k = int(round(pi_z * m))
        period += [j] * m
        z += [0.0] * (m - k) + [1.0] * k
        x += [x_row[j]] * m
    return np.array(x), np.array(z), np.array(period, dtype=int)


def _require_integral(plan):
    if not plan.integral_split:
        raise ValidationError(
            "block randomisation needs pi_z * m_ij to be an integer in every cell")


def full_model_matrices(d, plan, corr, model=Model.WITH_INTERACTION,
                        parametrisation=Parametrisation.RAW, max_obs=DEFAULT_MAX_OBS):
    model = Model.parse(model)
    parametrisation = Parametrisation.parse(parametrisation)
    _require_integral(plan)
    if plan.n_obs > max_obs:
        raise ValidationError(f"{plan.n_obs} observations exceeds the dense cap of {max_obs}")
    T = d.periods
    labels = _effect_labels(model, T)
    X = d.matrix
    Ds, Ss = [], []
    for i in range(X.shape[0]):
        x, z, period = _cluster_individuals(X[i], plan.sizes[i], plan.pi_z)
        Ds.append(model_matrix(x, z, period, model, T, plan.pi_z, parametrisation))
        Ss.append(corr.cluster_covariance(plan.sizes[i]))
    return FullModelMatrices(labels, Ds, Ss, parametrisation, plan.pi_z)


def model_matrix(x, z, period, model, T, pi_z, parametrisation=Parametrisation.RAW):
    """Fixed-effect design matrix for observations with the given covariates."""
    zc = z - pi_z if parametrisation is Parametrisation.CENTRED else z
    cols = [zc]
    if model is Model.WITH_INTERACTION:
        cols.append(x * zc)
    cols.append(x)
    return np.column_stack(cols + [np.eye(T)[period]])


def full_gls(d: TrialDesign, plan: CellPlan, corr: CorrelationStructure,
             model=Model.WITH_INTERACTION, parametrisation=Parametrisation.RAW,
             max_obs=DEFAULT_MAX_OBS) -> GLSCovariance:
    """GLS covariance of all fixed effects from the individual-level model.

    Requires ``pi_z * m_ij`` to be whole in every cell so that individuals can
    be block-randomised exactly.
    """
    mats = full_model_matrices(d, plan, corr, model, parametrisation, max_obs)
    cov = _solve_information(mats.information(), mats.labels)
    return GLSCovariance(mats.labels, cov, mats.parametrisation, plan.pi_z)


@dataclass
class CollapsedMatrices:
    """Cell-mean covariance pieces for one cluster.

    The covariance of the ``2T`` arm means is ``A + sigma_c2 * 1 1^T`` where
    ``A`` is block diagonal with 2x2 blocks ``A_blocks[j]``.
    """

    A_blocks: np.ndarray      # (T, 2, 2)
    det: np.ndarray           # (T,) determinants of the blocks
    x: np.ndarray             # (T, 2) residual variances of the control / treated arm means
    q: np.ndarray             # (2T,) A^{-1} 1
    cell_var: np.ndarray      # (T,) sigma_ct2 + sigma_e2 / m_ij
    sigma_c2: float

    @property
    def A(self):
        return linalg.block_diag(*self.A_blocks)

    @property
    def Sigma(self):
        return self.A + self.sigma_c2

    def A_inverse(self):
        blocks = []
        for blk, det in zip(self.A_blocks, self.det):
            blocks.append(np.array([[blk[1, 1], -blk[0, 1]], [-blk[1, 0], blk[0, 0]]]) / det)
        return linalg.block_diag(*blocks)

    def Sigma_inverse(self):
        """Sherman-Morrison inverse of the cell-mean covariance."""
        q = self.q
        return self.A_inverse() - self.sigma_c2 * np.outer(q, q) / (1.0 + self.sigma_c2 * q.sum())


def collapsed_matrices(sizes_row, pi_z, corr: CorrelationStructure) -> CollapsedMatrices:
    m = np.asarray(sizes_row, dtype=float)
    s_e, s_ct, s_c = corr.sigma_e2, corr.sigma_ct2, corr.sigma_c2
    x1 = s_e / ((1.0 - pi_z) * m)
    x2 = s_e / (pi_z * m)
    T = m.size
    blocks = np.empty((T, 2, 2))
    blocks[:, 0, 0] = s_ct + x1
    blocks[:, 0, 1] = blocks[:, 1, 0] = s_ct
    blocks[:, 1, 1] = s_ct + x2
    det = s_ct * (x1 + x2) + x1 * x2
    q = np.column_stack([x2 / det, x1 / det]).ravel()
    return CollapsedMatrices(blocks, det, np.column_stack([x1, x2]), q,
                             s_ct + s_e / m, s_c)


def collapsed_gls(d: TrialDesign, plan: CellPlan, corr: CorrelationStructure,
                  model=Model.WITH_INTERACTION, parametrisation=Parametrisation.RAW,
                  inverse="sherman-morrison") -> GLSCovariance:
    """GLS covariance computed from the ``2T`` arm means of each cluster.

    ``inverse`` selects ``"sherman-morrison"`` or ``"dense"`` inversion of the
    per-cluster mean covariance.
    """
    model = Model.parse(model)
    parametrisation = Parametrisation.parse(parametrisation)
    T = d.periods
    labels = _effect_labels(model, T)
    X = d.matrix
    period = np.repeat(np.arange(T), 2)
    z = np.tile([0.0, 1.0], T)
    info = np.zeros((len(labels),) * 2)
    for i in range(X.shape[0]):
        cm = collapsed_matrices(plan.sizes[i], plan.pi_z, corr)
        if inverse == "dense":
            S_inv = np.linalg.inv(cm.Sigma)
        elif inverse == "sherman-morrison":
            S_inv = cm.Sigma_inverse()
        else:
            raise ValidationError(f"unknown inverse method {inverse!r}")
        D_i = model_matrix(X[i][period], z, period, model, T, plan.pi_z, parametrisation)
        info += D_i.T @ S_inv @ D_i
    return GLSCovariance(labels, _solve_information(info, labels), parametrisation, plan.pi_z)


def lcrt_gls(d: TrialDesign, sizes, corr: CorrelationStructure) -> GLSCovariance:
    """Single-intervention trial of the same design, fitted on cluster-period means."""
    X = d.matrix
    n, T = X.shape
    sizes = np.broadcast_to(np.asarray(sizes, dtype=float), X.shape)
    labels = ("cluster",) + tuple(f"period_{j + 1}" for j in range(T))
    info = np.zeros((T + 1, T + 1))
    for i in range(n):
        S_i = np.full((T, T), corr.sigma_a2)
        S_i[np.diag_indices(T)] += corr.sigma_b2 + corr.sigma_e2 / sizes[i]
        D_i = np.column_stack([X[i], np.eye(T)])
        info += D_i.T @ linalg.cho_solve(linalg.cho_factor(S_i), D_i)
    return GLSCovariance(labels, _solve_information(info, labels))


@dataclass(frozen=True)
class TrueEffects:
    """Fixed effects used to generate data (raw 0/1 coding of both treatments)."""

    beta_c: float = 0.0
    beta_i: float = 0.0
    beta_ic: float = 0.0
    period: Tuple[float, ...] = ()

    def vector(self, model, T):
        per = tuple(self.period) or (0.0,) * T
        if len(per) != T:
            raise ValidationError(f"need {T} period effects, got {len(per)}")
        head = [self.beta_i]
        if Model.parse(model) is Model.WITH_INTERACTION:
            head.append(self.beta_ic)
        return np.array(head + [self.beta_c] + list(per))


@dataclass
class TrialDataset:
    """One simulated trial, one entry per individual, ordered by cluster and period."""

    cluster: np.ndarray
    period: np.ndarray
    individual: np.ndarray
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray

    COLUMNS = ("cluster", "period", "individual", "x", "z", "y")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in zip(self.cluster + 1, self.period + 1, self.individual + 1,
                           self.x.astype(int), self.z.astype(int), self.y):
                w.writerow([*row[:5], repr(float(row[5]))])


def replicate_rng(seed, replicate=0):
    """PCG64 stream for one replicate, independent of the order replicates run in."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(replicate)])))


def simulate_trial(d: TrialDesign, plan: CellPlan, corr: CorrelationStructure,
                   effects: TrueEffects, seed, replicate=0) -> TrialDataset:
    """Draw one trial from the random-effects model.

    Exactly ``pi_z * m_ij`` individuals in each cell receive the
    individual-level intervention, chosen at random.
    """
    _require_integral(plan)
    rng = replicate_rng(seed, replicate)
    X = d.matrix
    n, T = X.shape
    beta = TrueEffects(effects.beta_c, effects.beta_i, effects.beta_ic,
                       tuple(effects.period) or (0.0,) * T)
    if len(beta.period) != T:
        raise ValidationError(f"need {T} period effects, got {len(beta.period)}")
    sizes = plan.sizes
    a = rng.normal(0.0, np.sqrt(corr.sigma_a2), size=n)
    b = rng.normal(0.0, np.sqrt(corr.sigma_b2), size=(n, T))
    cols = {k: [] for k in TrialDataset.COLUMNS}
    for i in range(n):
        for j in range(T):
            m = int(sizes[i, j])
            k = int(round(plan.pi_z * m))
            z = np.zeros(m)
            z[rng.choice(m, size=k, replace=False)] = 1.0
            x = X[i, j]
            eps = rng.normal(0.0, np.sqrt(corr.sigma_e2), size=m)
            y = (beta.beta_c * x + beta.beta_i * z + beta.beta_ic * x * z
                 + beta.period[j] + a[i] + b[i, j] + eps)
            cols["cluster"].append(np.full(m, i))
            cols["period"].append(np.full(m, j))
            cols["individual"].append(np.arange(m))
            cols["x"].append(np.full(m, x))
            cols["z"].append(z)
            cols["y"].append(y)
    out = {k: np.concatenate(v) for k, v in cols.items()}
    for k in ("cluster", "period", "individual"):
        out[k] = out[k].astype(int)
    return TrialDataset(**out)


@dataclass(frozen=True)
class EmpiricalCovariance:
    labels: Tuple[str, ...]
    matrix: np.ndarray
    mean: np.ndarray
    replicates: int

    @property
    def standard_errors(self):
        """Monte-Carlo standard errors of the mean estimates."""
        return np.sqrt(np.diag(self.matrix) / self.replicates)

    def unbiased(self, truth, k=4.0):
        """True when every mean estimate lies within ``k`` standard errors of ``truth``."""
        return bool(np.all(np.abs(self.mean - truth) <= k * self.standard_errors))


def fit_gls(data: TrialDataset, d: TrialDesign, plan: CellPlan, corr: CorrelationStructure,
            model=Model.WITH_INTERACTION):
    """GLS estimates of the fixed effects with the covariance known."""
    model = Model.parse(model)
    T = d.periods
    n = d.n_clusters
    p = len(_effect_labels(model, T))
    info = np.zeros((p, p))
    score = np.zeros(p)
    for i in range(n):
        rows = data.cluster == i
        D_i = model_matrix(data.x[rows], data.z[rows], data.period[rows], model, T, plan.pi_z)
        W = linalg.cho_solve(linalg.cho_factor(corr.cluster_covariance(plan.sizes[i])),
                             np.column_stack([D_i, data.y[rows]]))
        info += D_i.T @ W[:, :p]
        score += D_i.T @ W[:, p]
    return np.linalg.solve(info, score)


def empirical_estimator_cov(d: TrialDesign, plan: CellPlan, corr: CorrelationStructure,
                            effects: TrueEffects, replicates, seed,
                            model=Model.WITH_INTERACTION) -> EmpiricalCovariance:
    """Sample covariance of GLS estimates over seeded simulated replicates.

    Replicate ``r`` uses the random stream ``(seed, r)`` so the result does
    not depend on evaluation order.
    """
    if replicates < 2:
        raise ValidationError("need at least 2 replicates")
    model = Model.parse(model)
    labels = _effect_labels(model, d.periods)
    factors = [linalg.cho_factor(corr.cluster_covariance(plan.sizes[i]))
               for i in range(d.n_clusters)]
    info = None
    est = np.empty((replicates, len(labels)))
    for r in range(replicates):
        data = simulate_trial(d, plan, corr, effects, seed, r)
        score = np.zeros(len(labels))
        acc = np.zeros((len(labels),) * 2) if info is None else None
        for i, fac in enumerate(factors):
            rows = data.cluster == i
            D_i = model_matrix(data.x[rows], data.z[rows], data.period[rows], model,
                               d.periods, plan.pi_z)
            score += D_i.T @ linalg.cho_solve(fac, data.y[rows])
            if acc is not None:
                acc += D_i.T @ linalg.cho_solve(fac, D_i)
        if info is None:
            # identical for every replicate: permuting individuals within a
            # cell leaves the cluster covariance unchanged
            info = acc
        est[r] = np.linalg.solve(info, score)
    return EmpiricalCovariance(labels, np.cov(est, rowvar=False), est.mean(axis=0), replicates)
