"""Block-exchangeable outcome covariance and the scalar coefficients derived from it.

Observations in the same cluster and period have correlation ``wpicc``;
observations in the same cluster but different periods have correlation
``bpicc``. Equivalently the outcome carries a cluster random effect with
variance ``sigma_a2``, a cluster-period random effect with variance
``sigma_b2`` and an individual residual with variance ``sigma_e2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

#: slack allowed on the ICC inequalities, absorbs decimal round-trip noise
ICC_SLACK = 1e-12


@dataclass(frozen=True)
class CorrelationStructure:
    """Total variance plus within-period and between-period ICCs.

    Parameters
    ----------
    sigma2_total : float
        Variance of a single observation.
    wpicc : float
        Within-period intraclass correlation (same cluster, same period).
    bpicc : float
        Between-period intraclass correlation (same cluster, different periods).
    """

    sigma2_total: float = 1.0
    wpicc: float = 0.0
    bpicc: float = 0.0

    def __post_init__(self):
        s2, w, b = float(self.sigma2_total), float(self.wpicc), float(self.bpicc)
        if not np.isfinite(s2) or s2 <= 0:
            raise ValidationError(f"sigma2_total must be > 0, got {self.sigma2_total}")
        if not (np.isfinite(w) and np.isfinite(b)):
            raise ValidationError("ICCs must be finite")
        if b < -ICC_SLACK:
            raise ValidationError(f"violated 0 <= bpicc (bpicc={b})")
        if b > w + ICC_SLACK:
            raise ValidationError(f"violated bpicc <= wpicc (bpicc={b}, wpicc={w})")
        if w >= 1.0:
            raise ValidationError(f"violated wpicc < 1 (wpicc={w})")
        # snap values inside the slack band onto the boundary
        b = min(max(b, 0.0), max(w, 0.0))
        w = max(w, b)
        object.__setattr__(self, "sigma2_total", s2)
        object.__setattr__(self, "wpicc", w)
        object.__setattr__(self, "bpicc", b)

    @classmethod
    def exchangeable(cls, icc, sigma2_total=1.0):
        return cls(sigma2_total=sigma2_total, wpicc=icc, bpicc=icc)

    @classmethod
    def from_components(cls, sigma_a2, sigma_b2, sigma_e2):
        """Build from variance components (cluster, cluster-period, residual)."""
        if min(sigma_a2, sigma_b2, sigma_e2) < 0:
            raise ValidationError("variance components must be nonnegative")
        total = sigma_a2 + sigma_b2 + sigma_e2
        if total <= 0:
            raise ValidationError("total variance must be > 0")
        return cls(sigma2_total=total, wpicc=(sigma_a2 + sigma_b2) / total,
                   bpicc=sigma_a2 / total)

    def _split(self):
        # Quantise onto the ulp grid of sigma2_total: every difference below is
        # then exact and (sigma_a2 + sigma_b2) + sigma_e2 == sigma2_total.
        s = self.sigma2_total
        q = math.ulp(s)
        within = round(self.wpicc * s / q) * q
        cluster = min(round(self.bpicc * s / q) * q, within)
        return cluster, within - cluster, s - within

    @property
    def sigma_a2(self):
        return self._split()[0]

    @property
    def sigma_b2(self):
        return self._split()[1]

    @property
    def sigma_e2(self):
        return self._split()[2]

    # aliases used by the cell-mean formulation
    sigma_c2 = sigma_a2
    sigma_ct2 = sigma_b2

    def cluster_covariance(self, sizes):
        """Dense covariance of one cluster's observations, ordered period-major.

        ``sizes`` holds the number of observations in each period.
        """
        sizes = np.asarray(sizes, dtype=int)
        total = int(sizes.sum())
        period = np.repeat(np.arange(sizes.size), sizes)
        same_period = period[:, None] == period[None, :]
        cov = np.full((total, total), self.sigma_a2)
        cov += self.sigma_b2 * same_period
        cov[np.diag_indices(total)] += self.sigma_e2
        return cov


@dataclass(frozen=True)
class CovarianceCoefficients:
    """Coefficients of the patterned covariance of one cluster and of its inverse.

    With ``I`` the identity, ``J`` the all-ones matrix and ``m`` observations
    in each of ``T`` periods the cluster covariance is
    ``sigma2 * (a1 I + b1 I_T (x) J_m + c1 J)`` and its inverse is
    ``(a2 I + b2 I_T (x) J_m + c2 J) / sigma2``. The ``*3`` coefficients are
    the aggregates ``a2 m T``, ``b2 m^2 T`` and ``c2 m^2 T^2``.
    """

    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float
    a3: float
    b3: float
    c3: float


def components(corr):
    """Return ``(sigma_a2, sigma_b2, sigma_e2)`` for a correlation structure."""
    return corr.sigma_a2, corr.sigma_b2, corr.sigma_e2


def coefficients(corr, m, T):
    if m < 1 or T < 1:
        raise ValidationError(f"need m >= 1 and T >= 1, got m={m}, T={T}")
    a1 = 1.0 - corr.wpicc
    b1 = corr.wpicc - corr.bpicc
    c1 = corr.bpicc
    a2 = 1.0 / a1
    b2 = -b1 / (a1 * (a1 + b1 * m))
    c2 = -c1 / ((a1 + b1 * m) * (a1 + b1 * m + c1 * m * T))
    return CovarianceCoefficients(
        a1=a1, b1=b1, c1=c1, a2=a2, b2=b2, c2=c2,
        a3=a2 * m * T, b3=b2 * m * m * T, c3=c2 * m * m * T * T,
    )


def patterned_matrix(a, b, c, m, T):
    """Dense ``a I_{Tm} + b I_T (x) J_m + c J_{Tm}``."""
    n = m * T
    return (a * np.eye(n) + b * np.kron(np.eye(T), np.ones((m, m)))
            + c * np.ones((n, n)))
