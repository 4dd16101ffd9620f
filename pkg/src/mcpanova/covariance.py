"""Covariance estimators for cell-means coefficients and Satterthwaite df."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import GroupSummary
from .errors import DegenerateVarianceError, DesignError, DomainError
from .model import FittedModel

HC_VARIANTS = ("hc0", "hc1", "hc2", "hc3")


@dataclass(frozen=True, eq=False)
class CovEstimate:
    """Coefficient covariance plus the rule for reference degrees of freedom.

    ``df_policy`` is ``"residual"`` (use ``residual_df``),
    ``"satterthwaite"`` (per contrast, from ``summaries``) or ``"infinite"``.
    ``degenerate`` names coefficients whose variance estimate is zero.
    """

    matrix: np.ndarray
    kind: str
    df_policy: str
    residual_df: float = math.inf
    summaries: tuple[GroupSummary, ...] | None = None
    degenerate: tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def classical_cov(model: FittedModel) -> CovEstimate:
    """MSE (X'X)^-1, which is diag(MSE / n_i) for a cell-means design."""
    if model.family != "gaussian":
        raise DomainError("classical covariance needs a Gaussian model")
    if not model.residual_df >= 1:
        raise DesignError("no residual degrees of freedom")
    V = np.diag(model.mse / model.cell_counts)
    return CovEstimate(V, "classical", "residual", float(model.residual_df))


def sandwich_hc(model: FittedModel, variant: str = "hc3") -> CovEstimate:
    """Heteroscedasticity-consistent covariance of the cell means.

    With 0/1 cell indicators the bread is diag(1/n_i), the leverage of every
    observation in cell i is 1/n_i, and the sandwich collapses to
    diag(w_i * SS_i / n_i^2) with SS_i the within-cell residual sum of squares.
    """
    variant = variant.lower()
    if variant not in HC_VARIANTS:
        raise DomainError(f"unknown HC variant {variant!r}")
    if model.family != "gaussian":
        raise DomainError("sandwich covariance needs a Gaussian model")
    n = model.cell_counts.astype(float)
    ss = np.bincount(model.cell_index, weights=model.residuals**2, minlength=model.n_params)
    meat = ss / n**2
    if variant == "hc1":
        if model.residual_df <= 0:
            raise DesignError("hc1 needs N > p")
        meat = meat * model.n_total / model.residual_df
    elif variant in ("hc2", "hc3"):
        if np.any(n == 1):
            bad = [model.cell_labels[i] for i in np.flatnonzero(n == 1)]
            raise DegenerateVarianceError(f"{variant}: leverage 1 in singleton cells {bad}")
        lever = n / (n - 1)
        meat = meat * (lever if variant == "hc2" else lever**2)
    return CovEstimate(np.diag(meat), variant, "residual", float(model.residual_df))


def welch_groupwise(summaries: Sequence[GroupSummary]) -> CovEstimate:
    """diag(s_i^2 / n_i) with contrast-wise Satterthwaite df."""
    summaries = tuple(summaries)
    small = [s.level for s in summaries if s.n < 2]
    if small:
        raise DesignError(f"groups with fewer than 2 observations: {small}")
    var = np.array([s.variance / s.n for s in summaries])
    degenerate = tuple(int(i) for i in np.flatnonzero(var == 0))
    return CovEstimate(
        np.diag(var), "welch-groupwise", "satterthwaite", summaries=summaries, degenerate=degenerate
    )


def binomial_plugin(model: FittedModel) -> CovEstimate:
    """diag(p_i (1 - p_i) / n_i) for a saturated binomial identity-link fit."""
    if model.family != "binomial":
        raise DomainError("plug-in binomial covariance needs a binomial model")
    p = model.coefficients
    var = p * (1 - p) / model.cell_counts
    degenerate = tuple(int(i) for i in np.flatnonzero(var == 0))
    return CovEstimate(np.diag(var), "binomial-plugin", "infinite", degenerate=degenerate)


def satterthwaite_df(contrast, summaries: Sequence[GroupSummary]) -> float:
    c = np.asarray(contrast, dtype=float)
    if c.size != len(summaries):
        raise DesignError("contrast length differs from number of groups")
    n = np.array([s.n for s in summaries], dtype=float)
    s2 = np.array([np.nan if s.variance is None else s.variance for s in summaries])
    used = c != 0
    if np.any(n[used] < 2):
        raise DesignError("Satterthwaite df needs n >= 2 in every group of the contrast")
    terms = np.where(used, c**2 * np.where(used, s2, 0.0) / n, 0.0)
    num = terms.sum() ** 2
    den = np.sum(np.where(used, terms**2 / np.where(used, n - 1, 1.0), 0.0))
    if not terms.sum() > 0 or not den > 0:
        raise DegenerateVarianceError("contrast variance is zero; Satterthwaite df undefined")
    return float(num / den)
