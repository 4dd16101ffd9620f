"""Cell-means fits (Gaussian and binomial identity link) and ANOVA baselines."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .data import Dataset
from .errors import DesignError, DomainError


@dataclass(frozen=True, eq=False)
class FittedModel:
    """One coefficient per cell, no intercept.

    ``cell_index`` maps each observation to its cell. For the binomial
    family ``residual_df`` is infinite and ``degenerate`` lists cells with
    an observed proportion of 0 or 1.
    """

    cell_labels: tuple[str, ...]
    coefficients: np.ndarray
    residuals: np.ndarray
    cell_index: np.ndarray
    cell_counts: np.ndarray
    n_total: int
    n_params: int
    residual_df: float
    mse: float
    family: str = "gaussian"
    factors: tuple[str, ...] = ()
    degenerate: tuple[str, ...] = field(default=())

    def design_matrix(self) -> np.ndarray:
        """Dense 0/1 cell-indicator matrix (``n_total x n_params``)."""
        X = np.zeros((self.n_total, self.n_params))
        X[np.arange(self.n_total), self.cell_index] = 1.0
        return X

    @property
    def fitted(self) -> np.ndarray:
        return self.coefficients[self.cell_index]


@dataclass(frozen=True)
class AnovaTerm:
    name: str
    df: int
    sum_sq: float
    f: float
    p: float


@dataclass(frozen=True)
class AnovaTable:
    terms: tuple[AnovaTerm, ...]
    residual_df: int
    residual_ss: float

    @property
    def pvalues(self) -> np.ndarray:
        return np.array([t.p for t in self.terms])

    def to_text(self) -> str:
        lines = [f"{'term':<20}{'df':>4}{'sum sq':>14}{'F':>12}{'p':>12}"]
        for t in self.terms:
            lines.append(f"{t.name:<20}{t.df:>4}{t.sum_sq:>14.6g}{t.f:>12.5g}{t.p:>12.4g}")
        lines.append(f"{'Residuals':<20}{self.residual_df:>4}{self.residual_ss:>14.6g}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "terms": [vars(t).copy() for t in self.terms],
            "residual_df": self.residual_df,
            "residual_ss": self.residual_ss,
        }


def _cells(data: Dataset, factors: Sequence[str]):
    if isinstance(factors, str):
        factors = [factors]
    factors = list(factors)
    if not factors:
        raise DesignError("at least one factor is required")
    combos = list(itertools.product(*(data.levels[f] for f in factors)))
    labels = tuple(":".join(c) for c in combos)
    sizes = [len(data.levels[f]) for f in factors]
    index = np.zeros(len(data), dtype=int)
    for f, size in zip(factors, sizes):
        index = index * size + data.codes(f)
    counts = np.bincount(index, minlength=len(labels))
    empty = [labels[i] for i in np.flatnonzero(counts == 0)]
    if empty:
        raise DesignError(f"empty cells: {', '.join(empty)}")
    return tuple(factors), labels, index, counts


def fit_cell_means(data: Dataset, factors: str | Sequence[str]) -> FittedModel:
    """Least-squares fit of the cell-means model.

    Cells are the cartesian product of the factor levels with the first
    factor varying slowest, labelled ``levelA:levelB``.
    """
    factors, labels, index, counts = _cells(data, factors)
    y = data.response
    coef = np.bincount(index, weights=y, minlength=len(labels)) / counts
    resid = y - coef[index]
    n, p = len(y), len(labels)
    df = n - p
    rss = float(resid @ resid)
    return FittedModel(
        cell_labels=labels,
        coefficients=coef,
        residuals=resid,
        cell_index=index,
        cell_counts=counts,
        n_total=n,
        n_params=p,
        residual_df=df,
        mse=rss / df if df > 0 else math.nan,
        family="gaussian",
        factors=factors,
    )


def fit_binomial_identity(data: Dataset, factor: str) -> FittedModel:
    """Saturated binomial model with identity link: coefficients are the group proportions."""
    y = data.response
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("binomial response must be coded 0/1")
    factors, labels, index, counts = _cells(data, factor)
    phat = np.bincount(index, weights=y, minlength=len(labels)) / counts
    degenerate = tuple(labels[i] for i in np.flatnonzero((phat == 0) | (phat == 1)))
    if degenerate:
        warnings.warn(f"observed proportion 0 or 1 in cells {list(degenerate)}", RuntimeWarning, stacklevel=2)
    resid = y - phat[index]
    return FittedModel(
        cell_labels=labels,
        coefficients=phat,
        residuals=resid,
        cell_index=index,
        cell_counts=counts,
        n_total=len(y),
        n_params=len(labels),
        residual_df=math.inf,
        mse=1.0,
        family="binomial",
        factors=factors,
        degenerate=degenerate,
    )


def _term_columns(data: Dataset, term: str) -> np.ndarray:
    # treatment coding: drop the first level of each factor
    cols = np.ones((len(data), 1))
    for f in term.split(":"):
        codes = data.codes(f)
        k = len(data.levels[f])
        dummies = (codes[:, None] == np.arange(1, k)[None, :]).astype(float)
        cols = (cols[:, :, None] * dummies[:, None, :]).reshape(len(data), -1)
    return cols


def _rss_rank(X, y):
    # SVD handles aliased columns (nested interaction codings)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(s > s.max() * max(X.shape) * np.finfo(float).eps))
    U = U[:, :rank]
    resid = y - U @ (U.T @ y)
    return float(resid @ resid), rank


def anova_f(data: Dataset, terms: Sequence[str]) -> AnovaTable:
    """Sequential (type I) ANOVA table for an intercept model with the given terms.

    Terms are factor names or ``a:b`` interactions, entered in order.
    """
    y = data.response
    X = np.ones((len(y), 1))
    rss_prev, rank_prev = _rss_rank(X, y)
    rows = []
    for term in terms:
        X = np.hstack([X, _term_columns(data, term)])
        rss, rank = _rss_rank(X, y)
        df = rank - rank_prev
        if df <= 0:
            raise DesignError(f"term {term!r} adds no estimable columns")
        rows.append((term, df, max(rss_prev - rss, 0.0)))
        rss_prev, rank_prev = rss, rank
    res_df = len(y) - rank_prev
    if res_df <= 0:
        raise DesignError("saturated model: no residual degrees of freedom")
    mse = rss_prev / res_df
    scale = max(float(np.sum((y - y.mean()) ** 2)), 1.0)
    out = []
    for name, df, ss in rows:
        if ss <= 1e-14 * scale:
            # zero signal: F undefined, p = 1 by convention
            f, p = math.nan, 1.0
        elif mse <= 1e-14 * scale / max(res_df, 1):
            f, p = math.inf, 0.0
        else:
            f = (ss / df) / mse
            p = float(special.fdtrc(df, res_df, f))
        out.append(AnovaTerm(name, df, ss, f, p))
    return AnovaTable(tuple(out), res_df, rss_prev)


def bonferroni_adjust(pvalues) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("p-values must lie in [0, 1]")
    return np.minimum(1.0, p.size * p)
