"""Multiple marginal models: several least-squares fits on the same clusters
with a joint sandwich covariance of all coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .contrast import dunnett, tukey_scores, williams
from .data import Dataset
from .errors import DegenerateVarianceError, DesignError, DomainError
from .inference import MaxTResult, linear_test

SCALINGS = ("ari", "ord", "arilog")
SCALING_LABELS = {
    "ari": "arith conc. score",
    "ord": "ordinal conc. score",
    "arilog": "(arith) logarithm. conc. score",
}


@dataclass(frozen=True, eq=False)
class MarginalFit:
    """One least-squares fit; ``bread`` is (X'X)^-1."""

    name: str
    design: np.ndarray
    coefficients: np.ndarray
    bread: np.ndarray
    residuals: np.ndarray
    cluster_ids: tuple
    coef_labels: tuple[str, ...]

    @property
    def n_params(self) -> int:
        return self.coefficients.size


def fit_marginal(name, design, response, cluster_ids=None, coef_labels=None) -> MarginalFit:
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DesignError(f"{name}: design has {X.shape[0]} rows for {y.size} observations")
    XtX = X.T @ X
    if np.linalg.matrix_rank(XtX) < X.shape[1]:
        raise DesignError(f"{name}: design matrix is rank deficient")
    bread = np.linalg.inv(XtX)
    bread = (bread + bread.T) / 2
    beta = bread @ (X.T @ y)
    ids = tuple(range(y.size)) if cluster_ids is None else tuple(cluster_ids)
    if len(ids) != y.size:
        raise DesignError(f"{name}: {len(ids)} cluster ids for {y.size} observations")
    labels = tuple(coef_labels) if coef_labels is not None else tuple(f"b{i}" for i in range(X.shape[1]))
    return MarginalFit(name, X, beta, bread, y - X @ beta, ids, labels)


@dataclass(frozen=True, eq=False)
class MmmStack:
    fits: tuple[MarginalFit, ...]
    joint_cov: np.ndarray
    coef_index: dict
    n_clusters: int

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([f.coefficients for f in self.fits])

    def block(self, i: int, j: int) -> np.ndarray:
        si, sj = self._slice(i), self._slice(j)
        return self.joint_cov[si, sj]

    def _slice(self, i):
        start = sum(f.n_params for f in self.fits[:i])
        return slice(start, start + self.fits[i].n_params)

    def offset(self, name: str) -> int:
        for i, f in enumerate(self.fits):
            if f.name == name:
                return self._slice(i).start
        raise KeyError(name)

    def default_df(self) -> float:
        return float(self.n_clusters - max(f.n_params for f in self.fits))


def stack(fits: Sequence[MarginalFit]) -> MmmStack:
    """Joint covariance sum_g psi_g psi_g' of per-cluster score contributions.

    psi_{g,m} = bread_m sum_{i in g} x_{i,m} r_{i,m}; each diagonal block is
    the cluster-robust (HC0 when clusters are observations) sandwich of fit m.
    """
    fits = tuple(fits)
    if not fits:
        raise DesignError("nothing to stack")
    clusters = sorted(set(fits[0].cluster_ids), key=str)
    for f in fits[1:]:
        if set(f.cluster_ids) != set(clusters):
            raise DesignError(f"fit {f.name!r} does not share the cluster set of {fits[0].name!r}")
    names = [f.name for f in fits]
    if len(set(names)) != len(names):
        raise DesignError("fit names must be unique")
    pos = {c: i for i, c in enumerate(clusters)}
    G = len(clusters)
    psi = []
    index = {}
    offset = 0
    for f in fits:
        g = np.array([pos[c] for c in f.cluster_ids])
        scores = np.zeros((G, f.n_params))
        np.add.at(scores, g, f.design * f.residuals[:, None])
        psi.append(scores @ f.bread)
        for j, lab in enumerate(f.coef_labels):
            index[(f.name, lab)] = offset + j
        offset += f.n_params
    Psi = np.hstack(psi)
    V = Psi.T @ Psi
    return MmmStack(fits, (V + V.T) / 2, index, G)


def _cell_indicators(codes, k):
    X = np.zeros((codes.size, k))
    X[np.arange(codes.size), codes] = 1.0
    return X


def _fmt_dose(d):
    return f"{d:g}"


def tukey_williams_trend(
    data: Dataset,
    scalings: Sequence[str] = SCALINGS,
    factor_contrast: str = "williams",
    alternative: str = "greater",
    seed: int = 0,
    *,
    reference: str = "normal",
    log_zero_policy: str = "extrapolate",
    conf_level: float = 0.95,
    intervals: bool = True,
) -> MaxTResult:
    """Joint Tukey trend (slopes on dose scores) and Williams/Dunnett test.

    One regression with intercept per dose scaling plus one cell-means fit
    on the dose levels, stacked with observations as clusters. The
    reference is the multivariate normal (``reference="normal"``) or a
    multivariate t with n - (number of dose levels) df (``"t"``).
    """
    if data.dose is None:
        raise DesignError("trend test needs a numeric dose column")
    if factor_contrast not in ("williams", "dunnett", "none"):
        raise DomainError("factor_contrast must be williams, dunnett or none")
    unknown = set(scalings) - set(SCALINGS)
    if unknown:
        raise DomainError(f"unknown scalings {sorted(unknown)}")
    y = data.response
    dose_levels = np.unique(data.dose)
    if dose_levels.size < 2:
        raise DesignError("trend test needs at least two dose levels")
    codes = np.searchsorted(dose_levels, data.dose)
    scores = tukey_scores(dose_levels, log_zero_policy, tuple(scalings)) if scalings else {}
    fits, picks, labels = [], [], []
    for s in scalings:
        X = np.column_stack([np.ones(y.size), scores[s][codes]])
        fits.append(fit_marginal(s, X, y, coef_labels=("intercept", "slope")))
    level_labels = [_fmt_dose(d) for d in dose_levels]
    counts = np.bincount(codes, minlength=dose_levels.size)
    if factor_contrast != "none":
        fits.append(fit_marginal("cells", _cell_indicators(codes, dose_levels.size), y, coef_labels=level_labels))
    if not fits:
        raise DomainError("nothing to test")
    st = stack(fits)
    p = st.coefficients.size
    for s in scalings:
        row = np.zeros(p)
        row[st.coef_index[(s, "slope")]] = 1.0
        picks.append(row)
        labels.append(SCALING_LABELS[s])
    if factor_contrast != "none":
        builder = williams if factor_contrast == "williams" else dunnett
        cm = builder(level_labels, n=counts) if builder is williams else builder(level_labels)
        off = st.offset("cells")
        for r in cm.rows:
            row = np.zeros(p)
            row[off : off + dose_levels.size] = r.weights
            picks.append(row)
            labels.append(r.label)
    L = np.array(picks)
    df = _reference_df(reference, st)
    return linear_test(
        L @ st.coefficients, L @ st.joint_cov @ L.T, labels, df,
        alternative=alternative, conf_level=conf_level, seed=seed,
        cov_kind="mmm-sandwich", method="Tukey trend and Williams-type test (multiple marginal models)",
        intervals=intervals,
    )


def _reference_df(reference, st):
    if reference == "normal":
        return math.inf
    if reference == "t":
        df = st.default_df()
        if df <= 0:
            raise DesignError("not enough clusters for a t reference")
        return df
    raise DomainError("reference must be 'normal' or 't'")


def longitudinal_dunnett(
    data: Dataset,
    group: str,
    base: int = 0,
    alternative: str = "greater",
    seed: int = 0,
    *,
    reference: str = "t",
    conf_level: float = 0.95,
    intervals: bool = True,
) -> MaxTResult:
    """Dunnett comparisons of a between-subject factor at every time point.

    One cell-means fit per time level with subjects as clusters; the stacked
    covariance carries the within-subject correlation across time points.
    """
    if data.subject is None or data.time is None:
        raise DesignError("longitudinal analysis needs subject and time columns")
    times = data.levels[data.time]
    groups = data.levels[group]
    k = len(groups)
    subjects = sorted(set(data.subject), key=str)
    tcodes = data.codes(data.time)
    gcodes = data.codes(group)
    subj = np.array(data.subject, dtype=object)
    # group must be constant within subject
    subject_group = {}
    for s, g in zip(data.subject, gcodes):
        if subject_group.setdefault(s, g) != g:
            raise DesignError(f"subject {s!r} appears in more than one {group!r} level")
    for ti, t in enumerate(times):
        seen = set(subj[tcodes == ti])
        if seen != set(subjects):
            raise DesignError(f"time {t!r}: not every subject observed (unbalanced subject-time grid)")
    per_group = np.bincount(np.array(list(subject_group.values())), minlength=k)
    if np.any(per_group < 2):
        raise DegenerateVarianceError("every group needs at least two subjects")
    dn = dunnett(groups, base)
    fits = []
    for ti, t in enumerate(times):
        m = tcodes == ti
        X = _cell_indicators(gcodes[m], k)
        fits.append(fit_marginal(t, X, data.response[m], subj[m], groups))
    st = stack(fits)
    p = st.coefficients.size
    rows, labels = [], []
    for ti, t in enumerate(times):
        off = st.offset(t)
        for r in dn.rows:
            row = np.zeros(p)
            row[off : off + k] = r.weights
            rows.append(row)
            labels.append(f"{t}: {r.label}")
    L = np.array(rows)
    df = _reference_df(reference, st)
    return linear_test(
        L @ st.coefficients, L @ st.joint_cov @ L.T, labels, df,
        alternative=alternative, conf_level=conf_level, seed=seed,
        cov_kind="mmm-sandwich", method="Dunnett-type comparisons by time point (multiple marginal models)",
        intervals=intervals,
    )
