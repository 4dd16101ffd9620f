"""Relative-effect (Brunner-Munzel type) many-to-one comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import Dataset
from .errors import DegenerateSeparationError, DesignError, DomainError
from .inference import simultaneous_test


@dataclass
class RelEffectRow:
    label: str
    relative_effect: float
    variance: float
    t: float
    df: float
    adjusted_p: float


@dataclass
class RelEffectResult:
    rows: list[RelEffectRow]
    df: float
    correlation: np.ndarray
    alternative: str
    mc_error: float
    seed: int

    def to_text(self) -> str:
        width = max(12, max(len(r.label) for r in self.rows) + 2)
        lines = [
            f"relative effects vs. control; alternative: {self.alternative}; df {self.df:.3g}",
            f"seed: {self.seed}; Monte-Carlo error: {self.mc_error:.2e}",
            f"{'contrast':<{width}}{'p.hat':>9}{'variance':>12}{'t':>9}{'adj. p':>12}",
        ]
        for r in self.rows:
            lines.append(f"{r.label:<{width}}{r.relative_effect:>9.4f}{r.variance:>12.4g}{r.t:>9.3f}{r.adjusted_p:>12.4g}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "alternative": self.alternative,
            "df": self.df,
            "seed": self.seed,
            "mc_error": self.mc_error,
            "correlation": np.asarray(self.correlation).tolist(),
            "rows": [vars(r).copy() for r in self.rows],
        }


def _placements(x, y):
    """Normalised mid-rank placements of x among y: F_y(x) with ties at 1/2."""
    xy = np.concatenate([x, y])
    r_all = rankdata(xy)[: x.size]
    r_own = rankdata(x)
    return (r_all - r_own) / y.size


def relative_effect(x, y) -> tuple[float, float]:
    """p = P(X < Y) + P(X = Y)/2 and its Brunner-Munzel variance estimate.

    With placements P_k = F_y(x_k) and Q_l = F_x(y_l) (mid-distribution
    functions), p = mean(Q) = 1 - mean(P) and
    var(p) = var(P)/n_x + var(Q)/n_y (sample variances, divisor n - 1).
    Zero is returned for the variance under complete separation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise DomainError("both samples must be nonempty")
    # exact count: 2 * sum of mid-ranks is an integer
    ranks = rankdata(np.concatenate([x, y]))
    twice = int(round(2 * ranks[x.size :].sum())) - y.size * (y.size + 1)
    phat = twice / (2 * x.size * y.size)
    if x.size < 2 or y.size < 2:
        return phat, math.nan
    px = _placements(x, y)
    qy = _placements(y, x)
    var = np.var(px, ddof=1) / x.size + np.var(qy, ddof=1) / y.size
    return phat, float(var)


def npar_dunnett(
    data: Dataset,
    factor: str,
    base: int = 0,
    alternative: str = "greater",
    seed: int = 0,
) -> RelEffectResult:
    """Many-to-one relative effects with a multivariate t reference.

    Comparison i estimates P(X_base < X_i) + P(X_base = X_i)/2 and is tested
    against 1/2. Rows share the control placements, which gives their
    covariance; df is the smallest row-wise Satterthwaite value.
    """
    levels = data.levels[factor]
    k = len(levels)
    if not 0 <= base < k:
        raise DomainError(f"base index {base} out of range")
    codes = data.codes(factor)
    samples = [data.response[codes == i] for i in range(k)]
    small = [levels[i] for i, s in enumerate(samples) if s.size < 2]
    if small:
        raise DesignError(f"groups with fewer than 2 observations: {small}")
    ctrl = samples[base]
    n0 = ctrl.size
    others = [i for i in range(k) if i != base]
    labels = [f"{levels[i]} - {levels[base]}" for i in others]
    phat, ctrl_terms, var_ctrl, var_trt, dfs = [], [], [], [], []
    for i in others:
        trt = samples[i]
        p, _ = relative_effect(ctrl, trt)
        pc = _placements(ctrl, trt)  # F_i(x_0k)
        qt = _placements(trt, ctrl)  # F_0(x_il)
        v0 = np.var(pc, ddof=1) / n0
        v1 = np.var(qt, ddof=1) / trt.size
        phat.append(p)
        ctrl_terms.append(pc)
        var_ctrl.append(v0)
        var_trt.append(v1)
    phat = np.array(phat)
    var = np.array(var_ctrl) + np.array(var_trt)
    bad = [labels[j] for j in np.flatnonzero(var <= 0)]
    if bad:
        raise DegenerateSeparationError(
            f"complete separation in {bad}: placement variances are zero, so the "
            "test statistic is unbounded and no valid p-value exists"
        )
    m = len(others)
    V = np.diag(var)
    for a in range(m):
        for b in range(a + 1, m):
            c = np.cov(ctrl_terms[a], ctrl_terms[b], ddof=1)[0, 1] / n0
            V[a, b] = V[b, a] = c
    for j, i in enumerate(others):
        n1 = samples[i].size
        den = var_ctrl[j] ** 2 / (n0 - 1) + var_trt[j] ** 2 / (n1 - 1)
        dfs.append(var[j] ** 2 / den)
    df = float(min(dfs))
    se = np.sqrt(var)
    stat = (phat - 0.5) / se
    res = simultaneous_test(
        phat, stat, se, V / np.outer(se, se), df, labels,
        alternative=alternative, seed=seed, null_value=0.5, intervals=False,
    )
    rows = [
        RelEffectRow(r.label, r.estimate, float(v), r.t, df, r.adjusted_p)
        for r, v in zip(res.rows, var)
    ]
    return RelEffectResult(rows, df, res.correlation, alternative, res.mc_error, seed)
