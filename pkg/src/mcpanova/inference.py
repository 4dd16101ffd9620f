"""Single-step max-t tests, compatible simultaneous intervals, ratio tests and
the Pearson chi-square baseline."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .contrast import ALTERNATIVES, ContrastMatrix
from .covariance import CovEstimate, satterthwaite_df
from .data import Dataset, GroupSummary
from .errors import DegenerateVarianceError, DesignError, DomainError
from .model import FittedModel
from .mvtdist import MvtProblem, chi2_sf, equicoordinate_quantile, mvt_probability, t_cdf, t_sf

DF_MODES = ("row", "min")


@dataclass
class MaxTRow:
    label: str
    estimate: float
    se: float
    t: float
    df: float
    raw_p: float
    adjusted_p: float
    ci_lower: float
    ci_upper: float


@dataclass
class MaxTResult:
    """Table of a single-step max-t procedure.

    ``critical_value`` is the equicoordinate quantile behind the intervals;
    with row-specific df (Welch-type covariances) each row carries its own
    value in ``row_critical``. ``mc_error`` is the largest Monte-Carlo error
    of any probability that entered the table.
    """

    rows: list[MaxTRow]
    correlation: np.ndarray
    critical_value: float
    alternative: str
    cov_kind: str
    conf_level: float
    mc_error: float
    seed: int
    null_value: float = 0.0
    method: str = ""
    row_critical: list[float] = field(default_factory=list)

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.rows]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def estimates(self):
        return self.column("estimate")

    @property
    def tstats(self):
        return self.column("t")

    @property
    def adjusted_p(self):
        return self.column("adjusted_p")

    @property
    def df(self) -> float | list[float]:
        dfs = [r.df for r in self.rows]
        return dfs[0] if len(set(dfs)) == 1 else dfs

    def row(self, label: str) -> MaxTRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alternative": self.alternative,
            "cov_kind": self.cov_kind,
            "conf_level": self.conf_level,
            "null_value": self.null_value,
            "critical_value": _enc(self.critical_value),
            "row_critical": [_enc(c) for c in self.row_critical],
            "mc_error": self.mc_error,
            "seed": self.seed,
            "correlation": [[_enc(x) for x in row] for row in np.asarray(self.correlation)],
            "rows": [{k: _enc(v) for k, v in asdict(r).items()} for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MaxTResult":
        rows = [MaxTRow(**{k: (v if k == "label" else _dec(v)) for k, v in r.items()}) for r in d["rows"]]
        return cls(
            rows=rows,
            correlation=np.array([[_dec(x) for x in row] for row in d["correlation"]], dtype=float),
            critical_value=_dec(d["critical_value"]),
            alternative=d["alternative"],
            cov_kind=d["cov_kind"],
            conf_level=d["conf_level"],
            mc_error=d["mc_error"],
            seed=d["seed"],
            null_value=d["null_value"],
            method=d["method"],
            row_critical=[_dec(c) for c in d["row_critical"]],
        )

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "MaxTResult":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(MaxTRow.__dataclass_fields__)
        w.writerow(names + ["mc_error", "seed"])
        for r in self.rows:
            w.writerow([r.label] + [_num(getattr(r, n)) for n in names[1:]] + [_num(self.mc_error), self.seed])
        return buf.getvalue()

    def plot_points_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "estimate", "ci_lower", "ci_upper"])
        for r in self.rows:
            w.writerow([r.label, _num(r.estimate), _num(r.ci_lower), _num(r.ci_upper)])
        return buf.getvalue()

    def to_text(self) -> str:
        width = max(12, max(len(r.label) for r in self.rows) + 2)
        head = (
            f"{'contrast':<{width}}{'estimate':>11}{'se':>10}{'t':>9}{'df':>8}"
            f"{'adj. p':>12}{'lower':>11}{'upper':>11}"
        )
        lines = []
        if self.method:
            lines.append(self.method)
        lines.append(
            f"alternative: {self.alternative}; covariance: {self.cov_kind}; "
            f"{self.conf_level:.0%} simultaneous CI; critical value {_fmt_g(self.critical_value)}"
        )
        lines.append(f"seed: {self.seed}; Monte-Carlo error: {self.mc_error:.2e}")
        lines.append(head)
        lines.append("-" * len(head))
        for r in self.rows:
            lines.append(
                f"{r.label:<{width}}{_fmt_g(r.estimate, 11)}{_fmt_g(r.se, 10)}{r.t:>9.3f}"
                f"{_fmt_g(r.df, 8)}{_fmt_p(r.adjusted_p):>12}{_fmt_g(r.ci_lower, 11)}{_fmt_g(r.ci_upper, 11)}"
            )
        return "\n".join(lines)


def _enc(x):
    if isinstance(x, (float, np.floating)) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _dec(x):
    return float(x) if isinstance(x, str) else x


def _num(x):
    return repr(float(x))


def _fmt_g(x, width=0):
    if isinstance(x, (list, tuple)):
        return "row-specific"
    s = "Inf" if x == math.inf else ("-Inf" if x == -math.inf else ("NA" if math.isnan(x) else f"{x:.4g}"))
    return f"{s:>{width}}" if width else s


def _fmt_p(p):
    return f"{p:.3g}" if p >= 1e-4 else f"{p:.2e}"


# -- core adjustment ------------------------------------------------------------

def _marginal_p(t, df, alternative):
    if alternative == "two-sided":
        return float(2 * t_sf(abs(t), df))
    if alternative == "greater":
        return float(t_sf(t, df))
    return float(t_cdf(t, df))


def _joint_prob(t, R, df, alternative, seed, target_error):
    k = R.shape[0]
    if alternative == "two-sided":
        lo, hi = np.full(k, -abs(t)), np.full(k, abs(t))
    elif alternative == "greater":
        lo, hi = np.full(k, -np.inf), np.full(k, t)
    else:
        lo, hi = np.full(k, t), np.full(k, np.inf)
    return mvt_probability(MvtProblem(lo, hi, R, df, seed, target_error))


def simultaneous_test(
    estimates,
    statistics,
    se,
    correlation,
    df,
    labels: Sequence[str],
    *,
    alternative: str = "two-sided",
    conf_level: float | None = 0.95,
    seed: int = 0,
    null_value: float = 0.0,
    cov_kind: str = "",
    method: str = "",
    intervals: bool = True,
    target_error: float = 1e-4,
) -> MaxTResult:
    """Adjusted p-values and simultaneous intervals for correlated t statistics.

    ``df`` is a scalar or one value per row; with row-specific df every row
    is referred to the joint distribution with its own df. Intervals are
    ``estimate -/+ c * se`` (half-lines for one-sided alternatives) and are
    skipped when ``intervals`` is false.
    """
    if alternative not in ALTERNATIVES:
        raise DomainError(f"alternative must be one of {ALTERNATIVES}")
    est = np.asarray(estimates, dtype=float)
    stat = np.asarray(statistics, dtype=float)
    se = np.asarray(se, dtype=float)
    m = est.size
    dfs = np.broadcast_to(np.asarray(df, dtype=float), (m,))
    R = np.array(correlation, dtype=float)
    R = (R + R.T) / 2
    np.fill_diagonal(R, 1.0)
    mc_error = 0.0
    adj = np.empty(m)
    cache = {}
    for i in range(m):
        key = (float(stat[i]) if alternative != "two-sided" else abs(float(stat[i])), float(dfs[i]))
        if key not in cache:
            res = _joint_prob(stat[i], R, dfs[i], alternative, seed, target_error)
            cache[key] = res
        res = cache[key]
        adj[i] = min(max(1.0 - res.value, 0.0), 1.0)
        mc_error = max(mc_error, res.error_estimate)
    crit_by_df = {}
    if intervals and conf_level is not None:
        if not 0 < conf_level < 1:
            raise DomainError("confidence level must lie in (0, 1)")
        tails = "two" if alternative == "two-sided" else "one"
        for d in sorted(set(dfs.tolist())):
            crit_by_df[d] = equicoordinate_quantile(R, d, conf_level, tails, seed=seed)
    rows = []
    row_crit = []
    for i in range(m):
        c = crit_by_df.get(float(dfs[i]), math.nan)
        row_crit.append(c)
        lo, hi = est[i] - c * se[i], est[i] + c * se[i]
        if alternative == "greater":
            hi = math.inf
        elif alternative == "less":
            lo = -math.inf
        rows.append(
            MaxTRow(
                label=str(labels[i]),
                estimate=float(est[i]),
                se=float(se[i]),
                t=float(stat[i]),
                df=float(dfs[i]),
                raw_p=_marginal_p(stat[i], dfs[i], alternative),
                adjusted_p=float(adj[i]),
                ci_lower=float(lo),
                ci_upper=float(hi),
            )
        )
    crit = row_crit[0] if len(set(row_crit)) == 1 or all(math.isnan(c) for c in row_crit) else max(row_crit)
    return MaxTResult(
        rows=rows,
        correlation=R,
        critical_value=float(crit),
        alternative=alternative,
        cov_kind=cov_kind,
        conf_level=conf_level if conf_level is not None else math.nan,
        mc_error=float(mc_error),
        seed=seed,
        null_value=null_value,
        method=method,
        row_critical=row_crit if len(set(dfs.tolist())) > 1 else [],
    )


def linear_test(
    estimates,
    cov,
    labels,
    df,
    **kwargs,
) -> MaxTResult:
    """Max-t test of linear functions with estimate vector and covariance given."""
    est = np.asarray(estimates, dtype=float)
    V = np.asarray(cov, dtype=float)
    var = np.diag(V).copy()
    scale = max(float(np.max(np.abs(var))), 1e-300)
    bad = [labels[i] for i in np.flatnonzero(var <= 1e-14 * scale)]
    if bad or np.any(var <= 0):
        bad = bad or [labels[i] for i in np.flatnonzero(var <= 0)]
        raise DegenerateVarianceError(f"zero standard error for contrast(s): {', '.join(map(str, bad))}")
    se = np.sqrt(var)
    R = V / np.outer(se, se)
    null = kwargs.get("null_value", 0.0)
    return simultaneous_test(est, (est - null) / se, se, R, df, labels, **kwargs)


def max_t_test(
    model: FittedModel,
    cov: CovEstimate,
    contrasts: ContrastMatrix,
    alternative: str | None = None,
    conf_level: float = 0.95,
    seed: int = 0,
    *,
    df_mode: str = "row",
    intervals: bool = True,
    method: str = "",
) -> MaxTResult:
    """Simultaneous test of linear contrasts of the cell means."""
    if contrasts.is_ratio:
        raise DesignError("use ratio_max_t for ratio contrasts")
    if contrasts.width != model.n_params or cov.dim != model.n_params:
        raise DesignError(
            f"dimension mismatch: {contrasts.width} contrast columns, "
            f"{model.n_params} coefficients, covariance {cov.dim}"
        )
    if df_mode not in DF_MODES:
        raise DomainError(f"df_mode must be one of {DF_MODES}")
    alternative = alternative or contrasts.alternative
    C = contrasts.matrix
    labels = contrasts.labels
    if cov.degenerate:
        hit = [j for j in cov.degenerate if np.any(C[:, j] != 0)]
        if hit:
            cells = [model.cell_labels[j] for j in hit]
            rows = [labels[i] for i in range(len(labels)) if np.any(C[i, hit] != 0)]
            raise DegenerateVarianceError(
                f"zero variance estimate in cell(s) {cells} used by contrast(s) {rows}"
            )
    est = C @ model.coefficients
    V = C @ cov.matrix @ C.T
    if cov.df_policy == "residual":
        df = cov.residual_df
    elif cov.df_policy == "infinite":
        df = math.inf
    else:
        df = np.array([satterthwaite_df(c, cov.summaries) for c in C])
        if df_mode == "min":
            df = float(df.min())
    return linear_test(
        est, V, labels, df,
        alternative=alternative, conf_level=conf_level, seed=seed,
        cov_kind=cov.kind, method=method, intervals=intervals,
    )


def ratio_max_t(
    summaries: Sequence[GroupSummary],
    ratio_rows: ContrastMatrix,
    margin: float = 1.0,
    alternative: str | None = None,
    seed: int = 0,
    *,
    df_mode: str = "row",
    conf_level: float = 0.95,
    method: str = "",
) -> MaxTResult:
    """Welch-type simultaneous tests of ratios of means against ``margin``.

    H0: a'mu / b'mu = margin is tested through the linear contrast
    c = a - margin * b with group-wise variances and Satterthwaite df per
    row. Estimates are the ratios; ``se`` is that of c'xbar. Intervals are
    not computed (NaN).
    """
    if not margin > 0:
        raise DomainError("ratio margin must be positive")
    if not ratio_rows.is_ratio:
        raise DesignError("ratio_max_t needs ratio contrasts")
    summaries = list(summaries)
    k = len(summaries)
    if ratio_rows.width != k:
        raise DesignError(f"ratio contrasts have {ratio_rows.width} columns for {k} groups")
    small = [s.level for s in summaries if s.n < 2]
    if small:
        raise DesignError(f"groups with fewer than 2 observations: {small}")
    alternative = alternative or ratio_rows.alternative
    xbar = np.array([s.mean for s in summaries])
    v = np.array([s.variance / s.n for s in summaries])
    labels = ratio_rows.labels
    ratios, C = [], []
    for r in ratio_rows.rows:
        den = float(r.denominator @ xbar)
        if den <= 0:
            raise DomainError(f"ratio {r.label}: denominator mean {den:.4g} is not positive")
        ratios.append(float(r.numerator @ xbar) / den)
        C.append(r.numerator - margin * r.denominator)
    C = np.array(C)
    V = C @ np.diag(v) @ C.T
    var = np.diag(V)
    if np.any(var <= 0):
        bad = [labels[i] for i in np.flatnonzero(var <= 0)]
        raise DegenerateVarianceError(f"zero variance in every group of ratio(s) {bad}")
    se = np.sqrt(var)
    stat = (C @ xbar) / se
    df = np.array([satterthwaite_df(c, summaries) for c in C])
    if df_mode == "min":
        df = float(df.min())
    return simultaneous_test(
        ratios, stat, se, V / np.outer(se, se), df, labels,
        alternative=alternative, conf_level=conf_level, seed=seed, null_value=margin,
        cov_kind="welch-groupwise", method=method, intervals=False,
    )


@dataclass(frozen=True)
class ChisqResult:
    stat: float
    df: int
    p: float


def contingency_table(data: Dataset, factor: str) -> np.ndarray:
    """2 x k table of (response == 0, response == 1) counts by level."""
    y = data.response
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("chi-square table needs a 0/1 response")
    codes = data.codes(factor)
    k = len(data.levels[factor])
    ones = np.bincount(codes, weights=y, minlength=k)
    totals = np.bincount(codes, minlength=k)
    return np.vstack([totals - ones, ones])


def pearson_chisq(table) -> ChisqResult:
    """Pearson chi-square test of independence, without continuity correction."""
    O = np.asarray(table, dtype=float)
    if O.ndim != 2 or min(O.shape) < 2:
        raise DomainError("need at least a 2 x 2 table")
    if np.any(O < 0):
        raise DomainError("counts must be nonnegative")
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / O.sum()
    if np.any(E == 0):
        raise DegenerateVarianceError("zero expected count: a row or column total is zero")
    stat = float(np.sum((O - E) ** 2 / E))
    df = (O.shape[0] - 1) * (O.shape[1] - 1)
    return ChisqResult(stat, df, float(chi2_sf(stat, df)))
