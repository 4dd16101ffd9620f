"""Contrast families on cell-means coefficients.

Levels may be passed as a count ``k`` (labels "1".."k") or as a sequence of
labels. ``base`` is a 0-based index. Where sample sizes ``n`` enter the
weights (grand mean, Williams, pooled rows) they default to a balanced
design.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DesignError, DomainError

ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True, eq=False)
class ContrastRow:
    label: str
    weights: np.ndarray | None
    numerator: np.ndarray | None = None
    denominator: np.ndarray | None = None

    @property
    def is_ratio(self) -> bool:
        return self.numerator is not None


@dataclass(frozen=True, eq=False)
class ContrastMatrix:
    rows: tuple[ContrastRow, ...]
    alternative: str = "two-sided"
    cell_labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows:
            raise DesignError("contrast matrix has no rows")
        if self.alternative not in ALTERNATIVES:
            raise DomainError(f"alternative must be one of {ALTERNATIVES}")
        labels = [r.label for r in rows]
        if len(set(labels)) != len(labels):
            raise DesignError("contrast labels must be unique")
        widths = {len(r.weights) if r.weights is not None else len(r.numerator) for r in rows}
        if len(widths) != 1:
            raise DesignError("contrast rows differ in length")

    def __len__(self):
        return len(self.rows)

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.rows]

    @property
    def width(self) -> int:
        r = self.rows[0]
        return len(r.weights) if r.weights is not None else len(r.numerator)

    @property
    def is_ratio(self) -> bool:
        return any(r.is_ratio for r in self.rows)

    @property
    def matrix(self) -> np.ndarray:
        if self.is_ratio:
            raise DesignError("ratio contrasts have no single weight matrix")
        return np.vstack([r.weights for r in self.rows])

    def with_alternative(self, alternative: str) -> "ContrastMatrix":
        return ContrastMatrix(self.rows, alternative, self.cell_labels)

    def __add__(self, other: "ContrastMatrix") -> "ContrastMatrix":
        return ContrastMatrix(self.rows + other.rows, self.alternative, self.cell_labels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cells = self.cell_labels or [f"c{i + 1}" for i in range(self.width)]
        if self.is_ratio:
            w.writerow(["label", "part", *cells])
            for r in self.rows:
                w.writerow([r.label, "numerator", *map(_fmt, r.numerator)])
                w.writerow([r.label, "denominator", *map(_fmt, r.denominator)])
        else:
            w.writerow(["label", *cells])
            for r in self.rows:
                w.writerow([r.label, *map(_fmt, r.weights)])
        return buf.getvalue()


def _fmt(x):
    return repr(float(x))


def _levels(levels) -> list[str]:
    if isinstance(levels, (int, np.integer)):
        k = int(levels)
        if k < 1:
            raise DomainError("need at least one level")
        return [str(i + 1) for i in range(k)]
    return [str(v) for v in levels]


def _sizes(n, k) -> np.ndarray:
    if n is None:
        return np.ones(k)
    n = np.asarray(n, dtype=float)
    if n.shape != (k,):
        raise DesignError(f"expected {k} sample sizes, got shape {n.shape}")
    if np.any(n <= 0):
        raise DomainError("sample sizes must be positive")
    return n


def _check_base(base, k):
    if not 0 <= base < k:
        raise DomainError(f"base index {base} out of range for {k} levels")


def dunnett(levels, base: int = 0, n=None) -> ContrastMatrix:
    """Each level minus the base level (``n`` is accepted for a uniform signature)."""
    labels = _levels(levels)
    k = len(labels)
    if k < 2:
        raise DomainError("Dunnett contrasts need at least two levels")
    _check_base(base, k)
    rows = []
    for i in range(k):
        if i == base:
            continue
        w = np.zeros(k)
        w[i], w[base] = 1.0, -1.0
        rows.append(ContrastRow(f"{labels[i]} - {labels[base]}", w))
    return ContrastMatrix(tuple(rows), cell_labels=tuple(labels))


def grand_mean(levels, n=None, *, weighted: bool = True) -> ContrastMatrix:
    """Each level minus the grand mean; the grand mean is n-weighted unless ``weighted=False``."""
    labels = _levels(levels)
    k = len(labels)
    if k < 2:
        raise DomainError("grand-mean contrasts need at least two levels")
    n = _sizes(n, k)
    gm = n / n.sum() if weighted else np.full(k, 1.0 / k)
    rows = [ContrastRow(f"{labels[i]} - GM", np.eye(k)[i] - gm) for i in range(k)]
    return ContrastMatrix(tuple(rows), cell_labels=tuple(labels))


def williams(levels, n=None, base: int = 0) -> ContrastMatrix:
    """Williams-type contrasts for levels in increasing dose order.

    Row j compares the n-weighted mean of the j highest doses with the
    base, starting with the highest dose alone.
    """
    labels = _levels(levels)
    k = len(labels)
    if k < 2:
        raise DomainError("Williams contrasts need at least two levels")
    _check_base(base, k)
    n = _sizes(n, k)
    others = [i for i in range(k) if i != base]
    rows = []
    for j in range(1, k):
        top = others[::-1][:j]
        w = np.zeros(k)
        w[top] = n[top] / n[top].sum()
        w[base] = -1.0
        if j == 1:
            label = f"{labels[top[0]]} - {labels[base]}"
        else:
            label = f"({'+'.join(labels[i] for i in top)})/{j} - {labels[base]}"
        rows.append(ContrastRow(label, w))
    return ContrastMatrix(tuple(rows), cell_labels=tuple(labels))


def pooled_sliced(primary_levels, secondary_levels, n=None, base: int = 0) -> ContrastMatrix:
    """Dunnett rows within each secondary level plus pooled Dunnett rows.

    Cells are ordered secondary-major (``secondary:primary``), as produced
    by ``fit_cell_means(data, [secondary, primary])``. ``n`` is an
    ``m x k`` array of cell sizes (secondary by primary).
    """
    prim = _levels(primary_levels)
    sec = _levels(secondary_levels)
    k, m = len(prim), len(sec)
    if k < 2:
        raise DomainError("need at least two primary levels")
    _check_base(base, k)
    if n is None:
        n = np.ones((m, k))
    n = np.asarray(n, dtype=float)
    if n.shape != (m, k):
        raise DesignError(f"cell-count matrix must be {m} x {k}")
    if np.any(n <= 0):
        raise DesignError("empty cells in pooled/sliced design")
    cells = tuple(f"{s}:{p}" for s in sec for p in prim)
    rows = []
    for s_idx, s in enumerate(sec):
        for i in range(k):
            if i == base:
                continue
            w = np.zeros(m * k)
            w[s_idx * k + i], w[s_idx * k + base] = 1.0, -1.0
            rows.append(ContrastRow(f"{s}: {prim[i]} - {prim[base]}", w))
    if m > 1:
        for i in range(k):
            if i == base:
                continue
            w = np.zeros((m, k))
            w[:, i] = n[:, i] / n[:, i].sum()
            w[:, base] = -n[:, base] / n[:, base].sum()
            rows.append(ContrastRow(f"pooled: {prim[i]} - {prim[base]}", w.ravel()))
    return ContrastMatrix(tuple(rows), cell_labels=cells)


def factorial_anom(levels_a, levels_b, n=None, names=("A", "B")) -> ContrastMatrix:
    """Marginal-A, marginal-B and cell deviations from the grand mean.

    Cells are ordered A-major (``a:b``), ``n`` is a ``kA x kB`` array of
    cell sizes. Rows within each block are linearly dependent. When the two
    factors share a level label, main-effect labels are prefixed with
    ``names``.
    """
    la, lb = _levels(levels_a), _levels(levels_b)
    shared = bool(set(la) & set(lb))
    ma = [f"{names[0]}={a}" if shared else a for a in la]
    mb = [f"{names[1]}={b}" if shared else b for b in lb]
    ka, kb = len(la), len(lb)
    if n is None:
        n = np.ones((ka, kb))
    n = np.asarray(n, dtype=float)
    if n.shape != (ka, kb):
        raise DesignError(f"cell-count matrix must be {ka} x {kb}")
    if np.any(n <= 0):
        raise DesignError("empty cells in factorial design")
    gm = (n / n.sum()).ravel()
    rows = []
    for a in range(ka):
        w = np.zeros((ka, kb))
        w[a] = n[a] / n[a].sum()
        rows.append(ContrastRow(f"{ma[a]}-GM", w.ravel() - gm))
    for b in range(kb):
        w = np.zeros((ka, kb))
        w[:, b] = n[:, b] / n[:, b].sum()
        rows.append(ContrastRow(f"{mb[b]}-GM", w.ravel() - gm))
    for b in range(kb):
        for a in range(ka):
            w = np.zeros((ka, kb))
            w[a, b] = 1.0
            rows.append(ContrastRow(f"{la[a]} by {lb[b]}", w.ravel() - gm))
    cells = tuple(f"{a}:{b}" for a in la for b in lb)
    return ContrastMatrix(tuple(rows), cell_labels=cells)


def ratio_rows(kind: str, levels, n=None, base: int = 0, *, weighted: bool = True) -> ContrastMatrix:
    """Ratio contrasts: level / base (``"dunnett"``) or level / grand mean (``"grandmean"``)."""
    labels = _levels(levels)
    k = len(labels)
    if k < 2:
        raise DomainError("ratio contrasts need at least two levels")
    eye = np.eye(k)
    rows = []
    if kind == "dunnett":
        _check_base(base, k)
        for i in range(k):
            if i != base:
                rows.append(ContrastRow(f"{labels[i]}/{labels[base]}", None, eye[i], eye[base]))
    elif kind == "grandmean":
        n = _sizes(n, k)
        gm = n / n.sum() if weighted else np.full(k, 1.0 / k)
        for i in range(k):
            rows.append(ContrastRow(f"{labels[i]}/GM", None, eye[i], gm))
    else:
        raise DomainError(f"unknown ratio type {kind!r}")
    return ContrastMatrix(tuple(rows), cell_labels=tuple(labels))


LOG_ZERO_POLICIES = ("extrapolate", "log-step")


def tukey_scores(doses, log_zero_policy: str = "extrapolate", scalings=("ari", "ord", "arilog")) -> dict[str, np.ndarray]:
    """Arithmetic, ordinal and arithmetic-logarithmic scores for dose levels.

    A zero dose has no logarithm. ``"extrapolate"`` continues the straight
    line through the two lowest positive doses on the (dose, log dose) plane
    down to dose 0; ``"log-step"`` places it one mean log-spacing below the
    lowest positive dose.
    """
    d = np.asarray(doses, dtype=float)
    if d.ndim != 1 or d.size < 2:
        raise DomainError("need at least two dose levels")
    if np.all(d == d[0]):
        raise DomainError("all doses are equal")
    if np.any(d < 0) or np.any(np.diff(d) <= 0):
        raise DomainError("doses must be nonnegative and strictly increasing")
    if log_zero_policy not in LOG_ZERO_POLICIES:
        raise DomainError(f"log_zero_policy must be one of {LOG_ZERO_POLICIES}")
    out = {"ari": d.copy(), "ord": np.arange(d.size, dtype=float)}
    if "arilog" not in scalings:
        return {s: out[s] for s in scalings}
    pos = d[d > 0]
    logs = np.empty_like(d)
    logs[d > 0] = np.log(pos)
    if d[0] == 0:
        if pos.size < 2:
            raise DomainError("log score of a zero dose needs at least two positive doses")
        lp = np.log(pos)
        if log_zero_policy == "log-step":
            logs[0] = lp[0] - np.mean(np.diff(lp))
        else:
            logs[0] = lp[0] - pos[0] * (lp[1] - lp[0]) / (pos[1] - pos[0])
    out["arilog"] = logs
    return {s: out[s] for s in scalings}
