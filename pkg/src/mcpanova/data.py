"""Long-format datasets, CSV ingestion and the built-in example data."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DesignError, DomainError, ParseError, SchemaError

# (control, 1 ng/ml, 5 ng/ml) means and sds per gene, in generation order.
GENE_MOMENTS = {
    "al": ((1.1, 1.9, 2.2), (0.05, 0.15, 0.35)),
    "la": ((1.05, 1.25, 1.35), (0.025, 0.25, 0.45)),
    "ti": ((1.05, 0.8, 0.75), (0.025, 0.15, 0.25)),
    "pe": ((1.05, 1.8, 1.65), (0.075, 0.45, 0.5)),
    "mm": ((1.15, 0.5, 0.8), (0.025, 0.05, 0.3)),
    "tr": ((1.0, 0.7, 0.5), (0.025, 0.2, 0.15)),
}
GENE_CONC_LEVELS = ("Co", "n1", "n2")
GENE_CONC_DOSES = (0.0, 1.0, 5.0)
GENE_SEED = 170549

NAUSEA_LEVELS = ("0", "D40", "D80", "D120", "D160")
NAUSEA_TOTALS = (49, 52, 52, 51, 51)
NAUSEA_CASES = (3, 10, 10, 11, 14)


@dataclass(frozen=True)
class GroupSummary:
    level: str
    n: int
    mean: float
    variance: float | None  # None for singleton groups

    @property
    def sd(self) -> float | None:
        return None if self.variance is None else math.sqrt(self.variance)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable long-format table.

    ``factors`` maps a factor name to one label per observation, ``levels``
    gives the level order of each factor. ``time`` names the factor that
    holds time points for repeated-measures data.
    """

    response: np.ndarray
    factors: Mapping[str, tuple[str, ...]]
    levels: Mapping[str, tuple[str, ...]]
    dose: np.ndarray | None = None
    subject: tuple[str, ...] | None = None
    time: str | None = None
    response_name: str = "response"
    dose_name: str = "dose"
    subject_name: str = "subject"
    _codes: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.response, dtype=float)
        y.setflags(write=False)
        object.__setattr__(self, "response", y)
        n = y.shape[0]
        if y.ndim != 1:
            raise SchemaError("response must be one-dimensional")
        if not np.all(np.isfinite(y)):
            raise ParseError("response contains missing or non-finite values")
        factors = {k: tuple(str(v) for v in vals) for k, vals in self.factors.items()}
        levels = {}
        for name, labels in factors.items():
            if len(labels) != n:
                raise SchemaError(f"factor {name!r} has {len(labels)} values, expected {n}")
            declared = self.levels.get(name) if self.levels else None
            if declared is None:
                declared = tuple(dict.fromkeys(labels))
            declared = tuple(str(v) for v in declared)
            present = set(labels)
            unknown = present - set(declared)
            if unknown:
                raise SchemaError(f"factor {name!r}: labels {sorted(unknown)} missing from level order")
            empty = [lv for lv in declared if lv not in present]
            if empty:
                raise DesignError(f"factor {name!r}: levels without observations: {empty}")
            levels[name] = declared
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "levels", levels)
        if self.dose is not None:
            d = np.asarray(self.dose, dtype=float)
            if d.shape != y.shape:
                raise SchemaError("dose column length differs from response")
            d.setflags(write=False)
            object.__setattr__(self, "dose", d)
        if self.time is not None and self.time not in factors:
            raise SchemaError(f"time factor {self.time!r} is not a declared factor")
        if self.subject is not None:
            subj = tuple(str(s) for s in self.subject)
            if len(subj) != n:
                raise SchemaError("subject column length differs from response")
            object.__setattr__(self, "subject", subj)
            if self.time is not None:
                pairs = list(zip(subj, factors[self.time]))
                if len(set(pairs)) != len(pairs):
                    raise DesignError("duplicate (subject, time) pairs")

    def __len__(self):
        return self.response.shape[0]

    @property
    def n_obs(self) -> int:
        return len(self)

    def codes(self, factor: str) -> np.ndarray:
        """Integer level index per observation."""
        if factor not in self._codes:
            lookup = {lv: i for i, lv in enumerate(self._levels_of(factor))}
            self._codes[factor] = np.array([lookup[v] for v in self.factors[factor]], dtype=int)
        return self._codes[factor]

    def _levels_of(self, factor: str) -> tuple[str, ...]:
        if factor not in self.levels:
            raise SchemaError(f"unknown factor {factor!r}")
        return self.levels[factor]

    def subset(self, factor: str, level: str | Sequence[str]) -> "Dataset":
        """Rows whose ``factor`` label is in ``level``; unused levels are dropped."""
        keep_levels = {level} if isinstance(level, str) else set(level)
        self._levels_of(factor)
        mask = np.array([v in keep_levels for v in self.factors[factor]])
        return self.take(mask)

    def take(self, mask: np.ndarray) -> "Dataset":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        if idx.size == 0:
            raise DesignError("selection is empty")
        factors = {k: tuple(v[i] for i in idx) for k, v in self.factors.items()}
        levels = {
            k: tuple(lv for lv in self.levels[k] if lv in set(factors[k])) for k in factors
        }
        return Dataset(
            response=self.response[idx],
            factors=factors,
            levels=levels,
            dose=None if self.dose is None else self.dose[idx],
            subject=None if self.subject is None else tuple(self.subject[i] for i in idx),
            time=self.time,
            response_name=self.response_name,
            dose_name=self.dose_name,
            subject_name=self.subject_name,
        )

    def with_levels(self, factor: str, order: Sequence[str]) -> "Dataset":
        levels = dict(self.levels)
        self._levels_of(factor)
        levels[factor] = tuple(order)
        return self.replace(levels=levels)

    def with_response(self, response: np.ndarray) -> "Dataset":
        return self.replace(response=np.asarray(response, dtype=float))

    def replace(self, **changes) -> "Dataset":
        kwargs = dict(
            response=self.response,
            factors=self.factors,
            levels=self.levels,
            dose=self.dose,
            subject=self.subject,
            time=self.time,
            response_name=self.response_name,
            dose_name=self.dose_name,
            subject_name=self.subject_name,
        )
        kwargs.update(changes)
        return Dataset(**kwargs)

    def interaction(self, factors: Sequence[str], name: str | None = None) -> "Dataset":
        """Add a combined factor whose levels are the cartesian ``a:b`` labels."""
        factors = list(factors)
        name = name or ":".join(factors)
        labels = tuple(":".join(vals) for vals in zip(*(self.factors[f] for f in factors)))
        order = [()]
        for f in factors:
            order = [o + (lv,) for o in order for lv in self._levels_of(f)]
        present = set(labels)
        missing = [":".join(o) for o in order if ":".join(o) not in present]
        if missing:
            raise DesignError(f"empty cells: {missing}")
        new_factors = dict(self.factors)
        new_factors[name] = labels
        new_levels = dict(self.levels)
        new_levels[name] = tuple(":".join(o) for o in order)
        return self.replace(factors=new_factors, levels=new_levels)


def read_csv(
    path,
    response: str,
    factors: Sequence[str] = (),
    *,
    dose: str | None = None,
    subject: str | None = None,
    time: str | None = None,
    level_order: Mapping[str, Sequence[str]] | None = None,
) -> Dataset:
    """Load a long-format CSV file (UTF-8, header row required).

    Factor levels keep their order of first appearance unless ``level_order``
    overrides them. Missing values are rejected rather than dropped.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if not header:
            raise SchemaError(f"{path}: empty file or missing header row")
        factor_cols = list(factors)
        if time is not None and time not in factor_cols:
            factor_cols.append(time)
        wanted = [response, *factor_cols] + [c for c in (dose, subject) if c is not None]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        y, dose_vals, subj = [], [], []
        fvals = {f: [] for f in factor_cols}
        for i, row in enumerate(reader, start=2):
            y.append(_parse_float(row[response], response, i))
            if dose is not None:
                dose_vals.append(_parse_float(row[dose], dose, i))
            for f in factor_cols:
                v = (row[f] or "").strip()
                if v == "" or v.upper() == "NA":
                    raise ParseError(f"missing value in column {f!r}", row=i)
                fvals[f].append(v)
            if subject is not None:
                v = (row[subject] or "").strip()
                if v == "":
                    raise ParseError(f"missing value in column {subject!r}", row=i)
                subj.append(v)
    if not y:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(
        response=np.array(y),
        factors={f: tuple(v) for f, v in fvals.items()},
        levels=dict(level_order or {}),
        dose=np.array(dose_vals) if dose is not None else None,
        subject=tuple(subj) if subject is not None else None,
        time=time,
        response_name=response,
        dose_name=dose or "dose",
        subject_name=subject or "subject",
    )


def _parse_float(text, column, row):
    text = (text or "").strip()
    if text == "" or text.upper() == "NA":
        raise ParseError(f"missing value in column {column!r}", row=row)
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} in column {column!r} as a number", row=row) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value in column {column!r}", row=row)
    return value


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` in the layout accepted by :func:`read_csv`."""
    cols = [data.response_name, *data.factors]
    if data.dose is not None:
        cols.append(data.dose_name)
    if data.subject is not None:
        cols.append(data.subject_name)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(len(data)):
            row = [repr(float(data.response[i]))]
            row += [data.factors[f][i] for f in data.factors]
            if data.dose is not None:
                row.append(repr(float(data.dose[i])))
            if data.subject is not None:
                row.append(data.subject[i])
            w.writerow(row)


def exact_moment_normal(n: int, means, sds, seed=None) -> np.ndarray:
    """Normal draws rescaled so every column has exactly the target mean and sd.

    Returns an ``n x k`` array. The sd is the sample sd (divisor ``n - 1``).
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    means = np.atleast_1d(np.asarray(means, dtype=float))
    sds = np.atleast_1d(np.asarray(sds, dtype=float))
    if means.shape != sds.shape:
        raise DomainError("means and sds must have the same length")
    if n < 3:
        # n = 2 only yields the two points m +- s/sqrt(2), up to sign
        raise DomainError(f"exact-moment generation needs n >= 3, got {n}")
    if np.any(sds <= 0) or not np.all(np.isfinite(sds)):
        raise DomainError("standard deviations must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.standard_normal((n, means.size))
    x = x - x.mean(axis=0)
    x = x / x.std(axis=0, ddof=1)
    return means + sds * x


def build_nausea() -> Dataset:
    """Binary nausea indicator (``na``) by asnofaxine dose level (``Dose``)."""
    y, dose = [], []
    for level, total, cases in zip(NAUSEA_LEVELS, NAUSEA_TOTALS, NAUSEA_CASES):
        y += [0.0] * (total - cases) + [1.0] * cases
        dose += [level] * total
    return Dataset(
        response=np.array(y),
        factors={"Dose": tuple(dose)},
        levels={"Dose": NAUSEA_LEVELS},
        response_name="na",
    )


def build_gene_expression(seed: int = GENE_SEED) -> Dataset:
    """Relative expression of six genes at three TGF-beta concentrations.

    Each of the 18 (gene, concentration) cells holds four values whose
    sample mean and sd hit the published summary values exactly; only the
    individual values depend on ``seed``.
    """
    rng = np.random.default_rng(seed)
    blocks = {g: exact_moment_normal(4, m, s, rng) for g, (m, s) in GENE_MOMENTS.items()}
    y, conc, treat, dose = [], [], [], []
    for j, (clabel, cdose) in enumerate(zip(GENE_CONC_LEVELS, GENE_CONC_DOSES)):
        for gene, block in blocks.items():
            y.extend(block[:, j])
            conc += [clabel] * 4
            treat += [gene] * 4
            dose += [cdose] * 4
    return Dataset(
        response=np.array(y),
        factors={"conc": tuple(conc), "treat": tuple(treat)},
        levels={"conc": GENE_CONC_LEVELS, "treat": tuple(GENE_MOMENTS)},
        dose=np.array(dose),
        response_name="mrc5",
        dose_name="Conc",
    )


def group_summaries(data: Dataset, factor: str | Sequence[str]) -> list[GroupSummary]:
    """Per-level n, mean and variance, in level order.

    A sequence of factors summarises their cells (``a:b`` labels).
    """
    if not isinstance(factor, str):
        factor = list(factor)
        if len(factor) == 1:
            factor = factor[0]
        else:
            data = data.interaction(factor)
            factor = ":".join(factor)
    codes = data.codes(factor)
    out = []
    for i, level in enumerate(data.levels[factor]):
        vals = data.response[codes == i]
        var = float(np.var(vals, ddof=1)) if vals.size >= 2 else None
        out.append(GroupSummary(level, int(vals.size), float(vals.mean()), var))
    return out
