"""Command-line interface: one subcommand per analysis.

Exit codes: 0 success, 1 a ``reproduce`` check failed, 2 usage error,
3 data or domain error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .contrast import dunnett, factorial_anom, grand_mean, pooled_sliced, ratio_rows, williams
from .covariance import binomial_plugin, classical_cov, sandwich_hc, welch_groupwise
from .data import (
    GENE_SEED,
    Dataset,
    GroupSummary,
    build_gene_expression,
    build_nausea,
    group_summaries,
    read_csv,
    write_csv,
)
from .errors import McpError
from .inference import MaxTResult, contingency_table, max_t_test, pearson_chisq, ratio_max_t
from .mvtdist import qmc_budget
from .mmm import SCALINGS, longitudinal_dunnett, tukey_williams_trend
from .model import anova_f, bonferroni_adjust, fit_binomial_identity, fit_cell_means
from .reproduce import WHICH, reproduce

COMMANDS = (
    "anom", "dunnett", "williams", "ratio", "glm-anom", "glm-dunnett", "chisq",
    "two-way-joint", "factorial-anom", "trend", "longitudinal", "npar-dunnett", "gen", "reproduce",
)
COV_CHOICES = ("classical", "hc0", "hc1", "hc2", "hc3", "welch")
# builtin dataset -> default column roles
BUILTIN_ROLES = {
    "nausea": {"response": "na", "factor": ["Dose"]},
    "genes": {"response": "mrc5", "factor": ["conc"], "dose": "Conc"},
}
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    builtin: str | None = None
    gene_seed: int = GENE_SEED
    response: str | None = None
    factor: list[str] = field(default_factory=list)
    dose: str | None = None
    subject: str | None = None
    time: str | None = None
    levels: list[str] = field(default_factory=list)
    subset: list[str] = field(default_factory=list)
    base: str | None = None
    alternative: str | None = None
    conf_level: float = 0.95
    cov: str = "hc3"
    df: str = "row"
    seed: int = 1
    max_samples: int | None = None
    format: str = "text"
    plot_points: str | None = None
    unweighted: bool = False
    ratio_type: str = "dunnett"
    margin: float = 1.0
    secondary: str | None = None
    scalings: list[str] = field(default_factory=lambda: list(SCALINGS))
    factor_contrast: str = "williams"
    log_zero_policy: str = "extrapolate"
    reference: str | None = None
    # gen / reproduce
    genes: bool = False
    nausea: bool = False
    out: str | None = None
    which: str = "all"

    def __post_init__(self):
        if not 0 < self.conf_level < 1:
            raise ValueError("confidence level must lie in (0, 1)")


# -- parser -----------------------------------------------------------------------

def _data_args(p):
    g = p.add_argument_group("data")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--input", help="long-format CSV file")
    src.add_argument("--builtin", choices=sorted(BUILTIN_ROLES), help="built-in dataset")
    g.add_argument("--gene-seed", type=int, default=GENE_SEED, help="seed for --builtin genes")
    g.add_argument("--response")
    g.add_argument("--factor", action="append", default=[], help="factor column (repeatable)")
    g.add_argument("--dose", help="numeric dose column")
    g.add_argument("--subject")
    g.add_argument("--time")
    g.add_argument("--levels", action="append", default=[], metavar="FACTOR=L1,L2,...", help="level order")
    g.add_argument("--subset", action="append", default=[], metavar="FACTOR=L1[,L2]", help="keep these levels")


def _test_args(p, cov=True, alt_default=None):
    g = p.add_argument_group("inference")
    g.add_argument("--base", help="control level label (default: first level)")
    g.add_argument("--alternative", choices=("two-sided", "less", "greater"), default=alt_default)
    g.add_argument("--conf-level", type=float, default=0.95)
    if cov:
        g.add_argument("--cov", choices=COV_CHOICES, default="hc3")
    g.add_argument("--df", choices=("row", "min"), default="row", help="df policy for Welch-type rows")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--max-samples", type=int, help="QMC budget per probability")
    g.add_argument("--format", choices=("text", "csv", "json"), default="text")
    g.add_argument("--plot-points", metavar="PATH", help="write label/estimate/CI CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcpanova", description="Multiple-contrast tests instead of ANOVA F-tests.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("anom", help="analysis of means (grand-mean contrasts)")
    _data_args(p); _test_args(p, alt_default="two-sided")
    p.add_argument("--unweighted", action="store_true", help="unweighted grand mean")

    p = sub.add_parser("dunnett", help="many-to-one comparisons")
    _data_args(p); _test_args(p, alt_default="two-sided")

    p = sub.add_parser("williams", help="Williams-type trend contrasts")
    _data_args(p); _test_args(p, alt_default="greater")

    p = sub.add_parser("ratio", help="ratio-to-control or ratio-to-grand-mean tests")
    _data_args(p); _test_args(p, cov=False, alt_default="greater")
    p.add_argument("--type", dest="ratio_type", choices=("dunnett", "grandmean"), default="dunnett")
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--unweighted", action="store_true")

    for name, alt in (("glm-anom", "two-sided"), ("glm-dunnett", "greater")):
        p = sub.add_parser(name, help="binomial proportions, identity link")
        _data_args(p); _test_args(p, cov=False, alt_default=alt)
        if name == "glm-anom":
            p.add_argument("--unweighted", action="store_true")

    p = sub.add_parser("chisq", help="Pearson chi-square test of a 2 x k table")
    _data_args(p)
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")

    p = sub.add_parser("two-way-joint", help="pooled and sliced Dunnett comparisons")
    _data_args(p); _test_args(p, alt_default="greater")
    p.add_argument("--secondary", help="slicing factor")

    p = sub.add_parser("factorial-anom", help="ANOM for main effects and interaction, plus F-tests")
    _data_args(p); _test_args(p, alt_default="two-sided")

    p = sub.add_parser("trend", help="Tukey trend with Williams contrasts (stacked models)")
    _data_args(p); _test_args(p, cov=False, alt_default="greater")
    p.add_argument("--scalings", nargs="+", choices=SCALINGS, default=list(SCALINGS))
    p.add_argument("--factor-contrast", choices=("williams", "dunnett", "none"), default="williams")
    p.add_argument("--log-zero-policy", choices=("extrapolate", "log-step"), default="extrapolate")
    p.add_argument("--reference", choices=("normal", "t"), default="normal")

    p = sub.add_parser("longitudinal", help="Dunnett comparisons at every time point (stacked models)")
    _data_args(p); _test_args(p, cov=False, alt_default="greater")
    p.add_argument("--reference", choices=("normal", "t"), default="t")

    p = sub.add_parser("npar-dunnett", help="relative-effect many-to-one comparisons")
    _data_args(p); _test_args(p, cov=False, alt_default="greater")

    p = sub.add_parser("gen", help="write a built-in dataset to CSV")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--genes", action="store_true")
    which.add_argument("--nausea", action="store_true")
    p.add_argument("--seed", type=int, default=GENE_SEED)
    p.add_argument("--out", required=True)

    p = sub.add_parser("reproduce", help="compare with published values")
    p.add_argument("which", nargs="?", choices=WHICH, default="all")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    known = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in known})


# -- helpers ----------------------------------------------------------------------

def _pairs(items, what):
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"{what} expects FACTOR=VALUES, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = [x.strip() for x in v.split(",") if x.strip()]
    return out


class UsageError(Exception):
    pass


def load_data(cfg: RunConfig) -> tuple[Dataset, list[str]]:
    roles = BUILTIN_ROLES.get(cfg.builtin, {})
    response = cfg.response or roles.get("response")
    factors = cfg.factor or list(roles.get("factor", []))
    if cfg.command in ("two-way-joint",) and cfg.secondary and cfg.secondary not in factors:
        factors = factors + [cfg.secondary]
    if cfg.builtin == "nausea":
        data = build_nausea()
    elif cfg.builtin == "genes":
        data = build_gene_expression(cfg.gene_seed)
    elif cfg.input:
        if not response:
            raise UsageError("--response is required with --input")
        cols = factors + [f for f in _pairs(cfg.subset, "--subset") if f not in factors]
        data = read_csv(cfg.input, response, cols, dose=cfg.dose, subject=cfg.subject, time=cfg.time)
    else:
        raise UsageError("give --input or --builtin")
    if cfg.builtin and cfg.response and cfg.response != data.response_name:
        raise UsageError(f"built-in dataset has response {data.response_name!r}")
    for f, order in _pairs(cfg.levels, "--levels").items():
        data = data.with_levels(f, order)
    for f, keep in _pairs(cfg.subset, "--subset").items():
        if f not in data.factors:
            raise UsageError(f"--subset: unknown factor {f!r}")
        data = data.subset(f, keep if len(keep) > 1 else keep[0])
    if not factors and cfg.command not in ("trend",):
        raise UsageError("--factor is required")
    return data, factors


def _base_index(data, factor, base):
    levels = data.levels[factor]
    if base is None:
        return 0
    if base not in levels:
        raise UsageError(f"--base {base!r} is not a level of {factor!r}: {list(levels)}")
    return levels.index(base)


def _cov(model, kind):
    if kind == "classical":
        return classical_cov(model)
    if kind == "welch":
        return welch_groupwise(_model_summaries(model))
    return sandwich_hc(model, kind)


def _model_summaries(model):
    out = []
    for j, lab in enumerate(model.cell_labels):
        r = model.residuals[model.cell_index == j]
        n = r.size
        out.append(GroupSummary(lab, n, float(model.coefficients[j]), float(r @ r / (n - 1)) if n > 1 else None))
    return out


def _one_factor(factors, cmd):
    if len(factors) != 1:
        raise UsageError(f"{cmd} needs exactly one --factor")
    return factors[0]


def _emit_maxt(res: MaxTResult, cfg: RunConfig, extra: dict | None = None) -> str:
    if cfg.plot_points:
        with open(cfg.plot_points, "w", encoding="utf-8", newline="") as fh:
            fh.write(res.plot_points_csv())
    if cfg.format == "json":
        d = res.to_dict()
        if extra:
            d.update(extra)
        return json.dumps(d, indent=2)
    if cfg.format == "csv":
        return res.to_csv().rstrip("\n")
    text = res.to_text()
    if extra and "anova" in extra:
        text += "\n\n" + _anova_text(extra["anova"])
    return text


def _anova_text(a):
    lines = ["ANOVA F-tests (sequential sums of squares)", f"{'term':<12}{'df':>5}{'F':>10}{'p':>12}{'Bonferroni p':>14}"]
    for t in a["terms"]:
        lines.append(f"{t['name']:<12}{t['df']:>5}{t['f']:>10.4g}{t['p']:>12.4g}{t['bonferroni_p']:>14.4g}")
    lines.append(f"residual df {a['residual_df']}")
    return "\n".join(lines)


# -- commands ---------------------------------------------------------------------

def _cmd_linear(cfg, data, factors):
    cmd = cfg.command
    if cmd == "williams":
        factors = [_one_factor(factors, cmd)]
    model = fit_cell_means(data, factors)
    labels = model.cell_labels
    if cmd == "anom":
        cm = grand_mean(labels, model.cell_counts, weighted=not cfg.unweighted)
        method = "ANOM: each cell vs. the grand mean"
    else:
        if len(factors) > 1:
            data = data.interaction(factors)
            base = _base_index(data, ":".join(factors), cfg.base)
        else:
            base = _base_index(data, factors[0], cfg.base)
        if cmd == "dunnett":
            cm = dunnett(labels, base)
            method = "Dunnett-type many-to-one comparisons"
        else:
            cm = williams(labels, model.cell_counts, base)
            method = "Williams-type trend contrasts"
    return max_t_test(
        model, _cov(model, cfg.cov), cm, cfg.alternative, cfg.conf_level, cfg.seed,
        df_mode=cfg.df, method=method,
    )


def _cmd_ratio(cfg, data, factors):
    f = _one_factor(factors, "ratio")
    base = _base_index(data, f, cfg.base)
    summ = group_summaries(data, f)
    n = [s.n for s in summ]
    rr = ratio_rows(cfg.ratio_type, data.levels[f], n, base, weighted=not cfg.unweighted)
    return ratio_max_t(
        summ, rr, cfg.margin, cfg.alternative, cfg.seed, df_mode=cfg.df, conf_level=cfg.conf_level,
        method=f"ratio tests ({cfg.ratio_type}), margin {cfg.margin:g}, Welch-type",
    )


def _cmd_glm(cfg, data, factors):
    f = _one_factor(factors, cfg.command)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit_binomial_identity(data, f)
    if cfg.command == "glm-anom":
        cm = grand_mean(model.cell_labels, model.cell_counts, weighted=not cfg.unweighted)
        method = "ANOM for proportions (binomial, identity link)"
    else:
        cm = dunnett(model.cell_labels, _base_index(data, f, cfg.base))
        method = "Dunnett-type comparisons of proportions (binomial, identity link)"
    return max_t_test(model, binomial_plugin(model), cm, cfg.alternative, cfg.conf_level, cfg.seed, method=method)


def _cmd_two_way(cfg, data, factors):
    primary = factors[0]
    secondary = cfg.secondary or (factors[1] if len(factors) > 1 else None)
    if secondary is None or secondary == primary:
        raise UsageError("two-way-joint needs --factor PRIMARY and --secondary FACTOR")
    model = fit_cell_means(data, [secondary, primary])
    m, k = len(data.levels[secondary]), len(data.levels[primary])
    cm = pooled_sliced(
        data.levels[primary], data.levels[secondary], model.cell_counts.reshape(m, k),
        _base_index(data, primary, cfg.base),
    )
    return max_t_test(
        model, _cov(model, cfg.cov), cm, cfg.alternative, cfg.conf_level, cfg.seed,
        df_mode=cfg.df, method="pooled and sliced many-to-one comparisons",
    )


def _cmd_factorial(cfg, data, factors):
    if len(factors) != 2:
        raise UsageError("factorial-anom needs two --factor arguments")
    a, b = factors
    model = fit_cell_means(data, [a, b])
    ka, kb = len(data.levels[a]), len(data.levels[b])
    cm = factorial_anom(data.levels[a], data.levels[b], model.cell_counts.reshape(ka, kb), (a, b))
    res = max_t_test(
        model, _cov(model, cfg.cov), cm, cfg.alternative, cfg.conf_level, cfg.seed,
        df_mode=cfg.df, method="factorial ANOM: main effects and interaction vs. grand mean",
    )
    table = anova_f(data, [a, b, f"{a}:{b}"])
    bonf = bonferroni_adjust(table.pvalues)
    anova = table.to_dict()
    for t, pb in zip(anova["terms"], bonf):
        t["bonferroni_p"] = float(pb)
    return res, {"anova": anova}


def _cmd_trend(cfg, data, factors):
    if data.dose is None:
        raise UsageError("trend needs --dose")
    return tukey_williams_trend(
        data, cfg.scalings, cfg.factor_contrast, cfg.alternative, cfg.seed,
        reference=cfg.reference or "normal", log_zero_policy=cfg.log_zero_policy, conf_level=cfg.conf_level,
    )


def _cmd_longitudinal(cfg, data, factors):
    g = _one_factor([f for f in factors if f != cfg.time], "longitudinal")
    return longitudinal_dunnett(
        data, g, _base_index(data, g, cfg.base), cfg.alternative, cfg.seed,
        reference=cfg.reference or "t", conf_level=cfg.conf_level,
    )


def _cmd_npar(cfg, data, factors):
    from .nonparam import npar_dunnett

    f = _one_factor(factors, "npar-dunnett")
    res = npar_dunnett(data, f, _base_index(data, f, cfg.base), cfg.alternative, cfg.seed)
    if cfg.format == "json":
        return json.dumps(res.to_dict(), indent=2)
    if cfg.format == "csv":
        lines = ["label,relative_effect,variance,t,df,adjusted_p,mc_error,seed"]
        for r in res.rows:
            lines.append(f"{r.label},{r.relative_effect!r},{r.variance!r},{r.t!r},{r.df!r},{r.adjusted_p!r},{res.mc_error!r},{res.seed}")
        return "\n".join(lines)
    return res.to_text()


def _cmd_chisq(cfg, data, factors):
    f = _one_factor(factors, "chisq")
    table = contingency_table(data, f)
    res = pearson_chisq(table)
    if cfg.format == "json":
        return json.dumps({"statistic": res.stat, "df": res.df, "p": res.p,
                           "levels": list(data.levels[f]), "table": table.astype(int).tolist()}, indent=2)
    if cfg.format == "csv":
        return f"statistic,df,p\n{res.stat!r},{res.df},{res.p!r}"
    return f"Pearson chi-square test, {f} ({len(data.levels[f])} levels)\nX2 = {res.stat:.4f}, df = {res.df}, p = {res.p:.4g}"


def execute(cfg: RunConfig) -> tuple[int, str]:
    """Run one configuration; returns (exit status, stdout text)."""
    if cfg.command == "gen":
        data = build_gene_expression(cfg.seed) if cfg.genes else build_nausea()
        write_csv(data, cfg.out)
        return 0, f"wrote {len(data)} rows to {cfg.out}"
    if cfg.command == "reproduce":
        rep = reproduce(cfg.which, cfg.seed)
        text = rep.to_json() if cfg.format == "json" else rep.to_text()
        return (0 if rep.passed else EXIT_CHECK_FAILED), text
    data, factors = load_data(cfg)
    cmd = cfg.command
    if cmd == "chisq":
        return 0, _cmd_chisq(cfg, data, factors)
    if cmd == "npar-dunnett":
        with qmc_budget(cfg.max_samples) if cfg.max_samples else contextlib.nullcontext():
            return 0, _cmd_npar(cfg, data, factors)
    handlers = {
        "anom": _cmd_linear, "dunnett": _cmd_linear, "williams": _cmd_linear,
        "ratio": _cmd_ratio, "glm-anom": _cmd_glm, "glm-dunnett": _cmd_glm,
        "two-way-joint": _cmd_two_way, "factorial-anom": _cmd_factorial,
        "trend": _cmd_trend, "longitudinal": _cmd_longitudinal,
    }
    budget = qmc_budget(cfg.max_samples) if cfg.max_samples else contextlib.nullcontext()
    with budget:
        out = handlers[cmd](cfg, data, factors)
    res, extra = out if isinstance(out, tuple) else (out, None)
    return 0, _emit_maxt(res, cfg, extra)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = config_from_args(ns)
    except ValueError as e:
        parser.print_usage(sys.stderr)
        print(f"mcpanova: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        status, text = execute(cfg)
    except UsageError as e:
        print(f"mcpanova {cfg.command}: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except McpError as e:
        print(f"mcpanova {cfg.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"mcpanova {cfg.command}: cannot read or write file: {e}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"mcpanova {cfg.command}: numeric failure: {e}", file=sys.stderr)
        return 4
    print(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
