import math

import numpy as np
import pytest
from scipy import stats

from mcpanova.contrast import ContrastMatrix, dunnett, grand_mean, ratio_rows
from mcpanova.covariance import binomial_plugin, classical_cov, welch_groupwise
from mcpanova.data import Dataset, build_gene_expression, build_nausea, group_summaries
from mcpanova.errors import DegenerateVarianceError, DesignError, DomainError
from mcpanova.inference import (
    MaxTResult,
    contingency_table,
    linear_test,
    max_t_test,
    pearson_chisq,
    ratio_max_t,
    simultaneous_test,
)
from mcpanova.model import fit_binomial_identity, fit_cell_means
from mcpanova.reproduce import nausea_anom, nausea_dunnett


def test_nausea_dunnett_published():
    res = nausea_dunnett(seed=1)
    np.testing.assert_allclose(res.tstats, [2.03, 2.03, 2.31, 2.99], atol=0.01)
    np.testing.assert_allclose(res.adjusted_p, [0.077, 0.077, 0.040, 0.006], atol=0.005)
    assert res.mc_error < 1e-3
    assert res.alternative == "greater"
    assert all(r.ci_upper == math.inf for r in res.rows)


def test_nausea_anom_minimum():
    for weighted in (True, False):
        res = nausea_anom(seed=1, weighted=weighted)
        assert res.adjusted_p.min() == pytest.approx(0.002, abs=0.002)


def test_chisq_against_scipy():
    table = contingency_table(build_nausea(), "Dose")
    np.testing.assert_array_equal(table[1], [3, 10, 10, 11, 14])
    res = pearson_chisq(table)
    stat, p, df, _ = stats.chi2_contingency(table, correction=False)
    assert res.stat == pytest.approx(stat, rel=1e-12)
    assert res.p == pytest.approx(p, rel=1e-10)
    assert res.df == df == 4
    assert res.p == pytest.approx(0.095, abs=5e-4)
    with pytest.raises(DegenerateVarianceError):
        pearson_chisq([[0, 0], [1, 2]])


def test_degenerate_binomial_cells():
    y = np.array([0.0] * 10 + [0, 1, 1, 0, 1, 0, 0, 1, 0, 1] + [1, 1, 0, 0, 1, 0, 1, 0, 0, 0])
    g = ("a",) * 10 + ("b",) * 10 + ("c",) * 10
    data = Dataset(y, {"g": g}, {})
    with pytest.warns(RuntimeWarning):
        m = fit_binomial_identity(data, "g")
    with pytest.raises(DegenerateVarianceError, match="'a'"):
        max_t_test(m, binomial_plugin(m), dunnett(m.cell_labels), "greater")
    # a set of contrasts that avoids the degenerate cell is fine
    c_vs_b = ContrastMatrix(dunnett(m.cell_labels, base=1).rows[1:], cell_labels=m.cell_labels)
    res = max_t_test(m, binomial_plugin(m), c_vs_b)
    assert len(res.rows) == 1


def test_one_row_matches_univariate_t():
    data = build_gene_expression().subset("treat", ["pe"]).subset("conc", ["Co", "n1"])
    m = fit_cell_means(data, "conc")
    res = max_t_test(m, classical_cov(m), dunnett(m.cell_labels), "two-sided", seed=2)
    x = data.response[data.codes("conc") == 1]
    y = data.response[data.codes("conc") == 0]
    t, p = stats.ttest_ind(x, y)
    assert res.tstats[0] == pytest.approx(t, rel=1e-12)
    assert res.adjusted_p[0] == pytest.approx(p, abs=1e-9)
    lo, hi = stats.ttest_ind(x, y).confidence_interval(0.95)
    assert res.rows[0].ci_lower == pytest.approx(lo, abs=1e-8)
    assert res.rows[0].ci_upper == pytest.approx(hi, abs=1e-8)


def test_alternatives_mirror():
    rng = np.random.default_rng(3)
    R = np.array([[1, 0.5, 0.3], [0.5, 1, 0.4], [0.3, 0.4, 1]])
    t = rng.normal(size=3)
    up = simultaneous_test(t, t, np.ones(3), R, 12, list("abc"), alternative="greater", seed=1)
    down = simultaneous_test(-t, -t, np.ones(3), R, 12, list("abc"), alternative="less", seed=1)
    # different integration regions: equal up to Monte-Carlo error
    np.testing.assert_allclose(up.adjusted_p, down.adjusted_p, atol=up.mc_error + down.mc_error)
    np.testing.assert_allclose(up.column("ci_lower"), -down.column("ci_upper"), atol=1e-12)


def test_welch_row_specific_df():
    pe = build_gene_expression().subset("treat", "pe")
    summ = group_summaries(pe, "conc")
    m = fit_cell_means(pe, "conc")
    res = max_t_test(m, welch_groupwise(summ), dunnett(m.cell_labels), "greater", seed=1)
    assert isinstance(res.df, list) and len(set(res.df)) == 2
    assert len(res.row_critical) == 2
    low = max_t_test(m, welch_groupwise(summ), dunnett(m.cell_labels), "greater", seed=1, df_mode="min")
    assert low.df == pytest.approx(min(res.df))
    assert np.all(low.adjusted_p >= res.adjusted_p - 1e-4)


def test_ratio_rank_order_and_values():
    pe = build_gene_expression().subset("treat", "pe")
    summ = group_summaries(pe, "conc")
    res = ratio_max_t(summ, ratio_rows("dunnett", [s.level for s in summ]), 1.0, "greater", seed=1)
    np.testing.assert_allclose(res.estimates, [1.8 / 1.05, 1.65 / 1.05])
    assert res.row("n1/Co").adjusted_p < res.row("n2/Co").adjusted_p
    assert all(math.isnan(r.ci_lower) for r in res.rows)
    # margin 1 equals a Welch difference test of the same numerators
    diff = max_t_test(fit_cell_means(pe, "conc"), welch_groupwise(summ), dunnett(3), "greater", seed=1)
    np.testing.assert_allclose(res.tstats, diff.tstats)
    with pytest.raises(DomainError):
        ratio_max_t(summ, ratio_rows("dunnett", 3), 0.0)


def test_dimension_mismatch():
    m = fit_cell_means(build_gene_expression().subset("treat", "pe"), "conc")
    with pytest.raises(DesignError):
        max_t_test(m, classical_cov(m), dunnett(4))
    with pytest.raises(DesignError):
        max_t_test(m, classical_cov(m), ratio_rows("dunnett", 3))


def test_zero_standard_error():
    with pytest.raises(DegenerateVarianceError):
        linear_test([1.0, 2.0], np.diag([1.0, 0.0]), ["a", "b"], 10)


def test_json_round_trip():
    res = nausea_dunnett(seed=1)
    text = res.to_json()
    back = MaxTResult.from_json(text)
    assert back.to_json() == text
    assert back.rows[0].ci_upper == math.inf
    assert '"inf"' in text


def test_csv_and_plot_points():
    res = nausea_anom(seed=1)
    lines = res.to_csv().splitlines()
    assert lines[0].endswith("mc_error,seed")
    assert len(lines) == 6
    pp = res.plot_points_csv().splitlines()
    assert pp[0] == "label,estimate,ci_lower,ci_upper"
    assert pp[1].startswith("0 - GM,")


def test_same_seed_same_result():
    a = nausea_anom(seed=4).to_json()
    b = nausea_anom(seed=4).to_json()
    assert a == b


def test_grand_mean_rows_on_gene_data():
    genes = build_gene_expression()
    m = fit_cell_means(genes, ["conc", "treat"])
    cm = grand_mean(m.cell_labels, m.cell_counts)
    assert len(cm) == 18
