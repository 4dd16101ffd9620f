import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcpanova.contrast import dunnett
from mcpanova.covariance import (
    binomial_plugin,
    classical_cov,
    sandwich_hc,
    satterthwaite_df,
    welch_groupwise,
)
from mcpanova.data import Dataset, GroupSummary, build_gene_expression, group_summaries
from mcpanova.errors import DegenerateVarianceError, DesignError, DomainError
from mcpanova.inference import max_t_test
from mcpanova.model import fit_cell_means


def dense_hc(X, y, variant):
    """Textbook sandwich (X'X)^-1 X' diag(w e^2) X (X'X)^-1."""
    n, p = X.shape
    bread = np.linalg.inv(X.T @ X)
    e = y - X @ bread @ X.T @ y
    h = np.einsum("ij,jk,ik->i", X, bread, X)
    w = {
        "hc0": np.ones(n),
        "hc1": np.full(n, n / (n - p)),
        "hc2": 1 / (1 - h),
        "hc3": 1 / (1 - h) ** 2,
    }[variant]
    meat = X.T @ (X * (w * e**2)[:, None])
    return bread @ meat @ bread


def _data(rng, sizes):
    g = np.repeat(np.arange(len(sizes)), sizes)
    y = rng.normal(g * 0.5, 1 + g, size=g.size)
    return Dataset(y, {"g": tuple(f"l{i}" for i in g)}, {})


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(2, 8), min_size=2, max_size=6), st.integers(0, 10_000),
       st.sampled_from(["hc0", "hc1", "hc2", "hc3"]))
def test_sandwich_matches_dense_oracle(sizes, seed, variant):
    data = _data(np.random.default_rng(seed), sizes)
    m = fit_cell_means(data, "g")
    got = sandwich_hc(m, variant).matrix
    want = dense_hc(m.design_matrix(), data.response, variant)
    np.testing.assert_allclose(got, want, atol=1e-10, rtol=1e-10)


def test_classical_is_mse_over_n():
    data = _data(np.random.default_rng(1), [3, 5, 4])
    m = fit_cell_means(data, "g")
    X = m.design_matrix()
    np.testing.assert_allclose(classical_cov(m).matrix, m.mse * np.linalg.inv(X.T @ X), atol=1e-14)
    assert classical_cov(m).residual_df == 9


def test_singleton_cell():
    data = _data(np.random.default_rng(1), [1, 3])
    m = fit_cell_means(data, "g")
    sandwich_hc(m, "hc0")
    with pytest.raises(DegenerateVarianceError):
        sandwich_hc(m, "hc3")
    with pytest.raises(DomainError):
        sandwich_hc(m, "hc9")


def test_welch_df_two_sample_formula():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n1, n2 = rng.integers(2, 15, size=2)
        x, y = rng.normal(size=n1), rng.normal(0, 3, size=n2)
        v1, v2 = x.var(ddof=1) / n1, y.var(ddof=1) / n2
        welch = (v1 + v2) ** 2 / (v1**2 / (n1 - 1) + v2**2 / (n2 - 1))
        summ = [GroupSummary("a", n1, x.mean(), x.var(ddof=1)), GroupSummary("b", n2, y.mean(), y.var(ddof=1))]
        assert satterthwaite_df([-1, 1], summ) == pytest.approx(welch, rel=1e-13)


def test_satterthwaite_ignores_unused_groups():
    summ = [GroupSummary("a", 4, 0, 1.0), GroupSummary("b", 4, 0, 2.0), GroupSummary("c", 1, 0, None)]
    assert satterthwaite_df([-1, 1, 0], summ) == pytest.approx(satterthwaite_df([-1, 1], summ[:2]))
    with pytest.raises(DesignError):
        satterthwaite_df([-1, 0, 1], summ)
    zero = [GroupSummary("a", 4, 0, 0.0), GroupSummary("b", 4, 0, 0.0)]
    with pytest.raises(DegenerateVarianceError):
        satterthwaite_df([-1, 1], zero)


def test_welch_groupwise_degenerate_flag():
    summ = [GroupSummary("a", 3, 1, 0.0), GroupSummary("b", 3, 2, 1.0)]
    assert welch_groupwise(summ).degenerate == (0,)
    with pytest.raises(DesignError):
        welch_groupwise([GroupSummary("a", 1, 1, None)])


def test_pe_sandwich_vs_classical_pvalues():
    # Dunnett on the periostin subset; depends only on cell moments
    pe = build_gene_expression().subset("treat", "pe")
    m = fit_cell_means(pe, "conc")
    dn = dunnett(m.cell_labels)
    robust = max_t_test(m, sandwich_hc(m, "hc3"), dn, "greater", seed=1)
    plain = max_t_test(m, classical_cov(m), dn, "greater", seed=1)
    np.testing.assert_allclose(robust.adjusted_p, [0.019, 0.067], atol=1e-3)
    np.testing.assert_allclose(plain.adjusted_p, [0.021, 0.051], atol=1e-3)


def test_binomial_plugin_requires_binomial():
    m = fit_cell_means(_data(np.random.default_rng(0), [3, 3]), "g")
    with pytest.raises(DomainError):
        binomial_plugin(m)


def test_group_summaries_feed_welch():
    pe = build_gene_expression().subset("treat", "pe")
    V = welch_groupwise(group_summaries(pe, "conc")).matrix
    np.testing.assert_allclose(np.diag(V), np.array([0.075, 0.45, 0.5]) ** 2 / 4)
