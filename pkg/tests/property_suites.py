"""Randomized property suites, each run on 200 generated cases.

Kept out of pytest collection; ``test_acceptance.py`` runs them one by one
and reports a verdict per property.
"""
import numpy as np
from scipy.stats import rankdata
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from mcpanova.contrast import dunnett, factorial_anom, grand_mean, pooled_sliced, williams
from mcpanova.covariance import classical_cov, sandwich_hc, welch_groupwise
from mcpanova.data import Dataset, group_summaries
from mcpanova.inference import max_t_test
from mcpanova.mmm import tukey_williams_trend
from mcpanova.model import fit_cell_means
from mcpanova.nonparam import relative_effect

N_CASES = 200
suite = settings(
    max_examples=N_CASES, deadline=None, database=None, suppress_health_check=[HealthCheck.too_slow]
)

COV_KINDS = ("classical", "hc0", "hc1", "hc2", "hc3", "welch")
CONTRASTS = ("dunnett", "anom", "williams")
ALTERNATIVES = ("two-sided", "greater", "less")


def one_way(seed, sizes, spread=1.0, dose=False):
    rng = np.random.default_rng(seed)
    g = np.repeat(np.arange(len(sizes)), sizes)
    y = rng.normal(rng.normal(0, spread, len(sizes))[g], rng.uniform(0.5, 2.0, len(sizes))[g])
    labels = tuple(f"g{i}" for i in g)
    return Dataset(y, {"g": labels}, {}, dose=g * 2.0 if dose else None)


def _cov(model, kind, data):
    if kind == "classical":
        return classical_cov(model)
    if kind == "welch":
        return welch_groupwise(group_summaries(data, "g"))
    return sandwich_hc(model, kind)


def _contrast(kind, model):
    if kind == "dunnett":
        return dunnett(model.cell_labels)
    if kind == "anom":
        return grand_mean(model.cell_labels, model.cell_counts)
    return williams(model.cell_labels, model.cell_counts)


def analysis(data, cov_kind, contrast, alternative, intervals=False, seed=0):
    m = fit_cell_means(data, "g")
    return max_t_test(m, _cov(m, cov_kind, data), _contrast(contrast, m), alternative, seed=seed, intervals=intervals)


case = st.tuples(
    st.integers(0, 2**31 - 1),
    st.lists(st.integers(3, 9), min_size=2, max_size=4),
    st.sampled_from(COV_KINDS),
    st.sampled_from(CONTRASTS),
    st.sampled_from(ALTERNATIVES),
)


@suite
@given(case)
def adjusted_at_least_marginal(c):
    seed, sizes, cov, contrast, alt = c
    res = analysis(one_way(seed, sizes), cov, contrast, alt)
    raw = res.column("raw_p")
    assert np.all(res.adjusted_p >= raw - res.mc_error - 1e-9)


@suite
@given(case)
def bonferroni_dominance(c):
    seed, sizes, cov, contrast, alt = c
    res = analysis(one_way(seed, sizes), cov, contrast, alt)
    bonf = np.minimum(1.0, len(res.rows) * res.column("raw_p"))
    assert np.all(res.adjusted_p <= bonf + res.mc_error + 1e-9)


@suite
@given(case)
def ci_test_compatibility(c):
    seed, sizes, cov, contrast, alt = c
    res = analysis(one_way(seed, sizes, spread=0.6), cov, contrast, alt, intervals=True)
    for r in res.rows:
        # skip cases decided by Monte-Carlo noise at the boundary
        assume(abs(r.adjusted_p - 0.05) > 5e-3)
        rejects = r.adjusted_p < 0.05
        excludes = not (r.ci_lower <= 0.0 <= r.ci_upper)
        assert rejects == excludes, (r, res.row_critical, res.critical_value)


@suite
@given(
    st.integers(2, 5),
    st.integers(1, 4),
    st.lists(st.integers(1, 12), min_size=20, max_size=20),
    st.integers(0, 4),
)
def contrast_rows_sum_to_zero(k, m, pool, base):
    base = base % k
    n1 = np.array(pool[:k])
    nm = np.array(pool[: k * m]).reshape(m, k) if k * m <= 20 else np.ones((m, k))
    mats = [
        dunnett(k, base), grand_mean(k, n1), grand_mean(k, n1, weighted=False), williams(k, n1, base),
        pooled_sliced(k, m, nm, base), factorial_anom(m, k, nm, ("a", "b")),
    ]
    for cm in mats:
        np.testing.assert_allclose(cm.matrix.sum(axis=1), 0.0, atol=1e-12)


samples = st.lists(st.integers(-5, 5), min_size=1, max_size=15)


@suite
@given(samples, samples)
def relative_effect_pair_count(x, y):
    phat, _ = relative_effect(x, y)
    wins = sum((xi < yj) + 0.5 * (xi == yj) for xi in x for yj in y)
    assert phat == wins / (len(x) * len(y))


@suite
@given(
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=12),
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=12),
    st.sampled_from(["exp", "cube", "affine", "logistic"]),
)
def relative_effect_monotone_invariance(x, y, transform):
    f = {
        "exp": lambda v: np.exp(np.asarray(v) / 25.0),
        "cube": lambda v: np.asarray(v) ** 3,
        "affine": lambda v: 3.0 * np.asarray(v) - 7.0,
        "logistic": lambda v: 1.0 / (1.0 + np.exp(-np.asarray(v) / 30.0)),
    }[transform]
    fx, fy = f(x), f(y)
    # rounding can merge distinct values; the property needs a strictly monotone map
    assume(np.array_equal(rankdata(np.concatenate([x, y])), rankdata(np.concatenate([fx, fy]))))
    p0, _ = relative_effect(x, y)
    p1, _ = relative_effect(fx, fy)
    assert p0 == p1


@suite
@given(
    st.integers(0, 2**31 - 1),
    st.lists(st.integers(3, 7), min_size=2, max_size=4),
    st.floats(1e-3, 1e3),
    st.floats(-1e3, 1e3),
    st.sampled_from(COV_KINDS),
    st.sampled_from(CONTRASTS + ("trend",)),
)
def t_statistics_scale_invariant(seed, sizes, a, b, cov, contrast):
    data = one_way(seed, sizes, dose=contrast == "trend")
    moved = data.with_response(a * data.response + b)
    if contrast == "trend":
        # the zero-dose log score needs two positive doses
        scalings = ("ari", "ord", "arilog") if len(sizes) > 2 else ("ari", "ord")
        t0 = tukey_williams_trend(data, scalings, intervals=False).tstats
        t1 = tukey_williams_trend(moved, scalings, intervals=False).tstats
    else:
        t0 = analysis(data, cov, contrast, "two-sided").tstats
        t1 = analysis(moved, cov, contrast, "two-sided").tstats
    np.testing.assert_allclose(t1, t0, rtol=1e-7, atol=1e-9)


SUITES = {
    "adjusted p >= marginal p": adjusted_at_least_marginal,
    "Bonferroni dominance": bonferroni_dominance,
    "CI/test compatibility": ci_test_compatibility,
    "contrast rows sum to zero": contrast_rows_sum_to_zero,
    "relative effect equals pair-count oracle": relative_effect_pair_count,
    "relative effect invariant under monotone maps": relative_effect_monotone_invariance,
    "t statistics scale invariant": t_statistics_scale_invariant,
}
