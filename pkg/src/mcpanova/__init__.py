"""Simultaneous inference as a replacement for ANOVA pre-tests.

Max-t multiple contrast tests (Dunnett, grand-mean/ANOM, Williams, pooled and
sliced two-way, factorial ANOM), robust covariances, binomial proportions,
ratio tests, multiple marginal model stacking and relative-effect contrasts.
"""
from .data import (
    Dataset,
    GroupSummary,
    build_gene_expression,
    build_nausea,
    exact_moment_normal,
    group_summaries,
    read_csv,
    write_csv,
)
from .model import (
    AnovaTable,
    FittedModel,
    anova_f,
    bonferroni_adjust,
    fit_binomial_identity,
    fit_cell_means,
)
from .covariance import (
    CovEstimate,
    binomial_plugin,
    classical_cov,
    sandwich_hc,
    satterthwaite_df,
    welch_groupwise,
)
from .contrast import (
    ContrastMatrix,
    ContrastRow,
    dunnett,
    factorial_anom,
    grand_mean,
    pooled_sliced,
    ratio_rows,
    tukey_scores,
    williams,
)
from .mvtdist import (
    MvtProblem,
    ProbResult,
    equicoordinate_quantile,
    mvt_probability,
)
from .inference import (
    MaxTResult,
    max_t_test,
    pearson_chisq,
    ratio_max_t,
    simultaneous_test,
)
from .mmm import MarginalFit, MmmStack, longitudinal_dunnett, stack, tukey_williams_trend
from .nonparam import RelEffectResult, npar_dunnett, relative_effect

__version__ = "0.1.0"
