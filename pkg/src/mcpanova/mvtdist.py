"""Univariate distribution functions and multivariate normal / t rectangle
probabilities.

Rectangle probabilities use the separation-of-variables transformation with
a pivoted Cholesky factor (variables ordered by increasing expected interval
probability) and randomized rank-1 lattice rules. Rows of a singular
correlation matrix that are linear combinations of earlier pivots tighten
the truncation interval of the last pivot they depend on.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import DomainError, NumericError

PSD_TOL = 1e-10
N_SHIFTS = 12
_TINY = 1e-300  # keeps ndtri finite at the ends of (0, 1)
DEFAULT_MAX_SAMPLES = 300_000


@contextmanager
def qmc_budget(max_samples: int):
    """Temporarily change the default QMC budget (integrand evaluations)."""
    global DEFAULT_MAX_SAMPLES
    if max_samples < 2 * N_SHIFTS * 1009:
        raise DomainError(f"QMC budget must be at least {2 * N_SHIFTS * 1009}")
    saved = DEFAULT_MAX_SAMPLES
    DEFAULT_MAX_SAMPLES = int(max_samples)
    try:
        yield
    finally:
        DEFAULT_MAX_SAMPLES = saved


# -- scalar distribution functions ------------------------------------------------

def _check_df(df, name="df"):
    if not (df > 0):
        raise DomainError(f"{name} must be positive, got {df}")


def norm_cdf(x):
    return special.ndtr(x)


def t_cdf(x, df):
    _check_df(df)
    if math.isinf(df):
        return special.ndtr(x)
    return special.stdtr(df, x)


def chi2_cdf(x, df):
    _check_df(df)
    return special.chdtr(df, np.maximum(x, 0.0))


def chi2_sf(x, df):
    _check_df(df)
    return special.chdtrc(df, np.maximum(x, 0.0))


def f_cdf(x, df1, df2):
    _check_df(df1, "df1")
    _check_df(df2, "df2")
    return special.fdtr(df1, df2, np.maximum(x, 0.0))


def t_sf(x, df):
    return t_cdf(-np.asarray(x, dtype=float), df)


def t_ppf(q, df):
    _check_df(df)
    if math.isinf(df):
        return special.ndtri(q)
    return special.stdtrit(df, q)


def scalar_cdf(x, which: str, *params):
    """CDF by name: ``normal``, ``t`` (df), ``chisq`` (df) or ``F`` (df1, df2)."""
    which = which.lower()
    if which == "normal":
        return norm_cdf(x)
    if which == "t":
        return t_cdf(x, *params)
    if which in ("chisq", "chi2"):
        return chi2_cdf(x, *params)
    if which == "f":
        return f_cdf(x, *params)
    raise DomainError(f"unknown distribution {which!r}")


# -- multivariate rectangle probabilities ---------------------------------------

@dataclass
class MvtProblem:
    """P(lower <= T <= upper) for T multivariate t (normal when ``df`` is inf)."""

    lower: np.ndarray
    upper: np.ndarray
    correlation: np.ndarray
    df: float = math.inf
    seed: int = 0
    target_error: float = 1e-4
    max_samples: int | None = None

    def __post_init__(self):
        if self.max_samples is None:
            self.max_samples = DEFAULT_MAX_SAMPLES
        self.correlation = np.atleast_2d(np.asarray(self.correlation, dtype=float))
        k = self.correlation.shape[0]
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (k,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (k,)).copy()
        _check_df(self.df)
        R = self.correlation
        if R.shape != (k, k):
            raise DomainError("correlation must be square")
        if not np.allclose(R, R.T, atol=1e-12):
            raise DomainError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(R), 1.0, atol=1e-10):
            raise DomainError("correlation matrix needs a unit diagonal")
        if k and np.linalg.eigvalsh(R).min() < -PSD_TOL:
            raise DomainError("correlation matrix is not positive semidefinite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise DomainError("integration limits contain NaN")
        if np.any(self.lower >= self.upper):
            raise DomainError("lower limits must be below upper limits")


@dataclass(frozen=True)
class ProbResult:
    value: float
    error_estimate: float
    n_samples: int = 0


_PRIMES = None


def _lattice_generator(dim: int) -> np.ndarray:
    # Richtmyer generator: fractional parts of square roots of primes
    global _PRIMES
    if _PRIMES is None or len(_PRIMES) < dim:
        limit = max(100, 20 * dim)
        sieve = np.ones(limit, dtype=bool)
        sieve[:2] = False
        for i in range(2, int(limit**0.5) + 1):
            if sieve[i]:
                sieve[i * i :: i] = False
        _PRIMES = np.flatnonzero(sieve)
    return np.sqrt(_PRIMES[:dim].astype(float)) % 1.0


def _pivoted_cholesky(a, b, R):
    """Reorder variables and factor R.

    Returns the permuted limits, the factor ``L``, the rank and, for every
    row, the pivot column that determines it last (``last``). Pivot rows are
    their own last column; rows that become linear combinations of earlier
    pivots point at the pivot where their remaining variance vanished.
    """
    k = len(a)
    order = np.arange(k)
    a, b, R = a.copy(), b.copy(), R.copy()
    L = np.zeros((k, k))
    y = np.zeros(k)
    last = np.full(k, -1)
    rank = 0
    for i in range(k):
        d = np.diag(R)[i:] - np.sum(L[i:, :i] ** 2, axis=1)
        ok = (d > PSD_TOL) & (last[i:] < 0)
        if not ok.any():
            break
        s = L[i:, :i] @ y[:i]
        sd = np.sqrt(np.where(ok, d, 1.0))
        prob = special.ndtr((b[i:] - s) / sd) - special.ndtr((a[i:] - s) / sd)
        prob = np.where(ok, prob, np.inf)
        j = i + int(np.argmin(prob))
        if j != i:
            for arr in (a, b, order, last):
                arr[[i, j]] = arr[[j, i]]
            R[[i, j]] = R[[j, i]]
            R[:, [i, j]] = R[:, [j, i]]
            L[[i, j]] = L[[j, i]]
        lii = math.sqrt(R[i, i] - np.sum(L[i, :i] ** 2))
        L[i, i] = lii
        last[i] = i
        rest = np.arange(i + 1, k)
        free = rest[last[rest] < 0]
        L[free, i] = (R[free, i] - L[free, :i] @ L[i, :i]) / lii
        remaining = np.diag(R)[free] - np.sum(L[free, : i + 1] ** 2, axis=1)
        last[free[remaining <= PSD_TOL]] = i
        si = L[i, :i] @ y[:i]
        lo, hi = (a[i] - si) / lii, (b[i] - si) / lii
        mass = special.ndtr(hi) - special.ndtr(lo)
        if mass > 1e-300:
            phi_lo = 0.0 if np.isinf(lo) else math.exp(-0.5 * lo * lo)
            phi_hi = 0.0 if np.isinf(hi) else math.exp(-0.5 * hi * hi)
            y[i] = (phi_lo - phi_hi) / (math.sqrt(2 * math.pi) * mass)
        else:
            y[i] = lo if np.isfinite(lo) else hi
        rank = i + 1
    # dependent rows sit after the pivots, in any order
    dep = np.arange(rank, k)
    perm = np.concatenate([np.arange(rank), dep[np.argsort(last[dep], kind="stable")]])
    a, b, order, last, L = a[perm], b[perm], order[perm], last[perm], L[perm]
    return order, a, b, L, rank, last


class _Integrand:
    """Separation-of-variables integrand for one reordered problem.

    Variable j is drawn from a normal truncated to the intersection of the
    limits of every row whose last pivot is j, which keeps the integrand
    smooth for singular correlation matrices.
    """

    def __init__(self, lower, upper, R, df):
        self.df = df
        self.order, self.a, self.b, self.L, self.rank, self.last = _pivoted_cholesky(lower, upper, R)
        self.k = len(lower)
        self.dim = self.rank + (0 if math.isinf(df) else 1)
        self.groups = [np.flatnonzero(self.last == j) for j in range(self.rank)]

    def __call__(self, w: np.ndarray) -> np.ndarray:
        npts = w.shape[0]
        a, b, L, rank = self.a, self.b, self.L, self.rank
        if math.isinf(self.df):
            r = 1.0
        else:
            u = np.clip(w[:, -1], 1e-16, 1 - 1e-16)
            r = np.sqrt(2.0 * special.gammaincinv(self.df / 2.0, u) / self.df)
        f = np.ones(npts)
        Y = np.zeros((npts, rank))
        for j in range(rank):
            lo_z = np.full(npts, -np.inf)
            hi_z = np.full(npts, np.inf)
            for i in self.groups[j]:
                s = Y[:, :j] @ L[i, :j] if j else 0.0
                coef = L[i, j]
                lo_i = (a[i] * r - s) / coef
                hi_i = (b[i] * r - s) / coef
                if coef < 0:
                    lo_i, hi_i = hi_i, lo_i
                lo_z = np.maximum(lo_z, lo_i)
                hi_z = np.minimum(hi_z, hi_i)
            lo = special.ndtr(lo_z)
            diff = np.maximum(special.ndtr(hi_z) - lo, 0.0)
            f *= diff
            if j < rank - 1:
                u = np.clip(lo + w[:, j] * diff, _TINY, 1.0 - 1e-16)
                Y[:, j] = special.ndtri(u)
        return f


def _qmc_estimate(integrand: _Integrand, n_points: int, shifts: np.ndarray):
    gen = _lattice_generator(integrand.dim)
    base = np.outer(np.arange(1, n_points + 1), gen) % 1.0
    means = np.empty(len(shifts))
    for j, shift in enumerate(shifts):
        x = (base + shift[: integrand.dim]) % 1.0
        means[j] = integrand(np.abs(2.0 * x - 1.0)).mean()
    value = float(means.mean())
    err = 3.0 * float(means.std(ddof=1)) / math.sqrt(len(means))
    return value, err


def _univariate(a, b, df):
    return float(t_cdf(b, df) - t_cdf(a, df))


def _shifts(seed, dim):
    return np.random.default_rng(seed).random((N_SHIFTS, max(dim, 1)))


def mvt_probability(problem: MvtProblem) -> ProbResult:
    """Randomized-QMC estimate of a multivariate normal/t rectangle probability.

    The lattice size doubles until three standard errors across the random
    shifts fall below ``target_error`` or ``max_samples`` is reached. The
    error estimate is truncated so the interval stays inside [0, 1].
    """
    a, b, R, df = problem.lower, problem.upper, problem.correlation, problem.df
    k = len(a)
    if k == 1:
        return ProbResult(_univariate(a[0], b[0], df), 0.0, 0)
    integrand = _Integrand(a, b, R, df)
    if integrand.rank == 0:
        raise NumericError("correlation matrix has rank zero")
    shifts = _shifts(problem.seed, integrand.dim)
    n_points = 1009
    while True:
        value, err = _qmc_estimate(integrand, n_points, shifts)
        used = n_points * N_SHIFTS
        if err <= problem.target_error or 2 * used > problem.max_samples:
            break
        n_points *= 2
    value = min(max(value, 0.0), 1.0)
    err = min(err, value + 1e-7, 1.0 - value + 1e-7)
    return ProbResult(value, max(err, 0.0), used)


def max_t_probability(c, correlation, df=math.inf, tails="two", **kwargs) -> ProbResult:
    """Equicoordinate probability P(max |T_i| <= c) or P(max T_i <= c)."""
    R = np.atleast_2d(correlation)
    k = R.shape[0]
    lower = np.full(k, -c if tails == "two" else -np.inf)
    return mvt_probability(MvtProblem(lower, np.full(k, c), R, df, **kwargs))


def equicoordinate_quantile(
    correlation,
    df=math.inf,
    level: float = 0.95,
    tails: str = "two",
    *,
    seed: int = 0,
    target_error: float = 1e-3,
    max_samples: int | None = None,
) -> float:
    """Common cutoff c with P(max |T_i| <= c) = level (``tails="one"``: max T_i)."""
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    if tails not in ("one", "two"):
        raise DomainError("tails must be 'one' or 'two'")
    if max_samples is None:
        max_samples = DEFAULT_MAX_SAMPLES
    R = np.atleast_2d(np.asarray(correlation, dtype=float))
    k = R.shape[0]
    alpha = 1.0 - level
    one = tails == "one"
    q_single = float(t_ppf(level if one else 1 - alpha / 2, df))
    if k == 1:
        return q_single
    q_bonf = float(t_ppf(1 - alpha / k if one else 1 - alpha / (2 * k), df))
    probe = MvtProblem(
        np.full(k, -np.inf if one else -q_single), np.full(k, q_single), R, df, seed, target_error, max_samples
    )
    integrand = _Integrand(probe.lower, probe.upper, R, df)
    shifts = _shifts(seed, integrand.dim)
    # fix the lattice size once so the root search sees a deterministic function
    n_points = 1009
    while True:
        _, err = _qmc_estimate(integrand, n_points, shifts)
        if err <= target_error or 2 * n_points * N_SHIFTS > max_samples:
            break
        n_points *= 2

    def gap(c):
        lo = np.full(k, -np.inf if one else -c)
        f = _Integrand(lo, np.full(k, c), R, df)
        return _qmc_estimate(f, n_points, _shifts(seed, f.dim))[0] - level

    lo, hi = q_single - 0.25, q_bonf + 0.25
    g_lo, g_hi = gap(lo), gap(hi)
    for _ in range(20):
        if g_lo <= 0:
            break
        lo -= 0.5
        g_lo = gap(lo)
    for _ in range(20):
        if g_hi >= 0:
            break
        hi += 0.5
        g_hi = gap(hi)
    if g_lo > 0 or g_hi < 0:
        raise NumericError("could not bracket the equicoordinate quantile")
    return float(optimize.brentq(gap, lo, hi, xtol=1e-5))
