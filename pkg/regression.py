"""
Uncertainty Lab — Linear Regression
=====================================
Least squares, generalized-inverse and ridge fits of the linear-Gaussian
model, t prediction intervals, AIC, and the Monte-Carlo bias-variance
decomposition of the squared prediction error.

All fits go through one thin SVD of the design. Singular values at or below
rcond = eps * max(n, p) * s_max are treated as zero.
"""

import functools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

import config
from core_sim import McEstimate, RngStream, parallel_map
from utils import NumericalError, RankDeficientError, ValidationError


class Estimator(str, Enum):
    OLS = "ols"
    PINV = "pinv"
    RIDGE = "ridge"
    FIXED = "fixed"     # coefficients supplied from outside, no fitting


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"design must be at least 1x1, got {X.shape}")
        if y.size != X.shape[0]:
            raise ValidationError(f"y has {y.size} entries for {X.shape[0]} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class LinearFit:
    coefficients: np.ndarray
    sigma2_hat: Optional[float]
    estimator: Estimator
    n: int
    p: int
    ridge_lambda: Optional[float] = None


@dataclass(frozen=True)
class PredictionInterval:
    center: float
    lower: float
    upper: float
    level: float


@dataclass(frozen=True)
class _Svd:
    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray
    rank: int


def _svd(X: np.ndarray) -> _Svd:
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return _Svd(U, s, Vt, 0)
    rcond = np.finfo(float).eps * max(X.shape) * s[0]
    return _Svd(U, s, Vt, int(np.count_nonzero(s > rcond)))


# ──────────────────────────────────────────────
#  Fitting
# ──────────────────────────────────────────────
def ols_fit(data: Dataset) -> LinearFit:
    """Least squares β̂ = (XᵀX)⁻¹Xᵀy; σ̂² = RSS/(n−p) when n > p."""
    n, p = data.n, data.p
    if p > n:
        raise ValidationError(f"p = {p} > n = {n}: least squares is undefined, use pinv_fit")
    svd = _svd(data.X)
    if svd.rank < p:
        raise RankDeficientError(svd.rank, p)
    beta = svd.Vt.T @ ((svd.U.T @ data.y) / svd.s)
    sigma2 = None
    if n > p:
        resid = data.y - data.X @ beta
        sigma2 = math.fsum(resid**2) / (n - p)
    return LinearFit(beta, sigma2, Estimator.OLS, n, p)


def pinv_fit(data: Dataset) -> LinearFit:
    """Minimum-norm solution (XᵀX)⁻Xᵀy via truncated SVD."""
    svd = _svd(data.X)
    r = svd.rank
    beta = svd.Vt[:r].T @ ((svd.U[:, :r].T @ data.y) / svd.s[:r])
    return LinearFit(beta, None, Estimator.PINV, data.n, data.p)


def ridge_fit(data: Dataset, lam: float) -> LinearFit:
    """β̂ = (XᵀX + λI)⁻¹Xᵀy, evaluated in the SVD basis."""
    if not lam > 0 or not math.isfinite(lam):
        raise ValidationError(f"ridge lambda must be a positive finite number, got {lam!r}")
    svd = _svd(data.X)
    shrink = svd.s / (svd.s**2 + lam)
    beta = svd.Vt.T @ (shrink * (svd.U.T @ data.y))
    return LinearFit(beta, None, Estimator.RIDGE, data.n, data.p, ridge_lambda=float(lam))


def default_ridge_lambda(sigma2: float, prior_var: float = config.RIDGE_PRIOR_VAR) -> float:
    """Penalty of the Gaussian prior β ~ N(0, σ_β² I) against residual variance σ²."""
    if not sigma2 > 0 or not prior_var > 0:
        raise ValidationError("sigma2 and prior_var must be positive")
    return sigma2 / prior_var


def fixed_fitter(coefficients: Sequence[float]) -> Callable[[Dataset], LinearFit]:
    """A 'fitter' that ignores the data and always returns `coefficients`."""
    beta = np.asarray(coefficients, dtype=float)

    def fit(data: Dataset) -> LinearFit:
        if beta.size != data.p:
            raise ValidationError(f"fixed coefficients have length {beta.size}, data has p = {data.p}")
        return LinearFit(beta.copy(), None, Estimator.FIXED, data.n, data.p)

    return fit


def omit_columns_fitter(columns: Sequence[int], base: Callable[[Dataset], LinearFit] = ols_fit):
    """
    Fit `base` without the listed columns; the returned coefficients are
    zero-padded back to full length so predict() takes full-length x0.
    """
    dropped = sorted(set(int(c) for c in columns))

    def fit(data: Dataset) -> LinearFit:
        keep = [j for j in range(data.p) if j not in dropped]
        if not keep:
            raise ValidationError("omitting every column leaves nothing to fit")
        sub = base(Dataset(data.X[:, keep], data.y))
        beta = np.zeros(data.p)
        beta[keep] = sub.coefficients
        return LinearFit(beta, sub.sigma2_hat, sub.estimator, data.n, data.p, sub.ridge_lambda)

    return fit


def predict(fit: LinearFit, x0) -> float:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != fit.coefficients.size:
        raise ValidationError(f"x0 has length {x0.size}, fit has p = {fit.coefficients.size}")
    return float(x0 @ fit.coefficients)


# ──────────────────────────────────────────────
#  Student t quantiles
# ──────────────────────────────────────────────
def t_cdf(q: float, df: float) -> float:
    return float(special.stdtr(df, q))


def t_pdf(q: float, df: float) -> float:
    log_norm = special.gammaln((df + 1) / 2) - special.gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(log_norm - (df + 1) / 2 * math.log1p(q * q / df))


@functools.lru_cache(maxsize=256)
def t_quantile(df: int, prob: float, tol: float = config.T_QUANTILE_TOL) -> float:
    """
    q with CDF_t(df)(q) = prob: scipy's inverse, then Newton steps until
    |CDF(q) − prob| < tol.
    """
    if df < 1:
        raise ValidationError(f"df must be a positive integer, got {df}")
    if not 0.0 < prob < 1.0:
        raise ValidationError(f"prob must lie in (0, 1), got {prob!r}")
    if prob == 0.5:
        return 0.0
    if prob < 0.5:
        return -t_quantile(df, 1.0 - prob, tol)

    q = float(special.stdtrit(df, prob))
    for _ in range(config.T_QUANTILE_MAX_ITER):
        err = t_cdf(q, df) - prob
        if abs(err) < tol * 1e-2:
            break
        density = t_pdf(q, df)
        if not density > 0:
            break
        q -= err / density
    if not math.isfinite(q) or abs(t_cdf(q, df) - prob) >= tol:
        raise NumericalError(f"t quantile for df = {df}, prob = {prob!r} did not reach tolerance {tol}")
    return q


# ──────────────────────────────────────────────
#  Intervals and information criteria
# ──────────────────────────────────────────────
def leverage(data: Dataset, x0) -> float:
    """x0ᵀ(XᵀX)⁻¹x0 for a full-column-rank design."""
    svd = _svd(data.X)
    if svd.rank < data.p:
        raise RankDeficientError(svd.rank, data.p)
    coords = (svd.Vt @ np.asarray(x0, dtype=float)) / svd.s
    return math.fsum(coords**2)


def prediction_interval(fit: LinearFit, data: Dataset, x0, level: float = config.INTERVAL_LEVEL) -> PredictionInterval:
    """x0ᵀβ̂ ± t_{n−p,1−α/2} σ̂ (1 + x0ᵀ(XᵀX)⁻¹x0)^{1/2}."""
    if fit.estimator is not Estimator.OLS:
        raise ValidationError(f"prediction intervals need an ols fit, got {fit.estimator.value}")
    if data.n <= data.p or fit.sigma2_hat is None:
        raise ValidationError(f"prediction interval needs n > p (n = {data.n}, p = {data.p})")
    if not 0.0 < level < 1.0:
        raise ValidationError(f"level must lie in (0, 1), got {level!r}")
    center = predict(fit, x0)
    alpha = 1.0 - level
    t = t_quantile(data.n - data.p, 1.0 - alpha / 2.0)
    half = t * math.sqrt(fit.sigma2_hat) * math.sqrt(1.0 + leverage(data, x0))
    return PredictionInterval(center, center - half, center + half, level)


def gaussian_loglik(fit: LinearFit, data: Dataset) -> float:
    """Maximized Gaussian log-likelihood with σ̂²_MLE = RSS/n."""
    resid = data.y - data.X @ fit.coefficients
    sigma2_mle = math.fsum(resid**2) / data.n
    if sigma2_mle <= 0.0:
        raise NumericalError("residual variance is zero; the Gaussian log-likelihood is unbounded")
    return -0.5 * data.n * (math.log(2.0 * math.pi * sigma2_mle) + 1.0)


def aic(fit: LinearFit, data: Dataset) -> float:
    """−2ℓ + 2(p + 1), counting σ as a parameter."""
    if fit.estimator is not Estimator.OLS:
        raise ValidationError(f"AIC is defined here for ols fits only, got {fit.estimator.value}")
    if data.p >= data.n:
        raise ValidationError(f"AIC is undefined for p >= n (p = {data.p}, n = {data.n})")
    return -2.0 * gaussian_loglik(fit, data) + 2.0 * (data.p + 1)


# ──────────────────────────────────────────────
#  Bias-variance decomposition
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class LinearTruth:
    """y = xᵀβ + ε, ε ~ N(0, σ²), x ~ N(0, I_p)."""

    beta: np.ndarray
    sigma2: float

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        if beta.size < 1:
            raise ValidationError("beta must have at least one entry")
        if not self.sigma2 >= 0:
            raise ValidationError(f"sigma2 must be >= 0, got {self.sigma2!r}")
        object.__setattr__(self, "beta", beta)

    def draw(self, rng: np.random.Generator, n: int) -> Dataset:
        X = rng.standard_normal((n, self.beta.size))
        y = X @ self.beta + math.sqrt(self.sigma2) * rng.standard_normal(n)
        return Dataset(X, y)


@dataclass(frozen=True)
class BiasVarianceReport:
    aleatoric: float
    estimation_variance: McEstimate
    bias_sq: McEstimate
    direct_mse: McEstimate
    replications: int = field(default=0)

    @property
    def gap(self) -> float:
        return self.aleatoric + self.estimation_variance.mean + self.bias_sq.mean - self.direct_mse.mean

    @property
    def combined_se(self) -> float:
        return math.sqrt(
            self.estimation_variance.std_error**2 + self.bias_sq.std_error**2 + self.direct_mse.std_error**2
        )


def bias_variance_mc(
    dgp: LinearTruth,
    fitter: Callable[[Dataset], LinearFit],
    x0,
    n_train: int,
    reps: int,
    stream: RngStream,
    threads: int = config.DEFAULT_THREADS,
) -> BiasVarianceReport:
    """
    Decompose E(y0 − ŷ)² at x0 into σ² + Var(ŷ) + bias² over `reps`
    independent training sets, and estimate the left side directly with a
    fresh y0 per replication.
    """
    if reps < config.BIAS_VARIANCE_MIN_REPS:
        raise ValidationError(f"reps must be >= {config.BIAS_VARIANCE_MIN_REPS}, got {reps}")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != dgp.beta.size:
        raise ValidationError(f"x0 has length {x0.size}, truth has p = {dgp.beta.size}")
    truth = float(x0 @ dgp.beta)
    sigma = math.sqrt(dgp.sigma2)

    def replicate(r: int) -> tuple[float, float]:
        rng = stream.substream(r).generator()
        data = dgp.draw(rng, n_train)
        try:
            fit = fitter(data)
        except (NumericalError, ValidationError, np.linalg.LinAlgError) as e:
            raise NumericalError(f"fitter failed in replication {r}: {e}") from e
        y_hat = predict(fit, x0)
        y0 = truth + sigma * rng.standard_normal()
        return y_hat, (y0 - y_hat) ** 2

    results = parallel_map(replicate, range(reps), threads)
    y_hat = np.array([r[0] for r in results])
    sq_err = np.array([r[1] for r in results])

    mean_hat = math.fsum(y_hat) / reps
    # (ŷ − mean)² · R/(R−1) averages to the unbiased sample variance
    var_terms = (y_hat - mean_hat) ** 2 * reps / (reps - 1)
    estimation_variance = McEstimate.from_values(var_terms)
    bias = mean_hat - truth
    sd_hat = math.sqrt(estimation_variance.mean)
    bias_se = 2.0 * abs(bias) * sd_hat / math.sqrt(reps) + estimation_variance.mean / reps
    bias_sq = McEstimate(bias * bias, bias_se, reps)
    return BiasVarianceReport(
        aleatoric=dgp.sigma2,
        estimation_variance=estimation_variance,
        bias_sq=bias_sq,
        direct_mse=McEstimate.from_values(sq_err),
        replications=reps,
    )


# ──────────────────────────────────────────────
#  Simple line example and interval coverage
# ──────────────────────────────────────────────
def simulate_line_dataset(
    stream: RngStream,
    n: int = config.INTERVAL_N,
    beta: Sequence[float] = config.INTERVAL_BETA,
    sigma: float = config.INTERVAL_SIGMA,
    x_range: Sequence[float] = config.INTERVAL_X_RANGE,
) -> tuple[np.ndarray, Dataset]:
    """Sorted x ~ U(x_range), y = β0 + β1 x + ε; returns (x, Dataset with intercept column)."""
    if n < 3:
        raise ValidationError(f"need n >= 3 points for an interval, got {n}")
    rng = stream.generator()
    x = np.sort(rng.uniform(x_range[0], x_range[1], n))
    X = np.column_stack([np.ones(n), x])
    y = X @ np.asarray(beta, dtype=float) + sigma * rng.standard_normal(n)
    return x, Dataset(X, y)


def interval_coverage_mc(
    stream: RngStream,
    reps: int = config.COVERAGE_REPLICATIONS,
    x0: float = 5.0,
    level: float = config.INTERVAL_LEVEL,
    n: int = config.INTERVAL_N,
    beta: Sequence[float] = config.INTERVAL_BETA,
    sigma: float = config.INTERVAL_SIGMA,
    x_range: Sequence[float] = config.INTERVAL_X_RANGE,
    threads: int = config.DEFAULT_THREADS,
) -> McEstimate:
    """Share of replications whose interval at x0 covers a fresh y0."""
    row = np.array([1.0, x0])
    mean0 = float(row @ np.asarray(beta, dtype=float))

    def replicate(r: int) -> float:
        sub = stream.substream(r)
        _, data = simulate_line_dataset(sub, n, beta, sigma, x_range)
        interval = prediction_interval(ols_fit(data), data, row, level)
        y0 = mean0 + sigma * sub.substream(0).generator().standard_normal()
        return 1.0 if interval.lower <= y0 <= interval.upper else 0.0

    return McEstimate.from_values(parallel_map(replicate, range(reps), threads))
