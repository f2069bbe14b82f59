"""
Uncertainty Lab — KL Double Descent
=====================================
Expected Kullback-Leibler divergence between the true linear-Gaussian model
and nested fitted models as the number of covariates p grows past the sample
size n, split into

    component 1: truth → best model with the first p covariates (θ0)
    component 2: θ0 → fitted model (estimation)

Covariates are i.i.d. standard normal and σ is known and shared by the true
and fitted models, so every divergence reduces to a squared distance between
coefficient vectors.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

import config
from core_sim import McEstimate, RngStream, mc_estimate, parallel_map
from regression import Dataset, Estimator, LinearFit, default_ridge_lambda, ols_fit, pinv_fit, ridge_fit
from utils import LabError, NumericalError, RankDeficientError, ValidationError

BETA_SCHEMES = ("decreasing", "constant", "custom")
ESTIMATORS = (Estimator.PINV, Estimator.RIDGE)


# ──────────────────────────────────────────────
#  True coefficients
# ──────────────────────────────────────────────
def beta_scheme_vector(scheme: str, p_max: int, custom: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    decreasing: β_j = 1 − j/150 for j ≤ 150; constant: β_j = 1 for j ≤ 150;
    all later coefficients are 0. custom returns `custom` as given.
    """
    if scheme == "custom":
        if custom is None:
            raise ValidationError("custom beta scheme needs a coefficient vector")
        beta = np.asarray(custom, dtype=float).ravel()
        if beta.size != p_max:
            raise ValidationError(f"custom beta has length {beta.size}, p_max = {p_max}")
        if not np.all(np.isfinite(beta)):
            raise ValidationError("custom beta contains non-finite entries")
        return beta
    if scheme not in BETA_SCHEMES:
        raise ValidationError(f"unknown beta scheme {scheme!r}; expected one of {BETA_SCHEMES}")
    active = config.KL_ACTIVE
    if p_max < active:
        raise ValidationError(f"beta scheme {scheme!r} needs p_max >= {active}, got {p_max}")
    beta = np.zeros(p_max)
    j = np.arange(1, active + 1)
    beta[:active] = 1.0 - j / active if scheme == "decreasing" else 1.0
    return beta


def optimal_subset_params(beta_true: np.ndarray, p: int) -> np.ndarray:
    """θ0 for the first p covariates; with identity covariance this is a plain truncation."""
    beta_true = np.asarray(beta_true, dtype=float)
    if not 0 <= p <= beta_true.size:
        raise ValidationError(f"p must lie in [0, {beta_true.size}], got {p}")
    return beta_true[:p].copy()


# ──────────────────────────────────────────────
#  Divergences
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class KlParts:
    total: float
    comp1: float
    comp2: float


def _pad(beta_hat: np.ndarray, p: int, p_max: int) -> np.ndarray:
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    if beta_hat.size != p:
        raise ValidationError(f"beta_hat has length {beta_hat.size}, expected p = {p}")
    if p > p_max:
        raise ValidationError(f"p = {p} exceeds p_max = {p_max}")
    padded = np.zeros(p_max)
    padded[:p] = beta_hat
    return padded


def kl_gaussian_linear(beta_true, beta_hat, p: int, sigma: float) -> KlParts:
    """Closed-form expected KL and its two components."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    beta_true = np.asarray(beta_true, dtype=float).ravel()
    diff = beta_true - _pad(beta_hat, p, beta_true.size)
    scale = 2.0 * sigma * sigma
    total = math.fsum(diff**2) / scale
    comp1 = math.fsum(beta_true[p:] ** 2) / scale
    return KlParts(total, comp1, max(0.0, total - comp1))


def mc_kl_oracle(beta_true, beta_hat, p: int, sigma: float, n_draws: int, stream: RngStream) -> McEstimate:
    """Average (xβ − x_{1:p}β̂)²/(2σ²) over x ~ N(0, I_{p_max})."""
    if n_draws < config.KL_ORACLE_MIN_DRAWS:
        raise ValidationError(f"n_draws must be >= {config.KL_ORACLE_MIN_DRAWS}, got {n_draws}")
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    beta_true = np.asarray(beta_true, dtype=float).ravel()
    diff = beta_true - _pad(beta_hat, p, beta_true.size)

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty(n)
        rows = max(1, config.MC_CHUNK_SIZE // max(1, diff.size))
        for start in range(0, n, rows):
            stop = min(n, start + rows)
            out[start:stop] = rng.standard_normal((stop - start, diff.size)) @ diff
        return out

    return mc_estimate(lambda v: v**2 / (2.0 * sigma * sigma), sampler, n_draws, stream, vectorized=True)


# ──────────────────────────────────────────────
#  Simulation settings
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class SimSetting:
    name: str = "a"
    n: int = config.KL_N
    p_max: int = config.KL_P_MAX
    sigma: float = config.KL_SIGMA
    beta_scheme: str = "decreasing"
    custom_beta: Optional[tuple] = None
    estimator: Estimator = Estimator.PINV
    ridge_lambda: Optional[float] = None
    replications: int = config.KL_REPLICATIONS
    p_grid: tuple = field(default_factory=lambda: tuple(range(1, config.KL_P_MAX + 1)))
    base_seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"n must be >= 2, got {self.n}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma!r}")
        if self.replications < 2:
            raise ValidationError(f"replications must be >= 2, got {self.replications}")
        try:
            estimator = Estimator(self.estimator)
        except ValueError:
            raise ValidationError(f"estimator must be 'pinv' or 'ridge', got {self.estimator!r}") from None
        if estimator not in ESTIMATORS:
            raise ValidationError(f"estimator must be 'pinv' or 'ridge', got {estimator.value!r}")
        object.__setattr__(self, "estimator", estimator)
        if self.ridge_lambda is not None and not self.ridge_lambda > 0:
            raise ValidationError(f"ridge_lambda must be positive, got {self.ridge_lambda!r}")
        grid = tuple(int(p) for p in self.p_grid)
        if not grid:
            raise ValidationError("p_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("p_grid must be strictly increasing")
        if grid[0] < 1 or grid[-1] > self.p_max:
            raise ValidationError(f"p_grid values must lie in [1, {self.p_max}]")
        object.__setattr__(self, "p_grid", grid)
        # raises on a bad scheme / custom length
        beta_scheme_vector(self.beta_scheme, self.p_max, self.custom_beta)

    @property
    def beta(self) -> np.ndarray:
        return beta_scheme_vector(self.beta_scheme, self.p_max, self.custom_beta)

    @property
    def effective_lambda(self) -> Optional[float]:
        if self.estimator is not Estimator.RIDGE:
            return None
        if self.ridge_lambda is not None:
            return float(self.ridge_lambda)
        return default_ridge_lambda(self.sigma**2)


@dataclass(frozen=True)
class KlCurvePoint:
    p: int
    kl_total: McEstimate
    comp1: float
    comp2: McEstimate
    solver: Estimator


def solver_for(p: int, n: int, estimator: Estimator) -> Estimator:
    """Fit used at p: ridge everywhere for a ridge setting, else ols below n and pinv from n on."""
    estimator = Estimator(estimator)
    if estimator is Estimator.RIDGE:
        return Estimator.RIDGE
    return Estimator.OLS if p < n else Estimator.PINV


def switch_point(setting: SimSetting) -> int:
    """First p fitted with the generalized inverse in a pinv setting."""
    return setting.n


def _fit_at(data: Dataset, setting: SimSetting) -> LinearFit:
    solver = solver_for(data.p, setting.n, setting.estimator)
    if solver is Estimator.RIDGE:
        return ridge_fit(data, setting.effective_lambda)
    if solver is Estimator.OLS:
        try:
            return ols_fit(data)
        except RankDeficientError:
            return pinv_fit(data)
    return pinv_fit(data)


# ──────────────────────────────────────────────
#  Double descent run
# ──────────────────────────────────────────────
def _replicate(setting: SimSetting, beta: np.ndarray, stream: RngStream, r: int) -> np.ndarray:
    rng = stream.substream(r).generator()
    X = rng.standard_normal((setting.n, setting.p_max))
    y = X @ beta + setting.sigma * rng.standard_normal(setting.n)
    totals = np.empty(len(setting.p_grid))
    for i, p in enumerate(setting.p_grid):
        try:
            fit = _fit_at(Dataset(X[:, :p], y), setting)
            totals[i] = kl_gaussian_linear(beta, fit.coefficients, p, setting.sigma).total
        except (LabError, np.linalg.LinAlgError) as e:
            raise NumericalError(f"replication {r}, p = {p}: {e}") from e
        if not math.isfinite(totals[i]):
            raise NumericalError(f"replication {r}, p = {p}: non-finite KL divergence")
    return totals


def run_double_descent(setting: SimSetting, threads: int = config.DEFAULT_THREADS) -> list[KlCurvePoint]:
    """
    Simulate `setting.replications` training sets, fit nested models on the
    first p columns for every p in the grid, and average the divergences.
    """
    beta = setting.beta
    stream = RngStream(setting.base_seed)
    rows = parallel_map(
        lambda r: _replicate(setting, beta, stream, r), range(setting.replications), threads
    )
    totals = np.vstack(rows)
    scale = 2.0 * setting.sigma**2
    points = []
    for i, p in enumerate(setting.p_grid):
        total = McEstimate.from_values(totals[:, i])
        comp1 = math.fsum(beta[p:] ** 2) / scale
        comp2 = McEstimate(max(0.0, total.mean - comp1), total.std_error, total.n_samples)
        points.append(KlCurvePoint(p, total, comp1, comp2, solver_for(p, setting.n, setting.estimator)))
    return points
