"""
Uncertainty Lab — Errors in X
===============================
Classical additive measurement error: the model sees X = Z + U instead of the
error-free Z. Closed forms for the linear-Gaussian family, the attenuated
naive slope, and localized Monte-Carlo checks.

    Z ~ N(mu_z, τ²),  U ~ N(0, ω²),  Y | z ~ N(α + γz, σ²),  Y ⟂ X | Z
"""

import math
from dataclasses import dataclass

import numpy as np

import config
from core_sim import McEstimate, RngStream
from utils import ValidationError


@dataclass(frozen=True)
class LinearGaussianMeSpec:
    mu_z: float = 0.0
    tau2: float = 1.0
    omega2: float = 1.0
    alpha: float = 0.0
    gamma: float = 1.0
    sigma2: float = 0.1

    def __post_init__(self):
        for name in ("tau2", "omega2", "sigma2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be a finite value >= 0, got {value!r}")
        for name in ("mu_z", "alpha", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    def _require_conditioning(self) -> None:
        if self.tau2 + self.omega2 <= 0:
            raise ValidationError("tau2 = omega2 = 0: X carries no distribution to condition on")

    @property
    def reliability(self) -> float:
        """τ²/(τ² + ω²)."""
        self._require_conditioning()
        return self.tau2 / (self.tau2 + self.omega2)

    @property
    def z_var_given_x(self) -> float:
        self._require_conditioning()
        return self.tau2 * self.omega2 / (self.tau2 + self.omega2)

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = self.mu_z + math.sqrt(self.tau2) * rng.standard_normal(n)
        x = z + math.sqrt(self.omega2) * rng.standard_normal(n)
        y = self.alpha + self.gamma * z + math.sqrt(self.sigma2) * rng.standard_normal(n)
        return z, x, y


@dataclass(frozen=True)
class ErrorProneVariance:
    total: float
    mean_cond_var: float
    var_cond_mean: float


@dataclass(frozen=True)
class Attenuation:
    true_slope: float
    naive_slope: float
    attenuation: float


def error_free_variance(spec: LinearGaussianMeSpec) -> float:
    return spec.sigma2


def error_prone_variance(spec: LinearGaussianMeSpec) -> ErrorProneVariance:
    """Var(Y|x) = E[Var(Y|Z)|x] + Var(E[Y|Z]|x) = σ² + γ² τ²ω²/(τ²+ω²)."""
    var_cond_mean = spec.gamma**2 * spec.z_var_given_x
    return ErrorProneVariance(spec.sigma2 + var_cond_mean, spec.sigma2, var_cond_mean)


def omitted_limit_variance(spec: LinearGaussianMeSpec) -> float:
    """Var(Y) when Z is ignored entirely; the ω² → ∞ limit of error_prone_variance."""
    return spec.sigma2 + spec.gamma**2 * spec.tau2


def naive_slope_attenuation(spec: LinearGaussianMeSpec) -> Attenuation:
    lam = spec.reliability
    return Attenuation(spec.gamma, spec.gamma * lam, lam)


# ──────────────────────────────────────────────
#  Monte-Carlo checks
# ──────────────────────────────────────────────
def _draw(spec: LinearGaussianMeSpec, n_draws: int, stream: RngStream):
    rng = stream.generator()
    chunks = [
        spec.sample(rng, min(config.MC_CHUNK_SIZE, n_draws - start))
        for start in range(0, n_draws, config.MC_CHUNK_SIZE)
    ]
    return tuple(np.concatenate(parts) for parts in zip(*chunks))


def mc_errors_x_oracle(
    spec: LinearGaussianMeSpec, x0: float, bandwidth: float, n_draws: int, stream: RngStream
) -> McEstimate:
    """Var(y | x ∈ [x0 − h, x0 + h]) from simulated (z, x, y) triples."""
    if n_draws < config.ERRORS_X_MIN_DRAWS:
        raise ValidationError(f"n_draws must be >= {config.ERRORS_X_MIN_DRAWS}, got {n_draws}")
    if not bandwidth > 0:
        raise ValidationError(f"bandwidth must be positive, got {bandwidth!r}")
    spec._require_conditioning()
    _, x, y = _draw(spec, n_draws, stream)
    y = y[np.abs(x - x0) <= bandwidth]
    k = y.size
    if k < config.ERRORS_X_MIN_WINDOW:
        raise ValidationError(
            f"only {k} draws fell within {bandwidth} of x0 = {x0}; "
            f"need {config.ERRORS_X_MIN_WINDOW}, increase the bandwidth or n_draws"
        )
    centred = (y - math.fsum(y) / k) ** 2 * k / (k - 1)
    return McEstimate.from_values(centred)


@dataclass(frozen=True)
class NaiveSlope:
    slope: float
    std_error: float
    n_samples: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.slope - target) <= n_se * self.std_error


def mc_naive_slope(spec: LinearGaussianMeSpec, n_draws: int, stream: RngStream) -> NaiveSlope:
    """OLS slope of y on x over simulated triples, with its usual standard error."""
    if n_draws < 3:
        raise ValidationError(f"n_draws must be >= 3, got {n_draws}")
    spec._require_conditioning()
    _, x, y = _draw(spec, n_draws, stream)
    xc = x - math.fsum(x) / n_draws
    yc = y - math.fsum(y) / n_draws
    sxx = math.fsum(xc * xc)
    slope = math.fsum(xc * yc) / sxx
    resid = yc - slope * xc
    s2 = math.fsum(resid * resid) / (n_draws - 2)
    return NaiveSlope(slope, math.sqrt(s2 / sxx), n_draws)
