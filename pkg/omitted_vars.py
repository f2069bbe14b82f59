"""
Uncertainty Lab — Omitted Variables
=====================================
What happens to E(Y|x) and Var(Y|x) when a model leaves out a variable Z
with finite support. Exact weighted sums, a per-z comparison of full-model
and omitted-model variance, the binary-Y heterogeneity/bias check and the
marginal-effect split behind Simpson's paradox.

A spec is given through P(Z|x), E(Y|x,z) and Var(Y|x,z) only; no higher
moments are needed.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Hashable, Sequence, Union

import numpy as np
from scipy.special import expit

import config
from core_sim import McEstimate, RngStream
from utils import ValidationError, check_prob_vector


class VarianceClass(str, Enum):
    UNDER = "under"     # full-model variance below the omitted-model variance
    OVER = "over"
    EQUAL = "equal"


@dataclass(frozen=True)
class DiscreteZSpec:
    z_values: tuple
    pz_given_x: Callable[[float], Sequence[float]]
    mean_y: Callable[[float, Hashable], float]
    var_y: Callable[[float, Hashable], float]

    def __post_init__(self):
        z_values = tuple(self.z_values)
        if not z_values:
            raise ValidationError("z_values must not be empty")
        if len(set(z_values)) != len(z_values):
            raise ValidationError(f"z_values must be distinct, got {z_values}")
        object.__setattr__(self, "z_values", z_values)

    @classmethod
    def from_table(cls, z_values, x_values, pz_given_x, mean_y, var_y) -> "DiscreteZSpec":
        """Spec from per-x rows: pz_given_x[i][k] = P(z_k | x_i), likewise for means and variances."""
        x_values = [float(x) for x in x_values]
        shape = (len(x_values), len(z_values))
        tables = {}
        for name, table in (("pz_given_x", pz_given_x), ("mean_y", mean_y), ("var_y", var_y)):
            arr = np.asarray(table, dtype=float)
            if arr.shape != shape:
                raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
            tables[name] = arr
        for i, x in enumerate(x_values):
            check_prob_vector(tables["pz_given_x"][i], f"pz_given_x row [{i}] (x = {x})")
        if np.any(tables["var_y"] < 0):
            i, k = np.argwhere(tables["var_y"] < 0)[0]
            raise ValidationError(f"var_y row [{i}] has a negative variance at z = {z_values[k]!r}")
        row_of = {x: i for i, x in enumerate(x_values)}
        col_of = {z: k for k, z in enumerate(z_values)}

        def row(x) -> int:
            try:
                return row_of[float(x)]
            except KeyError:
                raise ValidationError(f"x = {x!r} is not in the tabulated x values {x_values}") from None

        return cls(
            tuple(z_values),
            lambda x: tables["pz_given_x"][row(x)],
            lambda x, z: float(tables["mean_y"][row(x), col_of[z]]),
            lambda x, z: float(tables["var_y"][row(x), col_of[z]]),
        )

    def weights(self, x) -> np.ndarray:
        return check_prob_vector(self.pz_given_x(x), f"P(Z|x = {x!r})")

    def means(self, x) -> np.ndarray:
        return np.array([float(self.mean_y(x, z)) for z in self.z_values])

    def variances(self, x) -> np.ndarray:
        out = np.array([float(self.var_y(x, z)) for z in self.z_values])
        bad = np.flatnonzero(~np.isfinite(out) | (out < 0))
        if bad.size:
            k = int(bad[0])
            raise ValidationError(f"Var(Y|x = {x!r}, z = {self.z_values[k]!r}) = {out[k]!r} is not a variance")
        return out


def linear_binary_spec(
    beta0: float,
    beta_x: float,
    beta_z: float,
    pz1: Union[float, Callable[[float], float]],
    var0: float = 0.0,
    var1: float = 0.0,
) -> DiscreteZSpec:
    """E(Y|x,z) = β0 + β_x x + β_z z for z ∈ {0, 1}; P(Z=1|x) constant or a function of x."""
    prob = pz1 if callable(pz1) else (lambda x: pz1)
    variances = (float(var0), float(var1))
    return DiscreteZSpec(
        (0, 1),
        lambda x: (1.0 - prob(x), prob(x)),
        lambda x, z: beta0 + beta_x * x + beta_z * z,
        lambda x, z: variances[z],
    )


# ──────────────────────────────────────────────
#  Marginal mean, bias and variance
# ──────────────────────────────────────────────
def marginal_mean(spec: DiscreteZSpec, x) -> float:
    """E(Y|x) = Σ_z E(Y|x,z) P(z|x)."""
    return math.fsum(spec.weights(x) * spec.means(x))


def ovb_bias(spec: DiscreteZSpec, x, z) -> float:
    if z not in spec.z_values:
        raise ValidationError(f"z = {z!r} is not in the support {spec.z_values}")
    return float(spec.mean_y(x, z)) - marginal_mean(spec, x)


@dataclass(frozen=True)
class ZTerm:
    z: Hashable
    weight: float
    cond_var: float
    bias: float
    classification: VarianceClass


@dataclass(frozen=True)
class OvbReport:
    x: float
    marginal_mean: float
    marginal_var: float
    per_z: tuple

    @property
    def expected_cond_var(self) -> float:
        return math.fsum(t.weight * t.cond_var for t in self.per_z)

    @property
    def expected_sq_bias(self) -> float:
        return math.fsum(t.weight * t.bias**2 for t in self.per_z)


def classify_variance(cond_var: float, marginal_var: float, tol: float = config.CLASSIFY_TOLERANCE) -> VarianceClass:
    slack = tol * max(1.0, abs(marginal_var))
    if cond_var < marginal_var - slack:
        return VarianceClass.UNDER
    if cond_var > marginal_var + slack:
        return VarianceClass.OVER
    return VarianceClass.EQUAL


def marginal_variance(spec: DiscreteZSpec, x) -> OvbReport:
    """Var(Y|x) = E_{Z|x}[Var(Y|x,Z)] + E_{Z|x}[bias(x,Z)²], with every z classified."""
    w, m, v = spec.weights(x), spec.means(x), spec.variances(x)
    mean = math.fsum(w * m)
    bias = m - mean
    total = math.fsum(np.concatenate([w * v, w * bias**2]))
    terms = tuple(
        ZTerm(z, float(w[k]), float(v[k]), float(bias[k]), classify_variance(float(v[k]), total))
        for k, z in enumerate(spec.z_values)
    )
    return OvbReport(x, mean, total, terms)


@dataclass(frozen=True)
class CaseAnalysis:
    constant_variance: bool
    expected_cond_var: float
    has_over: bool
    below_average: tuple     # z with Var(Y|x,z) strictly below E[Var(Y|x,Z)]


def case_analysis(report: OvbReport, tol: float = config.CLASSIFY_TOLERANCE) -> CaseAnalysis:
    """
    Compare full-model variances over z with positive weight. Constant
    variances leave no z above the omitted-model variance; heterogeneous ones
    always leave some z below their weighted average.
    """
    live = [t for t in report.per_z if t.weight > 0]
    avg = report.expected_cond_var
    slack = tol * max(1.0, abs(avg))
    variances = [t.cond_var for t in live]
    constant = max(variances) - min(variances) <= slack
    return CaseAnalysis(
        constant_variance=constant,
        expected_cond_var=avg,
        has_over=any(t.classification is VarianceClass.OVER for t in live),
        below_average=tuple(t.z for t in live if t.cond_var < avg - slack),
    )


# ──────────────────────────────────────────────
#  Binary Y
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class BinaryOvb:
    variance_heterogeneous: bool
    biased: bool
    exception_case: bool


def binary_ovb_classifier(p1: float, p2: float, tol: float = config.CLASSIFY_TOLERANCE) -> BinaryOvb:
    """
    Success probabilities at two z values. Different means always come with
    different Bernoulli variances, except when p1 = 1 − p2.
    """
    for name, p in (("p1", p1), ("p2", p2)):
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {p!r}")
    biased = abs(p1 - p2) > tol
    heterogeneous = abs(p1 * (1 - p1) - p2 * (1 - p2)) > tol
    return BinaryOvb(heterogeneous, biased, biased and abs(p1 - (1.0 - p2)) <= tol)


# ──────────────────────────────────────────────
#  Marginal effects (Simpson's paradox)
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class LogisticBinaryModel:
    """E(Y|x,z) = β0 + β_x x + β_z z with P(Z=1|x) = logistic(a + b x)."""

    beta0: float
    beta_x: float
    beta_z: float
    a: float = 0.0
    b: float = 0.0
    var0: float = 0.0
    var1: float = 0.0

    def pz1(self, x: float) -> float:
        return float(expit(self.a + self.b * x))

    def pz1_slope(self, x: float) -> float:
        p = self.pz1(x)
        return self.b * p * (1.0 - p)

    def as_spec(self) -> DiscreteZSpec:
        return linear_binary_spec(self.beta0, self.beta_x, self.beta_z, self.pz1, self.var0, self.var1)


@dataclass(frozen=True)
class MarginalEffect:
    term_effect: float
    term_distribution: float
    full_model_effect: float
    finite_difference: float


def marginal_effect_terms(
    model: LogisticBinaryModel, x: float, step: float = config.FINITE_DIFF_STEP
) -> MarginalEffect:
    """
    d/dx E(Y|x) split into the per-z effect Σ_z ∂E(Y|x,z)/∂x P(z|x) = β_x and
    the shift of P(Z|x), Σ_z E(Y|x,z) ∂P(z|x)/∂x = β_z p'(x).
    """
    term_effect = model.beta_x
    term_distribution = model.beta_z * model.pz1_slope(x)
    spec = model.as_spec()
    fd = (marginal_mean(spec, x + step) - marginal_mean(spec, x - step)) / (2.0 * step)
    return MarginalEffect(term_effect, term_distribution, term_effect + term_distribution, fd)


# ──────────────────────────────────────────────
#  Sampling oracle
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class MarginalMoments:
    mean: McEstimate
    var: McEstimate


def mc_marginal_moments(spec: DiscreteZSpec, x, n_draws: int, stream: RngStream) -> MarginalMoments:
    """Draw z ~ P(Z|x), then y ~ N(E(Y|x,z), Var(Y|x,z)); return sample moments of y."""
    if n_draws < 2:
        raise ValidationError(f"n_draws must be >= 2, got {n_draws}")
    rng = stream.generator()
    w, m, v = spec.weights(x), spec.means(x), spec.variances(x)
    idx = rng.choice(len(w), size=n_draws, p=w / w.sum())
    y = m[idx] + np.sqrt(v[idx]) * rng.standard_normal(n_draws)
    mean = McEstimate.from_values(y)
    centred = (y - mean.mean) ** 2 * n_draws / (n_draws - 1)
    return MarginalMoments(mean, McEstimate.from_values(centred))
