"""
Uncertainty Lab — Missing Data
================================
Exact missing-data calculations over a finite (X, Y) table with response
indicator R (R = 1: Y observed). X is always observed; Y is the item subject
to nonresponse.

    P(Y=y | x, R=1) = P(R=1|y,x) / P(R=1|x) · P(Y=y | x)

The ratio is the bias factor. Also: respondent/nonrespondent variance
decomposition, MCAR/MAR/MNAR classification and the complete-case
efficiency simulation.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

import config
from core_sim import McEstimate, RngStream, parallel_map
from utils import NumericalError, ValidationError, check_prob_vector, check_probability


class Mechanism(str, Enum):
    MCAR = "MCAR"
    MAR = "MAR"
    MNAR = "MNAR"


@dataclass(frozen=True)
class MissingSpec:
    """joint[i][j] = P(X = x_i, Y = y_j); response[i][j] = P(R = 1 | y_j, x_i)."""

    x_values: tuple
    y_values: np.ndarray
    joint: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        x_values = tuple(float(x) for x in self.x_values)
        y_values = np.asarray(self.y_values, dtype=float).ravel()
        shape = (len(x_values), y_values.size)
        if not x_values or y_values.size == 0:
            raise ValidationError("x_values and y_values must not be empty")
        if len(set(x_values)) != len(x_values) or np.unique(y_values).size != y_values.size:
            raise ValidationError("x_values and y_values must be distinct")
        joint = np.asarray(self.joint, dtype=float)
        response = np.asarray(self.response, dtype=float)
        for name, table in (("joint", joint), ("response", response)):
            if table.shape != shape:
                raise ValidationError(f"{name} has shape {table.shape}, expected {shape}")
        check_prob_vector(joint.ravel(), "joint")
        for i, j in np.ndindex(*shape):
            check_probability(response[i, j], f"response[{i}][{j}] (x = {x_values[i]}, y = {y_values[j]})")
        for i, x in enumerate(x_values):
            px = math.fsum(joint[i])
            if px > 0 and math.fsum(joint[i] * response[i]) <= 0:
                raise ValidationError(f"P(R=1 | x = {x}) = 0: no complete cases at this x")
        object.__setattr__(self, "x_values", x_values)
        object.__setattr__(self, "y_values", y_values)
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "response", response)

    def row(self, x) -> int:
        try:
            return self.x_values.index(float(x))
        except ValueError:
            raise ValidationError(f"x = {x!r} is not in the support {self.x_values}") from None

    def px(self, x) -> float:
        return math.fsum(self.joint[self.row(x)])


# ──────────────────────────────────────────────
#  Conditionals
# ──────────────────────────────────────────────
def population_conditional(spec: MissingSpec, x) -> np.ndarray:
    """P(Y | x) from the joint table."""
    px = spec.px(x)
    if px <= 0:
        raise ValidationError(f"P(x = {x}) = 0: the conditional is undefined")
    return spec.joint[spec.row(x)] / px


def response_rate(spec: MissingSpec, x) -> float:
    """P(R=1 | x); exactly the common value when the response does not vary with y."""
    pop = population_conditional(spec, x)
    r = spec.response[spec.row(x)][pop > 0]
    if np.all(r == r[0]):
        return float(r[0])
    return math.fsum(spec.response[spec.row(x)] * pop)


@dataclass(frozen=True)
class StratumConditional:
    probs: np.ndarray
    bias_factor: np.ndarray


def complete_case_conditional(spec: MissingSpec, x) -> StratumConditional:
    """P(Y | x, R=1) and the bias factor P(R=1|y,x) / P(R=1|x)."""
    pop = population_conditional(spec, x)
    rate = response_rate(spec, x)
    if rate <= 0:
        raise ValidationError(f"P(R=1 | x = {x}) = 0: no complete cases")
    factor = spec.response[spec.row(x)] / rate
    return StratumConditional(factor * pop, factor)


def nonrespondent_conditional(spec: MissingSpec, x) -> StratumConditional:
    """P(Y | x, R=0) with factor (1 − P(R=1|y,x)) / (1 − P(R=1|x))."""
    pop = population_conditional(spec, x)
    rate = response_rate(spec, x)
    if rate >= 1:
        raise ValidationError(f"P(R=1 | x = {x}) = 1: there are no nonrespondents")
    factor = (1.0 - spec.response[spec.row(x)]) / (1.0 - rate)
    return StratumConditional(factor * pop, factor)


def classify_mechanism(spec: MissingSpec, tol: float = config.PROB_TOLERANCE) -> Mechanism:
    """
    MCAR: P(R=1|y,x) is one constant over every cell with positive mass.
    MAR: constant in y within each x, but varying across x.
    MNAR: anything else.
    """
    live = spec.joint > 0
    rates = spec.response[live]
    if rates.max() - rates.min() <= tol:
        return Mechanism.MCAR
    for i in range(len(spec.x_values)):
        r = spec.response[i][live[i]]
        if r.size and r.max() - r.min() > tol:
            return Mechanism.MNAR
    return Mechanism.MAR


# ──────────────────────────────────────────────
#  Variance decomposition
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class Stratum:
    r: int
    weight: float
    cond_mean: float
    cond_var: float
    bias: float


@dataclass(frozen=True)
class VarianceDecomposition:
    x: float
    population_mean: float
    population_var: float
    per_stratum: tuple


def _moments(probs: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(probs * y)
    return mean, math.fsum(probs * (y - mean) ** 2)


def variance_decomposition(spec: MissingSpec, x, tol: float = config.IDENTITY_TOLERANCE) -> VarianceDecomposition:
    """
    Var(Y|x) = Σ_r P(R=r|x) [Var(Y|x,r) + bias(x,r)²], bias(x,r) = E(Y|x,r) − E(Y|x).
    Each bias is checked against (1 − P(R=r|x)) (E(Y|x,r) − E(Y|x,R≠r)).
    """
    y = spec.y_values
    mean, var = _moments(population_conditional(spec, x), y)
    rate = response_rate(spec, x)
    if rate >= 1.0:
        _, cond_var = _moments(complete_case_conditional(spec, x).probs, y)
        return VarianceDecomposition(float(x), mean, var, (Stratum(1, 1.0, mean, cond_var, 0.0),))

    resp_mean, resp_var = _moments(complete_case_conditional(spec, x).probs, y)
    non_mean, non_var = _moments(nonrespondent_conditional(spec, x).probs, y)
    strata = (
        Stratum(1, rate, resp_mean, resp_var, resp_mean - mean),
        Stratum(0, 1.0 - rate, non_mean, non_var, non_mean - mean),
    )
    factored = ((1.0 - rate) * (resp_mean - non_mean), rate * (non_mean - resp_mean))
    for s, expected in zip(strata, factored):
        if abs(s.bias - expected) > tol * max(1.0, abs(mean)):
            raise NumericalError(
                f"stratum R={s.r} at x = {x}: bias {s.bias!r} disagrees with factored form {expected!r}"
            )
    rebuilt = math.fsum(s.weight * (s.cond_var + s.bias**2) for s in strata)
    if abs(rebuilt - var) > tol * max(1.0, var):
        raise NumericalError(f"variance decomposition at x = {x} rebuilds {rebuilt!r}, expected {var!r}")
    return VarianceDecomposition(float(x), mean, var, strata)


# ──────────────────────────────────────────────
#  Complete-case efficiency
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class Efficiency:
    k_features: int
    cell_missing_rate: float
    analytic_fraction: float
    simulated_fraction: McEstimate


def complete_case_efficiency(
    k_features: int,
    cell_missing_rate: float,
    n: int,
    reps: int,
    stream: RngStream,
    threads: int = config.DEFAULT_THREADS,
) -> Efficiency:
    """
    Share of units left after dropping every unit with at least one of
    k independently missing feature cells: (1 − rate)^k.
    """
    if k_features < 1 or n < 1 or reps < 2:
        raise ValidationError(f"need k_features >= 1, n >= 1, reps >= 2 (got {k_features}, {n}, {reps})")
    rate = check_probability(cell_missing_rate, "cell_missing_rate")
    if rate >= 1.0:
        raise ValidationError("cell_missing_rate must be < 1")

    def replicate(r: int) -> float:
        missing = stream.substream(r).generator().random((n, k_features)) < rate
        return float(np.count_nonzero(~missing.any(axis=1))) / n

    simulated = McEstimate.from_values(parallel_map(replicate, range(reps), threads))
    return Efficiency(k_features, rate, (1.0 - rate) ** k_features, simulated)
