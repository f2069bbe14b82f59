"""
Uncertainty Lab — Label Noise
===============================
Error-prone labels Y standing in for true classes Z, all at one fixed x.
Observed class probabilities, the false-1/false-0 bias split, the
equal-error and minority-class results, and a sampling oracle.
"""

import math
from dataclasses import dataclass
from typing import Hashable

import numpy as np

from core_sim import McEstimate, RngStream
from utils import InfeasibleError, ValidationError, check_prob_vector, check_probability, check_stochastic_rows


@dataclass(frozen=True)
class NoisyLabelSpec:
    """error_matrix[z][y] = P(Y = y | Z = z, x); pz_given_x[z] = P(Z = z | x)."""

    classes: tuple
    pz_given_x: np.ndarray
    error_matrix: np.ndarray

    def __post_init__(self):
        classes = tuple(self.classes)
        k = len(classes)
        if k < 2:
            raise ValidationError(f"need at least 2 classes, got {k}")
        if len(set(classes)) != k:
            raise ValidationError(f"classes must be distinct, got {classes}")
        pz = check_prob_vector(self.pz_given_x, "pz_given_x")
        if pz.size != k:
            raise ValidationError(f"pz_given_x has {pz.size} entries for {k} classes")
        err = np.asarray(self.error_matrix, dtype=float)
        if err.shape != (k, k):
            raise ValidationError(f"error_matrix has shape {err.shape}, expected ({k}, {k})")
        check_stochastic_rows(err, "error_matrix")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "pz_given_x", pz)
        object.__setattr__(self, "error_matrix", err)

    def index(self, cls: Hashable) -> int:
        try:
            return self.classes.index(cls)
        except ValueError:
            raise ValidationError(f"class {cls!r} is not one of {self.classes}") from None

    @classmethod
    def symmetric_binary(cls, p_z1: float, c: float) -> "NoisyLabelSpec":
        """Binary spec with the same conditional error c for both classes."""
        p_z1, c = check_probability(p_z1, "p_z1"), check_probability(c, "c")
        return cls((0, 1), np.array([1.0 - p_z1, p_z1]), np.array([[1.0 - c, c], [c, 1.0 - c]]))


def observed_class_probs(spec: NoisyLabelSpec) -> np.ndarray:
    """P(Y = y | x) = Σ_z E[z][y] P(Z = z | x)."""
    k = len(spec.classes)
    return np.array([math.fsum(spec.error_matrix[:, y] * spec.pz_given_x) for y in range(k)])


def joint_error_table(spec: NoisyLabelSpec) -> np.ndarray:
    """P(Y = y, Z = z | x) indexed [y, z]: row sums give P(Y|x), column sums P(Z|x)."""
    return (spec.error_matrix * spec.pz_given_x[:, None]).T


@dataclass(frozen=True)
class LabelBias:
    cls: Hashable
    bias: float
    false_positive_mass: float
    false_negative_mass: float


def label_bias(spec: NoisyLabelSpec, target_class: Hashable) -> LabelBias:
    """
    P(Y=υ|x) − P(Z=υ|x) = Σ_{z≠υ} E[z][υ] P(z|x) − Σ_{y≠υ} E[υ][y] P(υ|x).
    """
    u = spec.index(target_class)
    others = [j for j in range(len(spec.classes)) if j != u]
    false_pos = math.fsum(spec.error_matrix[others, u] * spec.pz_given_x[others])
    false_neg = math.fsum(spec.error_matrix[u, others]) * spec.pz_given_x[u]
    return LabelBias(target_class, false_pos - false_neg, false_pos, false_neg)


def multiclass_bias_report(spec: NoisyLabelSpec) -> list[LabelBias]:
    return [label_bias(spec, c) for c in spec.classes]


def equal_error_bias(p_z1: float, c: float) -> float:
    """Class-1 bias when both classes share the conditional error c: c (1 − 2 p_z1)."""
    p_z1, c = check_probability(p_z1, "p_z1"), check_probability(c, "c")
    return c * ((1.0 - p_z1) - p_z1)


def unbiasedness_minority_error(p_z1: float, false_negative_cond: float) -> float:
    """
    P(Y=1|x, Z=0) that exactly offsets P(Y=0|x, Z=1) = false_negative_cond:
    the false-negative rate times the odds of class 1.
    """
    p_z1 = check_probability(p_z1, "p_z1", open_interval=True)
    fn = check_probability(false_negative_cond, "false_negative_cond")
    required = fn * p_z1 / (1.0 - p_z1)
    if required > 1.0:
        raise InfeasibleError(
            f"unbiased labels would need P(Y=1|x, Z=0) = {required!r} > 1", required
        )
    return required


def mc_observed_class_probs(spec: NoisyLabelSpec, n_draws: int, stream: RngStream) -> list[McEstimate]:
    """Sample z ~ P(Z|x), then y ~ E[z]; one estimate per class."""
    if n_draws < 2:
        raise ValidationError(f"n_draws must be >= 2, got {n_draws}")
    rng = stream.generator()
    k = len(spec.classes)
    z = rng.choice(k, size=n_draws, p=spec.pz_given_x / spec.pz_given_x.sum())
    # inverse-CDF draw of y from row z of the error matrix
    cdf = np.cumsum(spec.error_matrix, axis=1)
    cdf[:, -1] = 1.0
    y = (rng.random(n_draws)[:, None] >= cdf[z]).sum(axis=1)
    return [McEstimate.from_values((y == j).astype(float)) for j in range(k)]
