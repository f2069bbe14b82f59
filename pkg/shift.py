"""
Uncertainty Lab — Distribution Shift
======================================
Train-versus-deployment transportability over finite (X, Y, Z) supports.
Each environment factorizes as f(x) f(z|x) f(y|x,z); what a model of Y given
X sees is the induced conditional

    f(y|x) = Σ_z f(y|x,z) f(z|x)

Environments are compared through the total-variation distance between
induced conditionals, maximized over deployment inputs.
"""

import math
from dataclasses import dataclass

import numpy as np

import config
from core_sim import RngStream
from utils import ValidationError, check_prob_vector, check_stochastic_rows


@dataclass(frozen=True)
class EnvSpec:
    """f_y_given_xz[i, k, j] = f(y_j | x_i, z_k); f_z_given_x[i, k] = f(z_k | x_i); f_x[i] = f(x_i)."""

    x_values: tuple
    y_values: tuple
    z_values: tuple
    f_y_given_xz: np.ndarray
    f_z_given_x: np.ndarray
    f_x: np.ndarray

    def __post_init__(self):
        supports = {}
        for name in ("x_values", "y_values", "z_values"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValidationError(f"{name} must not be empty")
            if len(set(values)) != len(values):
                raise ValidationError(f"{name} must be distinct, got {values}")
            supports[name] = values
            object.__setattr__(self, name, values)
        nx, ny, nz = (len(supports[n]) for n in ("x_values", "y_values", "z_values"))
        fy = np.asarray(self.f_y_given_xz, dtype=float)
        fz = np.asarray(self.f_z_given_x, dtype=float)
        if fy.shape != (nx, nz, ny):
            raise ValidationError(f"f_y_given_xz has shape {fy.shape}, expected {(nx, nz, ny)}")
        if fz.shape != (nx, nz):
            raise ValidationError(f"f_z_given_x has shape {fz.shape}, expected {(nx, nz)}")
        check_stochastic_rows(fy, "f_y_given_xz")
        check_stochastic_rows(fz, "f_z_given_x")
        fx = check_prob_vector(self.f_x, "f_x")
        if fx.size != nx:
            raise ValidationError(f"f_x has {fx.size} entries for {nx} x values")
        object.__setattr__(self, "f_y_given_xz", fy)
        object.__setattr__(self, "f_z_given_x", fz)
        object.__setattr__(self, "f_x", fx)

    def row(self, x) -> int:
        try:
            return self.x_values.index(x)
        except ValueError:
            raise ValidationError(f"x = {x!r} is not in the support {self.x_values}") from None


def induced_conditional(env: EnvSpec, x) -> np.ndarray:
    """f(y|x) = Σ_z f(y|x,z) f(z|x)."""
    i = env.row(x)
    fy, fz = env.f_y_given_xz[i], env.f_z_given_x[i]
    return np.array([math.fsum(fy[:, j] * fz) for j in range(len(env.y_values))])


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * math.fsum(np.abs(np.asarray(p) - np.asarray(q)))


def _check_compatible(train: EnvSpec, deploy: EnvSpec) -> None:
    for name in ("y_values", "z_values"):
        if getattr(train, name) != getattr(deploy, name):
            raise ValidationError(
                f"{name} differ between environments: {getattr(train, name)} vs {getattr(deploy, name)}"
            )
    outside = [x for x, m in zip(deploy.x_values, deploy.f_x) if m > 0 and x not in train.x_values]
    if outside:
        raise ValidationError(f"deployment x values outside the declared X support: {outside}")


def max_tv_distance(a: EnvSpec, b: EnvSpec) -> float:
    """Largest TV distance between induced conditionals over x with positive mass under b."""
    _check_compatible(a, b)
    return max(
        tv_distance(induced_conditional(a, x), induced_conditional(b, x))
        for x, m in zip(b.x_values, b.f_x)
        if m > 0
    )


def _tables_close(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    return bool(np.all(np.abs(a - b) <= tol))


def _z_independent(env: EnvSpec, tol: float) -> bool:
    for i in range(len(env.x_values)):
        live = env.f_y_given_xz[i][env.f_z_given_x[i] > 0]
        if np.any(live.max(axis=0) - live.min(axis=0) > tol):
            return False
    return True


@dataclass(frozen=True)
class XShift:
    x: object
    train_mass: float
    deploy_mass: float
    tv: float
    ood: bool


@dataclass(frozen=True)
class TransportReport:
    max_tv: float
    identical_superpop: bool
    componentwise_equal: bool
    z_cond_independent_both: bool
    transportable: bool
    ood_x: tuple
    per_x: tuple


def transportability_report(
    train: EnvSpec, deploy: EnvSpec, tolerance: float = config.SHIFT_TOLERANCE
) -> TransportReport:
    """
    Check the three sufficient conditions (identical super-population,
    equal f(y|x,z) and f(z|x), Y ⟂ Z | X in both environments) and measure
    the actual shift of f(y|x) on deployment inputs.
    """
    if not tolerance >= 0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance!r}")
    _check_compatible(train, deploy)
    ny, nz = len(train.y_values), len(train.z_values)
    # entrywise slack small enough that equal tables keep every TV below `tolerance`
    entry_tol = tolerance / (ny * (1 + nz))

    common = [x for x in deploy.x_values if x in train.x_values]
    ti = [train.row(x) for x in common]
    di = [deploy.row(x) for x in common]
    componentwise = _tables_close(
        train.f_y_given_xz[ti], deploy.f_y_given_xz[di], entry_tol
    ) and _tables_close(train.f_z_given_x[ti], deploy.f_z_given_x[di], entry_tol)
    identical = (
        componentwise
        and set(train.x_values) == set(deploy.x_values)
        and _tables_close(train.f_x[ti], deploy.f_x[di], entry_tol)
    )

    per_x = []
    for x, i in zip(common, di):
        tv = tv_distance(induced_conditional(train, x), induced_conditional(deploy, x))
        train_mass = float(train.f_x[train.row(x)])
        deploy_mass = float(deploy.f_x[i])
        per_x.append(XShift(x, train_mass, deploy_mass, tv, deploy_mass > 0 and train_mass == 0))
    live = [s.tv for s in per_x if s.deploy_mass > 0]
    max_tv = max(live)
    return TransportReport(
        max_tv=max_tv,
        identical_superpop=identical,
        componentwise_equal=componentwise,
        z_cond_independent_both=_z_independent(train, tolerance) and _z_independent(deploy, tolerance),
        transportable=max_tv <= tolerance,
        ood_x=tuple(s.x for s in per_x if s.ood),
        per_x=tuple(per_x),
    )


def sample_environment(env: EnvSpec, n: int, stream: RngStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, y, z) support indices of n draws from f(x) f(z|x) f(y|x,z)."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = stream.generator()

    def pick(cdf_rows: np.ndarray) -> np.ndarray:
        cdf = np.cumsum(cdf_rows, axis=-1)
        cdf[..., -1] = 1.0
        return (rng.random(cdf.shape[0])[:, None] >= cdf).sum(axis=1)

    x = pick(np.broadcast_to(env.f_x, (n, env.f_x.size)).copy())
    z = pick(env.f_z_given_x[x])
    y = pick(env.f_y_given_xz[x, z])
    return x, y, z
