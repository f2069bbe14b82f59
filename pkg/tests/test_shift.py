import numpy as np
import pytest

from shift import (
    EnvSpec,
    induced_conditional,
    max_tv_distance,
    sample_environment,
    transportability_report,
)
from utils import ValidationError


def _env(fy, fz, fx, x_values=(0, 1)) -> EnvSpec:
    nz, ny = np.shape(fy)[1], np.shape(fy)[2]
    return EnvSpec(x_values, tuple(range(ny)), tuple(range(nz)), fy, fz, fx)


def _mixture_pair(train_z1: float, deploy_z1: float) -> tuple[EnvSpec, EnvSpec]:
    """Binary Y = Z, one x; only f(z|x) moves between environments."""
    fy = [[[1.0, 0.0], [0.0, 1.0]]]
    train = _env(fy, [[1 - train_z1, train_z1]], [1.0], x_values=(0,))
    deploy = _env(fy, [[1 - deploy_z1, deploy_z1]], [1.0], x_values=(0,))
    return train, deploy


def _random_env(rng, nx: int, ny: int, nz: int) -> EnvSpec:
    fy = rng.dirichlet(np.ones(ny), size=(nx, nz))
    fz = rng.dirichlet(np.ones(nz), size=nx)
    fx = rng.dirichlet(np.ones(nx))
    return _env(fy, fz, fx, x_values=tuple(range(nx)))


def _random_pair(rng) -> tuple[EnvSpec, EnvSpec]:
    nx, ny, nz = (int(v) for v in rng.integers(1, 4, size=3) + 1)
    train = _random_env(rng, nx, ny, nz)
    mode = int(rng.integers(0, 4))
    if mode == 0:
        return train, train
    if mode == 1:
        fx = rng.dirichlet(np.ones(nx))
        return train, _env(train.f_y_given_xz, train.f_z_given_x, fx, train.x_values)
    if mode == 2:
        # f(y|x) shared and free of z; f(z|x) and f(x) differ
        fy_x = rng.dirichlet(np.ones(ny), size=nx)
        fy = np.repeat(fy_x[:, None, :], nz, axis=1)
        a = _env(fy, rng.dirichlet(np.ones(nz), size=nx), rng.dirichlet(np.ones(nx)), train.x_values)
        b = _env(fy, rng.dirichlet(np.ones(nz), size=nx), rng.dirichlet(np.ones(nx)), train.x_values)
        return a, b
    return train, _random_env(rng, nx, ny, nz)


# ──────────────────────────────────────────────
#  Induced conditionals
# ──────────────────────────────────────────────
def test_induced_conditional_mixture():
    train, deploy = _mixture_pair(0.2, 0.8)
    assert induced_conditional(train, 0) == pytest.approx([0.8, 0.2], abs=1e-15)
    assert induced_conditional(deploy, 0) == pytest.approx([0.2, 0.8], abs=1e-15)


def test_induced_conditional_is_a_distribution(stream):
    rng = stream.generator()
    for _ in range(100):
        env = _random_env(rng, 3, 4, 2)
        for x in env.x_values:
            probs = induced_conditional(env, x)
            assert np.all(probs >= 0)
            assert abs(probs.sum() - 1.0) < 1e-12


def test_unknown_x(stream):
    env = _random_env(stream.generator(), 2, 2, 2)
    with pytest.raises(ValidationError, match="not in the support"):
        induced_conditional(env, 7)


def test_invalid_env_tables():
    with pytest.raises(ValidationError, match="f_y_given_xz row \\[0,1\\]"):
        _env([[[0.5, 0.5], [0.5, 0.6]]], [[0.5, 0.5]], [1.0], x_values=(0,))
    with pytest.raises(ValidationError, match="f_z_given_x"):
        _env([[[0.5, 0.5], [0.5, 0.5]]], [[0.7, 0.5]], [1.0], x_values=(0,))
    with pytest.raises(ValidationError, match="shape"):
        _env([[[0.5, 0.5], [0.5, 0.5]]], [[0.5, 0.5]], [0.5, 0.5], x_values=(0, 1))


# ──────────────────────────────────────────────
#  Transportability report
# ──────────────────────────────────────────────
def test_identical_environments(stream):
    env = _random_env(stream.generator(), 3, 2, 3)
    report = transportability_report(env, env)
    assert report.max_tv == 0.0
    assert report.identical_superpop and report.componentwise_equal and report.transportable
    assert report.ood_x == ()


def test_identical_under_reordered_x_support(stream):
    rng = stream.generator()
    fy = rng.dirichlet(np.ones(2), size=(3, 2))
    fz = rng.dirichlet(np.ones(2), size=3)
    fx = np.array([0.2, 0.3, 0.5])
    order = [2, 0, 1]
    train = _env(fy, fz, fx, x_values=("a", "b", "c"))
    deploy = _env(fy[order], fz[order], fx[order], x_values=("c", "a", "b"))
    report = transportability_report(train, deploy)
    assert report.identical_superpop and report.componentwise_equal
    assert report.max_tv == 0.0
    moved = _env(fy[order], fz[order], fx, x_values=("c", "a", "b"))
    assert not transportability_report(train, moved).identical_superpop


def test_shifted_marginal_only(stream):
    rng = stream.generator()
    train = _random_env(rng, 3, 2, 2)
    deploy = _env(train.f_y_given_xz, train.f_z_given_x, [0.05, 0.05, 0.9], train.x_values)
    report = transportability_report(train, deploy)
    assert not report.identical_superpop
    assert report.componentwise_equal
    assert report.transportable


def test_mixture_shift():
    train, deploy = _mixture_pair(0.2, 0.8)
    report = transportability_report(train, deploy)
    assert report.max_tv == pytest.approx(0.6, abs=1e-15)
    assert not report.transportable
    assert not report.z_cond_independent_both
    assert not report.componentwise_equal


def test_independence_alone_does_not_transport():
    # Y ignores Z in both environments, yet f(y|x) itself moves
    train = _env([[[0.9, 0.1], [0.9, 0.1]]], [[0.5, 0.5]], [1.0], x_values=(0,))
    deploy = _env([[[0.6, 0.4], [0.6, 0.4]]], [[0.5, 0.5]], [1.0], x_values=(0,))
    report = transportability_report(train, deploy)
    assert report.z_cond_independent_both
    assert not report.transportable
    assert report.max_tv == pytest.approx(0.3, abs=1e-15)


def test_independence_ignores_impossible_z():
    # the z = 1 row is never reached, so it does not break independence
    env = _env([[[0.7, 0.3], [0.0, 1.0]]], [[1.0, 0.0]], [1.0], x_values=(0,))
    assert transportability_report(env, env).z_cond_independent_both


def test_ood_points_flagged():
    fy = np.full((3, 1, 2), 0.5)
    fz = np.ones((3, 1))
    train = _env(fy, fz, [0.5, 0.5, 0.0], x_values=(0, 1, 2))
    deploy = _env(fy, fz, [0.2, 0.3, 0.5], x_values=(0, 1, 2))
    report = transportability_report(train, deploy)
    assert report.ood_x == (2,)
    assert [s.ood for s in report.per_x] == [False, False, True]


def test_zero_deploy_mass_excluded_from_max():
    fz = np.ones((2, 1))
    train = _env([[[0.5, 0.5]], [[0.9, 0.1]]], fz, [0.5, 0.5])
    deploy = _env([[[0.5, 0.5]], [[0.1, 0.9]]], fz, [1.0, 0.0])
    report = transportability_report(train, deploy)
    assert report.max_tv == 0.0
    assert report.transportable
    assert report.per_x[1].tv == pytest.approx(0.8, abs=1e-15)


def test_deploy_outside_declared_support():
    fz = np.ones((2, 1))
    fy = np.full((2, 1, 2), 0.5)
    train = _env(fy, fz, [0.5, 0.5], x_values=(0, 1))
    deploy = _env(fy, fz, [0.5, 0.5], x_values=(1, 5))
    with pytest.raises(ValidationError, match="\\[5\\]"):
        transportability_report(train, deploy)


def test_mismatched_y_support():
    train = _env(np.full((1, 1, 2), 0.5), np.ones((1, 1)), [1.0], x_values=(0,))
    deploy = EnvSpec((0,), ("a", "b"), (0,), np.full((1, 1, 2), 0.5), np.ones((1, 1)), [1.0])
    with pytest.raises(ValidationError, match="y_values"):
        transportability_report(train, deploy)


def test_negative_tolerance(stream):
    env = _random_env(stream.generator(), 2, 2, 2)
    with pytest.raises(ValidationError):
        transportability_report(env, env, tolerance=-1.0)


def test_implication_chain_fuzz(stream):
    rng = stream.generator()
    seen = set()
    for _ in range(500):
        train, deploy = _random_pair(rng)
        report = transportability_report(train, deploy)
        assert 0.0 <= report.max_tv <= 1.0
        if report.identical_superpop:
            assert report.componentwise_equal
        if report.componentwise_equal:
            assert report.transportable
        assert report.transportable == (report.max_tv <= 1e-9)
        seen.add((report.identical_superpop, report.componentwise_equal, report.transportable))
    # every rung of the chain is reached, including transport without equal tables
    assert {(True, True, True), (False, True, True), (False, False, True), (False, False, False)} <= seen


# ──────────────────────────────────────────────
#  TV metric
# ──────────────────────────────────────────────
def test_max_tv_symmetric(stream):
    rng = stream.generator()
    for _ in range(100):
        a, b = _random_env(rng, 3, 3, 2), _random_env(rng, 3, 3, 2)
        assert max_tv_distance(a, b) == pytest.approx(max_tv_distance(b, a), abs=1e-15)


def test_max_tv_triangle(stream):
    rng = stream.generator()
    for _ in range(100):
        a, b, c = (_random_env(rng, 2, 3, 3) for _ in range(3))
        assert max_tv_distance(a, c) <= max_tv_distance(a, b) + max_tv_distance(b, c) + 1e-12


# ──────────────────────────────────────────────
#  Sampling
# ──────────────────────────────────────────────
def test_sampled_conditional_matches_induced(stream):
    train, _ = _mixture_pair(0.2, 0.8)
    x, y, z = sample_environment(train, 200_000, stream)
    assert np.all(x == 0)
    assert np.array_equal(y, z)
    share = y.mean()
    assert abs(share - 0.2) < 4 * np.sqrt(0.2 * 0.8 / y.size)


def test_sampling_is_deterministic(stream):
    env = _random_env(stream.generator(), 3, 3, 3)
    a = sample_environment(env, 500, stream.substream(1))
    b = sample_environment(env, 500, stream.substream(1))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
