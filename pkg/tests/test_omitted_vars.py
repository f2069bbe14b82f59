import numpy as np
import pytest

from omitted_vars import (
    BinaryOvb,
    DiscreteZSpec,
    LogisticBinaryModel,
    VarianceClass,
    binary_ovb_classifier,
    case_analysis,
    linear_binary_spec,
    marginal_effect_terms,
    marginal_mean,
    marginal_variance,
    mc_marginal_moments,
    ovb_bias,
)
from utils import ValidationError


def _random_spec(rng, nz=None):
    nz = nz or int(rng.integers(2, 6))
    w = rng.dirichlet(np.ones(nz))
    return DiscreteZSpec.from_table(
        list(range(nz)), [0.0], [w], [rng.normal(0, 2, nz)], [rng.uniform(0, 3, nz)]
    )


@pytest.fixture
def two_point_spec() -> DiscreteZSpec:
    return linear_binary_spec(0.0, 0.0, 1.0, 0.5, var0=0.1, var1=0.2)


# ──────────────────────────────────────────────
#  Mean and bias
# ──────────────────────────────────────────────
def test_constant_mean():
    spec = DiscreteZSpec((0, 1, 2), lambda x: (0.2, 0.3, 0.5), lambda x, z: 4.0, lambda x, z: 1.0)
    assert marginal_mean(spec, 0.0) == pytest.approx(4.0)
    assert all(ovb_bias(spec, 0.0, z) == pytest.approx(0.0) for z in spec.z_values)


def test_degenerate_weights_pick_one_z():
    spec = DiscreteZSpec(("a", "b"), lambda x: (0.0, 1.0), lambda x, z: {"a": 3.0, "b": 7.0}[z], lambda x, z: 0.0)
    assert marginal_mean(spec, 1.0) == 7.0


def test_linear_example_mean(two_point_spec):
    assert marginal_mean(two_point_spec, 0.0) == 0.5
    assert ovb_bias(two_point_spec, 0.0, 0) == -0.5
    assert ovb_bias(two_point_spec, 0.0, 1) == 0.5


def test_unknown_z_rejected(two_point_spec):
    with pytest.raises(ValidationError):
        ovb_bias(two_point_spec, 0.0, 2)


def test_weighted_biases_centre(stream):
    rng = stream.generator()
    for _ in range(50):
        report = marginal_variance(_random_spec(rng), 0.0)
        assert sum(t.weight * t.bias for t in report.per_z) == pytest.approx(0.0, abs=1e-12)


def test_bad_probabilities_are_named():
    spec = DiscreteZSpec((0, 1), lambda x: (0.5, 0.6), lambda x, z: 0.0, lambda x, z: 1.0)
    with pytest.raises(ValidationError, match="P\\(Z\\|x"):
        marginal_mean(spec, 0.0)
    with pytest.raises(ValidationError, match="pz_given_x row \\[1\\]"):
        DiscreteZSpec.from_table([0, 1], [0.0, 1.0], [[0.5, 0.5], [0.9, 0.2]], [[0, 0], [0, 0]], [[1, 1], [1, 1]])
    with pytest.raises(ValidationError, match="negative variance"):
        DiscreteZSpec.from_table([0, 1], [0.0], [[0.5, 0.5]], [[0, 0]], [[1, -1]])


# ──────────────────────────────────────────────
#  Variance decomposition
# ──────────────────────────────────────────────
def test_two_point_example(two_point_spec):
    report = marginal_variance(two_point_spec, 0.0)
    assert report.marginal_var == 0.4
    assert report.expected_cond_var == pytest.approx(0.15)
    assert report.expected_sq_bias == 0.25
    assert {t.classification for t in report.per_z} == {VarianceClass.UNDER}


def test_homoscedastic_unbiased_is_equal():
    report = marginal_variance(linear_binary_spec(1.0, 0.0, 0.0, 0.3, 0.7, 0.7), 0.0)
    assert report.marginal_var == pytest.approx(0.7)
    assert {t.classification for t in report.per_z} == {VarianceClass.EQUAL}


def test_heteroscedastic_unbiased_has_over():
    report = marginal_variance(linear_binary_spec(0.0, 0.0, 0.0, 0.5, 0.1, 0.2), 0.0)
    assert report.marginal_var == pytest.approx(0.15)
    assert report.per_z[0].classification is VarianceClass.UNDER
    assert report.per_z[1].classification is VarianceClass.OVER


def test_total_variance_identity_fuzz(stream):
    rng = stream.generator()
    for _ in range(1000):
        report = marginal_variance(_random_spec(rng), 0.0)
        rebuilt = sum(t.weight * (t.cond_var + t.bias**2) for t in report.per_z)
        assert abs(rebuilt - report.marginal_var) < 1e-10


def test_case_analysis(two_point_spec, stream):
    constant = case_analysis(marginal_variance(linear_binary_spec(0.0, 0.0, 1.0, 0.4, 0.3, 0.3), 0.0))
    assert constant.constant_variance and not constant.has_over
    hetero = case_analysis(marginal_variance(two_point_spec, 0.0))
    assert not hetero.constant_variance
    assert hetero.below_average == (0,)
    rng = stream.generator()
    for _ in range(200):
        report = marginal_variance(_random_spec(rng), 0.0)
        analysis = case_analysis(report)
        if not analysis.constant_variance:
            assert analysis.below_average
            assert any(t.classification is VarianceClass.UNDER for t in report.per_z)


def test_mc_oracle_reproduces_moments(stream):
    rng = stream.generator()
    specs = [linear_binary_spec(0.0, 0.0, 1.0, 0.5, 0.1, 0.2), _random_spec(rng, 3)]
    for i, spec in enumerate(specs):
        report = marginal_variance(spec, 0.0)
        moments = mc_marginal_moments(spec, 0.0, 1_000_000, stream.substream(i))
        assert moments.mean.within(report.marginal_mean, n_se=3.5)
        assert moments.var.within(report.marginal_var, n_se=3.5)


# ──────────────────────────────────────────────
#  Binary Y
# ──────────────────────────────────────────────
def test_binary_examples():
    assert binary_ovb_classifier(0.4, 0.4) == BinaryOvb(False, False, False)
    sole = binary_ovb_classifier(0.3, 0.7)
    assert sole.biased and not sole.variance_heterogeneous and sole.exception_case
    both = binary_ovb_classifier(0.2, 0.6)
    assert both.biased and both.variance_heterogeneous and not both.exception_case


def test_binary_equal_variance_characterization():
    grid = [i / 20 for i in range(21)]
    for p1 in grid:
        for p2 in grid:
            result = binary_ovb_classifier(p1, p2)
            expected_equal = abs(p1 - p2) < 1e-12 or abs(p1 - (1 - p2)) < 1e-12
            assert (not result.variance_heterogeneous) == expected_equal
            if result.variance_heterogeneous:
                assert result.biased


def test_binary_rejects_out_of_range():
    with pytest.raises(ValidationError):
        binary_ovb_classifier(1.2, 0.5)


# ──────────────────────────────────────────────
#  Marginal effects
# ──────────────────────────────────────────────
def test_simpson_sign_flip():
    effect = marginal_effect_terms(LogisticBinaryModel(0.0, 1.0, 10.0, a=0.0, b=-5.0), 0.0)
    assert effect.term_effect == 1.0
    assert effect.full_model_effect == -11.5
    assert abs(effect.finite_difference - effect.full_model_effect) < 1e-6


def test_independent_z_adds_nothing():
    effect = marginal_effect_terms(LogisticBinaryModel(0.5, 2.0, 3.0, a=1.0, b=0.0), 0.7)
    assert effect.term_distribution == 0.0
    assert effect.full_model_effect == 2.0


def test_no_z_effect_keeps_slope():
    effect = marginal_effect_terms(LogisticBinaryModel(0.0, -1.5, 0.0, a=0.2, b=4.0), -0.3)
    assert effect.full_model_effect == -1.5


@pytest.mark.parametrize("x", [-1.0, -0.2, 0.0, 0.4, 2.0])
def test_effect_matches_finite_difference(x):
    effect = marginal_effect_terms(LogisticBinaryModel(1.0, 0.5, -3.0, a=0.3, b=2.0), x)
    assert abs(effect.finite_difference - effect.full_model_effect) < 1e-6
