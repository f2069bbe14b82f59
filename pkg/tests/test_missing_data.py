import numpy as np
import pytest

from missing_data import (
    Mechanism,
    MissingSpec,
    classify_mechanism,
    complete_case_conditional,
    complete_case_efficiency,
    nonrespondent_conditional,
    population_conditional,
    response_rate,
    variance_decomposition,
)
from utils import ValidationError


@pytest.fixture
def mnar_toy() -> MissingSpec:
    return MissingSpec((0.0,), [0.0, 1.0], [[0.5, 0.5]], [[0.8, 0.4]])


def _random_spec(rng, response=None) -> MissingSpec:
    nx, ny = int(rng.integers(1, 4)), int(rng.integers(2, 5))
    joint = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    if response is None:
        response = rng.uniform(0.05, 0.95, (nx, ny))
    return MissingSpec(tuple(range(nx)), rng.normal(0, 3, ny), joint, response(nx, ny) if callable(response) else response)


def _enumerate_complete_case(spec: MissingSpec, i: int) -> np.ndarray:
    with_r = spec.joint[i] * spec.response[i]
    return with_r / with_r.sum()


# ──────────────────────────────────────────────
#  Conditionals
# ──────────────────────────────────────────────
def test_uniform_joint_uniform_conditional():
    spec = MissingSpec((0.0, 1.0), [1.0, 2.0, 3.0], np.full((2, 3), 1 / 6), np.full((2, 3), 0.5))
    assert np.allclose(population_conditional(spec, 1.0), 1 / 3, atol=1e-15)


def test_zero_mass_x_rejected():
    spec = MissingSpec((0.0, 1.0), [0.0, 1.0], [[0.5, 0.5], [0.0, 0.0]], [[0.5, 0.5], [0.0, 0.0]])
    with pytest.raises(ValidationError, match="P\\(x = 1.0\\) = 0"):
        population_conditional(spec, 1.0)
    with pytest.raises(ValidationError):
        population_conditional(spec, 2.0)


def test_mnar_toy(mnar_toy):
    assert response_rate(mnar_toy, 0.0) == pytest.approx(0.6, abs=1e-15)
    cc = complete_case_conditional(mnar_toy, 0.0)
    assert cc.bias_factor[1] == pytest.approx(2 / 3, abs=1e-15)
    assert abs(cc.probs[1] - 1 / 3) < 1e-12
    assert np.allclose(cc.probs, _enumerate_complete_case(mnar_toy, 0), atol=1e-12)
    assert classify_mechanism(mnar_toy) is Mechanism.MNAR


def test_mcar_bias_factor_exactly_one():
    spec = MissingSpec((0.0, 1.0), [0.0, 1.0, 5.0], [[0.1, 0.2, 0.3], [0.15, 0.05, 0.2]], np.full((2, 3), 0.7))
    assert classify_mechanism(spec) is Mechanism.MCAR
    for x in spec.x_values:
        cc = complete_case_conditional(spec, x)
        assert np.all(cc.bias_factor == 1.0)
        assert np.array_equal(cc.probs, population_conditional(spec, x))


def test_response_depending_on_x_only():
    spec = MissingSpec((0.0, 1.0), [0.0, 1.0], [[0.25, 0.25], [0.3, 0.2]], [[0.9, 0.9], [0.3, 0.3]])
    assert classify_mechanism(spec) is Mechanism.MAR
    for x in spec.x_values:
        assert np.all(complete_case_conditional(spec, x).bias_factor == 1.0)


def test_zero_mass_cells_do_not_affect_mechanism():
    spec = MissingSpec((0.0,), [0.0, 1.0, 2.0], [[0.5, 0.5, 0.0]], [[0.6, 0.6, 0.1]])
    assert classify_mechanism(spec) is Mechanism.MCAR


def test_invalid_tables_rejected():
    with pytest.raises(ValidationError, match="joint"):
        MissingSpec((0.0,), [0.0, 1.0], [[0.5, 0.6]], [[0.5, 0.5]])
    with pytest.raises(ValidationError, match="response\\[0\\]\\[1\\]"):
        MissingSpec((0.0,), [0.0, 1.0], [[0.5, 0.5]], [[0.5, 1.5]])
    with pytest.raises(ValidationError, match="no complete cases"):
        MissingSpec((0.0,), [0.0, 1.0], [[0.5, 0.5]], [[0.0, 0.0]])


def test_bias_factor_identity_fuzz(stream):
    rng = stream.generator()
    for _ in range(1000):
        spec = _random_spec(rng)
        for x in spec.x_values:
            pop = population_conditional(spec, x)
            cc = complete_case_conditional(spec, x)
            assert np.max(np.abs(cc.probs - cc.bias_factor * pop)) < 1e-12
            assert abs(cc.probs.sum() - 1.0) < 1e-12


def test_mixture_identity_fuzz(stream):
    rng = stream.generator()
    for _ in range(300):
        spec = _random_spec(rng)
        for x in spec.x_values:
            rate = response_rate(spec, x)
            mixed = rate * complete_case_conditional(spec, x).probs + (1 - rate) * nonrespondent_conditional(spec, x).probs
            assert np.max(np.abs(mixed - population_conditional(spec, x))) < 1e-12


def test_unit_bias_factor_iff_equal_strata(stream):
    rng = stream.generator()
    for trial in range(200):
        constant = trial % 2 == 0
        response = (lambda nx, ny: np.repeat(rng.uniform(0.1, 0.9, (nx, 1)), ny, axis=1)) if constant else None
        spec = _random_spec(rng, response)
        for x in spec.x_values:
            unit = bool(np.all(np.abs(complete_case_conditional(spec, x).bias_factor - 1.0) < 1e-12))
            same = bool(
                np.allclose(
                    complete_case_conditional(spec, x).probs,
                    nonrespondent_conditional(spec, x).probs,
                    rtol=0,
                    atol=1e-12,
                )
            )
            assert unit == same == constant


def test_scaling_response_keeps_bias(mnar_toy):
    scaled = MissingSpec(mnar_toy.x_values, mnar_toy.y_values, mnar_toy.joint, mnar_toy.response * 0.5)
    assert np.allclose(
        complete_case_conditional(scaled, 0.0).bias_factor, complete_case_conditional(mnar_toy, 0.0).bias_factor, atol=1e-15
    )
    a, b = variance_decomposition(mnar_toy, 0.0), variance_decomposition(scaled, 0.0)
    assert a.per_stratum[0].bias == pytest.approx(b.per_stratum[0].bias, abs=1e-12)


def test_nonrespondent_needs_missingness():
    spec = MissingSpec((0.0,), [0.0, 1.0], [[0.5, 0.5]], [[1.0, 1.0]])
    with pytest.raises(ValidationError):
        nonrespondent_conditional(spec, 0.0)


# ──────────────────────────────────────────────
#  Variance decomposition
# ──────────────────────────────────────────────
def test_mnar_toy_decomposition(mnar_toy):
    dec = variance_decomposition(mnar_toy, 0.0)
    assert dec.population_mean == 0.5
    assert dec.population_var == 0.25
    resp, non = dec.per_stratum
    assert resp.cond_mean == pytest.approx(1 / 3, abs=1e-12)
    assert non.cond_mean == pytest.approx(0.75, abs=1e-12)
    rebuilt = sum(s.weight * (s.cond_var + s.bias**2) for s in dec.per_stratum)
    assert rebuilt == pytest.approx(0.25, abs=1e-12)


def test_mcar_decomposition_unbiased():
    spec = MissingSpec((0.0,), [0.0, 1.0, 3.0], [[0.2, 0.5, 0.3]], [[0.4, 0.4, 0.4]])
    dec = variance_decomposition(spec, 0.0)
    assert all(s.bias == 0.0 for s in dec.per_stratum)
    assert all(s.cond_var == dec.population_var for s in dec.per_stratum)


def test_single_stratum():
    spec = MissingSpec((0.0,), [0.0, 2.0], [[0.5, 0.5]], [[1.0, 1.0]])
    dec = variance_decomposition(spec, 0.0)
    assert len(dec.per_stratum) == 1
    assert dec.per_stratum[0].bias == 0.0
    assert dec.population_var == 1.0


def test_decomposition_fuzz(stream):
    rng = stream.generator()
    for _ in range(300):
        spec = _random_spec(rng)
        for x in spec.x_values:
            variance_decomposition(spec, x)


# ──────────────────────────────────────────────
#  Complete-case efficiency
# ──────────────────────────────────────────────
def test_efficiency_without_missingness(stream):
    result = complete_case_efficiency(10, 0.0, 50, 20, stream)
    assert result.analytic_fraction == 1.0
    assert result.simulated_fraction.mean == 1.0


@pytest.mark.parametrize("k,rate", [(5, 0.02), (10, 0.05), (20, 0.1)])
def test_efficiency_matches_analytic(stream, k, rate):
    result = complete_case_efficiency(k, rate, 1000, 400, stream)
    assert result.analytic_fraction == pytest.approx((1 - rate) ** k)
    assert result.simulated_fraction.within(result.analytic_fraction)


def test_efficiency_value_and_monotonicity(stream):
    assert complete_case_efficiency(10, 0.05, 10, 2, stream).analytic_fraction == pytest.approx(0.5987, abs=1e-4)
    fractions = [complete_case_efficiency(k, 0.05, 10, 2, stream).analytic_fraction for k in range(1, 15)]
    assert all(b < a for a, b in zip(fractions, fractions[1:]))


def test_efficiency_threads_do_not_change_result(stream):
    a = complete_case_efficiency(8, 0.1, 100, 50, stream, threads=1)
    b = complete_case_efficiency(8, 0.1, 100, 50, stream, threads=4)
    assert a == b


def test_efficiency_rejects_certain_missingness(stream):
    with pytest.raises(ValidationError):
        complete_case_efficiency(3, 1.0, 10, 5, stream)
