import pytest

from experiments import Params, errors_x, label_noise, missing, omitted
from utils import ValidationError


# ──────────────────────────────────────────────
#  Params reader
# ──────────────────────────────────────────────
def test_params_types_and_paths():
    p = Params({"n": 5, "flag": True, "name": "a", "xs": [1, 2.5], "child": {"k": 1.5}})
    assert p.integer("n", minimum=1) == 5
    assert p.text("name", choices=("a", "b")) == "a"
    assert p.vector("xs") == [1.0, 2.5]
    with pytest.raises(ValidationError, match="params.flag must be an integer"):
        p.integer("flag")
    with pytest.raises(ValidationError, match="params.child.k must be an integer"):
        p.child("child").integer("k")
    with pytest.raises(ValidationError, match="params.missing is required"):
        p.real("missing")
    assert p.real("optional", None) is None


def test_params_unknown_fields():
    p = Params({"a": 1, "b": 2})
    p.integer("a")
    with pytest.raises(ValidationError, match="\\['b'\\]"):
        p.finish()


def test_params_ragged_table():
    with pytest.raises(ValidationError, match="rectangular"):
        Params({"t": [[0.5, 0.5], [1.0]]}).table("t")


def test_params_must_be_object():
    with pytest.raises(ValidationError):
        Params([1, 2])


# ──────────────────────────────────────────────
#  Producers
# ──────────────────────────────────────────────
def test_omitted_reproduces_marginal_variance():
    params = Params({
        "z_values": [0, 1],
        "x_values": [0.0],
        "pz_given_x": [[0.5, 0.5]],
        "mean_y": [[0.0, 1.0]],
        "var_y": [[0.1, 0.2]],
        "binary_pairs": [[0.2, 0.8], [0.2, 0.6]],
    })
    result = omitted(params, 1, 1)
    assert [row[7] for row in result.rows] == pytest.approx([0.4, 0.4], abs=1e-15)
    assert [row[5] for row in result.rows] == ["under", "under"]
    pairs = result.metadata["binary_pairs"]
    assert pairs[0]["exception_case"] and not pairs[0]["variance_heterogeneous"]
    assert pairs[1]["variance_heterogeneous"] and pairs[1]["biased"]


def test_omitted_logistic_marginal_effects():
    params = Params({"model": "logistic", "x_values": [0.0], "beta0": 0.0, "beta_x": 1.0, "beta_z": -10.0, "b": 5.0})
    effect = omitted(params, 1, 1).metadata["marginal_effects"][0]
    assert effect["term_effect"] == 1.0
    assert effect["full_model_effect"] == pytest.approx(-11.5, abs=1e-12)
    assert abs(effect["finite_difference"] - effect["full_model_effect"]) < 1e-6


def test_omitted_negative_variance_rejected():
    params = Params({"model": "linear_binary", "x_values": [0.0], "beta0": 0.0, "beta_x": 1.0, "beta_z": 1.0,
                     "pz1": 0.5, "var1": -1.0})
    with pytest.raises(ValidationError, match="not a variance"):
        omitted(params, 1, 1)


def test_label_noise_minority_metadata():
    base = {"classes": [0, 1], "pz_given_x": [0.2, 0.8], "error_matrix": [[0.9, 0.1], [0.1, 0.9]]}
    ok = label_noise(Params(dict(base, minority={"p_z1": 0.8, "false_negative": 0.1})), 1, 1)
    assert ok.metadata["minority"]["feasible"]
    assert ok.metadata["minority"]["required"] == pytest.approx(0.4, abs=1e-12)
    bad = label_noise(Params(dict(base, minority={"p_z1": 0.95, "false_negative": 0.1})), 1, 1)
    assert not bad.metadata["minority"]["feasible"]
    assert bad.metadata["minority"]["required"] == pytest.approx(1.9)


def test_errors_x_closed_form_rows():
    params = Params({"omega2_grid": [1.0], "oracle_draws": 100000, "slope_draws": 1000, "bandwidth": 0.1})
    row = errors_x(params, 1, 1).rows[0]
    assert row[7] == pytest.approx(0.6, abs=1e-15)
    assert row[8] == 0.5
    assert row[9] == 0.5


def test_errors_x_degenerate_spec_rejected():
    params = Params({"tau2": 0.0, "omega2_grid": [0.0]})
    with pytest.raises(ValidationError, match="omega2_grid\\[0\\]"):
        errors_x(params, 1, 1)


def test_missing_mechanism_and_zero_mass_x():
    params = Params({
        "x_values": [0.0, 1.0],
        "y_values": [0.0, 1.0],
        "joint": [[0.5, 0.5], [0.0, 0.0]],
        "response": [[0.7, 0.7], [0.5, 0.5]],
        "efficiency": [{"k": 2, "rate": 0.5}],
        "efficiency_n": 20,
        "efficiency_reps": 5,
    })
    result = missing(params, 1, 1)
    assert result.metadata["mechanism"] == "MCAR"
    assert {row[0] for row in result.rows} == {0.0}
    assert all(abs(row[6]) < 1e-12 for row in result.rows)
