"""
Uncertainty Lab — Experiments
===============================
One producer per CLI experiment. A producer reads its `params` block,
builds every spec object (so bad input fails before any computation), then
runs the module code and returns the CSV header and rows, the metadata for
the sidecar, a one-line summary and the chart panels.
"""

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

import config
from core_sim import RngStream
from errors_x import (
    LinearGaussianMeSpec,
    error_free_variance,
    error_prone_variance,
    mc_errors_x_oracle,
    mc_naive_slope,
    naive_slope_attenuation,
    omitted_limit_variance,
)
from kl_descent import BETA_SCHEMES, SimSetting, run_double_descent, solver_for, switch_point
from label_noise import (
    NoisyLabelSpec,
    equal_error_bias,
    joint_error_table,
    multiclass_bias_report,
    observed_class_probs,
    unbiasedness_minority_error,
)
from missing_data import (
    MissingSpec,
    classify_mechanism,
    complete_case_conditional,
    complete_case_efficiency,
    nonrespondent_conditional,
    variance_decomposition,
)
from omitted_vars import (
    DiscreteZSpec,
    LogisticBinaryModel,
    binary_ovb_classifier,
    case_analysis,
    linear_binary_spec,
    marginal_effect_terms,
    marginal_variance,
)
from plots import LineSeries, Panel
from regression import (
    Estimator,
    LinearTruth,
    bias_variance_mc,
    default_ridge_lambda,
    fixed_fitter,
    interval_coverage_mc,
    ols_fit,
    omit_columns_fitter,
    pinv_fit,
    prediction_interval,
    ridge_fit,
    simulate_line_dataset,
)
from shift import EnvSpec, induced_conditional, sample_environment, transportability_report, tv_distance
from utils import InfeasibleError, ValidationError

HEADERS = {
    "kl-descent": (
        "setting", "estimator", "p", "kl_total_mean", "kl_total_se", "comp1",
        "comp2_mean", "comp2_se", "replications", "seed",
    ),
    "predict-interval": ("x", "y_obs", "fit", "lower", "upper", "level"),
    "bias-variance": (
        "fitter", "aleatoric", "estimation_variance", "estimation_variance_se", "bias_sq",
        "bias_sq_se", "direct_mse", "direct_mse_se", "decomposition_gap", "replications", "seed",
    ),
    "omitted": ("x", "z", "weight", "cond_var", "bias", "classification", "marginal_mean", "marginal_var"),
    "errors-x": (
        "omega2", "tau2", "gamma", "sigma2", "error_free_variance", "mean_cond_var",
        "var_cond_mean", "total", "attenuation", "naive_slope", "oracle_var_mean", "oracle_var_se",
    ),
    "label-noise": (
        "class", "observed_prob", "true_prob", "bias", "false_positive_mass", "false_negative_mass",
    ),
    "missing": ("x", "mechanism", "r", "weight", "cond_mean", "cond_var", "bias", "population_var"),
    "shift": (
        "x", "train_mass", "deploy_mass", "tv", "ood", "max_tv", "identical_superpop",
        "componentwise_equal", "z_cond_independent_both", "transportable",
    ),
}


@dataclass(frozen=True)
class ExperimentResult:
    header: tuple
    rows: list
    metadata: dict
    summary: str
    panels: tuple = field(default=())


# ──────────────────────────────────────────────
#  Params reader
# ──────────────────────────────────────────────
_REQUIRED = object()


class Params:
    """Typed view of one JSON object. Errors name the full field path."""

    def __init__(self, raw, where: str = "params"):
        if not isinstance(raw, dict):
            raise ValidationError(f"{where} must be a JSON object")
        self._raw = raw
        self._seen: set[str] = set()
        self.where = where

    def _fetch(self, key: str, default):
        self._seen.add(key)
        if key in self._raw:
            return self._raw[key], True
        if default is _REQUIRED:
            raise ValidationError(f"{self.where}.{key} is required")
        return default, False

    def _fail(self, key: str, what: str, value) -> ValidationError:
        return ValidationError(f"{self.where}.{key} must be {what}, got {value!r}")

    def integer(self, key: str, default=_REQUIRED, minimum: Optional[int] = None) -> Optional[int]:
        value, given = self._fetch(key, default)
        if not given:
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise self._fail(key, "an integer", value)
        if minimum is not None and value < minimum:
            raise self._fail(key, f"an integer >= {minimum}", value)
        return value

    def real(self, key: str, default=_REQUIRED) -> Optional[float]:
        value, given = self._fetch(key, default)
        if not given:
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise self._fail(key, "a finite number", value)
        return float(value)

    def text(self, key: str, default=_REQUIRED, choices: Optional[tuple] = None) -> Optional[str]:
        value, given = self._fetch(key, default)
        if not given:
            return value
        if not isinstance(value, str):
            raise self._fail(key, "a string", value)
        if choices is not None and value not in choices:
            raise self._fail(key, f"one of {list(choices)}", value)
        return value

    def vector(self, key: str, default=_REQUIRED, length: Optional[int] = None) -> Optional[list]:
        value, given = self._fetch(key, default)
        if not given:
            return None if value is None else [float(v) for v in value]
        if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) for v in value
        ):
            raise self._fail(key, "a list of finite numbers", value)
        if length is not None and len(value) != length:
            raise self._fail(key, f"a list of {length} numbers", value)
        return [float(v) for v in value]

    def int_list(self, key: str, default=_REQUIRED) -> Optional[list]:
        value, given = self._fetch(key, default)
        if not given:
            return value
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in value):
            raise self._fail(key, "a list of integers", value)
        return list(value)

    def has(self, key: str) -> bool:
        return key in self._raw

    def labels(self, key: str) -> list:
        """Support values: a non-empty list of strings or numbers."""
        value, _ = self._fetch(key, _REQUIRED)
        if not isinstance(value, list) or not value or any(
            isinstance(v, bool) or not isinstance(v, (str, int, float)) for v in value
        ):
            raise self._fail(key, "a non-empty list of strings or numbers", value)
        return list(value)

    def table(self, key: str) -> np.ndarray:
        value, _ = self._fetch(key, _REQUIRED)
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise self._fail(key, "a rectangular table of numbers", value) from None
        if arr.ndim == 0 or not np.all(np.isfinite(arr)):
            raise self._fail(key, "a rectangular table of finite numbers", value)
        return arr

    def child(self, key: str) -> "Params":
        value, _ = self._fetch(key, _REQUIRED)
        return Params(value, f"{self.where}.{key}")

    def children(self, key: str, default=_REQUIRED) -> list["Params"]:
        value, _ = self._fetch(key, default)
        if not isinstance(value, list) or not value:
            raise self._fail(key, "a non-empty list of objects", value)
        return [Params(item, f"{self.where}.{key}[{i}]") for i, item in enumerate(value)]

    def finish(self) -> None:
        unknown = sorted(set(self._raw) - self._seen)
        if unknown:
            raise ValidationError(f"{self.where}: unknown field(s) {unknown}")


def _field(where: str, fn: Callable, *args):
    """Run a spec constructor, prefixing its error with the config location."""
    try:
        return fn(*args)
    except ValidationError as e:
        raise ValidationError(f"{where}: {e}") from e


# ──────────────────────────────────────────────
#  kl-descent
# ──────────────────────────────────────────────
def kl_descent(params: Params, seed: int, threads: int) -> ExperimentResult:
    estimator = Estimator(params.text("estimator", Estimator.PINV.value, choices=("pinv", "ridge")))
    ridge_lambda = params.real("ridge_lambda", None)
    n = params.integer("n", config.KL_N, minimum=2)
    p_max = params.integer("p_max", config.KL_P_MAX, minimum=1)
    sigma = params.real("sigma", config.KL_SIGMA)
    reps = params.integer("replications", config.KL_REPLICATIONS, minimum=2)
    grid = params.int_list("p_grid", None)
    grid = tuple(range(1, p_max + 1)) if grid is None else tuple(grid)

    settings = []
    for i, item in enumerate(params.children("settings", [{"name": "a", "beta_scheme": "decreasing"}])):
        name = item.text("name", chr(ord("a") + i))
        scheme = item.text("beta_scheme", "decreasing", choices=BETA_SCHEMES)
        custom = item.vector("custom_beta", None)
        item.finish()
        settings.append(
            _field(
                item.where,
                SimSetting,
                name, n, p_max, sigma, scheme, None if custom is None else tuple(custom),
                estimator, ridge_lambda, reps, grid, seed,
            )
        )
    params.finish()
    names = [s.name for s in settings]
    if len(set(names)) != len(names):
        raise ValidationError(f"params.settings: setting names must be distinct, got {names}")

    rows, curves, minima = [], [], []
    for setting in settings:
        points = run_double_descent(setting, threads)
        curves.append((setting.name, points))
        for pt in points:
            rows.append((
                setting.name, estimator.value, pt.p, pt.kl_total.mean, pt.kl_total.std_error,
                pt.comp1, pt.comp2.mean, pt.comp2.std_error, reps, seed,
            ))
        best = min(points, key=lambda pt: pt.kl_total.mean)
        minima.append(f"{setting.name}: min KL {best.kl_total.mean:.4g} at p = {best.p}")

    lead = settings[0]
    metadata = {
        "switch_point": switch_point(lead),
        "solver_below_switch": solver_for(1, n, estimator).value,
        "solver_from_switch": solver_for(n, n, estimator).value,
        "ridge_lambda": lead.effective_lambda,
        "sigma_known": True,
        "curve": "replication mean",
        "settings": {s.name: s.beta_scheme for s in settings},
    }

    def panel(label: str, pick: Callable, err: Optional[Callable]) -> Panel:
        series = tuple(
            LineSeries(
                name,
                [pt.p for pt in points],
                [pick(pt) for pt in points],
                None if err is None else [err(pt) for pt in points],
            )
            for name, points in curves
        )
        return Panel(series, "number of covariates p", label, vline=float(n))

    panels = (
        panel("expected KL (total)", lambda pt: pt.kl_total.mean, lambda pt: pt.kl_total.std_error),
        panel("component 1 (approximation)", lambda pt: pt.comp1, None),
        panel("component 2 (estimation)", lambda pt: pt.comp2.mean, lambda pt: pt.comp2.std_error),
    )
    return ExperimentResult(HEADERS["kl-descent"], rows, metadata, "; ".join(minima), panels)


# ──────────────────────────────────────────────
#  predict-interval
# ──────────────────────────────────────────────
def predict_interval(params: Params, seed: int, threads: int) -> ExperimentResult:
    n = params.integer("n", config.INTERVAL_N, minimum=3)
    beta = params.vector("beta", list(config.INTERVAL_BETA), length=2)
    sigma = params.real("sigma", config.INTERVAL_SIGMA)
    x_range = params.vector("x_range", list(config.INTERVAL_X_RANGE), length=2)
    level = params.real("level", config.INTERVAL_LEVEL)
    reps = params.integer("coverage_replications", config.COVERAGE_REPLICATIONS, minimum=2)
    x0 = params.real("x0", 0.5 * (x_range[0] + x_range[1]))
    params.finish()
    if not sigma > 0:
        raise ValidationError(f"params.sigma must be positive, got {sigma!r}")
    if not x_range[0] < x_range[1]:
        raise ValidationError(f"params.x_range must be increasing, got {x_range}")
    if not 0.0 < level < 1.0:
        raise ValidationError(f"params.level must lie in (0, 1), got {level!r}")

    stream = RngStream(seed)
    x, data = simulate_line_dataset(stream.substream(0), n, beta, sigma, x_range)
    fit = ols_fit(data)
    rows, fits, halves = [], [], []
    for xi, yi in zip(x, data.y):
        interval = prediction_interval(fit, data, [1.0, xi], level)
        rows.append((float(xi), float(yi), interval.center, interval.lower, interval.upper, level))
        fits.append(interval.center)
        halves.append(interval.upper - interval.center)
    coverage = interval_coverage_mc(stream.substream(1), reps, x0, level, n, beta, sigma, x_range, threads)

    metadata = {
        "coefficients": [float(c) for c in fit.coefficients],
        "sigma_hat": math.sqrt(fit.sigma2_hat),
        "coverage": {"x0": x0, "mean": coverage.mean, "std_error": coverage.std_error, "replications": reps},
    }
    panels = (
        Panel(
            (
                LineSeries(f"fit with {level:g} prediction interval", x, fits, halves),
                LineSeries("observed", x, data.y, markers_only=True),
            ),
            "x",
            "y",
        ),
    )
    summary = f"coverage at x0 = {x0:g}: {coverage.mean:.4f} ± {coverage.std_error:.4f} over {reps} replications"
    return ExperimentResult(HEADERS["predict-interval"], rows, metadata, summary, panels)


# ──────────────────────────────────────────────
#  bias-variance
# ──────────────────────────────────────────────
FITTER_KINDS = ("ols", "pinv", "ridge", "omit", "fixed")


def _make_fitter(item: Params, p: int, sigma2: float):
    kind = item.text("kind", "ols", choices=FITTER_KINDS)
    if kind == "ols":
        return ols_fit
    if kind == "pinv":
        return pinv_fit
    if kind == "ridge":
        lam = item.real("lambda", None)
        if lam is None:
            lam = _field(item.where, default_ridge_lambda, sigma2)
        if not lam > 0:
            raise ValidationError(f"{item.where}.lambda must be positive, got {lam!r}")
        return functools.partial(ridge_fit, lam=lam)
    if kind == "omit":
        columns = item.int_list("columns")
        if any(not 0 <= c < p for c in columns):
            raise ValidationError(f"{item.where}.columns must list column indices in [0, {p}), got {columns!r}")
        if len(set(columns)) >= p:
            raise ValidationError(f"{item.where}.columns would drop every column")
        return omit_columns_fitter(columns)
    return fixed_fitter(item.vector("coefficients", length=p))


def bias_variance(params: Params, seed: int, threads: int) -> ExperimentResult:
    beta = params.vector("beta")
    sigma2 = params.real("sigma2")
    truth = _field("params", LinearTruth, beta, sigma2)
    x0 = params.vector("x0", length=len(beta))
    n_train = params.integer("n_train", minimum=2)
    reps = params.integer("replications", 2000, minimum=config.BIAS_VARIANCE_MIN_REPS)
    fitters = []
    for item in params.children("fitters", [{"name": "ols", "kind": "ols"}]):
        name = item.text("name", None)
        fitter = _make_fitter(item, len(beta), sigma2)
        fitters.append((name or item.where, fitter))
        item.finish()
    params.finish()

    stream = RngStream(seed)
    rows, reports = [], {}
    for name, fitter in fitters:
        report = bias_variance_mc(truth, fitter, x0, n_train, reps, stream, threads)
        reports[name] = report
        rows.append((
            name, report.aleatoric, report.estimation_variance.mean, report.estimation_variance.std_error,
            report.bias_sq.mean, report.bias_sq.std_error, report.direct_mse.mean,
            report.direct_mse.std_error, report.gap, reps, seed,
        ))

    metadata = {
        "mean_at_x0": float(np.asarray(x0) @ truth.beta),
        "combined_se": {name: r.combined_se for name, r in reports.items()},
    }
    index = list(range(len(fitters)))
    panels = (
        Panel(
            (
                LineSeries("estimation variance", index, [r.estimation_variance.mean for r in reports.values()], markers_only=True),
                LineSeries("squared bias", index, [r.bias_sq.mean for r in reports.values()], markers_only=True),
                LineSeries("direct MSE", index, [r.direct_mse.mean for r in reports.values()], markers_only=True),
            ),
            "fitter (row order)",
            "expected squared error",
        ),
    )
    worst = max(reports.items(), key=lambda kv: abs(kv[1].gap) / max(kv[1].combined_se, 1e-300))
    summary = f"{len(fitters)} fitter(s); largest gap {worst[1].gap:.3g} ({worst[0]})"
    return ExperimentResult(HEADERS["bias-variance"], rows, metadata, summary, panels)


# ──────────────────────────────────────────────
#  omitted
# ──────────────────────────────────────────────
def omitted(params: Params, seed: int, threads: int) -> ExperimentResult:
    model = params.text("model", "table", choices=("table", "linear_binary", "logistic"))
    logistic = None
    if model == "table":
        z_values = params.labels("z_values")
        x_values = params.vector("x_values")
        spec = _field(
            "params", DiscreteZSpec.from_table,
            z_values, x_values, params.table("pz_given_x"), params.table("mean_y"), params.table("var_y"),
        )
    else:
        x_values = params.vector("x_values")
        coefs = [params.real(k) for k in ("beta0", "beta_x", "beta_z")]
        var0, var1 = params.real("var0", 0.0), params.real("var1", 0.0)
        if model == "linear_binary":
            pz1 = params.real("pz1")
            if not 0.0 <= pz1 <= 1.0:
                raise ValidationError(f"params.pz1 must lie in [0, 1], got {pz1!r}")
            spec = linear_binary_spec(*coefs, pz1, var0, var1)
        else:
            logistic = LogisticBinaryModel(*coefs, params.real("a", 0.0), params.real("b", 0.0), var0, var1)
            spec = logistic.as_spec()
    pairs = []
    if params.has("binary_pairs"):
        table = params.table("binary_pairs")
        if table.ndim != 2 or table.shape[1] != 2:
            raise ValidationError("params.binary_pairs must be a list of [p1, p2] pairs")
        pairs = [(float(p1), float(p2)) for p1, p2 in table]
    params.finish()
    if not x_values:
        raise ValidationError("params.x_values must not be empty")
    # surfaces bad variances and probability rows before any output is built
    for x in x_values:
        _field(f"x = {x}", spec.weights, x)
        _field(f"x = {x}", spec.variances, x)

    rows, reports, cases = [], [], []
    for x in x_values:
        report = marginal_variance(spec, x)
        reports.append(report)
        case = case_analysis(report)
        cases.append({
            "x": x,
            "constant_variance": case.constant_variance,
            "expected_cond_var": case.expected_cond_var,
            "has_over": case.has_over,
            "below_average": list(case.below_average),
        })
        for t in report.per_z:
            rows.append((x, t.z, t.weight, t.cond_var, t.bias, t.classification.value, report.marginal_mean, report.marginal_var))

    metadata: dict = {"model": model, "case_analysis": cases}
    if logistic is not None:
        effects = [marginal_effect_terms(logistic, x) for x in x_values]
        metadata["marginal_effects"] = [
            {"x": x, "term_effect": e.term_effect, "term_distribution": e.term_distribution,
             "full_model_effect": e.full_model_effect, "finite_difference": e.finite_difference}
            for x, e in zip(x_values, effects)
        ]
    if pairs:
        metadata["binary_pairs"] = []
        for p1, p2 in pairs:
            result = _field("params.binary_pairs", binary_ovb_classifier, p1, p2)
            metadata["binary_pairs"].append({
                "p1": p1, "p2": p2, "variance_heterogeneous": result.variance_heterogeneous,
                "biased": result.biased, "exception_case": result.exception_case,
            })

    panels = (
        Panel(
            (
                LineSeries("Var(Y|x)", x_values, [r.marginal_var for r in reports]),
                LineSeries("E[Var(Y|x,Z)]", x_values, [r.expected_cond_var for r in reports]),
                LineSeries("E[bias²]", x_values, [r.expected_sq_bias for r in reports]),
            ),
            "x",
            "variance",
        ),
    )
    overs = sum(1 for row in rows if row[5] == "over")
    summary = f"{len(x_values)} x value(s), {len(rows)} z terms, {overs} with full-model variance above Var(Y|x)"
    return ExperimentResult(HEADERS["omitted"], rows, metadata, summary, panels)


# ──────────────────────────────────────────────
#  errors-x
# ──────────────────────────────────────────────
def errors_x(params: Params, seed: int, threads: int) -> ExperimentResult:
    base = {
        "mu_z": params.real("mu_z", 0.0),
        "tau2": params.real("tau2", 1.0),
        "alpha": params.real("alpha", 0.0),
        "gamma": params.real("gamma", 1.0),
        "sigma2": params.real("sigma2", 0.1),
    }
    grid = params.vector("omega2_grid", [0.0, 0.25, 0.5, 1.0, 2.0, 4.0])
    x0 = params.real("x0", base["mu_z"])
    bandwidth = params.real("bandwidth", 0.05)
    oracle_draws = params.integer("oracle_draws", 10 * config.ERRORS_X_MIN_DRAWS, minimum=config.ERRORS_X_MIN_DRAWS)
    slope_draws = params.integer("slope_draws", config.ERRORS_X_MIN_DRAWS, minimum=3)
    params.finish()
    if not grid:
        raise ValidationError("params.omega2_grid must not be empty")
    specs = []
    for i, omega2 in enumerate(grid):
        spec = _field(f"params.omega2_grid[{i}]", LinearGaussianMeSpec, base["mu_z"], base["tau2"], omega2,
                      base["alpha"], base["gamma"], base["sigma2"])
        _field(f"params.omega2_grid[{i}]", lambda s: s.reliability, spec)
        specs.append(spec)

    stream = RngStream(seed)
    rows, slopes, totals, oracle = [], [], [], []
    for i, spec in enumerate(specs):
        var = error_prone_variance(spec)
        att = naive_slope_attenuation(spec)
        est = mc_errors_x_oracle(spec, x0, bandwidth, oracle_draws, stream.substream(2 * i))
        slope = mc_naive_slope(spec, slope_draws, stream.substream(2 * i + 1))
        rows.append((
            spec.omega2, spec.tau2, spec.gamma, spec.sigma2, error_free_variance(spec), var.mean_cond_var,
            var.var_cond_mean, var.total, att.attenuation, att.naive_slope, est.mean, est.std_error,
        ))
        totals.append(var.total)
        oracle.append(est)
        slopes.append({"omega2": spec.omega2, "slope": slope.slope, "std_error": slope.std_error})

    metadata = {
        "x0": x0,
        "bandwidth": bandwidth,
        "oracle_draws": oracle_draws,
        "omitted_limit_variance": omitted_limit_variance(specs[0]),
        "simulated_naive_slopes": slopes,
    }
    panels = (
        Panel(
            (
                LineSeries("Var(Y|x) with error-prone x", grid, totals),
                LineSeries("windowed simulation", grid, [e.mean for e in oracle], [e.std_error for e in oracle], markers_only=True),
                LineSeries("Var(Y|z), error-free", grid, [error_free_variance(s) for s in specs]),
            ),
            "measurement error variance ω²",
            "conditional variance",
        ),
    )
    summary = f"{len(grid)} ω² values; Var(Y|x) from {totals[0]:.4g} to {totals[-1]:.4g}"
    return ExperimentResult(HEADERS["errors-x"], rows, metadata, summary, panels)


# ──────────────────────────────────────────────
#  label-noise
# ──────────────────────────────────────────────
def label_noise(params: Params, seed: int, threads: int) -> ExperimentResult:
    spec = _field(
        "params", NoisyLabelSpec,
        params.labels("classes"), params.table("pz_given_x"), params.table("error_matrix"),
    )
    c_values = params.vector("equal_error_c", [0.05, 0.1, 0.2])
    minority = params.child("minority") if params.has("minority") else None
    if minority is not None:
        p_z1 = minority.real("p_z1")
        false_negative = minority.real("false_negative")
        minority.finish()
    params.finish()
    for i, c in enumerate(c_values):
        if not 0.0 <= c <= 1.0:
            raise ValidationError(f"params.equal_error_c[{i}] must lie in [0, 1], got {c!r}")

    observed = observed_class_probs(spec)
    rows = [
        (b.cls, observed[j], float(spec.pz_given_x[j]), b.bias, b.false_positive_mass, b.false_negative_mass)
        for j, b in enumerate(multiclass_bias_report(spec))
    ]
    metadata: dict = {"joint_error_table": joint_error_table(spec).tolist()}
    if minority is not None:
        try:
            required = _field("params.minority", unbiasedness_minority_error, p_z1, false_negative)
            metadata["minority"] = {"p_z1": p_z1, "false_negative": false_negative, "feasible": True, "required": required}
        except InfeasibleError as e:
            metadata["minority"] = {"p_z1": p_z1, "false_negative": false_negative, "feasible": False, "required": e.required}

    grid = [i / 100 for i in range(101)]
    panels = (
        Panel(
            tuple(LineSeries(f"c = {c:g}", grid, [equal_error_bias(p, c) for p in grid]) for c in c_values),
            "P(Z=1|x)",
            "bias of P(Y=1|x)",
            vline=0.5,
        ),
    ) if c_values else ()
    largest = max(rows, key=lambda row: abs(row[3]))
    summary = f"{len(rows)} classes; largest bias {largest[3]:.4g} for class {largest[0]}"
    return ExperimentResult(HEADERS["label-noise"], rows, metadata, summary, panels)


# ──────────────────────────────────────────────
#  missing
# ──────────────────────────────────────────────
def missing(params: Params, seed: int, threads: int) -> ExperimentResult:
    spec = _field(
        "params", MissingSpec,
        params.vector("x_values"), params.vector("y_values"), params.table("joint"), params.table("response"),
    )
    pairs = []
    for item in params.children("efficiency", [{"k": 5, "rate": 0.02}, {"k": 10, "rate": 0.05}, {"k": 20, "rate": 0.1}]):
        pairs.append((item.integer("k", minimum=1), item.real("rate")))
        item.finish()
        if not 0.0 <= pairs[-1][1] < 1.0:
            raise ValidationError(f"{item.where}.rate must lie in [0, 1), got {pairs[-1][1]!r}")
    eff_n = params.integer("efficiency_n", 1000, minimum=1)
    eff_reps = params.integer("efficiency_reps", 400, minimum=2)
    params.finish()

    mechanism = classify_mechanism(spec)
    rows, factors = [], []
    for x in spec.x_values:
        if spec.px(x) <= 0:
            continue
        dec = variance_decomposition(spec, x)
        for s in dec.per_stratum:
            rows.append((x, mechanism.value, s.r, s.weight, s.cond_mean, s.cond_var, s.bias, dec.population_var))
        entry = {"x": x, "complete_case": complete_case_conditional(spec, x).bias_factor.tolist()}
        if len(dec.per_stratum) > 1:
            entry["nonrespondent"] = nonrespondent_conditional(spec, x).bias_factor.tolist()
        factors.append(entry)

    stream = RngStream(seed)
    efficiency = []
    for i, (k, rate) in enumerate(pairs):
        eff = complete_case_efficiency(k, rate, eff_n, eff_reps, stream.substream(i), threads)
        efficiency.append({
            "k": k, "rate": rate, "analytic": eff.analytic_fraction,
            "simulated": eff.simulated_fraction.mean, "simulated_se": eff.simulated_fraction.std_error,
        })
    metadata = {"mechanism": mechanism.value, "bias_factors": factors, "efficiency": efficiency}

    k_max = max(k for k, _ in pairs)
    ks = list(range(1, k_max + 1))
    rates = sorted(set(rate for _, rate in pairs))
    panels = (
        Panel(
            tuple(LineSeries(f"cell missing rate {r:g}", ks, [(1.0 - r) ** k for k in ks]) for r in rates),
            "number of features k",
            "complete-case fraction",
        ),
    )
    summary = f"mechanism {mechanism.value}; {len(rows)} strata rows; {len(pairs)} efficiency pair(s)"
    return ExperimentResult(HEADERS["missing"], rows, metadata, summary, panels)


# ──────────────────────────────────────────────
#  shift
# ──────────────────────────────────────────────
def _env(item: Params) -> EnvSpec:
    env = _field(
        item.where, EnvSpec,
        item.labels("x_values"), item.labels("y_values"), item.labels("z_values"),
        item.table("f_y_given_xz"), item.table("f_z_given_x"), item.table("f_x"),
    )
    item.finish()
    return env


def _empirical_max_tv(train: EnvSpec, deploy: EnvSpec, draws: int, stream: RngStream) -> float:
    """Max TV between sampled f(y|x) over x seen in both samples."""
    samples = [sample_environment(env, draws, stream.substream(i)) for i, env in enumerate((train, deploy))]
    ny = len(train.y_values)
    worst = 0.0
    for x in deploy.x_values:
        if x not in train.x_values:
            continue
        counts = []
        for env, (xs, ys, _) in zip((train, deploy), samples):
            hit = ys[xs == env.row(x)]
            counts.append(np.bincount(hit, minlength=ny) / hit.size if hit.size else None)
        if counts[0] is not None and counts[1] is not None:
            worst = max(worst, tv_distance(counts[0], counts[1]))
    return worst


def shift(params: Params, seed: int, threads: int) -> ExperimentResult:
    train = _env(params.child("train"))
    deploy = _env(params.child("deploy"))
    tolerance = params.real("tolerance", config.SHIFT_TOLERANCE)
    draws = params.integer("sample_draws", 0, minimum=0)
    params.finish()

    report = transportability_report(train, deploy, tolerance)
    rows = [
        (s.x, s.train_mass, s.deploy_mass, s.tv, s.ood, report.max_tv, report.identical_superpop,
         report.componentwise_equal, report.z_cond_independent_both, report.transportable)
        for s in report.per_x
    ]
    metadata: dict = {
        "tolerance": tolerance,
        "ood_x": list(report.ood_x),
        "induced_train": {str(s.x): induced_conditional(train, s.x).tolist() for s in report.per_x},
        "induced_deploy": {str(s.x): induced_conditional(deploy, s.x).tolist() for s in report.per_x},
    }
    if draws:
        metadata["sample_draws"] = draws
        metadata["empirical_max_tv"] = _empirical_max_tv(train, deploy, draws, RngStream(seed))
    index = list(range(len(report.per_x)))
    panels = (
        Panel(
            (LineSeries("TV distance of f(y|x)", index, [s.tv for s in report.per_x], markers_only=True),),
            "deployment x (support order)",
            "total variation",
        ),
    )
    summary = (
        f"max TV {report.max_tv:.4g}; transportable {str(report.transportable).lower()}; "
        f"{len(report.ood_x)} out-of-distribution x"
    )
    return ExperimentResult(HEADERS["shift"], rows, metadata, summary, panels)


EXPERIMENTS: dict[str, Callable[[Params, int, int], ExperimentResult]] = {
    "kl-descent": kl_descent,
    "predict-interval": predict_interval,
    "bias-variance": bias_variance,
    "omitted": omitted,
    "errors-x": errors_x,
    "label-noise": label_noise,
    "missing": missing,
    "shift": shift,
}
