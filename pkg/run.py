"""
Uncertainty Lab — Launcher
============================
Runs one experiment from a JSON config and writes its artifacts:

    <out>/<experiment>.csv         result table
    <out>/<experiment>.meta.json   config echo, tool version, seed, extra results
    <out>/<experiment>.svg         line chart (with --plot or "plot": true)

Everything is computed before the first file is written; files are written
atomically and removed again if a later write fails.

Exit codes: 0 ok, 2 config/validation, 3 numerical, 4 I/O.

Usage:
    python run.py --config configs/kl_descent_pinv.json
    python run.py --config configs/predict_interval.json --seed 7 --plot
    python run.py --config configs/kl_descent_ridge.json --threads 0 --out results/ridge
"""

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

import config
from core_sim import resolve_threads
from experiments import EXPERIMENTS, Params
from plots import render_line_chart
from utils import ArtifactError, LabError, NumericalError, ValidationError, atomic_write_bytes, format_number, log

_CONFIG_KEYS = ("experiment", "seed", "output_dir", "plot", "params")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    output_dir: str
    plot: bool
    params: dict


# ──────────────────────────────────────────────
#  Config loading
# ──────────────────────────────────────────────
def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e.strerror or e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: top level must be a JSON object")
    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise ValidationError(f"{path}: unknown field(s) {unknown}")

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ValidationError(f"{path}: experiment must be one of {sorted(EXPERIMENTS)}, got {experiment!r}")
    seed = raw.get("seed", config.DEFAULT_SEED)
    output_dir = raw.get("output_dir", config.OUTPUT_DIR)
    if not isinstance(output_dir, str) or not output_dir:
        raise ValidationError(f"{path}: output_dir must be a non-empty string, got {output_dir!r}")
    plot = raw.get("plot", False)
    if not isinstance(plot, bool):
        raise ValidationError(f"{path}: plot must be true or false, got {plot!r}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ValidationError(f"{path}: params must be a JSON object")
    return ExperimentConfig(experiment, check_seed(seed, path), output_dir, plot, params)


def check_seed(seed, where: str = "seed") -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValidationError(f"{where}: seed must be an integer in [0, 2^64), got {seed!r}")
    return seed


# ──────────────────────────────────────────────
#  Rendering
# ──────────────────────────────────────────────
def render_csv(header: tuple, rows: list) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise LabError(f"row has {len(row)} fields for a {len(header)}-column header")
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue().encode("utf-8")


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def render_metadata(cfg: ExperimentConfig, metadata: dict) -> bytes:
    document = {
        "tool": config.TOOL_NAME,
        "tool_version": config.TOOL_VERSION,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config": {
            "experiment": cfg.experiment,
            "seed": cfg.seed,
            "plot": cfg.plot,
            "params": cfg.params,
        },
        "results": metadata,
    }
    try:
        text = json.dumps(document, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
    except ValueError as e:
        raise LabError(f"metadata for {cfg.experiment} is not finite JSON: {e}") from e
    return (text + "\n").encode("utf-8")


def write_artifacts(files: list[tuple[str, bytes]]) -> None:
    """Write every file or none of them."""
    written = []
    try:
        for path, payload in files:
            atomic_write_bytes(path, payload)
            written.append(path)
    except ArtifactError:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise


# ──────────────────────────────────────────────
#  Runner
# ──────────────────────────────────────────────
def run(
    config_path: str,
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
    plot: Optional[bool] = None,
    threads: int = config.DEFAULT_THREADS,
) -> int:
    """Run one configured experiment; returns the process exit status."""
    experiment = "config"
    try:
        cfg = load_config(config_path)
        experiment = cfg.experiment
        cfg = ExperimentConfig(
            cfg.experiment,
            cfg.seed if seed is None else check_seed(seed, "--seed"),
            cfg.output_dir if output_dir is None else output_dir,
            cfg.plot if plot is None else plot,
            cfg.params,
        )
        workers = resolve_threads(threads)

        result = EXPERIMENTS[cfg.experiment](Params(cfg.params), cfg.seed, workers)
        stem = os.path.join(cfg.output_dir, cfg.experiment)
        files = [
            (stem + ".csv", render_csv(result.header, result.rows)),
            (stem + ".meta.json", render_metadata(cfg, result.metadata)),
        ]
        if cfg.plot and result.panels:
            files.append((stem + ".svg", render_line_chart(result.panels)))
        write_artifacts(files)
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        err = NumericalError(f"{type(e).__name__}: {e}")
        log("✖", f"{experiment}: {err}")
        return err.exit_code
    except LabError as e:
        log("✖", f"{experiment}: {e}")
        return e.exit_code

    log("✔", f"{cfg.experiment}: {result.summary} → {stem}.csv ({len(result.rows)} rows)")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Run an Uncertainty Lab experiment")
    parser.add_argument("--config", required=True, help="Path to the experiment JSON config")
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed")
    parser.add_argument("--out", default=None, help="Override the output directory")
    parser.add_argument("--plot", action="store_true", default=None, help="Also write the SVG chart")
    parser.add_argument("--threads", type=int, default=config.DEFAULT_THREADS,
                        help="Worker threads (0 = one per CPU)")
    args = parser.parse_args(argv)
    return run(args.config, args.seed, args.out, args.plot, args.threads)


if __name__ == "__main__":
    sys.exit(main())
