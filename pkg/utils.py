"""
Uncertainty Lab — Shared Utilities
====================================
Common functions used by multiple scripts:
- timestamped status lines
- the error hierarchy the CLI maps to exit codes
- probability table validation
- shortest round-trip number formatting
- atomic file writes
"""

import math
import os
import sys
import tempfile
from datetime import datetime

import numpy as np

import config


# ──────────────────────────────────────────────
#  Status lines
# ──────────────────────────────────────────────
def log(icon: str, msg: str) -> None:
    """Print a timestamped status line to stderr."""
    ts = datetime.now().strftime("%H:%M:%S")
    print(f"[{ts}] {icon} {msg}", file=sys.stderr)


# ──────────────────────────────────────────────
#  Errors
# ──────────────────────────────────────────────
class LabError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""

    exit_code = 1


class ValidationError(LabError, ValueError):
    """Invalid parameters, probability tables or config fields."""

    exit_code = 2


class NumericalError(LabError, ArithmeticError):
    """A computation could not produce a finite, well-defined result."""

    exit_code = 3


class RankDeficientError(NumericalError):
    def __init__(self, rank: int, p: int):
        super().__init__(
            f"design is rank deficient: rank {rank} < p = {p} columns"
        )
        self.rank = rank
        self.p = p


class InfeasibleError(NumericalError):
    """A required probability falls outside [0, 1]."""

    def __init__(self, msg: str, required: float):
        super().__init__(msg)
        self.required = required


class ArtifactError(LabError, OSError):
    exit_code = 4


# ──────────────────────────────────────────────
#  Probability tables
# ──────────────────────────────────────────────
def check_prob_vector(values, name: str, tol: float = config.PROB_TOLERANCE) -> np.ndarray:
    """
    Validate a probability vector and return it as a float array.
    Raises ValidationError naming `name` on negative entries or a bad sum.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name}: expected a non-empty probability vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite entries")
    if np.any(arr < 0):
        bad = np.flatnonzero(arr < 0).tolist()
        raise ValidationError(f"{name}: negative probabilities at {bad}")
    total = math.fsum(arr)
    if abs(total - 1.0) > tol:
        raise ValidationError(f"{name}: sums to {total!r}, not 1")
    return arr


def check_stochastic_rows(matrix, name: str, tol: float = config.PROB_TOLERANCE) -> np.ndarray:
    """Validate every row of `matrix` (any leading shape) as a probability vector."""
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim < 2:
        raise ValidationError(f"{name}: expected a table of probability rows")
    for index in np.ndindex(*arr.shape[:-1]):
        label = ",".join(str(i) for i in index)
        check_prob_vector(arr[index], f"{name} row [{label}]", tol)
    return arr


def check_probability(value: float, name: str, *, open_interval: bool = False) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    if open_interval and not 0.0 < value < 1.0:
        raise ValidationError(f"{name} must lie in (0, 1), got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
    return value


# ──────────────────────────────────────────────
#  Number formatting
# ──────────────────────────────────────────────
def format_number(value) -> str:
    """Shortest decimal string that round-trips to the same float."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == 0.0:
            return "0.0"    # drop the sign of -0.0
        return repr(value)
    return str(value)


# ──────────────────────────────────────────────
#  Atomic writes
# ──────────────────────────────────────────────
def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write via a temp file in the target directory, then rename over `path`."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_path, path)
    except OSError as e:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise ArtifactError(f"cannot write {path}: {e}") from e


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
