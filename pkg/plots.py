"""
Uncertainty Lab — Charts
==========================
Static SVG line charts for the experiment outputs. Charts are rendered with
matplotlib's SVG backend with a fixed hash salt, no date stamp and text kept
as text, so identical input always gives identical bytes.

Each series is drawn as one line group with id "series-<panel>-<index>".
"""

import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

import config  # noqa: E402
from utils import NumericalError, ValidationError, atomic_write_bytes  # noqa: E402


@dataclass(frozen=True)
class LineSeries:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    y_err: Optional[Sequence[float]] = None     # half-width of a shaded band
    markers_only: bool = False


@dataclass(frozen=True)
class Panel:
    series: tuple
    x_label: str
    y_label: str
    title: str = ""
    vline: Optional[float] = None               # dashed marker, e.g. p = n


def _check_series(s: LineSeries) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    x = np.asarray(s.x, dtype=float).ravel()
    y = np.asarray(s.y, dtype=float).ravel()
    err = None if s.y_err is None else np.asarray(s.y_err, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError(f"series {s.name!r} is empty")
    if y.size != x.size or (err is not None and err.size != x.size):
        raise ValidationError(f"series {s.name!r}: x, y and y_err must have equal lengths")
    for label, values in (("x", x), ("y", y), ("y_err", err)):
        if values is None:
            continue
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NumericalError(f"series {s.name!r}: non-finite {label} at indices {bad.tolist()}")
    return x, y, err


def render_line_chart(panels: Sequence[Panel]) -> bytes:
    """SVG bytes for one or more stacked panels."""
    if not panels:
        raise ValidationError("a chart needs at least one panel")
    checked = []
    for panel in panels:
        if not panel.series:
            raise ValidationError(f"panel {panel.title or panel.y_label!r} has no series")
        checked.append([_check_series(s) for s in panel.series])

    width, height = config.SVG_FIGSIZE
    style = {"svg.hashsalt": config.SVG_HASH_SALT, "svg.fonttype": "none"}
    with plt.rc_context(style):
        fig, axes = plt.subplots(len(panels), 1, figsize=(width, height * len(panels)), squeeze=False)
        for i, (ax, panel, data) in enumerate(zip(axes[:, 0], panels, checked)):
            for k, (s, (x, y, err)) in enumerate(zip(panel.series, data)):
                colour = config.SERIES_COLOURS[k % len(config.SERIES_COLOURS)]
                if err is not None:
                    ax.fill_between(x, y - err, y + err, color=colour, alpha=config.BAND_ALPHA, linewidth=0)
                style_kw = {"linestyle": "none", "marker": "o", "markersize": 3} if s.markers_only else {"linewidth": 1.5}
                ax.plot(x, y, color=colour, label=s.name, gid=f"series-{i}-{k}", **style_kw)
            if panel.vline is not None and math.isfinite(panel.vline):
                ax.axvline(panel.vline, color="grey", linestyle="dashed", linewidth=1)
            ax.set_xlabel(panel.x_label)
            ax.set_ylabel(panel.y_label)
            if panel.title:
                ax.set_title(panel.title)
            if len(panel.series) > 1:
                ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_svg_line_chart(
    series: Sequence[LineSeries],
    x_label: str,
    y_label: str,
    path: str,
    title: str = "",
) -> None:
    """Single-panel chart written atomically to `path`."""
    payload = render_line_chart([Panel(tuple(series), x_label, y_label, title)])
    atomic_write_bytes(path, payload)
