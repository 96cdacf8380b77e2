"""Rendering: one matplotlib figure per results file.

matplotlib is forced onto the Agg backend at import; this is a batch
renderer and byte-stable output matters more than interactivity.  With the
pinned style below and fixed save metadata, re-rendering the same spec on
the same inputs writes identical bytes.

Monte Carlo sweep files all draw the same way: one marker series per
strategy for the measured RMSE and a dashed line in the matching color for
the bound, so agreement reads as markers sitting on their line.  The CRB
landscape file is a heat map over the two probe times with the optimizer's
choice marked by dashed lines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ResultFileError
from .io import HARNESS_COLUMNS, LANDSCAPE_COLUMNS, load_results
from .spec import FigureKind, FigureSpec

# Pinned so output bytes depend only on the inputs and the spec.
_STYLE = {
    "figure.figsize": (6.4, 4.4),
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.framealpha": 0.9,
    "svg.hashsalt": "ramseyfig",
}

_MARKERS = ("o", "s", "^", "d", "v", "P", "X")
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2")

# xscale, yscale, default xlabel, default ylabel per sweep kind.
_AXES = {
    FigureKind.RmseVsBudget:
        ("log", "log", "total shots", "relative RMSE"),
    FigureKind.Robustness:
        ("log", "log", "true decay rate", "relative RMSE"),
    FigureKind.CrosstalkScaling:
        ("linear", "log", "chain length", "relative RMSE"),
    FigureKind.ShotRatio:
        ("linear", "linear", "decay rate / detuning",
         "first / second shot split"),
}

# Save metadata that strips the format's timestamp fields.
_METADATA = {
    ".png": {"Software": "ramseyfig"},
    ".svg": {"Date": None},
    ".pdf": {"CreationDate": None},
}


def _floats(row, names, path):
    try:
        return [float(row[name]) for name in names]
    except ValueError as err:
        raise ResultFileError(f"non-numeric value in {path}: {err}") from err


def _sweep_figure(spec: FigureSpec, rows, sidecar):
    param = spec.effective_param
    series: dict[str, list] = {}  # insertion order = file order
    for row in rows:
        if row["param"] != param:
            continue
        x, rmse, crb = _floats(row, ("grid_value", "rmse", "crb"), spec.csv)
        series.setdefault(row["strategy"], []).append((x, rmse, crb))
    if not series:
        available = sorted({row["param"] for row in rows})
        raise ResultFileError(
            f"no rows with param={param!r} in {spec.csv}; "
            f"file has: {', '.join(available)}")
    xscale, yscale, xlabel, ylabel = _AXES[spec.kind]
    fig, ax = plt.subplots()
    for i, (strategy, pts) in enumerate(series.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        color = _COLORS[i % len(_COLORS)]
        ax.plot(xs, [p[1] for p in pts], linestyle="none",
                marker=_MARKERS[i % len(_MARKERS)], color=color,
                label=strategy)
        ax.plot(xs, [p[2] for p in pts], linestyle="--", color=color,
                label="_nolegend_")
    ax.set_xscale(xscale)
    ax.set_yscale(yscale)
    ax.set_xlabel(spec.xlabel if spec.xlabel is not None else xlabel)
    ax.set_ylabel(spec.ylabel if spec.ylabel is not None else ylabel)
    if spec.title is not None:
        ax.set_title(spec.title)
    ax.legend()
    return fig


def _landscape_figure(spec: FigureSpec, rows, sidecar):
    t1 = np.array([_floats(r, ("t1",), spec.csv)[0] for r in rows])
    t2 = np.array([_floats(r, ("t2",), spec.csv)[0] for r in rows])
    z = np.array([_floats(r, ("crb_trace",), spec.csv)[0] for r in rows])
    xs = np.unique(t1)
    ys = np.unique(t2)
    if xs.size * ys.size != len(rows):
        raise ResultFileError(
            f"{spec.csv} rows do not form a full t1 x t2 grid "
            f"({len(rows)} rows, {xs.size} x {ys.size} axis values)")
    order = np.lexsort((t2, t1))
    grid = z[order].reshape(xs.size, ys.size)
    # The diagonal and other degenerate designs carry an infinite bound;
    # mask them so the color scale stays finite.
    masked = np.ma.masked_invalid(grid)
    if masked.count() == 0:
        raise ResultFileError(f"{spec.csv} has no finite crb_trace values")
    times = sidecar.get("optimal_times")
    if not isinstance(times, (list, tuple)) or len(times) != 2 \
            or not all(isinstance(t, (int, float)) for t in times):
        raise ResultFileError(
            f"sidecar {spec.sidecar_path} lacks a two-entry optimal_times "
            "list")
    fig, ax = plt.subplots()
    ax.grid(False)
    mesh = ax.pcolormesh(xs, ys, np.ma.log10(masked).T, shading="nearest",
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="log10 CRB trace")
    for t in times:  # the trace is symmetric under swapping the two times
        ax.axvline(t, linestyle="--", color="white", linewidth=1.0)
        ax.axhline(t, linestyle="--", color="white", linewidth=1.0)
    ax.set_xlabel(spec.xlabel if spec.xlabel is not None else "first time")
    ax.set_ylabel(spec.ylabel if spec.ylabel is not None else "second time")
    if spec.title is not None:
        ax.set_title(spec.title)
    return fig


def build_figure(spec: FigureSpec):
    """Load, verify, and draw; returns the live Figure without saving."""
    if spec.kind is FigureKind.CrbLandscape:
        columns, draw = LANDSCAPE_COLUMNS, _landscape_figure
    else:
        columns, draw = HARNESS_COLUMNS, _sweep_figure
    rows, sidecar = load_results(spec.csv, spec.sidecar_path, columns)
    with plt.rc_context(_STYLE):
        return draw(spec, rows, sidecar)


def render(spec: FigureSpec) -> Path:
    """Render to spec.out.  Nothing is written unless validation passes."""
    fig = build_figure(spec)
    out = Path(spec.out)
    try:
        fig.savefig(out, dpi=spec.dpi,
                    metadata=_METADATA[out.suffix.lower()])
    finally:
        plt.close(fig)
    return out
