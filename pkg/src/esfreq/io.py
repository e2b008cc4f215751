"""CSV tables and standalone SVG line plots."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence, Tuple, Union
from xml.sax.saxutils import escape

import numpy as np

from .analysis import Metrics, SweepResult
from .grid import Trace

__all__ = [
    "TRACE_HEADER",
    "MAX_PLOT_POINTS",
    "fmt",
    "write_trace_csv",
    "write_metrics_csv",
    "write_sweep_csv",
    "decimate",
    "emit_svg_plot",
]

TRACE_HEADER = ("t_s", "freq_hz", "rocof_hz_s", "es_power_mw", "es_soc_mws",
                "mech_mw", "load_fraction")
MAX_PLOT_POINTS = 2000

PathLike = Union[str, Path]


def fmt(x) -> str:
    """Fixed 6-decimal text; ``None`` becomes an empty field, booleans 0/1."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _write_rows(path: PathLike, header, rows):
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    # newline="" keeps "\n" on every platform so files compare byte-for-byte
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_trace_csv(trace: Trace, path: PathLike) -> Path:
    cols = (trace.t, trace.freq_hz, trace.rocof_hz_s, trace.es_power_mw,
            trace.es_soc_mws, trace.mech_mw, trace.load_fraction)
    return _write_rows(path, TRACE_HEADER, zip(*cols))


METRIC_FIELDS = tuple(Metrics.__dataclass_fields__)


def write_metrics_csv(metrics: Union[Metrics, Mapping[str, Metrics]], path: PathLike) -> Path:
    """One row per named run; a bare :class:`Metrics` is written as ``run``."""
    if isinstance(metrics, Metrics):
        metrics = {"run": metrics}
    rows = [(name, *(getattr(m, k) for k in METRIC_FIELDS)) for name, m in metrics.items()]
    return _write_rows(path, ("run", *METRIC_FIELDS), rows)


def write_sweep_csv(result: SweepResult, path: PathLike) -> Path:
    """One row per sweep point; the nadir argmax row has ``is_argmax`` = 1."""
    header = (result.parameter, "nadir_hz", "nadir_time_s", "first_local_nadir_hz",
              "first_local_nadir_time_s", "second_local_nadir_hz",
              "second_local_nadir_time_s", "settling_hz", "energy_used_mws",
              "peak_power_mw", "support_s", "nadir_branch", "is_argmax")
    best = result.argmax_index
    rows = []
    for i, (v, m, br) in enumerate(zip(result.values, result.metrics, result.nadir_branch)):
        rows.append((v, m.nadir_hz, m.nadir_time_s, m.first_local_nadir_hz,
                     m.first_local_nadir_time_s, m.second_local_nadir_hz,
                     m.second_local_nadir_time_s, m.settling_hz, m.energy_used_mws,
                     m.peak_power_mw, m.support_s, br, i == best))
    return _write_rows(path, header, rows)


def decimate(x, y, max_points: int = MAX_PLOT_POINTS) -> Tuple[np.ndarray, np.ndarray]:
    """Evenly thin a series to at most ``max_points``, keeping both endpoints and extrema."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    n = x.size
    if n <= max_points:
        return x, y
    keep = np.unique(np.round(np.linspace(0, n - 1, max_points - 2)).astype(int))
    keep = np.unique(np.concatenate([keep, [np.argmin(y), np.argmax(y)]]))
    return x[keep], y[keep]


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def emit_svg_plot(series: Sequence[Tuple[Sequence[float], Sequence[float]]],
                  labels: Sequence[str], path: PathLike, *, title: str = "",
                  xlabel: str = "", ylabel: str = "", width: int = 800,
                  height: int = 480, max_points: int = MAX_PLOT_POINTS) -> Path:
    """Write ``series`` (a list of ``(x, y)`` pairs) as one polyline each."""
    if not series:
        raise ValueError("no series to plot")
    if len(labels) != len(series):
        raise ValueError(f"{len(series)} series but {len(labels)} labels")
    data = []
    for x, y in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if x.size == 0 or x.shape != y.shape:
            raise ValueError("each series needs equal-length, non-empty x and y")
        data.append(decimate(x, y, max_points))
    xs = np.concatenate([d[0] for d in data])
    ys = np.concatenate([d[1] for d in data])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = max(abs(y0) * 1e-3, 1e-3)
        y0, y1 = y0 - pad, y1 + pad
    ml, mr, mt, mb = 80, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1):
        px = sx(v)
        out.append(f'<line x1="{px:.2f}" y1="{mt + ph}" x2="{px:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{mt + ph + 18}" text-anchor="middle">{v:.4g}</text>')
    for v in _ticks(y0, y1):
        py = sy(v)
        out.append(f'<line x1="{ml - 5}" y1="{py:.2f}" x2="{ml}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py + 4:.2f}" text-anchor="end">{v:.6g}</text>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    for k, (x, y) in enumerate(data):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        color = _COLORS[k % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
    for k, label in enumerate(labels):
        ly = mt + 16 + 18 * k
        lx = ml + pw - 170
        color = _COLORS[k % len(_COLORS)]
        out.append(f'<line class="legend" x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
