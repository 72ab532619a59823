"""Deterministic writers: CSV, JSON and self-contained SVG heatmaps.

Data files never contain timestamps, and every float is written with 17
significant digits, so identical inputs give byte-identical files. The
manifest written by the atlas command is the only file with a timestamp.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np


def fmt(x: Any) -> str:
    """17 significant digits for floats (round-trip safe); ``nan``/``inf`` spelled out."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")  # RFC 4180 line ends
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows), encoding="utf-8", newline="")
    return path


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no nan/inf; write them as strings
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def json_text(obj: Any) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(json_text(obj), encoding="utf-8")
    return path


# ---------------------------------------------------------------- heatmaps

# viridis endpoints and a few stops, linearly interpolated
_STOPS = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
], dtype=float)


def _color(u: float) -> str:
    u = min(max(u, 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(u), len(_STOPS) - 2)
    c = _STOPS[i] + (u - i) * (_STOPS[i + 1] - _STOPS[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def heatmap_svg(values: np.ndarray, x_axis: np.ndarray, y_axis: np.ndarray, title: str,
                vmin: float = 1e-12, vmax: float = 10.0, cell: int = 10) -> str:
    """Log-colour heatmap of ``values[iy, ix]`` with axes in units of 2 pi.

    NaN cells are drawn grey. Rows are flipped so ``y`` grows upwards.
    """
    ny, nx = values.shape
    left, top, bar = 70, 30, 60
    w, h = nx * cell, ny * cell
    lo, hi = math.log10(vmin), math.log10(vmax)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{left + w + bar + 20}" '
        f'height="{top + h + 50}" font-family="sans-serif" font-size="10">',
        f'<text x="{left}" y="18" font-size="12">{escape(title)}</text>',
    ]
    for iy in range(ny):
        yy = top + (ny - 1 - iy) * cell
        for ix in range(nx):
            v = values[iy, ix]
            if math.isnan(v):
                fill = "#bbbbbb"
            else:
                fill = _color((math.log10(max(v, vmin)) - lo) / (hi - lo))
            out.append(f'<rect x="{left + ix * cell}" y="{yy}" width="{cell}" height="{cell}" fill="{fill}"/>')
    two_pi = 2 * math.pi
    # decade ticks along both axes
    for axis, n, horizontal in ((x_axis, nx, True), (y_axis, ny, False)):
        logs = np.log10(np.asarray(axis) / two_pi)
        for k in range(int(math.ceil(logs[0] - 1e-9)), int(math.floor(logs[-1] + 1e-9)) + 1):
            frac = 0.5 if n == 1 else (k - logs[0]) / (logs[-1] - logs[0])
            label = f"1e{k}"
            if horizontal:
                px = left + cell / 2 + frac * (w - cell)
                out.append(f'<text x="{px:.1f}" y="{top + h + 14}" text-anchor="middle">{label}</text>')
            else:
                py = top + h - cell / 2 - frac * (h - cell)
                out.append(f'<text x="{left - 4}" y="{py + 3:.1f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{left + w / 2}" y="{top + h + 32}" text-anchor="middle">'
               f'x = int V dt / hbar  [units of 2 pi]</text>')
    out.append(f'<text x="14" y="{top + h / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + h / 2})">y = dE tau / 2 hbar  [units of 2 pi]</text>')
    bx = left + w + 15
    steps = 50
    for i in range(steps):
        out.append(f'<rect x="{bx}" y="{top + h - (i + 1) * h / steps:.2f}" width="12" '
                   f'height="{h / steps + 0.5:.2f}" fill="{_color(i / (steps - 1))}"/>')
    out.append(f'<text x="{bx + 16}" y="{top + 8}">{fmt(vmax)}</text>')
    out.append(f'<text x="{bx + 16}" y="{top + h}">{fmt(vmin)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path
