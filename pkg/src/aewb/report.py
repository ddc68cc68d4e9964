"""Report emission: report.json, CSV tables, SVG plots, PGM/PPM images, models.

Every writer is deterministic: same inputs, same bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .autodiff import ContractError
from .data.images import write_pnm
from .serialize import save

WIDTH, HEIGHT, MARGIN = 480, 360, 48
LOW_COLOR = (49, 54, 149)
HIGH_COLOR = (215, 48, 39)


def _num(v: float) -> str:
    return f"{v:.2f}"


def _axis_map(values: np.ndarray, lo_px: float, hi_px: float):
    """Linear map from the data range onto [lo_px, hi_px]; a flat range maps to the midpoint."""
    vmin, vmax = float(values.min()), float(values.max())
    if vmax > vmin:
        return lambda v: lo_px + (v - vmin) / (vmax - vmin) * (hi_px - lo_px), vmin, vmax
    mid = (lo_px + hi_px) / 2.0
    return lambda v: mid, vmin, vmax


def color_ramp(t: float) -> str:
    """Hex colour at fraction ``t`` of the linear ramp from LOW_COLOR to HIGH_COLOR."""
    t = min(max(t, 0.0), 1.0)
    r, g, b = (int(math.floor(a + t * (c - a) + 0.5)) for a, c in zip(LOW_COLOR, HIGH_COLOR))
    return f"#{r:02x}{g:02x}{b:02x}"


def _frame(title: str, xs, ys, xlabel: str, ylabel: str):
    """Shared SVG header, axes and tick labels; returns (lines, x map, y map)."""
    left, right = MARGIN, WIDTH - MARGIN
    top, bottom = MARGIN, HEIGHT - MARGIN
    fx, x0, x1 = _axis_map(xs, left, right)
    fy, y0, y1 = _axis_map(ys, bottom, top)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#000000"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}" stroke="#000000"/>',
        f'<text x="{left}" y="{bottom + 16}" font-size="10">{x0:.4g}</text>',
        f'<text x="{right}" y="{bottom + 16}" font-size="10" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{left - 4}" y="{bottom}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{left - 4}" y="{top + 8}" font-size="10" text-anchor="end">{y1:.4g}</text>',
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 8}" font-size="12" text-anchor="middle">{_esc(xlabel)}</text>',
        f'<text x="12" y="{HEIGHT / 2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 12 {HEIGHT / 2:.0f})">{_esc(ylabel)}</text>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.0f}" y="24" font-size="14" text-anchor="middle">{_esc(title)}</text>')
    return out, fx, fy


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _checked(points, width: int) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        raise ContractError("cannot plot an empty table")
    P = P.reshape(len(P), -1)
    if P.shape[1] < width:
        raise ContractError(f"plot rows need {width} columns, got {P.shape[1]}")
    if not np.all(np.isfinite(P[:, :width])):
        raise ContractError("plot values must be finite")
    return P


def emit_svg_scatter(points, title: str = "", xlabel: str = "x", ylabel: str = "y") -> bytes:
    """One circle per (x, y, value) row, coloured by a linear ramp over the value range."""
    P = _checked(points, 3)
    out, fx, fy = _frame(title, P[:, 0], P[:, 1], xlabel, ylabel)
    vmin, vmax = P[:, 2].min(), P[:, 2].max()
    for x, y, v in P[:, :3]:
        t = (v - vmin) / (vmax - vmin) if vmax > vmin else 0.5
        out.append(f'<circle cx="{_num(fx(x))}" cy="{_num(fy(y))}" r="3" fill="{color_ramp(t)}"/>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode()


def emit_svg_polyline(points, title: str = "", xlabel: str = "x", ylabel: str = "y") -> bytes:
    """(x, y) rows joined in order by one polyline."""
    P = _checked(points, 2)
    out, fx, fy = _frame(title, P[:, 0], P[:, 1], xlabel, ylabel)
    coords = " ".join(f"{_num(fx(x))},{_num(fy(y))}" for x, y in P[:, :2])
    out.append(f'<polyline points="{coords}" fill="none" stroke="{color_ramp(1.0)}" stroke-width="1.5"/>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_csv(header: Sequence[str], rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue().encode()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    return v


def report_json(task: str, config: dict, metrics: dict, artifacts: list[str], seed: int,
                duration: Optional[float], source: str = "") -> bytes:
    doc = {"task": task, "config_echo": config, "metrics": metrics, "artifacts": sorted(artifacts),
           "seed": seed, "duration_seconds": duration}
    if source:
        doc["data_source"] = source
    return (json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n").encode()


def write_artifacts(report, out_dir) -> list[str]:
    """Write tables, plots, images and models of a Report; returns their file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []

    def put(name: str, data: bytes):
        (out / name).write_bytes(data)
        names.append(name)

    for name, table in report.tables.items():
        put(f"{name}.csv", table_csv(table.header, table.rows))
    for name, plot in report.plots.items():
        table = report.tables[plot.table]
        cols = [table.header.index(c) for c in (plot.x, plot.y) + ((plot.value,) if plot.value else ())]
        pts = [[row[c] for c in cols] for row in table.rows]
        if not pts:
            continue
        emit = emit_svg_scatter if plot.kind == "scatter" else emit_svg_polyline
        put(f"{name}.svg", emit(pts, plot.title, plot.x, plot.y))
    for name, img in report.images.items():
        ext = "pgm" if img.shape[-1] == 1 else "ppm"
        put(f"{name}.{ext}", write_pnm(img))
    for name, net in report.models.items():
        for p in save(net, out / f"model_{name}.aewb"):
            names.append(p.name)
    return names
