"""Deterministic file output: CSV, JSON and a single-panel SVG line plot.

All writers go through a temp file in the target directory followed by an
atomic rename, so a crashed run never leaves a half-written report.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from typing import Sequence

__all__ = ["atomic_write", "write_csv", "write_json", "dumps_json", "svg_line_plot", "write_svg"]


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(path: str, rows: Sequence[Sequence]) -> None:
    atomic_write(path, csv_text(rows))


def _clean(obj):
    # json has no nan/inf; keep output strict and stable
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str, obj) -> None:
    atomic_write(path, dumps_json(obj))


def _fmt(v: float) -> str:
    return format(v, ".6g")


def svg_line_plot(xs: Sequence[float], ys: Sequence[float], title: str = "", xlabel: str = "",
                  ylabel: str = "", log_x: bool = False, log_y: bool = False,
                  width: int = 640, height: int = 400) -> str:
    """Polyline with axes and min/max tick labels; nonpositive values are dropped on log axes."""
    pts = [(x, y) for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y) and (not log_x or x > 0) and (not log_y or y > 0)]
    tx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    ty = (lambda v: math.log10(v)) if log_y else (lambda v: v)
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="15">{_esc(title)}</text>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
        f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {mt + ph / 2})">{_esc(ylabel)}</text>',
    ]
    if pts:
        X = [tx(x) for x, _ in pts]
        Y = [ty(y) for _, y in pts]
        x0, x1 = min(X), max(X)
        y0, y1 = min(Y), max(Y)
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
        sx = lambda v: ml + (v - x0) / (x1 - x0) * pw
        sy = lambda v: mt + ph - (v - y0) / (y1 - y0) * ph
        path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(X, Y))
        out.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{path}"/>')
        for a, b in zip(X, Y):
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="#1f77b4"/>')
        lab = lambda v, log: _fmt(10 ** v if log else v)
        out += [
            f'<text x="{ml}" y="{mt + ph + 18}" text-anchor="middle" font-size="11">{lab(x0, log_x)}</text>',
            f'<text x="{ml + pw}" y="{mt + ph + 18}" text-anchor="middle" font-size="11">{lab(x1, log_x)}</text>',
            f'<text x="{ml - 6}" y="{mt + ph}" text-anchor="end" font-size="11">{lab(y0, log_y)}</text>',
            f'<text x="{ml - 6}" y="{mt + 4}" text-anchor="end" font-size="11">{lab(y1, log_y)}</text>',
        ]
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path: str, *args, **kwargs) -> None:
    atomic_write(path, svg_line_plot(*args, **kwargs))
