"""Minimal SVG line plots: polylines, axis ticks and a dashed zero guide."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["nice_ticks", "line_plot"]

_COLORS = ["#1f4e9c", "#b8432f", "#2e7d32", "#6a3d9a", "#a07000"]


def nice_ticks(lo, hi, count=5):
    """Round tick positions covering ``[lo, hi]`` with about ``count`` ticks."""
    if not hi > lo:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    n = int(round((stop - start) / step))
    return [start + i * step for i in range(n + 1)]


def _fmt(v):
    return f"{v:.6g}"


def line_plot(path, series, xlabel="", ylabel="", title="", zero_line=True,
              width=640, height=420):
    """Write an SVG with one polyline per ``(xs, ys, label)`` in ``series``.

    Non-finite points split a polyline. With ``zero_line`` a dashed red
    horizontal line marks ``y = 0`` when it lies inside the axis range.
    """
    xs_all = np.concatenate([np.asarray(s[0], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[1], float) for s in series])
    fin = np.isfinite(xs_all) & np.isfinite(ys_all)
    if not fin.any():
        raise ValueError("nothing finite to plot")
    xt = nice_ticks(xs_all[fin].min(), xs_all[fin].max())
    yt = nice_ticks(ys_all[fin].min(), ys_all[fin].max())
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    ml, mr, mt, mb = 70, 20, 40, 55
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for x in xt:
        out.append(f'<line x1="{px(x):.2f}" y1="{mt + ph}" x2="{px(x):.2f}" y2="{mt + ph + 5}" '
                   'stroke="black"/>')
        out.append(f'<text x="{px(x):.2f}" y="{mt + ph + 18}" text-anchor="middle">'
                   f'{_fmt(x)}</text>')
    for y in yt:
        out.append(f'<line x1="{ml - 5}" y1="{py(y):.2f}" x2="{ml}" y2="{py(y):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(y) + 4:.2f}" text-anchor="end">{_fmt(y)}</text>')
    if zero_line and y0 <= 0 <= y1:
        out.append(f'<line x1="{ml}" y1="{py(0):.2f}" x2="{ml + pw}" y2="{py(0):.2f}" '
                   'stroke="red" stroke-dasharray="6,4"/>')
    for i, (xs, ys, label) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        run = []
        for j in range(xs.size + 1):
            if j < xs.size and ok[j]:
                run.append(f"{px(xs[j]):.2f},{py(ys[j]):.2f}")
                continue
            if len(run) > 1:
                out.append(f'<polyline points="{" ".join(run)}" fill="none" stroke="{color}" '
                           'stroke-width="1.8"/>')
            run = []
        if label:
            out.append(f'<text x="{ml + 10}" y="{mt + 16 + 16 * i}" fill="{color}">'
                       f'{escape(label)}</text>')
    if title:
        out.append(f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">'
                   f'{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">'
                   f'{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
