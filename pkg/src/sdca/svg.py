"""A minimal SVG line-chart emitter (axes, optional log scales, legend).

Every input point becomes one vertex of its polyline; nothing is resampled.
On a log axis, non-positive values are drawn at the axis floor so the vertex
count still matches the data.
"""

from __future__ import annotations

import math
from html import escape

import numpy as np

__all__ = ["line_chart"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
W, H = 720, 440
ML, MR, MT, MB = 80, 190, 40, 60


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}"
    return f"{v:.3g}"


def _axis(values, log: bool):
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if log:
        pos = v[v > 0]
        if pos.size == 0:
            return 1e-1, 1.0, 1e-1
        lo, hi = float(pos.min()), float(pos.max())
        floor = lo
        lo, hi = 10 ** math.floor(math.log10(lo)), 10 ** math.ceil(math.log10(hi))
        if lo == hi:
            hi = lo * 10
        return lo, hi, floor
    if v.size == 0:
        return 0.0, 1.0, None
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad, None


def _ticks(lo, hi, log):
    if log:
        a, b = int(round(math.log10(lo))), int(round(math.log10(hi)))
        step = max(1, (b - a) // 6)
        return [10.0 ** e for e in range(a, b + 1, step)]
    return list(np.linspace(lo, hi, 6))


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
               logx: bool = False, logy: bool = False) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document string."""
    allx = np.concatenate([np.asarray(xs, dtype=np.float64) for xs, _ in series.values()]) if series else []
    ally = np.concatenate([np.asarray(ys, dtype=np.float64) for _, ys in series.values()]) if series else []
    x0, x1, xfloor = _axis(allx, logx)
    y0, y1, yfloor = _axis(ally, logy)
    pw, ph = W - ML - MR, H - MT - MB

    def tx(v):
        if logx:
            v = max(v, xfloor)
            return ML + pw * (math.log10(v) - math.log10(x0)) / (math.log10(x1) - math.log10(x0))
        return ML + pw * (v - x0) / (x1 - x0)

    def ty(v):
        if logy:
            v = max(v, yfloor)
            return MT + ph * (1 - (math.log10(v) - math.log10(y0)) / (math.log10(y1) - math.log10(y0)))
        return MT + ph * (1 - (v - y0) / (y1 - y0))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{ML + pw / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1, logx):
        X = tx(t)
        out.append(f'<line x1="{X:.2f}" y1="{MT + ph}" x2="{X:.2f}" y2="{MT + ph + 5}" stroke="black"/>'
                   f'<text x="{X:.2f}" y="{MT + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1, logy):
        Y = ty(t)
        out.append(f'<line x1="{ML - 5}" y1="{Y:.2f}" x2="{ML}" y2="{Y:.2f}" stroke="black"/>'
                   f'<line x1="{ML}" y1="{Y:.2f}" x2="{ML + pw}" y2="{Y:.2f}" stroke="#ddd"/>'
                   f'<text x="{ML - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18 {MT + ph / 2}) rotate(-90)" text-anchor="middle">'
               f'{escape(ylabel)}</text>')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{tx(float(a)):.2f},{ty(float(b)):.2f}"
                       for a, b in zip(xs, ys) if math.isfinite(a) and math.isfinite(b))
        out.append(f'<polyline data-label="{escape(str(label))}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{pts}"/>')
        ly = MT + 10 + 18 * i
        out.append(f'<line x1="{W - MR + 12}" y1="{ly}" x2="{W - MR + 36}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/><text x="{W - MR + 42}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
