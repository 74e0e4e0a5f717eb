"""Minimal SVG writers for the harness plots (no plotting dependency)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

ORIGINAL = "#e8891d"  # orange
OTHER = "#1f5fa8"  # blue
NOISY = "#9aa7b4"


def _svg(width, height, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n{body}</svg>\n'
    )


def bar_chart(values: dict, title: str, log_scale: bool = True, width: int = 640, height: int = 360) -> str:
    """Vertical bars, one per key; log scale clamps at the smallest positive value."""
    keys = list(values)
    vals = np.array([values[k] for k in keys], dtype=float)
    left, right, top, bottom = 60, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom
    pos = vals[vals > 0]
    if log_scale and pos.size:
        lo = math.floor(math.log10(pos.min()))
        hi = math.ceil(math.log10(pos.max()))
        hi = hi if hi > lo else lo + 1

        def yfrac(v):
            return (math.log10(max(v, 10.0**lo)) - lo) / (hi - lo)

        ticks = [(10.0**e, yfrac(10.0**e)) for e in range(lo, hi + 1)]
    else:
        vmax = vals.max() if vals.size and vals.max() > 0 else 1.0

        def yfrac(v):
            return max(v, 0.0) / vmax

        ticks = [(vmax * f, f) for f in (0, 0.25, 0.5, 0.75, 1.0)]
    parts = [f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>']
    for v, f in ticks:
        y = top + ph * (1 - f)
        parts.append(f'<line x1="{left}" x2="{left + pw}" y1="{y:.1f}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 4}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    bw = pw / max(len(keys), 1)
    for i, (k, v) in enumerate(zip(keys, vals)):
        h = ph * yfrac(v) if np.isfinite(v) else 0.0
        x = left + i * bw + 0.15 * bw
        parts.append(f'<rect x="{x:.1f}" y="{top + ph - h:.1f}" width="{0.7 * bw:.1f}" height="{h:.1f}" fill="{OTHER}"/>')
        parts.append(f'<text x="{x + 0.35 * bw:.1f}" y="{height - bottom + 14}" text-anchor="middle">{escape(str(k))}</text>')
    return _svg(width, height, "\n".join(parts) + "\n")


def _polyline(y, x0, y0, w, h, lo, hi, color, stroke=1.0):
    n = len(y)
    xs = x0 + w * np.arange(n) / max(n - 1, 1)
    ys = y0 + h * (1 - (np.asarray(y) - lo) / (hi - lo))
    pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(xs, ys))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{stroke}"/>'


def reconstruction_grid(panels, columns: int = 3, panel_w: int = 260, panel_h: int = 120) -> str:
    """Panels of (title, original, noisy, reconstruction): original in orange,
    noisy in grey, reconstruction in blue."""
    rows = max(1, math.ceil(len(panels) / max(columns, 1)))
    width, height = columns * panel_w, rows * panel_h
    parts = []
    for idx, (title, x, y, xh) in enumerate(panels):
        r, c = divmod(idx, columns)
        x0, y0 = c * panel_w + 8, r * panel_h + 18
        w, h = panel_w - 16, panel_h - 26
        stack = np.concatenate([np.ravel(x), np.ravel(xh)] + ([np.ravel(y)] if len(y) == len(x) else []))
        lo, hi = float(stack.min()), float(stack.max())
        if hi <= lo:
            hi = lo + 1.0
        parts.append(f'<text x="{x0}" y="{y0 - 5}">{escape(title)}</text>')
        if len(y) == len(x):
            parts.append(_polyline(y, x0, y0, w, h, lo, hi, NOISY, 0.6))
        parts.append(_polyline(x, x0, y0, w, h, lo, hi, ORIGINAL, 1.2))
        parts.append(_polyline(xh, x0, y0, w, h, lo, hi, OTHER, 1.0))
    return _svg(width, height, "\n".join(parts) + "\n")
