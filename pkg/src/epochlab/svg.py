"""Self-contained SVG line charts (no plotting library needed)."""
from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def line_chart(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    log_y: bool = False,
    width: int = 640,
    height: int = 400,
) -> str:
    """Render ``{label: (xs, ys)}`` as polylines on shared axes."""
    margin_l, margin_r, margin_t, margin_b = 70, 150, 36, 48
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b

    def ty(v):
        return math.log10(v) if log_y else v

    pts = [(x, ty(y)) for xs, ys in series.values() for x, y in zip(xs, ys) if not log_y or y > 0]
    if not pts:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(x):
        return margin_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return margin_t + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.1f}" y="{margin_t + ph + 16}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        label = f"1e{t:.2g}" if log_y else f"{t:.3g}"
        out.append(f'<text x="{margin_l - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{label}</text>')
        out.append(f'<line x1="{margin_l}" x2="{margin_l + pw}" y1="{py(t):.1f}" y2="{py(t):.1f}" stroke="#eee"/>')
    out.append(f'<text x="{margin_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{margin_t + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {margin_t + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(ty(y)):.2f}" for x, y in zip(xs, ys) if not log_y or y > 0)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = margin_t + 14 + 16 * i
        out.append(f'<line x1="{margin_l + pw + 10}" x2="{margin_l + pw + 30}" y1="{ly - 4}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{margin_l + pw + 34}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
