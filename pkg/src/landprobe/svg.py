"""Minimal self-contained SVG charts (scatter, histogram, line)."""

from __future__ import annotations

from html import escape

import numpy as np

W, H, PAD = 480, 400, 56
COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"]


def _range(values, symmetric=False):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return -1.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if symmetric:
        m = max(abs(lo), abs(hi)) or 1.0
        return -1.05 * m, 1.05 * m
    if hi == lo:
        span = abs(hi) or 1.0
        return lo - 0.5 * span, hi + 0.5 * span
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Frame:
    def __init__(self, xr, yr):
        self.xr, self.yr = xr, yr

    def x(self, v):
        return PAD + (v - self.xr[0]) / (self.xr[1] - self.xr[0]) * (W - 2 * PAD)

    def y(self, v):
        return H - PAD - (v - self.yr[0]) / (self.yr[1] - self.yr[0]) * (H - 2 * PAD)


def _doc(body: list[str], frame: _Frame, title: str, xlabel: str, ylabel: str) -> str:
    g = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#444"/>',
        f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
        f'<text x="{PAD}" y="{H - PAD + 14}" font-size="10">{frame.xr[0]:.3g}</text>',
        f'<text x="{W - PAD}" y="{H - PAD + 14}" text-anchor="end" font-size="10">{frame.xr[1]:.3g}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end" font-size="10">{frame.yr[0]:.3g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 10}" text-anchor="end" font-size="10">{frame.yr[1]:.3g}</text>',
    ]
    return "\n".join(g + body + ["</svg>"]) + "\n"


def scatter_svg(x, y, title="", xlabel="x", ylabel="y", diagonals=False) -> str:
    """Scatter plot; ``diagonals`` adds the y=x and y=-x guides on equal axes."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if diagonals:
        r = _range(np.concatenate([x, y]), symmetric=True)
        frame = _Frame(r, r)
    else:
        frame = _Frame(_range(x), _range(y))
    body = []
    if diagonals:
        lo, hi = frame.xr
        for y_start, y_end in ((lo, hi), (hi, lo)):
            body.append(f'<line x1="{frame.x(lo):.2f}" y1="{frame.y(y_start):.2f}" x2="{frame.x(hi):.2f}" '
                        f'y2="{frame.y(y_end):.2f}" stroke="#999" stroke-dasharray="4 3"/>')
    for xi, yi in zip(x, y):
        if np.isfinite(xi) and np.isfinite(yi):
            body.append(f'<circle cx="{frame.x(xi):.2f}" cy="{frame.y(yi):.2f}" r="2" fill="{COLORS[0]}" fill-opacity="0.6"/>')
    return _doc(body, frame, title, xlabel, ylabel)


def histogram_svg(values, bins=30, title="", xlabel="value") -> str:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    lo, hi = _range(v)
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    frame = _Frame((float(edges[0]), float(edges[-1])), (0.0, float(max(counts.max(), 1)) * 1.05))
    body = []
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        x0, x1 = frame.x(lo), frame.x(hi)
        y0 = frame.y(c)
        body.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{max(x1 - x0 - 1, 0.5):.2f}" '
                    f'height="{frame.y(0) - y0:.2f}" fill="{COLORS[0]}"/>')
    return _doc(body, frame, title, xlabel, "count")


def line_svg(series: dict, title="", xlabel="x", ylabel="y") -> str:
    """One polyline per ``{label: (x, y)}`` entry, with a legend."""
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    frame = _Frame(_range(xs), _range(ys))
    body = []
    for i, (label, (x, y)) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{frame.x(a):.2f},{frame.y(b):.2f}" for a, b in zip(x, y) if np.isfinite(b))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(f'<text x="{PAD + 8}" y="{PAD + 16 + 14 * i}" font-size="11" fill="{color}">{escape(str(label))}</text>')
    return _doc(body, frame, title, xlabel, ylabel)
