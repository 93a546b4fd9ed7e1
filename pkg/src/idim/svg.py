"""Tiny dependency-free SVG line charts for experiment reports.

Deterministic output: the same series always render to byte-identical SVG.
Log-scaled axes are handled by plotting log10 of the data and labeling ticks
with the original values.
"""

from __future__ import annotations

import math

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 36, 48
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def line_chart(series, title: str, xlabel: str, ylabel: str,
               log_x: bool = False, log_y: bool = False) -> str:
    """Render [(label, xs, ys)] to an SVG document string.

    Points with None y values are skipped (they break the polyline).
    """
    pts = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if y is None:
                continue
            pts.append((math.log10(x) if log_x else float(x),
                        math.log10(y) if log_y else float(y)))
    if not pts:
        xs_lo, xs_hi, ys_lo, ys_hi = 0.0, 1.0, 0.0, 1.0
    else:
        xs_lo = min(p[0] for p in pts)
        xs_hi = max(p[0] for p in pts)
        ys_lo = min(p[1] for p in pts)
        ys_hi = max(p[1] for p in pts)
        if xs_hi == xs_lo:
            xs_hi = xs_lo + 1.0
        pad = 0.05 * (ys_hi - ys_lo) or 0.5
        ys_lo, ys_hi = ys_lo - pad, ys_hi + pad

    px = _W - _ML - _MR
    py = _H - _MT - _MB

    def sx(x: float) -> float:
        return _ML + (x - xs_lo) / (xs_hi - xs_lo) * px

    def sy(y: float) -> float:
        return _MT + (1.0 - (y - ys_lo) / (ys_hi - ys_lo)) * py

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">']
    out.append(f'<rect width="{_W}" height="{_H}" fill="white"/>')
    out.append(f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    # axes
    out.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>')
    out.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>')
    for t in _ticks(xs_lo, xs_hi):
        x = sx(t)
        label = _fmt(10.0 ** t) if log_x else _fmt(t)
        out.append(f'<line x1="{x:.1f}" y1="{_H - _MB}" x2="{x:.1f}" y2="{_H - _MB + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{_H - _MB + 16}" text-anchor="middle">{label}</text>')
    for t in _ticks(ys_lo, ys_hi):
        y = sy(t)
        label = _fmt(10.0 ** t) if log_y else _fmt(t)
        out.append(f'<line x1="{_ML - 4}" y1="{y:.1f}" x2="{_ML}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{_ML - 6}" y="{y + 3:.1f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{_ML + px / 2:.1f}" y="{_H - 8}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{_MT + py / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_MT + py / 2:.1f})">{ylabel}</text>')
    # series
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        run = []
        chunks = []
        for x, y in zip(xs, ys):
            if y is None:
                if run:
                    chunks.append(run)
                run = []
                continue
            run.append((sx(math.log10(x) if log_x else float(x)),
                        sy(math.log10(y) if log_y else float(y))))
        if run:
            chunks.append(run)
        for chunk in chunks:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in chunk)
            if len(chunk) > 1:
                out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            for x, y in chunk:
                out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2.5" fill="{color}"/>')
        ly = _MT + 14 + 14 * i
        out.append(f'<line x1="{_W - _MR - 130}" y1="{ly - 4:.1f}" x2="{_W - _MR - 110}" '
                   f'y2="{ly - 4:.1f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _MR - 105}" y="{ly:.1f}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
