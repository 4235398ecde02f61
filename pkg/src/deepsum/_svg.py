"""Minimal deterministic SVG writers (no timestamps, fixed number formatting)."""

from __future__ import annotations

import re
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _n(x) -> str:
    return f"{float(x):.2f}"


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "video"


def _doc(width, height, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n")


def bar_chart(labels, values, title="", width=640, height=360) -> str:
    left, right, top, bottom = 50, 20, 40, 60
    pw, ph = width - left - right, height - top - bottom
    vmax = max([v for v in values if v == v] + [1e-12])
    bw = pw / max(len(values), 1)
    body = [f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2:.2f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
            f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for i, (lab, v) in enumerate(zip(labels, values)):
        v = v if v == v else 0.0
        h = ph * v / vmax
        x = left + i * bw + 0.15 * bw
        color = "#999999" if i < 3 else PALETTE[(i - 3) % len(PALETTE)]
        body.append(f'<rect x="{_n(x)}" y="{_n(top + ph - h)}" width="{_n(0.7 * bw)}" height="{_n(h)}" fill="{color}"/>')
        body.append(f'<text x="{_n(x + 0.35 * bw)}" y="{_n(top + ph - h - 4)}" text-anchor="middle" '
                    f'font-size="11">{v:.3f}</text>')
        body.append(f'<text x="{_n(x + 0.35 * bw)}" y="{_n(top + ph + 16)}" text-anchor="middle" '
                    f'font-size="12">{escape(str(lab))}</text>')
    return _doc(width, height, body)


def timeline_strip(duration_s, fps, agreement, intervals, title="", width=800, height=160) -> str:
    left, right, top, bottom = 40, 20, 30, 30
    pw, ph = width - left - right, height - top - bottom
    sx = pw / max(float(duration_s), 1e-12)
    body = [f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{left}" y="18" font-size="13">{escape(title)}</text>']
    for s, e in intervals:
        body.append(f'<rect x="{_n(left + s * sx)}" y="{top}" width="{_n((e - s) * sx)}" height="{ph}" '
                    f'fill="#2ca02c" fill-opacity="0.35"/>')
    if len(agreement):
        pts = " ".join(f"{_n(left + (i + 0.5) / fps * sx)},{_n(top + ph * (1 - a))}" for i, a in enumerate(agreement))
        body.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    body.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    body.append(f'<text x="{left}" y="{height - 8}" font-size="11">0 s</text>')
    body.append(f'<text x="{left + pw}" y="{height - 8}" text-anchor="end" font-size="11">{float(duration_s):.1f} s</text>')
    return _doc(width, height, body)


def scatter(coords, colors, labels=None, path=True, title="", width=600, height=600) -> str:
    pad = 40
    xs = [c[0] for c in coords]
    ys = [c[1] for c in coords]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-12)
    scale = (min(width, height) - 2 * pad) / span

    def px(x, y):
        return pad + (x - x0) * scale, height - pad - (y - y0) * scale

    body = [f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{pad}" y="24" font-size="14">{escape(title)}</text>']
    if path and len(coords) > 1:
        pts = " ".join(f"{_n(a)},{_n(b)}" for a, b in (px(x, y) for x, y in coords))
        body.append(f'<polyline points="{pts}" fill="none" stroke="#cccccc" stroke-width="1"/>')
    for i, ((x, y), c) in enumerate(zip(coords, colors)):
        a, b = px(x, y)
        body.append(f'<circle cx="{_n(a)}" cy="{_n(b)}" r="4" fill="{PALETTE[int(c) % len(PALETTE)]}"/>')
        if labels is not None and labels[i] is not None and labels[i] != "":
            body.append(f'<text x="{_n(a + 5)}" y="{_n(b - 5)}" font-size="10">{escape(str(labels[i]))}</text>')
    return _doc(width, height, body)
