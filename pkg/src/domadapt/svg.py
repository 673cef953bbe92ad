"""Text-emitted SVG scatter plots and bar charts.

Output is byte-stable for equal inputs (fixed number formatting, no
timestamps) so figures can be compared in tests.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import IoFailure, NonFiniteValue

WIDTH, HEIGHT = 480, 400
PLOT = (60, 20, 340, 340)  # x0, y0, w, h of the data area
MARGIN = 0.05


@dataclass(frozen=True)
class MarkerStyle:
    name: str
    shape: str  # "circle" | "square" | "triangle" | "diamond"
    fill: str
    stroke: str
    legend: str


# keyed by (domain, label); label None for unlabeled data
SCATTER_STYLES = {
    ("source", 1): MarkerStyle("src-pos", "circle", "#d62728", "#7f1416", "source, positive"),
    ("source", 0): MarkerStyle("src-neg", "square", "#1f77b4", "#0f3b5a", "source, negative"),
    ("target", 1): MarkerStyle("tgt-pos", "triangle", "#ff9896", "#d62728", "target, positive"),
    ("target", 0): MarkerStyle("tgt-neg", "diamond", "#aec7e8", "#1f77b4", "target, negative"),
}
DOMAIN_STYLES = {
    "source": MarkerStyle("src", "circle", "#d62728", "#7f1416", "source"),
    "target": MarkerStyle("tgt", "triangle", "#1f77b4", "#0f3b5a", "target"),
}
EXTRA_FILLS = ("#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22")


def _fmt(v):
    return f"{v:.2f}"


def _marker(style: MarkerStyle, x, y, r=4.0):
    cls = f'class="{style.name}"'
    if style.shape == "circle":
        return f'<circle {cls} cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}"/>'
    if style.shape == "square":
        return f'<rect {cls} x="{_fmt(x - r)}" y="{_fmt(y - r)}" width="{_fmt(2 * r)}" height="{_fmt(2 * r)}"/>'
    if style.shape == "triangle":
        pts = [(x, y - r * 1.2), (x - r * 1.1, y + r * 0.8), (x + r * 1.1, y + r * 0.8)]
    else:
        pts = [(x, y - r * 1.3), (x + r, y), (x, y + r * 1.3), (x - r, y)]
    return f'<polygon {cls} points="{" ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)}"/>'


def _style_for(domain, label, labeled):
    if not labeled:
        if domain in DOMAIN_STYLES:
            return DOMAIN_STYLES[domain]
        fill = EXTRA_FILLS[zlib.crc32(str(domain).encode()) % len(EXTRA_FILLS)]
        return MarkerStyle(f"dom-{domain}", "circle", fill, "#333333", str(domain))
    key = (domain, int(label))
    if key in SCATTER_STYLES:
        return SCATTER_STYLES[key]
    base = DOMAIN_STYLES.get(domain, DOMAIN_STYLES["source"])
    fill = EXTRA_FILLS[int(label) % len(EXTRA_FILLS)]
    return MarkerStyle(f"{base.name}-c{int(label)}", base.shape, fill, base.stroke, f"{domain}, class {int(label)}")


def _range(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    span = hi - lo
    if span <= 0:
        span = abs(lo) if lo else 1.0
        lo, hi = lo - span / 2, hi + span / 2
    return lo - MARGIN * span, hi + MARGIN * span


def _write(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return Path(path)


def render_scatter(points, labels=None, domains=None, title=""):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an n x 2 array")
    if not np.isfinite(pts).all():
        raise NonFiniteValue(*np.argwhere(~np.isfinite(pts))[0])
    n = pts.shape[0]
    domains = ["source"] * n if domains is None else list(domains)
    labeled = labels is not None and len(labels) > 0
    labels = list(labels) if labeled else [None] * n

    x0, y0, w, h = PLOT
    (xlo, xhi), (ylo, yhi) = (_range(pts[:, 0]), _range(pts[:, 1])) if n else ((0, 1), (0, 1))

    def sx(v):
        return x0 + (v - xlo) / (xhi - xlo) * w

    def sy(v):
        return y0 + h - (v - ylo) / (yhi - ylo) * h

    styles = {}
    body = []
    for (px, py), dom, lab in zip(pts, domains, labels):
        st = _style_for(dom, lab, labeled)
        styles.setdefault(st.name, st)
        body.append(_marker(st, sx(px), sy(py)))

    css = "\n".join(f".{s.name} {{ fill: {s.fill}; stroke: {s.stroke}; stroke-width: 1; fill-opacity: 0.85; }}"
                    for s in styles.values())
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<style>\n{css}\n</style>",
        f"<title>{escape(title)}</title>",
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000000"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = xlo + frac * (xhi - xlo)
        yv = ylo + frac * (yhi - ylo)
        out.append(f'<text x="{_fmt(sx(xv))}" y="{y0 + h + 16}" font-size="10" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{x0 - 6}" y="{_fmt(sy(yv) + 3)}" font-size="10" text-anchor="end">{yv:.3g}</text>')
    if title:
        out.append(f'<text x="{x0 + w / 2:.2f}" y="14" font-size="12" text-anchor="middle">{escape(title)}</text>')
    out.append('<g class="points">')
    out.extend(body)
    out.append("</g>")
    out.append('<g class="legend">')
    lx, ly = x0 + w + 14, y0 + 10
    for i, st in enumerate(styles.values()):
        out.append(_marker(st, lx + 5, ly + 18 * i))
        out.append(f'<text x="{lx + 14}" y="{_fmt(ly + 18 * i + 4)}" font-size="11">{escape(st.legend)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_scatter(points, labels, domains, path, title=""):
    """Write a scatter plot with one marker per row, styled by (domain, label)."""
    return _write(path, render_scatter(points, labels, domains, title))


def render_bars(values, title="", ylabel=""):
    items = list(values.items())
    if not items:
        raise ValueError("bar chart needs at least one value")
    for i, (name, v) in enumerate(items):
        if v is None or not math.isfinite(float(v)):
            raise NonFiniteValue(i, name)
    items.sort(key=lambda kv: kv[0] != "baseline")  # stable: baseline first, rest as given
    top = max(max(float(v) for _, v in items), 0.0) * 1.1
    if top <= 0:
        top = 1.0
    x0, y0, w, h = PLOT
    w = WIDTH - x0 - 20
    slot = w / len(items)
    bar = slot * 0.7
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(title)}</title>",
        f'<line x1="{x0}" y1="{y0 + h}" x2="{x0 + w}" y2="{y0 + h}" stroke="#000000"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 + h}" stroke="#000000"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yy = y0 + h - frac * h
        out.append(f'<text x="{x0 - 6}" y="{_fmt(yy + 3)}" font-size="10" text-anchor="end">{frac * top:.3g}</text>')
    if title:
        out.append(f'<text x="{x0 + w / 2:.2f}" y="14" font-size="12" text-anchor="middle">{escape(title)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{y0 + h / 2:.2f}" font-size="11" text-anchor="middle" '
                   f'transform="rotate(-90 14 {y0 + h / 2:.2f})">{escape(ylabel)}</text>')
    for i, (name, v) in enumerate(items):
        bh = max(float(v), 0.0) / top * h
        bx = x0 + i * slot + (slot - bar) / 2
        fill = "#7f7f7f" if name == "baseline" else "#1f77b4"
        out.append(f'<rect class="bar" data-name="{escape(name)}" x="{_fmt(bx)}" y="{_fmt(y0 + h - bh)}" '
                   f'width="{_fmt(bar)}" height="{_fmt(bh)}" fill="{fill}"/>')
        out.append(f'<text x="{_fmt(bx + bar / 2)}" y="{y0 + h + 14}" font-size="10" '
                   f'text-anchor="middle">{escape(name)}</text>')
        out.append(f'<text x="{_fmt(bx + bar / 2)}" y="{_fmt(y0 + h - bh - 3)}" font-size="9" '
                   f'text-anchor="middle">{float(v):.3g}</text>')
    out.append(f'<desc>axis 0 to {top!r}</desc>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_bars(values, path, title="", ylabel=""):
    """Bar chart with one bar per entry, baseline leftmost, value axis from 0 to 1.1 x max."""
    return _write(path, render_bars(values, title, ylabel))
