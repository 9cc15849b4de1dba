"""Dependency-free SVG scatter plots of 2-D embeddings."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

# matplotlib's tab10
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _num(x: float) -> str:
    return f"{x:.6g}"


def render_scatter(embedding, labels, class_names: Sequence[str], title: str | None = None) -> str:
    """Render one circle per point, coloured by class, with a legend.

    The viewBox spans the data plus a 5% margin on every side; the y axis is
    flipped so larger y is drawn higher. Classes beyond the tenth reuse the
    palette cyclically.
    """
    Y = np.asarray(embedding, dtype=np.float64).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(Y) != len(labels):
        raise ValueError(f"{len(Y)} points but {len(labels)} labels")

    if len(Y):
        lo = Y.min(axis=0)
        hi = Y.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    margin = 0.05 * span
    x0, y0 = lo[0] - margin[0], -hi[1] - margin[1]
    width, height = span + 2 * margin
    size = max(width, height)
    radius = 0.006 * size
    font = 0.03 * size

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="640" height="640" '
        f'viewBox="{_num(x0)} {_num(y0)} {_num(width)} {_num(height)}" '
        f'preserveAspectRatio="xMidYMid meet">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append('<g class="points" stroke="none" fill-opacity="0.8">')
    for (x, y), label in zip(Y, labels):
        color = PALETTE[label % len(PALETTE)]
        out.append(f'<circle cx="{_num(x)}" cy="{_num(-y)}" r="{_num(radius)}" fill="{color}"/>')
    out.append("</g>")

    out.append(f'<g class="legend" font-family="sans-serif" font-size="{_num(font)}">')
    for i, name in enumerate(class_names):
        ly = y0 + font * (1.5 + 1.4 * i)
        lx = x0 + font
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{_num(lx)}" y="{_num(ly - 0.8 * font)}" width="{_num(0.8 * font)}" '
                   f'height="{_num(0.8 * font)}" fill="{color}"/>')
        out.append(f'<text x="{_num(lx + 1.2 * font)}" y="{_num(ly)}" '
                   f'data-class={quoteattr(str(name))}>{escape(str(name))}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
