"""Static SVG explanation of an ambiguity report: points, component ellipses, pair annotations."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .core import AmbiguityReport, Scatterplot

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _f(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") or "0"


def render_report(plot: Scatterplot, report: AmbiguityReport, size: int = 600, margin: int = 40, max_points: int = 20000) -> str:
    """SVG 1.1 document. Each component gets a 1-sigma and a 2-sigma ellipse; each pair a
    line between centers labelled with its ambiguity."""
    pts = plot.points
    comps = report.decomposition.components
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    for c in comps:
        reach = 2.0 * c.major_sd
        lo = np.minimum(lo, np.asarray(c.center) - reach)
        hi = np.maximum(hi, np.asarray(c.center) + reach)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    scale = (size - 2 * margin) / span
    height = size + 30

    def tx(x, y):
        # y grows upward in data space, downward in SVG
        return margin + (x - lo[0]) * scale, size - margin - (y - lo[1]) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{height}" '
        f'viewBox="0 0 {size} {height}">',
        f"<title>{escape(plot.id or 'scatterplot')}: ambiguity {report.score:.4f}</title>",
        f'<rect x="0" y="0" width="{size}" height="{height}" fill="#ffffff"/>',
        '<g id="points" fill="#444444" fill-opacity="0.5">',
    ]
    step = max(1, math.ceil(len(pts) / max_points))
    for x, y in pts[::step]:
        px, py = tx(x, y)
        out.append(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="1.5"/>')
    out.append("</g>")

    out.append('<g id="components" fill="none">')
    for j, c in enumerate(comps):
        colour = PALETTE[j % len(PALETTE)]
        cx, cy = tx(*c.center)
        deg = -math.degrees(c.angle)
        for k, dash in ((1, ""), (2, ' stroke-dasharray="4 3"')):
            out.append(
                f'<ellipse class="sigma{k}" data-component="{j}" cx="{_f(cx)}" cy="{_f(cy)}" '
                f'rx="{_f(k * c.major_sd * scale)}" ry="{_f(k * c.minor_sd * scale)}" '
                f'transform="rotate({_f(deg)} {_f(cx)} {_f(cy)})" stroke="{colour}" stroke-width="1.5"{dash}/>'
            )
    out.append("</g>")

    out.append('<g id="pairs" font-family="sans-serif" font-size="11">')
    for p in report.pairs:
        i, j = p.pair
        x1, y1 = tx(*comps[i].center)
        x2, y2 = tx(*comps[j].center)
        shade = f"{int(round(255 * (1 - p.ambiguity))):02x}"
        out.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="#ff{shade}{shade}" stroke-width="{_f(1 + 3 * p.ambiguity)}"/>'
        )
        out.append(
            f'<text x="{_f((x1 + x2) / 2)}" y="{_f((y1 + y2) / 2)}" text-anchor="middle">'
            f"A={p.ambiguity:.2f} S={p.separability:.2f}</text>"
        )
    out.append("</g>")
    out.append(
        f'<text x="{margin}" y="{size + 15}" font-family="sans-serif" font-size="13">'
        f"{escape(plot.id or 'scatterplot')}: K={report.decomposition.k_opt}, ambiguity={report.score:.4f}</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
