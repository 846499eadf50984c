"""Static SVG pictures of an orbit over one full period."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import UnsupportedDimension
from .path import extend_to_period

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

# orthographic view for d = 3: screen axes in terms of (x, y, z)
VIEW_3D = np.array([
    [np.sqrt(0.5), -np.sqrt(0.5), 0.0],
    [-np.sqrt(1 / 6), -np.sqrt(1 / 6), np.sqrt(2 / 3)],
])


def _fmt(v):
    return f"{v:.3f}"


def project_points(y):
    """Screen coordinates ``(..., 2)`` for samples of dimension 2 or 3."""
    d = y.shape[-1]
    if d == 2:
        return y.copy()
    if d == 3:
        return y @ VIEW_3D.T
    raise UnsupportedDimension(f"cannot render orbits in dimension {d}")


def render_svg(y, size=480, margin=24, stroke=1.5):
    """SVG text for samples ``y[h, i, :]`` of a closed orbit."""
    d = y.shape[-1]
    pts = project_points(np.asarray(y, dtype=float))
    lo, hi = pts.reshape(-1, 2).min(axis=0), pts.reshape(-1, 2).max(axis=0)
    span = float(max(hi - lo)) or 1.0
    scale = (size - 2 * margin) / span
    centre = 0.5 * (lo + hi)

    def screen(p):
        # SVG y axis points down
        return (size / 2 + scale * (p[..., 0] - centre[0]),
                size / 2 - scale * (p[..., 1] - centre[1]))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    n = pts.shape[1]
    for i in range(n):
        colour = PALETTE[i % len(PALETTE)]
        sx, sy = screen(pts[:, i])
        coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx, sy))
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="{colour}" '
            f'stroke-width="{stroke}" stroke-linejoin="round"/>'
        )
    for i in range(n):
        colour = PALETTE[i % len(PALETTE)]
        sx, sy = screen(pts[0, i])
        out.append(f'<circle cx="{_fmt(sx)}" cy="{_fmt(sy)}" r="4" fill="{colour}">'
                   f'<title>body {i + 1}</title></circle>')
    if d == 3:
        labels = ("x", "y", "z")
        ox, oy = margin + 18, size - margin - 18
        for k in range(3):
            ax, ay = VIEW_3D[:, k] * 16
            out.append(f'<line x1="{ox}" y1="{oy}" x2="{_fmt(ox + ax)}" y2="{_fmt(oy - ay)}" '
                       f'stroke="black" stroke-width="1"/>')
            out.append(f'<text x="{_fmt(ox + 1.3 * ax)}" y="{_fmt(oy - 1.3 * ay)}" '
                       f'font-size="10" font-family="sans-serif">{labels[k]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_orbit(problem, coeffs, out_path, S=200, size=480):
    """Write an SVG of the orbit.  Each body is a closed polyline and its
    starting position is marked with a dot."""
    if problem.d not in (2, 3):
        raise UnsupportedDimension(f"cannot render orbits in dimension {problem.d}")
    y = extend_to_period(coeffs, problem, S, closed=True).y
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(y, size=size))
    return path
