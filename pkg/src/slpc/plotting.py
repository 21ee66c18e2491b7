"""Minimal SVG scatter/curve plots.

Hand-rolled on purpose: the output must be byte-identical across reruns
with the same inputs, so no plotting library with embedded timestamps or
hashed ids is involved.
"""

from __future__ import annotations

import numpy as np

__all__ = ["curve_plot_svg", "write_curve_plot"]

_W, _H, _PAD = 640.0, 480.0, 24.0
_CURVE_COLORS = ("#2ca02c", "#d62728", "#1f77b4", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def curve_plot_svg(points, curves, coord_pair=(0, 1), title="") -> str:
    """SVG text: scatter of ``points`` with polyline ``curves`` on top.

    ``coord_pair`` selects the two coordinates to project onto.
    """
    i, j = coord_pair
    pts = np.asarray(points, dtype=float)[:, [i, j]]
    chains = [np.asarray(c, dtype=float)[:, [i, j]] for c in curves]
    allpts = np.vstack([pts] + chains) if chains else pts
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = np.where(hi - lo <= 0, 1.0, hi - lo)

    def sx(v):
        return _PAD + (v - lo[0]) / span[0] * (_W - 2 * _PAD)

    def sy(v):
        return _H - _PAD - (v - lo[1]) / span[1] * (_H - 2 * _PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(_W)}" '
        f'height="{_fmt(_H)}" viewBox="0 0 {_fmt(_W)} {_fmt(_H)}">',
        f'<rect width="{_fmt(_W)}" height="{_fmt(_H)}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{_fmt(_PAD)}" y="16" font-family="sans-serif" '
            f'font-size="12">{title}</text>'
        )
    for x, y in pts:
        out.append(
            f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.2" '
            f'fill="#444444" fill-opacity="0.7"/>'
        )
    for idx, chain in enumerate(chains):
        color = _CURVE_COLORS[idx % len(_CURVE_COLORS)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in chain)
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="2.4"/>'
        )
        for x, y in chain:
            out.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" '
                f'fill="{color}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_curve_plot(path, points, curves, coord_pair=(0, 1), title=""):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(curve_plot_svg(points, curves, coord_pair, title))
