"""Synthetic stream generators and CSV ingestion.

Both generators are pure functions of (n, seed); optional isotropic
Gaussian noise is available for robustness studies, the default streams
sit exactly on their generating curve.
"""

from __future__ import annotations

import csv
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "cubic_curve",
    "gen_cubic",
    "gen_param6",
    "param6_curve",
    "cubic_sampler",
    "param6_sampler",
    "curve_sampler",
    "read_points_csv",
    "write_points_csv",
]

_X_LO, _X_HI = 0.0, 10.0


def cubic_curve(x):
    """y = 0.05 (x - 5)^3 on [0, 10]."""
    x = np.asarray(x, dtype=float)
    return 0.05 * (x - 5.0) ** 3


def _cubic_speed(x):
    return np.sqrt(1.0 + (0.15 * (x - 5.0) ** 2) ** 2)


@lru_cache(maxsize=1)
def _cubic_arclength_table():
    # 2^20 + 1 knots: linear interpolation of the inverse is accurate to
    # well below 1e-10 in x.
    from scipy.integrate import cumulative_simpson

    xs = np.linspace(_X_LO, _X_HI, (1 << 20) + 1)
    cum = cumulative_simpson(_cubic_speed(xs), x=xs, initial=0.0)
    return xs, cum


def gen_cubic(n: int, seed=None, noise: float = 0.0,
              arc_uniform: bool = True) -> np.ndarray:
    """n points drawn uniformly along the planar cubic y = 0.05 (x-5)^3.

    ``arc_uniform=True`` samples uniformly by arc length (the abscissa
    comes from inverting the arc-length integral); ``False`` samples the
    abscissa uniformly instead.  The stream arrives ordered along the
    curve, like the 6-D parameter sweep.  ``noise`` adds isotropic
    Gaussian jitter.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if arc_uniform:
        xs, cum = _cubic_arclength_table()
        s = np.sort(rng.uniform(0.0, cum[-1], n))
        x = np.interp(s, cum, xs)
    else:
        x = np.sort(rng.uniform(_X_LO, _X_HI, n))
    pts = np.column_stack([x, cubic_curve(x)])
    if noise > 0:
        pts = pts + noise * rng.standard_normal(pts.shape)
    elif noise < 0:
        raise ValueError("noise must be >= 0")
    return pts


def cubic_sampler(m: int) -> np.ndarray:
    """m points on the cubic at equal arc-length steps (dense reference)."""
    xs, cum = _cubic_arclength_table()
    s = np.linspace(0.0, cum[-1], m)
    x = np.interp(s, cum, xs)
    return np.column_stack([x, cubic_curve(x)])


def param6_curve(t):
    """Six-coordinate curve (t/2 cos t, t/2 sin t, t/2, -t, sqrt t, 2 ln(1+t))."""
    t = np.asarray(t, dtype=float)
    return np.column_stack([
        0.5 * t * np.cos(t),
        0.5 * t * np.sin(t),
        0.5 * t,
        -t,
        np.sqrt(t),
        2.0 * np.log1p(t),
    ])


def gen_param6(n: int, seed=None, noise: float = 0.0) -> np.ndarray:
    """n points at equidistant parameter values in [0, 2*pi] on the 6-D curve."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = np.linspace(0.0, 2.0 * math.pi, n)
    pts = param6_curve(t)
    if noise > 0:
        rng = np.random.default_rng(seed)
        pts = pts + noise * rng.standard_normal(pts.shape)
    elif noise < 0:
        raise ValueError("noise must be >= 0")
    return pts


def param6_sampler(m: int) -> np.ndarray:
    return param6_curve(np.linspace(0.0, 2.0 * math.pi, m))


def curve_sampler(kind: str):
    """Dense sampler of a named generating curve, for ground-truth scoring."""
    if kind == "cubic":
        return cubic_sampler
    if kind == "param6":
        return param6_sampler
    raise ValueError(f"unknown synthetic kind {kind!r}")


def read_points_csv(path) -> np.ndarray:
    """Load one point per row from a comma-separated file.

    A single non-numeric first row is treated as a header.  Ragged rows,
    non-numeric cells and empty files are reported with their row number.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        raw = [(i + 1, row) for i, row in enumerate(reader) if row]
    if not raw:
        raise ValueError(f"{path}: empty file")

    def parse(rowno, row):
        try:
            return [float(c) for c in row]
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric cell at row {rowno}") from exc

    start = 0
    try:
        first = parse(*raw[0])
    except ValueError:
        if len(raw) == 1:
            raise
        start = 1
        first = parse(*raw[1])
    width = len(first)
    rows.append(first)
    for rowno, row in raw[start + 1:]:
        vals = parse(rowno, row)
        if len(vals) != width:
            raise ValueError(
                f"{path}: row {rowno} has {len(vals)} columns, expected {width}"
            )
        rows.append(vals)
    return np.asarray(rows, dtype=float)


def write_points_csv(path, points, header=None):
    """Write points one per row at 17 significant digits (round-trip safe)."""
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(header)
        for row in points:
            writer.writerow([f"{v:.17g}" for v in row])
