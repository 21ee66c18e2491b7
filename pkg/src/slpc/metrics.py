"""Metrics and baselines: cumulative loss, best-in-hindsight regret,
R-squared and a sequential first-principal-component comparator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PolygonalLine, chain_losses
from .lattice import LatticeGrid, enumerate_classes

__all__ = [
    "EvalReport",
    "cumulative_loss",
    "best_in_hindsight",
    "r_squared",
    "ground_truth_loss",
    "principal_segment",
    "baseline_first_pc",
]


@dataclass
class EvalReport:
    """Summary of one run: losses, optional regret and goodness of fit."""

    cumulative_loss: float
    r_squared: float
    per_round_losses: list
    best_in_hindsight_loss: float | None = None
    regret: float | None = None
    baseline_losses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cumulative_loss": self.cumulative_loss,
            "r_squared": self.r_squared,
            "per_round_losses": list(self.per_round_losses),
            "best_in_hindsight_loss": self.best_in_hindsight_loss,
            "regret": self.regret,
            "baseline_losses": list(self.baseline_losses),
        }


def cumulative_loss(records) -> float:
    """Sum of per-round losses; accepts round records or raw numbers."""
    vals = [getattr(r, "loss", r) for r in records]
    if not vals:
        raise ValueError("no rounds to sum")
    return float(np.sum(vals))


def best_in_hindsight(stream, grid: LatticeGrid, p: int, L: float,
                      cap: int = 1_000_000):
    """Exhaustive minimizer of the cumulative loss over the curve classes.

    Ties resolve to the smaller segment count, then to canonical vertex
    order.  Desk scale only.
    """
    X = np.asarray(stream, dtype=float)
    classes = enumerate_classes(grid, p, L, cap=cap)
    best_line = None
    best_loss = np.inf
    best_key = None
    for k in sorted(classes):
        for line in classes[k]:
            total = float(np.sum(chain_losses(line.vertices, X)))
            key = (k, line.canonical_key())
            if total < best_loss or (total == best_loss and key < best_key):
                best_loss = total
                best_line = line
                best_key = key
    if best_line is None:
        raise ValueError("no candidate line satisfies the class constraints")
    return best_line, best_loss


def r_squared(points, f: PolygonalLine) -> float:
    """1 - sum residual^2 / total variance, residuals being the squared
    distances from the points to the curve.  Can be negative; never capped."""
    X = np.asarray(points, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need at least two points")
    total = float(np.sum((X - X.mean(axis=0)) ** 2))
    if total == 0.0:
        raise ValueError("zero total variance")
    resid = float(np.sum(chain_losses(f.vertices, X)))
    return 1.0 - resid / total


def ground_truth_loss(points, curve_sampler, rel_tol: float = 1e-6) -> float:
    """Sum of squared distances from the points to a densely sampled curve.

    ``curve_sampler(m)`` must return m ordered points on the generating
    curve; the chain is refined (m doubled) until the total changes by
    less than ``rel_tol`` relatively.
    """
    X = np.asarray(points, dtype=float)
    m = 1024
    prev = float(np.sum(chain_losses(curve_sampler(m), X)))
    while m <= (1 << 20):
        m *= 2
        cur = float(np.sum(chain_losses(curve_sampler(m), X)))
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-9):
            return cur
        prev = cur
    return prev


def principal_segment(points):
    """First-principal-component segment of a point cloud.

    The direction is the top eigenvector of the centered covariance; the
    segment runs between the two extreme projections of the points onto
    the component line through the mean.  Raises on a fully degenerate
    cloud (all points identical).
    """
    X = np.asarray(points, dtype=float)
    mu = X.mean(axis=0)
    centered = X - mu
    cov = centered.T @ centered
    if float(np.max(np.abs(cov))) == 0.0:
        raise ValueError("degenerate cloud: all points identical")
    w, vecs = np.linalg.eigh(cov)
    u = vecs[:, -1]
    nz = np.flatnonzero(u)
    if u[nz[0]] < 0:  # canonical sign
        u = -u
    t = centered @ u
    return mu + float(t.min()) * u, mu + float(t.max()) * u


def baseline_first_pc(stream, t0: int) -> list:
    """Per-round losses of refitting the first-PC segment on the past.

    At round t the segment is fitted to the first t points and scored on
    point t+1.  Degenerate prefixes fall back to the squared distance to
    the prefix mean.
    """
    X = np.asarray(stream, dtype=float)
    if X.shape[0] <= t0:
        raise ValueError("stream shorter than t0 + 1")
    losses = []
    for t in range(t0, X.shape[0]):
        past, nxt = X[:t], X[t]
        try:
            a, b = principal_segment(past)
            seg = PolygonalLine([a, b]) if np.any(a != b) else None
        except ValueError:
            seg = None
        if seg is None:
            diff = nxt - past.mean(axis=0)
            losses.append(float(diff @ diff))
        else:
            losses.append(float(chain_losses(seg.vertices, nxt[None, :])[0]))
    return losses
