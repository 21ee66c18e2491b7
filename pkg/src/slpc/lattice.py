"""Lattice grids, curve-class enumeration and the penalty constants.

The vertex vocabulary of every candidate curve is the grid
``Q = B(0, sqrt(d)*R) ∩ (delta * Z^d)``.  Full enumeration of the grid or
of curve classes is only intended for desk-scale instances and is guarded
by caps; everything the sequential learner needs (nearest point, local
ball queries) works without materializing the grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import PolygonalLine

__all__ = [
    "GridSizeError",
    "LatticeGrid",
    "ModelConfig",
    "unit_ball_volume",
    "constants",
    "penalty",
    "enumerate_lines",
    "enumerate_classes",
    "sleeping_bandit_params",
]


class GridSizeError(ValueError):
    """Raised when an enumeration would exceed its configured cap."""


def unit_ball_volume(d: int) -> float:
    """Volume of the Euclidean unit ball in R^d."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def constants(d: int, R: float, delta: float, p: int):
    """Penalty and loss-range constants (c0, c1, c2, c3).

    c0 bounds the loss of any grid-vertex curve against any in-ball point;
    c1..c3 bound the log-cardinality of the k-segment curve class as
    c1*k + c2*L + c3.
    """
    if d < 1 or R <= 0 or delta <= 0 or p < 1:
        raise ValueError("need d >= 1, R > 0, delta > 0, p >= 1")
    vd = unit_ball_volume(d)
    c0 = d * (2 * R + delta) ** 2
    c1 = math.log(8 * p * math.e * vd) + 3 * d ** 1.5 - d
    c2 = math.log(2) / (delta * math.sqrt(d)) + d / delta
    c3 = d * math.log(math.sqrt(d) * (2 * R + delta) / delta)
    return c0, c1, c2, c3


@dataclass
class ModelConfig:
    """Problem geometry and derived constants.

    ``R`` scales the data ball B(0, sqrt(d)*R), ``delta`` is the lattice
    spacing, ``p`` the segment budget, ``L`` the length budget entering the
    penalty, ``t0`` the number of warm-up points.
    """

    d: int
    R: float
    delta: float
    p: int = 20
    L: float = 1.0
    t0: int = 3

    def __post_init__(self):
        if self.p < 1 or self.L <= 0 or self.delta <= 0 or self.R <= 0:
            raise ValueError("invalid model configuration")
        if self.t0 < 2:
            raise ValueError("t0 must be at least 2")

    @property
    def c0(self) -> float:
        return constants(self.d, self.R, self.delta, self.p)[0]

    @property
    def c1(self) -> float:
        return constants(self.d, self.R, self.delta, self.p)[1]

    @property
    def c2(self) -> float:
        return constants(self.d, self.R, self.delta, self.p)[2]

    @property
    def c3(self) -> float:
        return constants(self.d, self.R, self.delta, self.p)[3]

    @property
    def penalty_mass(self) -> float:
        """c1*p + c2*L + c3, the constant inside the step-size formulas."""
        return self.c1 * self.p + self.c2 * self.L + self.c3

    @classmethod
    def from_points(cls, X, p: int = 20, delta: float | None = None,
                    t0: int = 3, L: float | None = None) -> "ModelConfig":
        """Scale R, L and delta from the data.

        R = max |x|_2 / sqrt(d), L = 0.01 * p * sqrt(d) * R, and delta
        defaults to R/10.
        """
        X = np.asarray(X, dtype=float)
        d = X.shape[1]
        R = float(np.max(np.linalg.norm(X, axis=1))) / math.sqrt(d)
        if R <= 0:
            raise ValueError("data must not be all zero")
        if L is None:
            L = 0.01 * p * math.sqrt(d) * R
        if delta is None:
            delta = R / 10.0
        return cls(d=d, R=R, delta=delta, p=p, L=L, t0=t0)


def penalty(f, cfg: ModelConfig) -> float:
    """Complexity penalty c1*K(f) + c2*L + c3.

    Depends on the line only through its segment count; L is the class
    budget, not the line's own length.
    """
    k = f.segment_count if isinstance(f, PolygonalLine) else int(f)
    if k < 1 or k > cfg.p:
        raise ValueError(f"segment count {k} outside [1, {cfg.p}]")
    return cfg.c1 * k + cfg.c2 * cfg.L + cfg.c3


class LatticeGrid:
    """The grid Q = B(0, sqrt(d)*R) ∩ (delta * Z^d), anchored at the origin.

    Points are represented as float arrays ``i * delta`` for integer
    vectors ``i``; membership tests and deduplication go through the
    integer indices so no float-equality traps arise.
    """

    def __init__(self, d: int, R: float, delta: float, max_points: int = 2_000_000):
        if d < 1 or R <= 0 or delta <= 0:
            raise ValueError("need d >= 1, R > 0, delta > 0")
        self.d = int(d)
        self.R = float(R)
        self.delta = float(delta)
        self.radius = math.sqrt(d) * float(R)
        self.max_points = int(max_points)
        self._points = None

    # -- indices ----------------------------------------------------------

    def index_of(self, point) -> tuple:
        """Integer lattice index of a (near-)lattice point."""
        return tuple(int(round(c / self.delta)) for c in np.asarray(point, float))

    def _in_ball(self, idx_sq_norm: float) -> bool:
        # radius^2 with a hair of slack so exact-boundary points survive
        # float roundoff of idx * delta.
        return idx_sq_norm * self.delta ** 2 <= self.radius ** 2 * (1 + 1e-12)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        idx = self.index_of(p)
        if not np.allclose(np.array(idx) * self.delta, p, atol=1e-9 * self.delta):
            return False
        return self._in_ball(float(np.dot(idx, idx)))

    # -- enumeration ------------------------------------------------------

    def points(self) -> np.ndarray:
        """All grid points, lexicographically sorted.  Guarded by the cap."""
        if self._points is None:
            m = int(math.floor(self.radius / self.delta + 1e-12))
            if (2 * m + 1) ** self.d > 50 * self.max_points:
                raise GridSizeError(
                    f"grid of roughly {(2 * m + 1) ** self.d:g} candidates "
                    f"exceeds the cap of {self.max_points}"
                )
            pts = self._ball_indices(np.zeros(self.d), self.radius)
            if len(pts) > self.max_points:
                raise GridSizeError(
                    f"grid has {len(pts)} points, more than the cap "
                    f"of {self.max_points}"
                )
            self._points = pts * self.delta
            self._points.setflags(write=False)
        return self._points

    def __len__(self):
        return len(self.points())

    def _ball_indices(self, center: np.ndarray, radius: float) -> np.ndarray:
        """Integer indices of lattice points within the closed ball and the
        global ball, lexicographically sorted.  Depth-first with radius
        pruning so high dimensions do not pay for the bounding box."""
        if radius < 0:
            return np.empty((0, self.d), dtype=int)
        out = []
        idx = np.zeros(self.d, dtype=int)
        r2 = (radius / self.delta) ** 2 * (1 + 1e-12)
        c = np.asarray(center, dtype=float) / self.delta

        def recurse(dim: int, acc: float):
            if dim == self.d:
                out.append(idx.copy())
                return
            span = math.sqrt(max(r2 - acc, 0.0))
            lo = math.ceil(c[dim] - span - 1e-12)
            hi = math.floor(c[dim] + span + 1e-12)
            for i in range(lo, hi + 1):
                step = (i - c[dim]) ** 2
                if acc + step > r2:
                    continue
                idx[dim] = i
                recurse(dim + 1, acc + step)

        recurse(0, 0.0)
        if not out:
            return np.empty((0, self.d), dtype=int)
        arr = np.array(out, dtype=int)
        keep = np.einsum("ij,ij->i", arr, arr) * self.delta ** 2 \
            <= self.radius ** 2 * (1 + 1e-12)
        arr = arr[keep]
        order = np.lexsort(arr.T[::-1])
        return arr[order]

    def points_in_ball(self, center, radius: float) -> np.ndarray:
        """Grid points within the closed ball B(center, radius)."""
        idx = self._ball_indices(np.asarray(center, dtype=float), float(radius))
        if len(idx) > self.max_points:
            raise GridSizeError(
                f"ball holds {len(idx)} grid points, more than the cap"
            )
        return idx * self.delta

    def nearest_in_ball(self, center, radius: float, k: int) -> np.ndarray:
        """At most ``k`` grid points in B(center, radius), nearest first.

        Grows a trial radius geometrically instead of enumerating the whole
        ball, so large neighbourhoods stay cheap in high dimension.  Ties
        are resolved lexicographically.
        """
        center = np.asarray(center, dtype=float)
        radius = float(radius)
        # radius expected to hold >= k points, from the ball volume
        guess = self.delta * ((k / unit_ball_volume(self.d)) ** (1.0 / self.d) + 2.0)
        r = min(radius, guess)
        while True:
            idx = self._ball_indices(center, r)
            if len(idx) >= k or r >= radius:
                break
            r = min(radius, 2.0 * r)
        if len(idx) == 0:
            return np.empty((0, self.d))
        pts = idx * self.delta
        d2 = np.einsum("ij,ij->i", pts - center, pts - center)
        order = np.lexsort(np.vstack([idx.T[::-1], d2]))
        return pts[order][:k]

    def nearest_in_ball_constrained(self, anchor, center, radius: float,
                                    k: int) -> np.ndarray:
        """At most ``k`` grid points nearest to ``anchor`` among those in
        B(center, radius).  Same expanding-shell scheme as
        :meth:`nearest_in_ball`, with the extra ball constraint."""
        anchor = np.asarray(anchor, dtype=float)
        center = np.asarray(center, dtype=float)
        radius = float(radius)
        if radius < 0 or k < 1:
            return np.empty((0, self.d))
        # anchor-centred shells can stop growing once they cover the
        # constraint ball entirely
        r_max = radius + float(np.linalg.norm(anchor - center))
        guess = self.delta * ((k / unit_ball_volume(self.d)) ** (1.0 / self.d)
                              + 2.0)
        r = min(r_max, guess)
        while True:
            idx = self._ball_indices(anchor, r)
            if len(idx):
                pts = idx * self.delta
                keep = np.einsum("ij,ij->i", pts - center, pts - center) \
                    <= radius ** 2 * (1 + 1e-12)
                idx = idx[keep]
            if len(idx) >= k or r >= r_max:
                break
            r = min(r_max, 2.0 * r)
        if len(idx) == 0:
            return np.empty((0, self.d))
        pts = idx * self.delta
        d2 = np.einsum("ij,ij->i", pts - anchor, pts - anchor)
        order = np.lexsort(np.vstack([idx.T[::-1], d2]))
        return pts[order][:k]

    def nearest(self, point) -> np.ndarray:
        """Nearest grid point; per-coordinate ties resolve downward."""
        p = np.asarray(point, dtype=float)
        # ceil(x - 0.5) rounds half-integers toward the smaller coordinate
        idx = np.ceil(p / self.delta - 0.5).astype(int)
        if self._in_ball(float(np.dot(idx, idx))):
            return idx * self.delta
        r = self.delta * (math.sqrt(self.d) + 1.0)
        while True:
            cands = self.nearest_in_ball(p, r, 1)
            if len(cands):
                return cands[0]
            r *= 2.0
            if r > 4 * self.radius + 4 * self.delta:
                raise GridSizeError("no grid point found near the query")


def enumerate_lines(grid: LatticeGrid, k: int, L: float,
                    cap: int = 1_000_000) -> list:
    """All k-segment lines with distinct grid vertices and length <= L.

    Lines are canonicalized modulo reversal, so a chain and its reverse
    count once.  Desk scale only: raises GridSizeError past ``cap``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = grid.points()
    n = len(pts)
    out = []
    chain = np.empty((k + 1, grid.d))
    used = np.zeros(n, dtype=bool)

    def recurse(depth: int, length: float):
        if depth == k + 1:
            line = PolygonalLine(chain.copy())
            fwd = tuple(map(tuple, chain))
            if fwd == line.canonical_key():  # skip reversal duplicates
                out.append(line)
                if len(out) > cap:
                    raise GridSizeError(f"more than {cap} lines enumerated")
            return
        for j in range(n):
            if used[j]:
                continue
            if depth == 0:
                step = 0.0
            else:
                step = float(np.linalg.norm(pts[j] - chain[depth - 1]))
                if length + step > L * (1 + 1e-12):
                    continue
            used[j] = True
            chain[depth] = pts[j]
            recurse(depth + 1, length + step)
            used[j] = False

    recurse(0, 0.0)
    return out


def enumerate_classes(grid: LatticeGrid, p: int, L: float,
                      cap: int = 1_000_000) -> dict:
    """Map k -> enumerated k-segment class, for k = 1..p."""
    classes = {}
    total = 0
    for k in range(1, p + 1):
        lines = enumerate_lines(grid, k, L, cap=cap)
        total += len(lines)
        if total > cap:
            raise GridSizeError(f"more than {cap} lines enumerated")
        classes[k] = lines
    return classes


@dataclass(frozen=True)
class BanditParams:
    """Exploration schedule for the locally greedy learner."""

    beta: float
    alpha: float
    c0_hat: float
    epsilon: float
    eta: float


def sleeping_bandit_params(n_actions: int, horizon: int,
                           cfg: ModelConfig) -> BanditParams:
    """Schedule (beta, alpha, c0_hat, epsilon, eta) for a known horizon.

    beta = n^{-1/2} T^{-1/4}, alpha = c0/beta, c0_hat = 2 c0/beta,
    epsilon = 1 - n^{1/2 - 3/p} T^{-1/4} and a constant
    eta = sqrt(c1 p + c2 L + c3) / (sqrt(T (e-1)) c0_hat), with ``n_actions``
    standing in for the full class cardinality.
    """
    if n_actions < 1 or horizon < 1:
        raise ValueError("need n_actions >= 1 and horizon >= 1")
    n = float(n_actions)
    T = float(horizon)
    beta = n ** -0.5 * T ** -0.25
    if beta >= 1:
        raise ValueError(f"beta = {beta:.4g} >= 1: horizon too short for "
                         "this action count")
    epsilon = 1.0 - n ** (0.5 - 3.0 / cfg.p) * T ** -0.25
    if epsilon <= 0:
        raise ValueError(f"epsilon = {epsilon:.4g} <= 0: action count too "
                         "large for this horizon")
    c0 = cfg.c0
    alpha = c0 / beta
    c0_hat = 2 * c0 / beta
    eta = math.sqrt(cfg.penalty_mass) / (math.sqrt(T * (math.e - 1)) * c0_hat)
    return BanditParams(beta=beta, alpha=alpha, c0_hat=c0_hat,
                        epsilon=epsilon, eta=eta)
