"""Geometric kernel: distances to polygonal lines, projection indices,
Voronoi cell queries and observation neighbourhoods.

Everything here is a pure function of its inputs and safe to call from
any number of threads.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "PolygonalLine",
    "CellId",
    "NeighborhoodInfo",
    "project_to_segment",
    "loss",
    "chain_losses",
    "nearest_point_on_chain",
    "projection_index",
    "projection_segment",
    "voronoi_assign",
    "observation_neighborhood",
    "local_grid",
]


class PolygonalLine:
    """Ordered vertex chain in R^d.

    A line with ``n`` vertices has ``n - 1`` segments; a single vertex is
    allowed (degenerate, zero segments).  Consecutive vertices must be
    distinct whenever there is at least one segment.
    """

    __slots__ = ("vertices", "_key")

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("a polygonal line needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        if v.shape[0] > 1 and np.any(np.all(v[1:] == v[:-1], axis=1)):
            raise ValueError("consecutive vertices must be distinct")
        self.vertices = v
        self.vertices.setflags(write=False)
        self._key = None

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def segment_count(self) -> int:
        return self.vertices.shape[0] - 1

    @property
    def length(self) -> float:
        if self.segment_count == 0:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)))

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    def reversed(self) -> "PolygonalLine":
        return PolygonalLine(self.vertices[::-1])

    def canonical_key(self):
        """Hashable key identifying the line up to reversal."""
        if self._key is None:
            fwd = tuple(map(tuple, self.vertices))
            rev = fwd[::-1]
            self._key = min(fwd, rev)
        return self._key

    def __eq__(self, other):
        if not isinstance(other, PolygonalLine):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self):
        return hash(self.canonical_key())

    def __repr__(self):
        return f"PolygonalLine(k={self.segment_count}, d={self.dim})"


class CellId(NamedTuple):
    """One cell of the vertex/segment Voronoi partition of a polygonal line.

    ``kind`` is ``"vertex"`` or ``"segment"``; ``index`` is 1-based.
    """

    kind: str
    index: int


@dataclass
class NeighborhoodInfo:
    """Cells around an observation plus the past points falling in them."""

    cells: frozenset
    members: np.ndarray  # shape (m, d); may be empty
    mean: np.ndarray
    diameter: float


def project_to_segment(x, a, b):
    """Project ``x`` onto the closed segment [a, b].

    Returns ``(t, foot, sqdist)`` where ``foot = a + t*(b-a)`` with
    ``t`` clamped to [0, 1] and ``sqdist = |x - foot|^2``.  When ``a == b``
    the parameter is 0 and the foot is ``a``.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (x.shape == a.shape == b.shape):
        raise ValueError("point and segment endpoints must share a dimension")
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        t = 0.0
    else:
        t = float(np.dot(x - a, ab) / denom)
        t = min(1.0, max(0.0, t))
    foot = a + t * ab
    diff = x - foot
    return t, foot, float(np.dot(diff, diff))


def loss(f: PolygonalLine, x) -> float:
    """Squared Euclidean distance from ``x`` to its nearest point on ``f``."""
    x = np.asarray(x, dtype=float)
    v = f.vertices
    if v.shape[0] == 1:
        diff = x - v[0]
        return float(np.dot(diff, diff))
    return float(np.min(_segment_sqdists(v, x)))


def _segment_sqdists(vertices: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Squared distances from ``x`` to every closed segment of the chain."""
    a = vertices[:-1]
    ab = vertices[1:] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", x - a, ab) / np.where(denom == 0.0, 1.0, denom)
    t = np.clip(t, 0.0, 1.0)
    diff = x - (a + t[:, None] * ab)
    return np.einsum("ij,ij->i", diff, diff)


def chain_losses(vertices, X) -> np.ndarray:
    """Squared distance from each row of ``X`` to the vertex chain.

    Vectorized companion of :func:`loss` for scoring many points at once.
    """
    v = np.asarray(vertices, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if v.shape[0] == 1:
        diff = X - v[0]
        return np.einsum("ij,ij->i", diff, diff)
    a = v[:-1]
    ab = v[1:] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("tkj,kj->tk", X[:, None, :] - a, ab) / np.where(denom == 0, 1, denom)
    t = np.clip(t, 0.0, 1.0)
    feet = a + t[..., None] * ab
    diff = X[:, None, :] - feet
    return np.min(np.einsum("tkj,tkj->tk", diff, diff), axis=1)


def nearest_point_on_chain(vertices, x) -> np.ndarray:
    """Point of the vertex chain closest to ``x`` (any minimizer)."""
    v = np.asarray(vertices, dtype=float)
    x = np.asarray(x, dtype=float)
    if v.shape[0] == 1:
        return v[0].copy()
    i = int(np.argmin(_segment_sqdists(v, x)))
    _, foot, _ = project_to_segment(x, v[i], v[i + 1])
    return foot


def projection_index(f: PolygonalLine, x) -> float:
    """Arc-length parameter of the projection of ``x`` onto ``f``.

    When several arc-length positions realise the minimal distance the
    largest one is returned (sup convention).
    """
    x = np.asarray(x, dtype=float)
    v = f.vertices
    if v.shape[0] < 2:
        raise ValueError("projection index needs a line with at least one segment")
    seg_len = np.linalg.norm(np.diff(v, axis=0), axis=1)
    offsets = np.concatenate(([0.0], np.cumsum(seg_len)[:-1]))
    dists = np.empty(len(seg_len))
    svals = np.empty(len(seg_len))
    for i in range(len(seg_len)):
        t, _, d = project_to_segment(x, v[i], v[i + 1])
        dists[i] = d
        svals[i] = offsets[i] + t * seg_len[i]
    dmin = float(np.min(dists))
    # roundoff band so geometrically symmetric ties still count as ties
    tied = dists <= dmin + 1e-12 * (1.0 + dmin)
    return float(np.max(svals[tied]))


def voronoi_assign(f: PolygonalLine, x) -> CellId:
    """Cell of the vertex/segment Voronoi partition of ``f`` containing ``x``.

    A segment cell only claims points whose orthogonal projection falls in
    the open interior of the segment; everything beyond an endpoint belongs
    to a vertex cell.  Exact ties go to the lowest index, vertex before
    segment.
    """
    x = np.asarray(x, dtype=float)
    v = f.vertices
    if v.shape[0] < 2:
        raise ValueError("voronoi_assign needs a line with at least one segment")
    k = v.shape[0] - 1
    best = None
    best_d = np.inf
    # Fixed evaluation order V_1, S_1, V_2, ..., S_k, V_{k+1} makes the
    # tie-break (lowest index, vertex first) a plain strict comparison.
    for i in range(1, k + 2):
        diff = x - v[i - 1]
        d = float(np.dot(diff, diff))
        if d < best_d:
            best_d = d
            best = CellId("vertex", i)
        if i <= k:
            a = v[i - 1]
            ab = v[i] - a
            denom = float(np.dot(ab, ab))
            t = float(np.dot(x - a, ab) / denom)
            if 0.0 < t < 1.0:
                diff = x - (a + t * ab)
                d = float(np.dot(diff, diff))
                if d < best_d:
                    best_d = d
                    best = CellId("segment", i)
    return best


def _cell_columns_many(vertices: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Voronoi cell of each row of ``X``, as a column into the fixed cell
    order V_1, S_1, V_2, ..., S_k, V_{k+1} (so ``argmin`` reproduces the
    lowest-index / vertex-first tie rule of :func:`voronoi_assign`)."""
    k = vertices.shape[0] - 1
    dmat = np.full((X.shape[0], 2 * k + 1), np.inf)
    diff = X[:, None, :] - vertices[None, :, :]
    dmat[:, 0::2] = np.einsum("tij,tij->ti", diff, diff)
    a = vertices[:-1]
    ab = vertices[1:] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("tkj,kj->tk", X[:, None, :] - a, ab) / denom
    interior = (t > 0.0) & (t < 1.0)
    feet = a + t[..., None] * ab
    sd = np.einsum("tkj,tkj->tk", X[:, None, :] - feet, X[:, None, :] - feet)
    dmat[:, 1::2] = np.where(interior, sd, np.inf)
    return np.argmin(dmat, axis=1)


def projection_segment(f: PolygonalLine, x) -> int:
    """1-based index of the segment holding the projection of ``x``.

    A projection landing exactly on a shared vertex is attributed to the
    segment that starts there, consistent with the sup convention of the
    projection index; the final vertex maps to the last segment.
    """
    s = projection_index(f, x)
    seg_len = f.segment_lengths()
    starts = np.concatenate(([0.0], np.cumsum(seg_len)[:-1]))
    i = bisect_right(list(starts), s)
    return min(i, len(seg_len))


def observation_neighborhood(f: PolygonalLine, history, x) -> NeighborhoodInfo:
    """Cells around the projection of ``x`` and the history points in them.

    The projection of ``x`` lies on some segment s_i; the neighbourhood is
    the union of all cells whose closure touches one of the two vertices
    v_i, v_{i+1} of that segment, i.e. {S_{i-1}, V_i, S_i, V_{i+1}, S_{i+1}}
    clipped to existing indices.  Members are the history points assigned to
    those cells; with no members the mean falls back to ``x`` and the
    diameter to 0.
    """
    x = np.asarray(x, dtype=float)
    k = f.segment_count
    if k < 1:
        raise ValueError("observation_neighborhood needs a line with segments")
    i = projection_segment(f, x)
    cells = {CellId("vertex", i), CellId("vertex", i + 1)}
    for j in (i - 1, i, i + 1):
        if 1 <= j <= k:
            cells.add(CellId("segment", j))
    cells = frozenset(cells)

    if len(history) == 0:
        members = np.empty((0, x.shape[0]))
    else:
        pts = np.atleast_2d(np.asarray(history, dtype=float))
        # column of a cell in the interleaved V_1, S_1, ... ordering
        cols = {2 * (c.index - 1) if c.kind == "vertex" else 2 * c.index - 1
                for c in cells}
        assigned = _cell_columns_many(f.vertices, pts)
        members = pts[np.isin(assigned, list(cols))]

    if members.shape[0] == 0:
        mean = x.copy()
        diameter = 0.0
    else:
        mean = members.mean(axis=0)
        diameter = _diameter(members)
    return NeighborhoodInfo(cells=cells, members=members, mean=mean, diameter=diameter)


def _diameter(points: np.ndarray) -> float:
    if points.shape[0] <= 1:
        return 0.0
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


def local_grid(grid, nb: NeighborhoodInfo) -> np.ndarray:
    """Lattice points within the closed ball around the neighbourhood mean.

    ``grid`` is any object exposing ``points_in_ball(center, radius)``;
    the ball radius is the neighbourhood diameter.
    """
    return grid.points_in_ball(nb.mean, nb.diameter)
