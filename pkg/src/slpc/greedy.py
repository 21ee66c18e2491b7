"""Locally greedy sequential principal-curve learner.

Each round tosses a Bernoulli(epsilon) coin: an explore round ranks the
whole action pool and observes every action's reward exactly; an exploit
round restricts the ranking to a neighbourhood of the previous curve,
built by re-wiring the vertex run closest to the incoming observation
with points from a local grid, and rewards are importance-weighted
through the closed-form win probability.  The action pool grows lazily:
the full curve class is never materialized, only the initial segment and
every neighbourhood candidate generated so far.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import (PolygonalLine, chain_losses, observation_neighborhood,
                       projection_segment)
from .lattice import LatticeGrid, ModelConfig
from .metrics import principal_segment
from .perturbed import draw_perturbations, win_probability

__all__ = [
    "GreedyParams",
    "RoundRecord",
    "init_first_pc",
    "build_neighborhood",
    "GreedyLearner",
    "run_stream",
]


@dataclass
class GreedyParams:
    """Learner constants plus the pool policy knobs.

    ``epsilon`` is the explore probability, ``alpha`` the placeholder
    reward estimate, ``beta`` the win-probability floor below which no
    importance weighting happens, ``eta`` the (constant) perturbation
    scale.  The pool policy caps the local grid and the neighbourhood
    size, and decides how newcomers' reward estimates are backfilled:
    ``full_backfill`` replays past rounds exactly (explore rounds score
    the real reward, exploit rounds contribute alpha), the cheap
    alternative credits alpha for every elapsed round.
    """

    epsilon: float
    alpha: float
    beta: float
    eta: float
    max_local_grid: int = 24
    max_neighborhood: int = 400
    full_backfill: bool = True
    length_cap: float | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must be in (0, 1]")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if self.alpha < 0 or self.eta <= 0:
            raise ValueError("alpha must be >= 0 and eta > 0")


@dataclass
class RoundRecord:
    """Audit entry for one round; ``t`` is the absolute stream index."""

    t: int
    x: np.ndarray
    phase: str  # "explore" | "exploit"
    chosen: PolygonalLine
    reward: float
    win_probability: float | None
    loss: float
    availability_size: int


def init_first_pc(points, grid: LatticeGrid) -> PolygonalLine:
    """One-segment starter curve from the warm-up points.

    The segment runs between the two extreme projections of the points
    onto their first principal component and both endpoints snap to the
    nearest grid point.  Raises if the points are all identical.
    """
    a, b = principal_segment(points)
    va = grid.nearest(a)
    vb = grid.nearest(b)
    if np.array_equal(va, vb):
        # coarse grids can collapse both endpoints; take the nearest
        # distinct grid point for the far end
        for cand in grid.nearest_in_ball(b, 4 * grid.delta * np.sqrt(grid.d), 16):
            if not np.array_equal(cand, va):
                vb = cand
                break
        else:
            raise ValueError("grid too coarse to seed a one-segment curve")
    return PolygonalLine([va, vb])


def _vertex_runs(mask) -> list:
    """Maximal runs of consecutive True entries as (start, stop) pairs."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def build_neighborhood(f_prev: PolygonalLine, local_points, delta: float,
                       p: int, length_cap: float | None = None,
                       max_candidates: int | None = None) -> list:
    """Curves obtained by re-wiring the local vertex run of ``f_prev``.

    The longest run of consecutive ``f_prev`` vertices lying inside the
    local grid is replaced by every ordered tuple of m distinct local grid
    points, for m in {run-1, run, run+1} (m >= 1), keeping the flanking
    vertices.  Results are filtered to 1 <= K(f) <= p (and to the length
    cap when one is set), canonicalized and deduplicated; ``f_prev`` is
    always first.  Degenerate inputs (empty grid, no vertex inside it)
    yield just ``f_prev``.
    """
    pts = np.atleast_2d(np.asarray(local_points, dtype=float))
    out = [f_prev]
    if pts.size == 0:
        return out
    keyset = {tuple(int(round(c / delta)) for c in q) for q in pts}
    mask = [tuple(int(round(c / delta)) for c in v) in keyset
            for v in f_prev.vertices]
    runs = _vertex_runs(mask)
    if not runs:
        return out
    i, j = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
    run_len = j - i
    head = f_prev.vertices[:i]
    tail = f_prev.vertices[j:]

    seen = {f_prev.canonical_key()}
    n = len(pts)
    sizes = [m for m in (run_len - 1, run_len, run_len + 1) if 1 <= m <= n]
    # an even split of the budget keeps the higher-m (segment-growth)
    # tuples from being starved by the cheap low-m ones
    per_m = None if max_candidates is None \
        else max(1, max_candidates // max(len(sizes), 1))
    for m in sizes:
        emitted = 0
        examined = 0
        examine_cap = max(100_000, 50 * (per_m or 0))
        for combo in itertools.permutations(range(n), m):
            examined += 1
            if examined > examine_cap:
                break
            vseq = np.vstack([head, pts[list(combo)], tail])
            k = vseq.shape[0] - 1
            if k < 1 or k > p:
                continue
            if np.any(np.all(vseq[1:] == vseq[:-1], axis=1)):
                continue
            if length_cap is not None:
                length = float(np.sum(np.linalg.norm(np.diff(vseq, axis=0),
                                                     axis=1)))
                if length > length_cap * (1 + 1e-12):
                    continue
            line = PolygonalLine(vseq)
            key = line.canonical_key()
            if key in seen:
                continue
            seen.add(key)
            out.append(line)
            emitted += 1
            if per_m is not None and emitted >= per_m:
                break
    return out


class GreedyLearner:
    """State of the locally greedy learner over one stream."""

    def __init__(self, cfg: ModelConfig, grid: LatticeGrid,
                 params: GreedyParams, seed=None):
        self.cfg = cfg
        self.grid = grid
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.t = 0  # rounds played (not counting warm-up)
        self.history: list = []
        self.records: list = []
        self._round_log: list = []  # (phase, x) per round, for backfill
        self._prev_idx: int | None = None

        # pool storage: padded per-segment endpoint tensors so losses over
        # the whole pool vectorize; padding repeats the terminal vertex,
        # which can never beat the true nearest segment
        self.pool: list = []
        self._index = {}
        cap = 256
        self._seg_a = np.empty((cap, cfg.p, cfg.d))
        self._seg_b = np.empty((cap, cfg.p, cfg.d))
        self._kvec = np.empty(cap, dtype=int)
        self._cum = np.empty(cap)

    # -- pool plumbing ------------------------------------------------------

    def _grow(self, need: int):
        cap = self._seg_a.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("_seg_a", "_seg_b"):
            new = np.empty((cap,) + getattr(self, name).shape[1:])
            new[: len(self.pool)] = getattr(self, name)[: len(self.pool)]
            setattr(self, name, new)
        for name, dtype in (("_kvec", int), ("_cum", float)):
            new = np.empty(cap, dtype=dtype)
            new[: len(self.pool)] = getattr(self, name)[: len(self.pool)]
            setattr(self, name, new)

    def _add_line(self, line: PolygonalLine) -> int:
        key = line.canonical_key()
        idx = self._index.get(key)
        if idx is not None:
            return idx
        idx = len(self.pool)
        self._grow(idx + 1)
        v = line.vertices
        k = line.segment_count
        if k > self.cfg.p:
            raise ValueError("line exceeds the segment budget")
        self._seg_a[idx, :k] = v[:-1]
        self._seg_b[idx, :k] = v[1:]
        self._seg_a[idx, k:] = v[-1]
        self._seg_b[idx, k:] = v[-1]
        self._kvec[idx] = k
        self._cum[idx] = self._backfill(line)
        self.pool.append(line)
        self._index[key] = idx
        return idx

    def _backfill(self, line: PolygonalLine) -> float:
        alpha = self.params.alpha
        if not self._round_log:
            return 0.0
        if not self.params.full_backfill:
            return alpha * len(self._round_log)
        total = 0.0
        explore_xs = [x for phase, x in self._round_log if phase == "explore"]
        total += alpha * (len(self._round_log) - len(explore_xs))
        if explore_xs:
            d = chain_losses(line.vertices, np.asarray(explore_xs))
            total += float(np.sum(self.cfg.c0 - d))
        return total

    def _pool_losses(self, x) -> np.ndarray:
        n = len(self.pool)
        a = self._seg_a[:n]
        ab = self._seg_b[:n] - a
        denom = np.einsum("nkj,nkj->nk", ab, ab)
        t = np.einsum("nkj,nkj->nk", x - a, ab) / np.where(denom == 0, 1, denom)
        t = np.clip(t, 0.0, 1.0)
        diff = x - (a + t[..., None] * ab)
        return np.min(np.einsum("nkj,nkj->nk", diff, diff), axis=1)

    def _penalties(self) -> np.ndarray:
        n = len(self.pool)
        return (self.cfg.c1 * self._kvec[:n]
                + self.cfg.c2 * self.cfg.L + self.cfg.c3)

    def _local_grid(self, x) -> np.ndarray:
        """Capped local grid for the neighbourhood of the current curve.

        The uncapped grid is the ball around the mean of the observations
        near the projection of ``x``, radius their diameter.  Within that
        ball the budget is split between points nearest ``x`` and points
        nearest the two curve vertices adjacent to its projection, so the
        re-wired run keeps those vertices available as anchors while new
        material appears next to the observation.
        """
        cur = self.current
        nb = observation_neighborhood(cur, np.vstack([*self.history, x]), x)
        seg = projection_segment(cur, x)
        cap = self.params.max_local_grid
        share = max(1, cap // 3)
        blobs = [self.grid.nearest_in_ball_constrained(
            x, nb.mean, nb.diameter, cap - 2 * share)]
        for v in (cur.vertices[seg - 1], cur.vertices[seg]):
            blobs.append(self.grid.nearest_in_ball_constrained(
                v, nb.mean, nb.diameter, share))
        merged = np.vstack(blobs)
        if merged.size == 0:
            return np.empty((0, self.cfg.d))
        keys = [tuple(int(round(c / self.grid.delta)) for c in q)
                for q in merged]
        seen = set()
        rows = []
        for key, q in zip(keys, merged):
            if key not in seen:
                seen.add(key)
                rows.append(q)
        pts = np.vstack(rows)
        d2 = np.einsum("ij,ij->i", pts - x, pts - x)
        return pts[np.argsort(d2, kind="stable")]

    def _argmax_canonical(self, values: np.ndarray, indices) -> int:
        hi = float(np.max(values))
        ties = [indices[i] for i in np.flatnonzero(values == hi)]
        if len(ties) == 1:
            return ties[0]
        return min(ties, key=lambda i: self.pool[i].canonical_key())

    # -- protocol -----------------------------------------------------------

    def initialize(self, warmup_points):
        pts = np.asarray(warmup_points, dtype=float)
        if pts.shape[0] < 2:
            raise ValueError("need at least two warm-up points")
        line = init_first_pc(pts, self.grid)
        self._prev_idx = self._add_line(line)
        self.history = [p for p in pts]
        return line

    @property
    def current(self) -> PolygonalLine:
        return self.pool[self._prev_idx]

    def round(self, x) -> RoundRecord:
        """Play one round against the incoming observation."""
        if self._prev_idx is None:
            raise RuntimeError("learner not initialized")
        x = np.asarray(x, dtype=float)
        cfg, prm = self.cfg, self.params
        self.t += 1
        t = self.t

        if t == 1:
            # warm-start round: the initial curve is forced and every pool
            # member's estimate is the exact reward
            chosen_idx = self._prev_idx
            rewards = cfg.c0 - self._pool_losses(x)
            self._cum[: len(self.pool)] += rewards
            r = float(rewards[chosen_idx])
            record = RoundRecord(
                t=cfg.t0 + t, x=x, phase="explore",
                chosen=self.pool[chosen_idx], reward=r, win_probability=1.0,
                loss=cfg.c0 - r, availability_size=len(self.pool))
            self._round_log.append(("explore", x))
        else:
            explore = bool(self.rng.random() < prm.epsilon)
            # the neighbourhood is built (and pooled) every round: the pool
            # is the lazy stand-in for the full curve class, and fresh local
            # candidates are the only cheap way to keep enriching it
            local = self._local_grid(x)
            cands = build_neighborhood(
                self.current, local, self.grid.delta, cfg.p,
                length_cap=prm.length_cap,
                max_candidates=prm.max_neighborhood)
            hood = [self._add_line(f) for f in cands]
            avail = list(range(len(self.pool))) if explore else hood

            n = len(self.pool)
            z = draw_perturbations(n, self.rng)
            det = self._cum[:n] - self._penalties() / prm.eta
            perturbed = det + z / prm.eta
            chosen_idx = self._argmax_canonical(perturbed[avail], avail)

            # marginal win probability over the phase coin: explore ranks
            # the pool, exploit ranks the neighbourhood
            q_pool = win_probability(det, prm.eta, chosen_idx)
            if chosen_idx in hood:
                q_hood = win_probability(
                    det[hood], prm.eta, hood.index(chosen_idx))
            else:
                q_hood = 0.0
            q = prm.epsilon * q_pool + (1 - prm.epsilon) * q_hood

            losses = self._pool_losses(x)
            r = float(cfg.c0 - losses[chosen_idx])
            if explore:
                self._cum[:n] += cfg.c0 - losses
                self._round_log.append(("explore", x))
            else:
                self._cum[:n] += prm.alpha
                if q > prm.beta:
                    if q <= 0:
                        raise RuntimeError("zero win probability for a "
                                           "candidate inside cond(t)")
                    self._cum[chosen_idx] += r / q - prm.alpha
                self._round_log.append(("exploit", x))
            record = RoundRecord(
                t=cfg.t0 + t, x=x, phase="explore" if explore else "exploit",
                chosen=self.pool[chosen_idx], reward=r, win_probability=q,
                loss=cfg.c0 - r, availability_size=len(avail))

        self._prev_idx = chosen_idx
        self.history.append(x)
        self.records.append(record)
        return record


def run_stream(stream, cfg: ModelConfig, grid: LatticeGrid,
               params: GreedyParams, seed=None) -> tuple:
    """Warm up on the first t0 points, then play out the rest in order.

    Returns ``(learner, records)``; records carry the full audit trail.
    """
    X = np.asarray(stream, dtype=float)
    if X.shape[0] <= cfg.t0:
        raise ValueError(f"stream must be longer than t0 = {cfg.t0}")
    learner = GreedyLearner(cfg, grid, params, seed=seed)
    learner.initialize(X[: cfg.t0])
    for x in X[cfg.t0:]:
        learner.round(x)
    return learner, learner.records
