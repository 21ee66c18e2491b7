"""Scikit-learn style front end for the sequential principal-curve learner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .geometry import PolygonalLine, chain_losses, projection_index
from .greedy import GreedyLearner, GreedyParams
from .lattice import LatticeGrid, ModelConfig, sleeping_bandit_params
from .metrics import r_squared
from .validation import check_points

__all__ = ["SequentialPrincipalCurve"]


class SequentialPrincipalCurve(BaseEstimator):
    """Fits a polygonal principal curve to a data stream, one point at a time.

    Parameters mirror the underlying model: ``p`` bounds the segment count,
    ``R``/``delta``/``L`` control the lattice (all three default to the
    data-driven recipe R = max|x|/sqrt(d), delta = R/10,
    L = 0.01 p sqrt(d) R), ``t0`` points warm-start the curve.  The
    exploration constants ``epsilon``, ``alpha``, ``beta`` and the
    perturbation scale ``eta`` default to the known-horizon schedule with
    the pool as the action class; any of them can be pinned explicitly.

    After ``fit`` the learned curve is in ``curve_`` and the per-round
    audit trail in ``records_``.
    """

    def __init__(self, p=20, R=None, delta=None, L=None, t0=3,
                 epsilon=None, alpha=None, beta=None, eta=None,
                 horizon=None, max_local_grid=24, max_neighborhood=400,
                 full_backfill=True, length_cap=None, random_state=None):
        self.p = p
        self.R = R
        self.delta = delta
        self.L = L
        self.t0 = t0
        self.epsilon = epsilon
        self.alpha = alpha
        self.beta = beta
        self.eta = eta
        self.horizon = horizon
        self.max_local_grid = max_local_grid
        self.max_neighborhood = max_neighborhood
        self.full_backfill = full_backfill
        self.length_cap = length_cap
        self.random_state = random_state

    # -- configuration ------------------------------------------------------

    def _resolve(self, X):
        cfg = ModelConfig.from_points(X, p=self.p, delta=self.delta,
                                      t0=self.t0, L=self.L)
        if self.R is not None:
            cfg = ModelConfig(d=cfg.d, R=self.R,
                              delta=self.delta if self.delta is not None
                              else self.R / 10.0,
                              p=self.p,
                              L=self.L if self.L is not None
                              else 0.01 * self.p * np.sqrt(cfg.d) * self.R,
                              t0=self.t0)
        horizon = self.horizon if self.horizon is not None else len(X)
        base = sleeping_bandit_params(1, max(horizon, 2), cfg)
        # the schedule's eta is calibrated to worst-case class sizes and
        # freezes complexity growth at desk scale; one extra segment should
        # instead pay for itself within about one lattice cell^2 of loss
        params = GreedyParams(
            epsilon=self.epsilon if self.epsilon is not None else base.epsilon,
            alpha=self.alpha if self.alpha is not None else base.alpha,
            beta=self.beta if self.beta is not None else base.beta,
            eta=self.eta if self.eta is not None else cfg.c1 / cfg.delta ** 2,
            max_local_grid=self.max_local_grid,
            max_neighborhood=self.max_neighborhood,
            full_backfill=self.full_backfill,
            length_cap=self.length_cap,
        )
        return cfg, params

    # -- estimator API ------------------------------------------------------

    def fit(self, X, y=None):
        """Stream the rows of ``X`` through the learner in order."""
        X = check_points(X, min_rows=self.t0 + 1)
        cfg, params = self._resolve(X)
        self.config_ = cfg
        self.params_ = params
        self.grid_ = LatticeGrid(cfg.d, cfg.R, cfg.delta)
        self.n_features_in_ = cfg.d
        self._learner = GreedyLearner(cfg, self.grid_, params,
                                      seed=self.random_state)
        self._learner.initialize(X[: cfg.t0])
        for x in X[cfg.t0:]:
            self._learner.round(x)
        self._finalize()
        return self

    def partial_fit(self, X, y=None):
        """Continue an already-fitted learner on more stream data."""
        if not hasattr(self, "_learner"):
            return self.fit(X)
        X = check_points(X, d=self.n_features_in_)
        for x in X:
            self._learner.round(x)
        self._finalize()
        return self

    def _finalize(self):
        self.records_ = self._learner.records
        self.curve_ = self._learner.current
        self.cumulative_loss_ = float(sum(r.loss for r in self.records_))

    def _check_fitted(self):
        if not hasattr(self, "curve_"):
            raise NotFittedError("this SequentialPrincipalCurve instance is "
                                 "not fitted yet")

    def transform(self, X):
        """Arc-length coordinate of each point's projection onto the curve."""
        self._check_fitted()
        X = check_points(X, d=self.n_features_in_)
        return np.array([[projection_index(self.curve_, x)] for x in X])

    def predict(self, X):
        """Projection of each point onto the learned curve."""
        self._check_fitted()
        X = check_points(X, d=self.n_features_in_)
        v = self.curve_.vertices
        seg_len = np.linalg.norm(np.diff(v, axis=0), axis=1)
        starts = np.concatenate(([0.0], np.cumsum(seg_len)[:-1]))
        feet = np.empty_like(X)
        for i, x in enumerate(X):
            s = projection_index(self.curve_, x)
            j = min(int(np.searchsorted(starts, s, side="right")) - 1,
                    len(seg_len) - 1)
            t = (s - starts[j]) / seg_len[j]
            feet[i] = v[j] + t * (v[j + 1] - v[j])
        return feet

    def score(self, X, y=None):
        """R^2 of the learned curve against the given points."""
        self._check_fitted()
        X = check_points(X, d=self.n_features_in_, min_rows=2)
        return r_squared(X, self.curve_)

    def losses(self, X):
        """Squared distance of each point to the learned curve."""
        self._check_fitted()
        X = check_points(X, d=self.n_features_in_)
        return chain_losses(self.curve_.vertices, X)
