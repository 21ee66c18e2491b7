"""Follow-the-perturbed-leader over an explicit candidate list.

Each candidate keeps a running sum of per-round scores; a single draw of
exponential noise at initialization perturbs the comparison.  The win
probability kernel answers the complementary question for *fresh* noise:
given deterministic scores G_f and a perturbation z_f/eta with
z_f ~ Exp(1) i.i.d., what is the probability that a given candidate tops
the ranking?  For exponential noise that probability has a closed form:

    P(f wins) = integral_0^inf e^{-z} prod_{g != f} F(z + eta (G_f - G_g)) dz,
    F(u) = max(0, 1 - e^{-u}).

The integrand vanishes below z0 = max(0, eta * max_g (G_g - G_f)); after
substituting u = e^{-(z - z0)} it becomes a polynomial of degree n-1 on
[0, 1], which Gauss-Legendre quadrature with ceil(n/2) nodes integrates
exactly.  Very large candidate sets fall back to adaptive quadrature.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from .geometry import PolygonalLine, loss
from .lattice import ModelConfig, penalty

__all__ = [
    "eta_schedule",
    "draw_perturbations",
    "win_probability",
    "win_probabilities",
    "ExactLearner",
]

_EXACT_QUADRATURE_LIMIT = 4096


def eta_schedule(t: int, cfg: ModelConfig) -> float:
    """Decreasing step size sqrt(c1 p + c2 L + c3) / (c0 sqrt((e-1) t)).

    ``t = 0`` returns the initialization value (the ``t = 1`` formula), so
    the schedule is non-increasing from the start.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    eta0 = math.sqrt(cfg.penalty_mass) / (cfg.c0 * math.sqrt(math.e - 1))
    if t <= 1:
        return eta0
    return eta0 / math.sqrt(t)


def draw_perturbations(n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. Exp(1) draws, all strictly positive."""
    z = rng.exponential(1.0, n)
    while np.any(z <= 0.0):  # exact zeros have probability ~2^-53
        z[z <= 0.0] = rng.exponential(1.0, int(np.sum(z <= 0.0)))
    return z


@lru_cache(maxsize=16)
def _gl_nodes(m: int):
    x, w = roots_legendre(m)
    # map from [-1, 1] to [0, 1]
    return (x + 1.0) / 2.0, w / 2.0


def _poly_integral_01(b: np.ndarray) -> float:
    """integral_0^1 prod_j (1 - b_j u) du for b_j in [0, 1]."""
    n = len(b) + 1
    if len(b) == 0:
        return 1.0
    if n <= _EXACT_QUADRATURE_LIMIT:
        m = 1 << max(3, (n // 2).bit_length())  # >= ceil(n/2): exact
        u, w = _gl_nodes(m)
        with np.errstate(divide="ignore"):
            logs = np.log1p(-np.outer(u, b))
        vals = np.exp(np.sum(logs, axis=1))
        return float(np.dot(w, vals))

    def integrand(u):
        with np.errstate(divide="ignore"):
            return math.exp(float(np.sum(np.log1p(-b * u))))

    val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=200)
    return val


def win_probability(scores, eta: float, index: int) -> float:
    """Probability that ``scores[index] + z/eta`` tops all perturbed scores.

    ``scores`` are the deterministic parts; the z are fresh i.i.d. Exp(1).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    g = np.asarray(scores, dtype=float)
    n = g.shape[0]
    if n == 0:
        raise ValueError("need at least one score")
    if not 0 <= index < n:
        raise IndexError("candidate index out of range")
    if n == 1:
        return 1.0
    gaps = eta * (g[index] - np.delete(g, index))  # eta (G_f - G_g)
    z0 = max(0.0, float(np.max(-gaps)))
    # z0 + gaps >= 0 up to roundoff; clamp so b stays a valid CDF value
    b = np.minimum(np.exp(-(z0 + gaps)), 1.0)
    return math.exp(-z0) * _poly_integral_01(b)


def win_probabilities(scores, eta: float) -> np.ndarray:
    """Win probability of every candidate; sums to 1."""
    g = np.asarray(scores, dtype=float)
    return np.array([win_probability(g, eta, i) for i in range(len(g))])


def _argmin_canonical(values: np.ndarray, candidates) -> int:
    """Index of the minimum; exact ties resolve to the lexicographically
    smallest candidate (probability zero under continuous noise, but the
    result must not depend on list order)."""
    lo = float(np.min(values))
    ties = np.flatnonzero(values == lo)
    if len(ties) == 1:
        return int(ties[0])
    return int(min(ties, key=lambda i: candidates[i].canonical_key()))


class ExactLearner:
    """Perturbed-leader prediction over an enumerated candidate list.

    One exponential draw per candidate at initialization seeds the running
    sums with (h(f) - z_f)/eta_0; each round predicts the minimizer of the
    sums accumulated so far, then folds in the new loss plus the
    step-size-rebalancing term (1/eta_t - 1/eta_{t-1})(h(f) - z_f).  With a
    constant step size the rebalancing term vanishes.
    """

    def __init__(self, candidates, cfg: ModelConfig, seed=None, z=None,
                 eta_constant: float | None = None):
        if len(candidates) == 0:
            raise ValueError("candidate list must not be empty")
        self.candidates = list(candidates)
        self.cfg = cfg
        self.h = np.array([penalty(f, cfg) for f in self.candidates])
        if z is None:
            z = draw_perturbations(len(self.candidates),
                                   np.random.default_rng(seed))
        else:
            z = np.asarray(z, dtype=float)
            if z.shape != self.h.shape or np.any(z <= 0):
                raise ValueError("perturbations must be positive, one per "
                                 "candidate")
        self.z = z
        self.eta_constant = eta_constant
        self._eta_prev = self._eta(0)
        self.cum = (self.h - self.z) / self._eta_prev  # Delta_{f,0}
        self.t = 0
        self.initial_choice = self.candidates[
            _argmin_canonical(self.cum, self.candidates)]

    def _eta(self, t: int) -> float:
        if self.eta_constant is not None:
            return self.eta_constant
        return eta_schedule(t, self.cfg)

    def step(self, x) -> PolygonalLine:
        """Predict for the incoming point, then account its loss."""
        self.t += 1
        chosen = self.candidates[_argmin_canonical(self.cum, self.candidates)]
        eta_t = self._eta(self.t)
        delta = np.array([loss(f, x) for f in self.candidates])
        delta += (1.0 / eta_t - 1.0 / self._eta_prev) * (self.h - self.z)
        self.cum += delta
        self._eta_prev = eta_t
        return chosen

    def run(self, stream) -> list:
        """Per-round predictions for a whole stream."""
        return [self.step(x) for x in stream]

    def peek_ahead_sequence(self, stream):
        """Minimizers that include the current round's own loss.

        Returns ``(chosen, deltas)`` where ``chosen[t]`` minimizes the sums
        through round t (t = 0 uses only the initialization term) and
        ``deltas`` is the (T+1, n) table of per-round increments.  Test-only
        construct; does not touch the learner state.
        """
        n = len(self.candidates)
        rows = [(self.h - self.z) / self._eta(0)]
        eta_prev = self._eta(0)
        for t, x in enumerate(stream, start=1):
            eta_t = self._eta(t)
            delta = np.array([loss(f, x) for f in self.candidates])
            delta += (1.0 / eta_t - 1.0 / eta_prev) * (self.h - self.z)
            rows.append(delta)
            eta_prev = eta_t
        deltas = np.vstack(rows)
        cum = np.zeros(n)
        chosen = []
        for row in deltas:
            cum += row
            chosen.append(self.candidates[_argmin_canonical(cum, self.candidates)])
        return chosen, deltas
