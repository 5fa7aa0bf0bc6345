"""Objective families that can be probed, interpolated and tracked.

Every objective is an :class:`ObjectiveHandle` over a flat parameter vector.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .envs import PointMassEnv, rollout_returns
from .mdp import ConfigError, TabularMdp, solve_batch
from .parallel import seed_stream
from .policies import mix_probs, softmax_probs
from .probe import ObjectiveHandle


# -- analytic demo set ----------------------------------------------------------

def _goodfellow(t):
    return -(1.0 - t[..., 0] * t[..., 1]) ** 2


ANALYTIC = {
    "goodfellow": (_goodfellow, 2, "-(1 - x y)^2"),
    "quad_max": (lambda t: -t[..., 0] ** 2 - 2.0 * t[..., 1] ** 2, 2, "-x^2 - 2 y^2"),
    "quad_flat": (lambda t: -t[..., 0] ** 2 + 0.0 * t[..., 1] ** 2, 2, "-x^2 + 0 y^2"),
    "saddle": (lambda t: -t[..., 0] ** 2 + t[..., 1] ** 2, 2, "-x^2 + y^2"),
    "linear": (lambda t: -2.0 * t[..., 0] + 2.0 * t[..., 1], 2, "-2 x + 2 y"),
    "constant": (lambda t: 0.0 * t[..., 0], 2, "0"),
}


def analytic_objective(name: str) -> ObjectiveHandle:
    if name not in ANALYTIC:
        raise ConfigError(f"unknown analytic objective {name!r}; choose from {sorted(ANALYTIC)}")
    fn, dim, _ = ANALYTIC[name]
    return ObjectiveHandle(dim, lambda th, seed: float(fn(th)),
                           evaluate_batch=lambda ths, seeds: fn(np.asarray(ths, dtype=float)),
                           name=f"analytic:{name}")


def quadratic_objective(a, H, c: float = 0.0) -> ObjectiveHandle:
    """``O(theta) = c + a.theta + 0.5 theta^T H theta`` with symmetric ``H``."""
    a = np.asarray(a, dtype=float)
    H = np.asarray(H, dtype=float)
    H = 0.5 * (H + H.T)

    def batch(thetas, seeds=None):
        t = np.atleast_2d(np.asarray(thetas, dtype=float))
        return c + t @ a + 0.5 * np.sum((t @ H) * t, axis=1)

    return ObjectiveHandle(a.size, lambda th, seed: float(batch(th[None])[0]), evaluate_batch=batch,
                           name="quadratic")


# -- tabular gridworld -----------------------------------------------------------

def gridworld_objective(mdp: TabularMdp, tau: float = 0.0, mix: float = 0.0) -> ObjectiveHandle:
    """Exact ``V^{tau, pi}(s0)`` of the mix-wrapped softmax policy.

    The flat parameter vector is the A x S logit table in row-major order.
    """
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    if not 0.0 <= mix <= 1.0:
        raise ConfigError("mix must lie in [0, 1]")
    shape = (mdp.num_actions, mdp.num_states)

    def batch(thetas, seeds=None):
        t = np.asarray(thetas, dtype=float).reshape((-1,) + shape)
        probs = mix_probs(softmax_probs(t), mix)
        v, _, _ = solve_batch(mdp, probs, tau)
        return v[:, mdp.start_state]

    return ObjectiveHandle(int(np.prod(shape)), lambda th, seed: float(batch(th[None])[0]),
                           evaluate_batch=batch, cost_hint=float(mdp.num_states) ** 3,
                           name=f"gridworld(tau={tau}, mix={mix})")


# -- point mass ------------------------------------------------------------------

@dataclass
class PointMassObjective:
    """Expected return of a Gaussian linear policy, estimated with ``rollouts`` episodes.

    Evaluation seed ``s`` fixes the start jitter and action noise of every
    rollout (rollout ``i`` draws from ``seed_stream(s, i)``), so two parameter
    vectors evaluated with the same seed share their randomness. With
    ``sigma = 0`` only the start jitter is random.
    """

    env: PointMassEnv
    sigma: float
    rollouts: int = 16
    gamma: float = 0.99

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.rollouts < 1:
            raise ConfigError("rollouts must be >= 1")
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.env.action_dim, self.env.obs_dim)

    def _inputs(self, seed: int):
        with self._lock:
            hit = self._cache.get(seed)
        if hit is not None:
            return hit
        R, T, act = self.rollouts, self.env.horizon, self.env.action_dim
        starts = np.empty((R, 4))
        noise = np.empty((T, R, act)) if self.sigma > 0 else None
        for i in range(R):
            rng = seed_stream(seed, i)
            starts[i] = self.env.start_states(rng, 1)[0]
            if noise is not None:
                noise[:, i] = rng.standard_normal((T, act))
        with self._lock:
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[seed] = (starts, noise)
        return starts, noise

    def returns(self, thetas, seeds) -> np.ndarray:
        """Per-rollout returns, shape (B, rollouts)."""
        thetas = np.asarray(thetas, dtype=float).reshape((-1,) + self.shape)
        seeds = [int(s) for s in np.atleast_1d(seeds)]
        inputs = [self._inputs(s) for s in seeds]
        starts = np.stack([s for s, _ in inputs])
        noise = None if self.sigma == 0 else np.stack([n for _, n in inputs])
        return rollout_returns(self.env, thetas, self.sigma, starts, noise, self.gamma)

    def batch(self, thetas, seeds) -> np.ndarray:
        ret = self.returns(thetas, seeds)
        total = ret[:, 0].copy()
        for i in range(1, ret.shape[1]):
            total = total + ret[:, i]
        return total / ret.shape[1]

    def handle(self) -> ObjectiveHandle:
        return ObjectiveHandle(int(np.prod(self.shape)),
                               lambda th, seed: float(self.batch(th[None], [seed])[0]),
                               stochastic=True, evaluate_batch=self.batch,
                               cost_hint=float(self.rollouts * self.env.horizon),
                               evaluate_samples=self.returns,
                               name=f"pointmass(sigma={self.sigma})")


def pointmass_objective(env: PointMassEnv, sigma: float, rollouts: int = 16, gamma: float = 0.99) -> ObjectiveHandle:
    return PointMassObjective(env, sigma, rollouts, gamma).handle()
