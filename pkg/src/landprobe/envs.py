"""Deterministic toy continuous-control environment for Gaussian linear policies."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .mdp import ConfigError


@dataclass
class PointMassEnv:
    """2-D point mass with two circular goal regions.

    State is ``(x, y, vx, vy)``; the action is an acceleration clipped to
    ``[-1, 1]^2``. Each step: ``pos += dt * vel`` then
    ``vel += dt * a - friction * vel``; positions are clamped to the arena and
    the velocity component into a wall is zeroed. The reward is paid per step
    while the new position lies inside a goal. Policies observe the state plus
    a constant 1 feature.
    """

    dt: float = 0.05
    friction: float = 0.005
    horizon: int = 200
    start: tuple[float, float] = (0.0, 0.0)
    jitter: float = 0.05
    near_goal: tuple[float, float] = (1.0, 0.0)
    near_reward: float = 0.5
    far_goal: tuple[float, float] = (-3.0, 0.0)
    far_reward: float = 1.0
    goal_radius: float = 0.5
    arena: float = 5.0
    action_low: tuple[float, float] = (-1.0, -1.0)
    action_high: tuple[float, float] = (1.0, 1.0)

    state_dim: int = field(default=4, init=False)
    action_dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.horizon < 1 or self.dt <= 0 or self.jitter < 0 or self.arena <= 0:
            raise ConfigError("invalid point-mass parameters")
        if self.near_reward < 0 or self.far_reward < 0:
            raise ConfigError("goal rewards must be non-negative")

    @property
    def obs_dim(self) -> int:
        return self.state_dim + 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("state_dim")
        d.pop("action_dim")
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "PointMassEnv":
        known = set(cls.__dataclass_fields__) - {"state_dim", "action_dim"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown environment keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()})

    def reset(self, seed: int) -> np.ndarray:
        """Start state: fixed position plus uniform jitter, at rest."""
        rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
        return self.start_states(rng, 1)[0]

    def start_states(self, rng: np.random.Generator, n: int) -> np.ndarray:
        s = np.zeros((n, 4))
        s[:, :2] = np.asarray(self.start) + rng.uniform(-self.jitter, self.jitter, size=(n, 2))
        return s

    def observe(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        return np.concatenate([state, np.ones(state.shape[:-1] + (1,))], axis=-1)

    def clip(self, action: np.ndarray) -> np.ndarray:
        return np.clip(action, self.action_low, self.action_high)

    def reward(self, pos: np.ndarray) -> np.ndarray:
        r = np.zeros(pos.shape[:-1])
        for center, value in ((self.near_goal, self.near_reward), (self.far_goal, self.far_reward)):
            d2 = (pos[..., 0] - center[0]) ** 2 + (pos[..., 1] - center[1]) ** 2
            r = r + np.where(d2 <= self.goal_radius**2, value, 0.0)
        return r

    def dynamics(self, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched transition on (..., 4) states; returns ``(next_state, reward)``."""
        a = self.clip(action)
        pos = state[..., :2] + self.dt * state[..., 2:]
        vel = state[..., 2:] + self.dt * a - self.friction * state[..., 2:]
        clamped = np.clip(pos, -self.arena, self.arena)
        vel = np.where(clamped != pos, 0.0, vel)
        return np.concatenate([clamped, vel], axis=-1), self.reward(clamped)

    def step(self, state, action, t: int = 0) -> tuple[np.ndarray, float, bool]:
        """One transition from time index ``t``; ``done`` once the horizon is reached."""
        action = np.asarray(action, dtype=float)
        if not np.all(np.isfinite(action)):
            raise ValueError("action must be finite")
        nxt, r = self.dynamics(np.asarray(state, dtype=float), action)
        return nxt, float(r), t + 1 >= self.horizon


def rollout_returns(env: PointMassEnv, thetas: np.ndarray, sigma: float, starts: np.ndarray,
                    noise: np.ndarray | None, gamma: float = 1.0, record: bool = False):
    """Roll out Gaussian linear policies in lock-step.

    thetas: (B, act, obs); starts: (B, R, 4); noise: (B, T, R, act) standard
    normals or None for deterministic policies. Returns per-rollout discounted
    returns (B, R); with ``record`` also the observations (B, T, R, obs), pre-clip
    actions (B, T, R, act) and rewards (B, T, R).
    """
    B, R = starts.shape[:2]
    T = env.horizon
    state = starts
    th = thetas[:, None]
    ret = np.zeros((B, R))
    disc = 1.0
    if record:
        obs_log = np.empty((B, T, R, env.obs_dim))
        act_log = np.empty((B, T, R, env.action_dim))
        rew_log = np.empty((B, T, R))
    for t in range(T):
        obs = env.observe(state)
        mean = th[..., :, 0] * obs[..., None, 0]
        for j in range(1, obs.shape[-1]):
            mean = mean + th[..., :, j] * obs[..., None, j]
        pre = mean if noise is None or sigma == 0 else mean + sigma * noise[:, t]
        state, r = env.dynamics(state, pre)
        ret = ret + disc * r
        disc *= gamma
        if record:
            obs_log[:, t] = obs
            act_log[:, t] = pre
            rew_log[:, t] = r
    if record:
        return ret, obs_log, act_log, rew_log
    return ret
