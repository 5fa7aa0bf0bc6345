"""Monte-Carlo policy gradient (REINFORCE) with a batch-average baseline."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .envs import PointMassEnv, rollout_returns
from .mdp import ConfigError, TabularMdp, TrainingDiverged
from .parallel import EVAL, TRAIN, seed_stream
from .policies import GaussianLinearPolicy, ParamVector
from .trace import REINFORCE_COLUMNS, TrainTrace

BASELINES = ("per_timestep", "batch", "none")


@dataclass
class Trajectory:
    """One episode: per-step observations (or state indices), pre-clip actions, rewards."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def returns_to_go(self, gamma: float) -> np.ndarray:
        G = np.zeros(len(self.rewards))
        acc = 0.0
        for t in range(len(self.rewards) - 1, -1, -1):
            acc = self.rewards[t] + gamma * acc
            G[t] = acc
        return G


@dataclass
class ReinforceConfig:
    batch_size: int = 128
    eta: float = 1e-3
    sigma: float = 0.5
    gamma: float = 0.99
    iters: int = 300
    eval_stride: int = 5
    eval_episodes: int = 8
    checkpoint_stride: int = 5
    seed: int = 0
    baseline: str = "per_timestep"
    max_abs_theta: float = 1e6

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.eta <= 0 or self.sigma < 0 or not 0 <= self.gamma <= 1:
            raise ConfigError("invalid eta, sigma or gamma")
        if self.eval_stride < 1 or self.checkpoint_stride < 1 or self.eval_episodes < 1:
            raise ConfigError("strides and eval_episodes must be >= 1")
        if self.baseline not in BASELINES:
            raise ConfigError(f"baseline must be one of {BASELINES}")

    def to_dict(self) -> dict:
        return asdict(self)


def _baselines(G: list[np.ndarray], mode: str) -> list[np.ndarray]:
    if mode == "none":
        return [np.zeros_like(g) for g in G]
    if mode == "batch":
        b = float(np.mean(np.concatenate(G)))
        return [np.full_like(g, b) for g in G]
    T = max(len(g) for g in G)
    padded = np.zeros((len(G), T))
    for n, g in enumerate(G):
        padded[n, :len(g)] = g
    b = padded.mean(axis=0)
    return [b[:len(g)] for g in G]


def reinforce_gradient(batch, policy, gamma: float = 1.0, baseline: str = "per_timestep") -> np.ndarray:
    """``(1/N) sum_n sum_t score(a_t|s_t) (G_t - b_t)`` over a batch of trajectories.

    With ``per_timestep`` the baseline ``b_t`` is the batch mean of ``G_t``
    (episodes that ended before ``t`` count as 0); ``batch`` uses one scalar mean
    over all returns; ``none`` disables it. Returns an array shaped like
    ``policy.theta``.
    """
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    if baseline not in BASELINES:
        raise ValueError(f"baseline must be one of {BASELINES}")
    if len(batch) == 1 and baseline != "none":
        warnings.warn("batch of one with a batch-average baseline: every advantage is zero",
                      RuntimeWarning, stacklevel=2)
    G = [tr.returns_to_go(gamma) for tr in batch]
    B = _baselines(G, baseline)
    grad = np.zeros_like(policy.theta, dtype=float)
    for tr, g, b in zip(batch, G, B):
        if len(g) == 0:
            continue
        scores = policy.score_many(tr.states, tr.actions)
        grad += np.tensordot(g - b, scores, axes=(0, 0))
    return grad / len(batch)


# -- tabular episodic sampling -------------------------------------------------

def sample_tabular_episode(mdp: TabularMdp, probs: np.ndarray, rng: np.random.Generator,
                           max_steps: int = 10_000) -> Trajectory:
    """Episode whose undiscounted return is unbiased for the discounted value.

    After each step the episode stops with probability ``1 - discount``; it also
    stops on entering one of ``mdp.terminal_states``.
    """
    s = mdp.start_state
    states, actions, rewards = [], [], []
    terminal = set(mdp.terminal_states)
    cum_p = np.cumsum(probs, axis=1)
    cum_t = np.cumsum(mdp.transition, axis=2)
    for _ in range(max_steps):
        a = min(int(np.searchsorted(cum_p[s], rng.random(), side="right")), mdp.num_actions - 1)
        s_next = min(int(np.searchsorted(cum_t[s, a], rng.random(), side="right")), mdp.num_states - 1)
        states.append(s)
        actions.append(a)
        rewards.append(mdp.reward[s, a])
        s = s_next
        if s in terminal or rng.random() >= mdp.discount:
            break
    return Trajectory(np.array(states, dtype=int), np.array(actions, dtype=int), np.array(rewards, dtype=float))


# -- Gaussian linear policies on the point mass --------------------------------

def _rollout_inputs(env: PointMassEnv, base_seed: int, tag: int, key: int, n: int, with_noise: bool):
    starts = np.empty((1, n, 4))
    noise = np.empty((1, env.horizon, n, env.action_dim)) if with_noise else None
    for i in range(n):
        rng = seed_stream(base_seed, tag, key, i)
        starts[0, i] = env.start_states(rng, 1)[0]
        if with_noise:
            noise[0, :, i] = rng.standard_normal((env.horizon, env.action_dim))
    return starts, noise


def sample_batch(env: PointMassEnv, policy: GaussianLinearPolicy, base_seed: int, it: int, n: int):
    """N training rollouts; rollout i draws from ``seed_stream(base_seed, TRAIN, it, i)``."""
    if policy.sigma <= 0:
        raise ValueError("training requires a stochastic policy (sigma > 0)")
    starts, noise = _rollout_inputs(env, base_seed, TRAIN, it, n, True)
    _, obs, act, rew = rollout_returns(env, policy.theta[None], policy.sigma, starts, noise, record=True)
    return [Trajectory(obs[0, :, i], act[0, :, i], rew[0, :, i]) for i in range(n)]


def deterministic_eval(env: PointMassEnv, theta: np.ndarray, episodes: int = 8, seed: int = 0,
                       gamma: float = 1.0) -> tuple[float, float]:
    """Mean and std of returns with sigma forced to 0, on evaluation-only seeds."""
    starts, _ = _rollout_inputs(env, seed, EVAL, 0, episodes, False)
    ret = rollout_returns(env, np.asarray(theta, dtype=float)[None], 0.0, starts, None, gamma)[0]
    return float(ret.mean()), float(ret.std())


def train_reinforce(env: PointMassEnv, config: ReinforceConfig, theta0: np.ndarray | None = None) -> TrainTrace:
    """Fixed-step REINFORCE ascent on a Gaussian linear policy.

    Every ``eval_stride`` iterations the trace gets the deterministic (sigma=0)
    evaluation; ``objective_aug`` holds the mean discounted return of the
    training batch.
    """
    if config.sigma <= 0:
        raise ConfigError("training requires a stochastic policy: sigma must be > 0")
    theta = np.zeros((env.action_dim, env.obs_dim)) if theta0 is None else np.array(theta0, dtype=float)
    policy = GaussianLinearPolicy(theta, config.sigma, env.action_low, env.action_high)
    trace = TrainTrace(list(REINFORCE_COLUMNS), meta={"config": config.to_dict(), "env": env.to_dict()})
    with warnings.catch_warnings():
        if config.batch_size == 1:
            warnings.simplefilter("once")
        for it in range(config.iters + 1):
            row = {"iter": it, "tau": 0.0, "sigma": config.sigma}
            if it % config.eval_stride == 0 or it == config.iters:
                mean, std = deterministic_eval(env, policy.theta, config.eval_episodes, config.seed, config.gamma)
                row.update(objective_true=mean, eval_return_mean=mean, eval_return_std=std)
            if it % config.checkpoint_stride == 0 or it == config.iters:
                trace.checkpoints[it] = ParamVector(policy.theta.copy(), "gaussian_linear", policy.theta.shape,
                                                   sigma=config.sigma, meta={"seed": config.seed, "iter": it})
            if it == config.iters:
                trace.rows.append(row)
                break
            batch = sample_batch(env, policy, config.seed, it, config.batch_size)
            grad = reinforce_gradient(batch, policy, config.gamma, config.baseline)
            row["objective_aug"] = float(np.mean([tr.returns_to_go(config.gamma)[0] for tr in batch]))
            row["grad_norm"] = float(np.linalg.norm(grad))
            trace.rows.append(row)
            policy.theta = policy.theta + config.eta * grad
            if not np.all(np.isfinite(policy.theta)) or np.max(np.abs(policy.theta)) > config.max_abs_theta:
                raise TrainingDiverged(f"parameters diverged at iteration {it}: max|theta|="
                                       f"{np.max(np.abs(policy.theta))!r}; lower eta (now {config.eta})")
    return trace
