"""Policy families: tabular softmax, entropy mixture and Gaussian linear."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mdp import entropy_rows


def softmax_probs(theta: np.ndarray) -> np.ndarray:
    """Row-stochastic S x A table from an A x S (or batched ... x A x S) logit array."""
    logits = np.swapaxes(np.asarray(theta, dtype=float), -1, -2)
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def mix_probs(probs: np.ndarray, mix: float) -> np.ndarray:
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must lie in [0, 1], got {mix}")
    if mix == 0.0:
        return probs
    return (1.0 - mix) * probs + mix / probs.shape[-1]


@dataclass
class SoftmaxTabularPolicy:
    """Categorical policy ``pi(a|s) ∝ exp(theta[a, s])`` over one-hot states."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim != 2:
            raise ValueError("theta must have A x S layout")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")

    @property
    def num_actions(self) -> int:
        return self.theta.shape[0]

    @property
    def num_states(self) -> int:
        return self.theta.shape[1]

    def probs(self) -> np.ndarray:
        return softmax_probs(self.theta)

    def action_probs(self, s: int) -> np.ndarray:
        return self.probs()[s]

    def score(self, s: int, a: int) -> np.ndarray:
        """Gradient of log pi(a|s) with respect to theta (A x S)."""
        g = np.zeros_like(self.theta)
        g[:, s] = -self.action_probs(s)
        g[a, s] += 1.0
        return g

    def score_many(self, states, actions) -> np.ndarray:
        """Stacked scores for a sequence of (state, action) pairs: (T, A, S)."""
        states = np.asarray(states, dtype=int)
        actions = np.asarray(actions, dtype=int)
        probs = self.probs()
        out = np.zeros((len(states),) + self.theta.shape)
        t = np.arange(len(states))
        out[t, :, states] = -probs[states]
        out[t, actions, states] += 1.0
        return out


@dataclass
class MixedPolicy:
    """``(1 - mix) * base + mix / A``: every action keeps probability >= mix / A."""

    base: SoftmaxTabularPolicy
    mix: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.mix <= 1.0:
            raise ValueError(f"mix must lie in [0, 1], got {self.mix}")

    def probs(self) -> np.ndarray:
        return mix_probs(self.base.probs(), self.mix)

    def action_probs(self, s: int) -> np.ndarray:
        return self.probs()[s]


def action_probs(policy, s: int) -> np.ndarray:
    if not 0 <= s < policy.probs().shape[0]:
        raise IndexError(f"state {s} out of range")
    return policy.action_probs(s)


def categorical_entropy(probs) -> float:
    """Entropy in nats, with 0 log 0 = 0."""
    return float(entropy_rows(np.asarray(probs, dtype=float)))


def entropy_grad_rows(probs: np.ndarray) -> np.ndarray:
    """dH/dlogit for softmax rows: ``-pi_b (log pi_b + H)``; same shape as ``probs``."""
    H = entropy_rows(probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    return -probs * (logp + H[..., None])


def categorical_entropy_grad(policy: SoftmaxTabularPolicy, s: int) -> np.ndarray:
    """Gradient of H(pi(.|s)) with respect to the logits theta[:, s]."""
    return entropy_grad_rows(policy.action_probs(s))


@dataclass
class GaussianLinearPolicy:
    """Gaussian policy with mean ``theta @ obs`` and a fixed shared std ``sigma``."""

    theta: np.ndarray
    sigma: float
    low: np.ndarray = field(default_factory=lambda: np.array([-1.0, -1.0]))
    high: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.low = np.broadcast_to(np.asarray(self.low, dtype=float), self.theta.shape[:1]).copy()
        self.high = np.broadcast_to(np.asarray(self.high, dtype=float), self.theta.shape[:1]).copy()
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def mean(self, obs: np.ndarray) -> np.ndarray:
        return linear_mean(self.theta, obs)

    def sample(self, obs: np.ndarray, noise: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(pre_clip, executed)`` actions for standard-normal ``noise``."""
        pre = self.mean(obs) + self.sigma * noise
        return pre, np.clip(pre, self.low, self.high)

    def log_prob_grad(self, obs: np.ndarray, a_pre: np.ndarray) -> np.ndarray:
        """``d/dtheta log N(a; theta obs, sigma^2 I) = ((a - theta obs) / sigma^2) ⊗ obs``."""
        if self.sigma <= 0:
            raise ValueError("log-density gradient needs sigma > 0")
        obs = np.asarray(obs, dtype=float)
        diff = (np.asarray(a_pre, dtype=float) - self.mean(obs)) / self.sigma**2
        return np.multiply.outer(diff, obs) if diff.ndim == 1 else diff[..., :, None] * obs[..., None, :]

    def score_many(self, obs, a_pre) -> np.ndarray:
        """Stacked log-density gradients: (T, act, obs_dim)."""
        return self.log_prob_grad(np.asarray(obs, dtype=float), np.asarray(a_pre, dtype=float))

    def log_prob(self, obs: np.ndarray, a_pre: np.ndarray) -> float:
        if self.sigma <= 0:
            raise ValueError("log-density needs sigma > 0")
        diff = np.asarray(a_pre, dtype=float) - self.mean(obs)
        k = diff.shape[-1]
        return float(-0.5 * np.sum(diff**2) / self.sigma**2 - k * math.log(self.sigma) - 0.5 * k * math.log(2 * math.pi))

    def entropy(self) -> float:
        """Differential entropy summed over action dimensions (reporting only)."""
        if self.sigma == 0:
            return -math.inf
        return self.theta.shape[0] * 0.5 * math.log(2 * math.pi * math.e * self.sigma**2)


def linear_mean(theta: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """``theta @ obs`` over trailing axes, summed in a fixed order.

    theta: (..., act, obs_dim); obs: (..., obs_dim). Explicit accumulation keeps
    results identical however the leading axes are batched.
    """
    out = theta[..., :, 0] * obs[..., None, 0]
    for j in range(1, theta.shape[-1]):
        out = out + theta[..., :, j] * obs[..., None, j]
    return out


@dataclass
class ParamVector:
    """Flat parameter vector plus the layout needed to rebuild a policy."""

    values: np.ndarray
    policy_kind: str
    dims: tuple[int, ...]
    sigma: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.dims = tuple(int(d) for d in self.dims)
        if self.values.size != int(np.prod(self.dims)):
            raise ValueError(f"{self.values.size} values do not fit layout {self.dims}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("parameter values must be finite")

    def array(self) -> np.ndarray:
        return self.values.reshape(self.dims)

    def to_dict(self) -> dict:
        return {
            "policy_kind": self.policy_kind,
            "dims": list(self.dims),
            "sigma": self.sigma,
            "meta": self.meta,
            "theta": [float(x) for x in self.values],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ParamVector":
        return cls(
            values=np.asarray(doc["theta"], dtype=float),
            policy_kind=doc["policy_kind"],
            dims=tuple(doc["dims"]),
            sigma=doc.get("sigma"),
            meta=doc.get("meta", {}),
        )


def save_checkpoint(path, pv: ParamVector) -> None:
    Path(path).write_text(json.dumps(pv.to_dict(), indent=1) + "\n")


def load_checkpoint(path) -> ParamVector:
    with open(path) as fh:
        return ParamVector.from_dict(json.load(fh))
