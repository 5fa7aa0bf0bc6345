"""Exact entropy-regularized policy gradient for tabular softmax policies."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .mdp import (
    ConfigError,
    GridworldSpec,
    TabularMdp,
    TrainingDiverged,
    shortest_path_policy,
    solve_batch,
    solve_values,
)
from .parallel import parallel_map
from .policies import ParamVector, entropy_grad_rows, mix_probs, softmax_probs
from .trace import EXACT_COLUMNS, TrainTrace


class SolutionClass(str, enum.Enum):
    OPTIMAL = "Optimal"
    SUBOPTIMAL = "Suboptimal"


@dataclass
class ExactTrainConfig:
    eta: float = 0.1
    tau0: float = 0.0
    tau_decay: float = 0.999
    iters: int = 20_000
    init_scale: float = 1.0
    seed: int = 0
    checkpoint_stride: int = 1000
    log_stride: int = 1

    def __post_init__(self):
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.tau0 < 0:
            raise ConfigError("tau0 must be non-negative")
        if not 0 < self.tau_decay <= 1:
            raise ConfigError("tau_decay must lie in (0, 1]")
        if self.iters < 0 or self.init_scale < 0:
            raise ConfigError("iters and init_scale must be non-negative")
        if self.checkpoint_stride < 1 or self.log_stride < 1:
            raise ConfigError("strides must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def _as_probs(mdp: TabularMdp, policy) -> np.ndarray:
    if hasattr(policy, "probs"):
        return policy.probs()
    return np.asarray(policy, dtype=float)


def exact_objective(mdp: TabularMdp, policy, tau: float = 0.0) -> float:
    """V^{tau, pi}(s0); ``policy`` is a policy object or an S x A table."""
    vt = solve_values(mdp, _as_probs(mdp, policy), tau)
    return float(vt.v[mdp.start_state])


def objective_and_gradient_batch(mdp: TabularMdp, thetas: np.ndarray, tau, mix: float = 0.0):
    """Objective and exact gradient for a batch of A x S logit arrays.

    Returns ``(value (B,), grad (B, A, S))``. The gradient is the discounted
    occupancy from s0 applied to the per-state cumulant
    ``sum_a pi(a|s) [Q(s,a) dlog pi(a|s) + tau dH(pi(.|s))]``. With ``mix`` > 0
    only the value is meaningful; the gradient is for the unmixed policy.
    """
    probs = softmax_probs(thetas)
    if mix:
        probs = mix_probs(probs, mix)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), probs.shape[:1])
    v, q, occ = solve_batch(mdp, probs, tau)
    q_bar = np.sum(probs * q, axis=-1, keepdims=True)
    cumulant = probs * (q - q_bar) + tau[:, None, None] * entropy_grad_rows(probs)
    grad = occ[..., None] * cumulant
    return v[:, mdp.start_state], np.swapaxes(grad, -1, -2)


def exact_gradient(mdp: TabularMdp, theta, tau: float = 0.0) -> np.ndarray:
    """Exact gradient of V^{tau, pi_theta}(s0) w.r.t. the A x S logits."""
    theta = np.asarray(theta.array() if isinstance(theta, ParamVector) else theta, dtype=float)
    if theta.shape != (mdp.num_actions, mdp.num_states):
        raise ValueError(f"theta must be A x S = {(mdp.num_actions, mdp.num_states)}, got {theta.shape}")
    _, g = objective_and_gradient_batch(mdp, theta[None], tau)
    return g[0]


def suboptimal_reference_value(mdp: TabularMdp, spec: GridworldSpec) -> float:
    """True return of the deterministic shortest-path policy to the suboptimal reward."""
    probs = shortest_path_policy(spec, spec.suboptimal_cell())
    return exact_objective(mdp, probs, 0.0)


def classify_solution(mdp: TabularMdp, policy, spec: GridworldSpec) -> SolutionClass:
    """Optimal iff the true return strictly beats the deterministic path to R_sub."""
    if spec is None:
        raise ConfigError("classification needs a gridworld with a designated suboptimal reward")
    ref = suboptimal_reference_value(mdp, spec)
    value = exact_objective(mdp, policy, 0.0)
    return SolutionClass.OPTIMAL if value > ref else SolutionClass.SUBOPTIMAL


def initial_theta(mdp: TabularMdp, config: ExactTrainConfig, seed: int | None = None) -> np.ndarray:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    return config.init_scale * rng.standard_normal((mdp.num_actions, mdp.num_states))


def _pv(theta: np.ndarray, seed: int, it: int) -> ParamVector:
    return ParamVector(theta.copy(), "softmax_tabular", theta.shape, meta={"seed": int(seed), "iter": int(it)})


def _true_values(mdp, thetas):
    v, _, _ = solve_batch(mdp, softmax_probs(thetas), 0.0)
    return v[:, mdp.start_state]


def train_exact_batch(mdp: TabularMdp, config: ExactTrainConfig, seeds, spec: GridworldSpec | None = None,
                      theta0: np.ndarray | None = None) -> list[TrainTrace]:
    """Exact gradient ascent for several seeds at once (vectorized over seeds).

    Step i uses entropy weight ``tau0 * tau_decay**i``. Every ``log_stride``
    iterations (and at the last one) a trace row is recorded; checkpoints every
    ``checkpoint_stride`` iterations plus the final parameters.
    """
    seeds = [int(s) for s in seeds]
    if theta0 is not None:
        thetas = np.repeat(np.asarray(theta0, dtype=float)[None], len(seeds), axis=0)
    else:
        thetas = np.stack([initial_theta(mdp, config, s) for s in seeds])
    traces = [TrainTrace(list(EXACT_COLUMNS), meta={"seed": s, "config": config.to_dict()}) for s in seeds]
    tau = float(config.tau0)
    for it in range(config.iters + 1):
        value_aug, grad = objective_and_gradient_batch(mdp, thetas, tau)
        if not (np.all(np.isfinite(value_aug)) and np.all(np.isfinite(grad))):
            bad = [seeds[i] for i in np.flatnonzero(~np.isfinite(value_aug))]
            raise TrainingDiverged(f"non-finite objective at iteration {it} (seeds {bad or seeds}); "
                                   f"tau={tau!r}, max|theta|={np.max(np.abs(thetas))!r}")
        last = it == config.iters
        if it % config.log_stride == 0 or last:
            value_true = value_aug if tau == 0 else _true_values(mdp, thetas)
            norms = np.sqrt(np.sum(grad**2, axis=(1, 2)))
            for b, tr in enumerate(traces):
                tr.rows.append({"iter": it, "objective_true": float(value_true[b]),
                                "objective_aug": float(value_aug[b]), "tau": tau,
                                "grad_norm": float(norms[b])})
        if it % config.checkpoint_stride == 0 or last:
            for b, tr in enumerate(traces):
                tr.checkpoints[it] = _pv(thetas[b], seeds[b], it)
        if last:
            break
        thetas = thetas + config.eta * grad
        tau *= config.tau_decay
    if spec is not None:
        ref = suboptimal_reference_value(mdp, spec)
        final = _true_values(mdp, thetas)
        for b, tr in enumerate(traces):
            cls = SolutionClass.OPTIMAL if final[b] > ref else SolutionClass.SUBOPTIMAL
            tr.classification = cls.value
            tr.meta["final_objective_true"] = float(final[b])
            tr.meta["reference_value"] = ref
    return traces


def train_exact(mdp: TabularMdp, config: ExactTrainConfig, spec: GridworldSpec | None = None,
                theta0: np.ndarray | None = None) -> TrainTrace:
    """Single-seed exact gradient ascent; see :func:`train_exact_batch`."""
    return train_exact_batch(mdp, config, [config.seed], spec, theta0)[0]


def run_seeds(mdp: TabularMdp, config: ExactTrainConfig, seeds, spec: GridworldSpec,
              jobs: int = 1, chunk: int = 50) -> tuple[list[TrainTrace], dict]:
    """Train one run per seed and summarize the suboptimal fraction.

    Seeds are processed in fixed-size chunks so results do not depend on ``jobs``.
    """
    seeds = [int(s) for s in seeds]
    chunks = [seeds[i:i + chunk] for i in range(0, len(seeds), chunk)]
    parts = parallel_map(lambda c: train_exact_batch(mdp, config, c, spec), chunks, jobs)
    traces = [tr for part in parts for tr in part]
    n_sub = sum(tr.classification == SolutionClass.SUBOPTIMAL.value for tr in traces)
    summary = {"n_seeds": len(traces), "n_suboptimal": int(n_sub),
               "fraction": n_sub / len(traces) if traces else 0.0}
    return traces, summary
