"""Detecting ascent directions: random perturbations vs noisy gradients.

The objective is the separable quadratic
``O(theta) = -sum_{i<k1} theta_i^2 - sum_{i>=k1} (theta_i - 2)^2`` evaluated
around ``theta = 0``, where only the last ``k2`` coordinates can improve it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .mdp import ConfigError
from .parallel import LIMITS, parallel_map, seed_stream
from .trace import fmt

RANDOM, NOISY_GRADIENT = 0, 1
DETECT_TOL = 1e-12


@dataclass
class LimitsConfig:
    k1: int = 50
    k2: int = 50
    epsilon: float = 0.1
    relative_epsilon: bool = True
    K: int = 1000
    alpha: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0 or self.k1 + self.k2 < 1:
            raise ConfigError("k1, k2 must be non-negative with k1 + k2 >= 1")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if self.K < 1 or self.alpha <= 0:
            raise ConfigError("K must be >= 1 and alpha positive")

    @property
    def dim(self) -> int:
        return self.k1 + self.k2

    def to_dict(self) -> dict:
        return asdict(self)


def true_gradient(k1: int, k2: int) -> np.ndarray:
    """Gradient at zero: 0 on the first ``k1`` coordinates, +4 on the rest."""
    return np.concatenate([np.zeros(k1), np.full(k2, 4.0)])


def limits_objective(theta, k1: int) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(-np.sum(theta[:k1] ** 2) - np.sum((theta[k1:] - 2.0) ** 2))


def _deltas(step: np.ndarray, k1: int) -> float:
    """``O(step) - O(0)`` summed coordinate by coordinate (no cancellation against O(0))."""
    a, b = step[:k1], step[k1:]
    return float(-np.sum(a * a) + np.sum(b * (4.0 - b)))


def _draw(config: LimitsConfig, method: int, k: int, grad: np.ndarray, eps: float) -> np.ndarray:
    # Ascent coordinates are drawn first so that, for a fixed seed, growing k1
    # only appends coordinates to the same draw.
    rng = seed_stream(config.seed, LIMITS, method, k)
    z2 = rng.standard_normal(config.k2)
    z1 = rng.standard_normal(config.k1)
    z = np.concatenate([z1, z2])
    if method == NOISY_GRADIENT:
        z = grad + eps * z
    norm = np.linalg.norm(z)
    if norm == 0:
        # no gradient and no noise: fall back to an isotropic draw
        z = np.concatenate([z1, z2])
        norm = np.linalg.norm(z)
    return z / norm


def _run_chunk(config: LimitsConfig, method: int, ks, grad, eps):
    rows = []
    for k in ks:
        d = _draw(config, method, k, grad, eps)
        dp = _deltas(config.alpha * d, config.k1)
        dm = _deltas(-config.alpha * d, config.k1)
        rows.append((k, dp, dm, dp > DETECT_TOL or dm > DETECT_TOL))
    return rows


def run_limits_experiment(config: LimitsConfig, jobs: int = 1, chunk: int = 100) -> dict:
    """Fraction of random and noisy-gradient directions that reveal an ascent.

    A draw detects an ascent when ``O(alpha d) - O(0)`` or ``O(-alpha d) - O(0)``
    exceeds 1e-12. Noisy gradients are the true gradient plus Gaussian noise of
    scale ``epsilon`` per coordinate (times the gradient norm when
    ``relative_epsilon``), normalized to unit length.
    """
    grad = true_gradient(config.k1, config.k2)
    gnorm = float(np.linalg.norm(grad))
    eps = config.epsilon * gnorm if config.relative_epsilon else config.epsilon
    blocks = [range(i, min(i + chunk, config.K)) for i in range(0, config.K, chunk)]
    draws = {}
    for method, name in ((RANDOM, "random"), (NOISY_GRADIENT, "noisy_gradient")):
        parts = parallel_map(lambda ks: _run_chunk(config, method, ks, grad, eps), blocks, jobs)
        draws[name] = [r for p in parts for r in p]
    frac = {name: float(np.mean([r[3] for r in rows])) for name, rows in draws.items()}
    return {
        "config": config.to_dict(),
        "gradient_norm": gnorm,
        "epsilon_absolute": eps,
        "frac_random": frac["random"],
        "frac_sgd": frac["noisy_gradient"],
        "draws": draws,
    }


def write_limits_outputs(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "draws.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "draw", "delta_plus", "delta_minus", "detected"])
        for name, rows in report["draws"].items():
            for k, dp, dm, det in rows:
                w.writerow([name, k, fmt(dp), fmt(dm), int(det)])
    doc = {k: v for k, v in report.items() if k != "draws"}
    (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
