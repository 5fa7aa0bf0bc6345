"""Random symmetric perturbations of an objective around a point.

For unit directions ``d`` the objective is evaluated at ``theta0 +/- alpha d``.
The pair of changes ``(dplus, dminus)`` gives a gradient projection
``(dplus - dminus) / (2 alpha)`` and a curvature projection
``(dplus + dminus) / alpha**2``; both are exact on quadratics.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .mdp import ConfigError
from .parallel import NOISE_BAND, PROBE, derive_seed, parallel_map, seed_stream
from .svg import histogram_svg, scatter_svg
from .trace import fmt


@dataclass
class ObjectiveHandle:
    """An objective ``O(theta, seed) -> float``.

    Deterministic objectives ignore the seed. ``evaluate_batch`` (optional) maps
    ``(thetas (B, n), seeds (B,))`` to values (B,) and must agree bitwise with
    repeated ``evaluate`` calls.
    """

    dim: int
    evaluate: Callable[[np.ndarray, int], float]
    stochastic: bool = False
    evaluate_batch: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    cost_hint: float = 1.0
    # (thetas (B, n), seeds (B,)) -> per-rollout values (B, R); lets callers report a standard error
    evaluate_samples: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = "objective"

    def __call__(self, theta, seed: int = 0) -> float:
        return float(self.evaluate(np.asarray(theta, dtype=float), seed))

    def many(self, thetas: np.ndarray, seeds) -> np.ndarray:
        if self.evaluate_batch is not None:
            return np.asarray(self.evaluate_batch(thetas, np.asarray(seeds)), dtype=float)
        return np.array([self.evaluate(t, int(s)) for t, s in zip(thetas, seeds)], dtype=float)


@dataclass
class ProbeConfig:
    alpha: float = 0.1
    num_directions: int = 1000
    base_seed: int = 0
    rollouts_per_eval: int | None = None
    common_random_numbers: bool = True
    noise_reps: int = 30
    chunk_size: int = 64

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.num_directions < 1:
            raise ConfigError("num_directions must be >= 1")
        if self.noise_reps < 1 or self.chunk_size < 1:
            raise ConfigError("noise_reps and chunk_size must be >= 1")


class PointClass(str, enum.Enum):
    LOCAL_MAXIMUM = "LocalMaximum"
    LOCAL_MINIMUM = "LocalMinimum"
    SADDLE = "Saddle"
    LINEAR = "Linear"
    FLAT = "Flat"
    MIXED = "Mixed"


@dataclass
class ClassifyTolerances:
    """Thresholds for :func:`classify_point`.

    ``linear_frac``/``flat_frac`` are the fractions of directions that must
    satisfy the linear/flat rules. A direction has near-zero curvature when
    ``|c_d|`` is within the noise band or below ``flat_curvature_rel`` times the
    largest ``|c_d|``; the flat-directions flag needs ``flat_flag_frac`` of them.
    """

    linear_frac: float = 0.95
    flat_frac: float = 0.95
    atol: float = 1e-12
    flat_curvature_rel: float = 0.05
    flat_flag_frac: float = 0.05


@dataclass(frozen=True)
class PerturbationSample:
    direction_index: int
    delta_plus: float
    delta_minus: float
    alpha: float

    @property
    def grad_projection(self) -> float:
        return (self.delta_plus - self.delta_minus) / (2 * self.alpha)

    @property
    def curvature_projection(self) -> float:
        return (self.delta_plus + self.delta_minus) / self.alpha**2


@dataclass
class ProbeReport:
    alpha: float
    base_value: float
    direction_index: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    noise_band: tuple[float, float]
    noise_std: float
    directions: np.ndarray | None = None
    n_nonfinite: int = 0
    classification: str | None = None
    flat_directions: bool = False
    spectrum: dict = field(default_factory=dict)
    fractions: dict = field(default_factory=dict)

    @property
    def grad_proj(self) -> np.ndarray:
        return (self.delta_plus - self.delta_minus) / (2 * self.alpha)

    @property
    def curvature_proj(self) -> np.ndarray:
        return (self.delta_plus + self.delta_minus) / self.alpha**2

    @property
    def samples(self) -> list[PerturbationSample]:
        return [PerturbationSample(int(k), float(p), float(m), self.alpha)
                for k, p, m in zip(self.direction_index, self.delta_plus, self.delta_minus)]

    @property
    def band_halfwidth(self) -> float:
        """Half-width of the noise band expressed as a tolerance on changes."""
        return 2.0 * self.noise_std

    def summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "base_value": self.base_value,
            "num_samples": int(len(self.delta_plus)),
            "n_nonfinite": self.n_nonfinite,
            "noise_band": list(self.noise_band),
            "noise_std": self.noise_std,
            "classification": self.classification,
            "flat_directions": self.flat_directions,
            "fractions": self.fractions,
            "spectrum": self.spectrum,
        }


def sample_unit_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform direction on the unit sphere in R^n (normalized Gaussian)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    while True:
        z = rng.standard_normal(n)
        norm = np.linalg.norm(z)
        if norm > 0:
            return z / norm


def probe_directions(base_seed: int, n: int, count: int) -> np.ndarray:
    """Direction k comes from its own stream ``(base_seed, PROBE, k)``."""
    return np.stack([sample_unit_direction(seed_stream(base_seed, PROBE, k), n) for k in range(count)])


def _evaluate_chunks(objective: ObjectiveHandle, thetas: np.ndarray, seeds: np.ndarray, chunk: int, jobs: int):
    idx = [slice(i, i + chunk) for i in range(0, len(thetas), chunk)]
    parts = parallel_map(lambda sl: objective.many(thetas[sl], seeds[sl]), idx, jobs)
    return np.concatenate(parts) if parts else np.empty(0)


def probe(objective: ObjectiveHandle, theta0, config: ProbeConfig, jobs: int = 1,
          tolerances: ClassifyTolerances | None = None) -> ProbeReport:
    """Perturb ``objective`` around ``theta0`` along ``num_directions`` random directions.

    Stochastic objectives with common random numbers evaluate ``O(theta0)``,
    ``O(theta+)`` and ``O(theta-)`` for one direction under the same seed. The
    noise band is mean +/- 2 std of ``noise_reps`` evaluations of ``O(theta0)``.
    """
    theta0 = np.asarray(theta0, dtype=float).ravel()
    if theta0.size != objective.dim:
        raise ValueError(f"theta has dimension {theta0.size}, objective expects {objective.dim}")
    K, a, seed = config.num_directions, config.alpha, config.base_seed
    D = probe_directions(seed, objective.dim, K)

    if objective.stochastic:
        band_seeds = np.array([derive_seed(seed, NOISE_BAND, m) for m in range(config.noise_reps)])
        reps = _evaluate_chunks(objective, np.repeat(theta0[None], len(band_seeds), 0), band_seeds,
                                config.chunk_size, jobs)
        reps = reps[np.isfinite(reps)]
        base_value = float(reps.mean()) if reps.size else float("nan")
        noise_std = float(reps.std(ddof=1)) if reps.size > 1 else 0.0
        if config.common_random_numbers:
            s = np.array([derive_seed(seed, PROBE, k) for k in range(K)])
            sp = sm = s0 = s
        else:
            s0, sp, sm = (np.array([derive_seed(seed, PROBE, k, j) for k in range(K)]) for j in range(3))
        thetas = np.concatenate([np.repeat(theta0[None], K, 0), theta0 + a * D, theta0 - a * D])
        vals = _evaluate_chunks(objective, thetas, np.concatenate([s0, sp, sm]), config.chunk_size, jobs)
        v0, vp, vm = vals[:K], vals[K:2 * K], vals[2 * K:]
    else:
        base_value = float(objective(theta0, 0))
        noise_std = 0.0
        thetas = np.concatenate([theta0 + a * D, theta0 - a * D])
        vals = _evaluate_chunks(objective, thetas, np.zeros(2 * K, dtype=np.int64), config.chunk_size, jobs)
        v0, vp, vm = np.full(K, base_value), vals[:K], vals[K:]

    dp, dm = vp - v0, vm - v0
    ok = np.isfinite(dp) & np.isfinite(dm)
    report = ProbeReport(
        alpha=a, base_value=base_value, direction_index=np.flatnonzero(ok),
        delta_plus=dp[ok], delta_minus=dm[ok],
        noise_band=(base_value - 2 * noise_std, base_value + 2 * noise_std), noise_std=noise_std,
        directions=D[ok], n_nonfinite=int((~ok).sum()),
    )
    _annotate(report, tolerances or ClassifyTolerances())
    return report


def _annotate(report: ProbeReport, tol: ClassifyTolerances) -> None:
    point_class, flag = classify_point(report, tol)
    report.classification = point_class.value
    report.flat_directions = flag
    if len(report.delta_plus) >= 2:
        report.spectrum = curvature_spectrum(report)
    eps = report.band_halfwidth + tol.atol * max(1.0, abs(report.base_value))
    n = max(len(report.delta_plus), 1)
    report.fractions = {
        "plus_above_band": float(np.sum(report.delta_plus > eps) / n),
        "minus_above_band": float(np.sum(report.delta_minus > eps) / n),
        "any_above_band": float(np.sum((report.delta_plus > eps) | (report.delta_minus > eps)) / n),
        "negative_curvature": float(np.sum(report.delta_plus + report.delta_minus < -eps) / n),
    }


def classify_point(report: ProbeReport, tolerances: ClassifyTolerances | None = None) -> tuple[PointClass, bool]:
    """Classify the probed point and report whether it has flat directions.

    Rules, checked in order with changes compared against the noise band:
    both changes inside the band for ``flat_frac`` of directions -> Flat; no
    change above the band -> LocalMaximum; no change below -> LocalMinimum;
    ``dplus ~ -dminus`` for ``linear_frac`` of directions -> Linear; same-sign
    pairs of both polarities -> Saddle; anything else -> Mixed. Directions
    whose changes stay inside the band count as flat directions of an optimum.
    """
    tol = tolerances or ClassifyTolerances()
    dp, dm = report.delta_plus, report.delta_minus
    if dp.size == 0:
        return PointClass.MIXED, False
    eps = report.band_halfwidth + tol.atol * max(1.0, abs(report.base_value))
    above_p, above_m = dp > eps, dm > eps
    below_p, below_m = dp < -eps, dm < -eps
    csum = dp + dm
    near_zero_curv = (np.abs(csum) <= eps) | (np.abs(csum) <= tol.flat_curvature_rel * np.max(np.abs(csum)))
    flag = bool(np.mean(near_zero_curv) >= tol.flat_flag_frac)

    if np.mean(~(above_p | below_p) & ~(above_m | below_m)) >= tol.flat_frac:
        return PointClass.FLAT, False
    if not np.any(above_p | above_m):
        return PointClass.LOCAL_MAXIMUM, flag
    if not np.any(below_p | below_m):
        return PointClass.LOCAL_MINIMUM, flag
    if np.mean(np.abs(csum) <= eps) >= tol.linear_frac:
        return PointClass.LINEAR, False
    if np.any(above_p & above_m) and np.any(below_p & below_m):
        return PointClass.SADDLE, False
    return PointClass.MIXED, False


def curvature_spectrum(report: ProbeReport, bins: int = 30) -> dict:
    """Histogram, extremes and quantiles of the curvature projections."""
    c = report.curvature_proj
    if c.size < 2:
        raise ValueError("a spectrum needs at least two directions")
    lo, hi = float(c.min()), float(c.max())
    if hi - lo <= 1e-9 * max(1.0, abs(lo), abs(hi)):
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(c, bins=bins, range=(lo, hi))
    qs = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95]
    return {
        "min": float(c.min()),
        "max": float(c.max()),
        "mean": float(c.mean()),
        "quantiles": {f"q{int(q * 100):02d}": float(np.quantile(c, q)) for q in qs},
        "histogram": {"edges": [float(e) for e in edges], "counts": [int(n) for n in counts]},
    }


def track_curvature(checkpoints, objective: ObjectiveHandle, config: ProbeConfig, jobs: int = 1,
                    percentile: float = 90.0) -> list[dict]:
    """Curvature along a robust direction of improvement at each checkpoint.

    Each checkpoint is probed with its own direction set; the direction whose
    ``dplus`` is closest to the given percentile of all ``dplus`` values is
    selected and its curvature projection reported.
    """
    checkpoints = list(checkpoints)
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    out = []
    for i, item in enumerate(checkpoints):
        label, theta = item if isinstance(item, tuple) else (i, item)
        cfg = ProbeConfig(**{**asdict(config), "base_seed": derive_seed(config.base_seed, i)})
        rep = probe(objective, theta, cfg, jobs)
        target = np.percentile(rep.delta_plus, percentile)
        k = int(np.argmin(np.abs(rep.delta_plus - target)))
        out.append({
            "checkpoint": label,
            "curvature": float(rep.curvature_proj[k]),
            "delta_plus": float(rep.delta_plus[k]),
            "direction_index": int(rep.direction_index[k]),
            "base_value": rep.base_value,
        })
    return out


SAMPLE_COLUMNS = ["direction_index", "delta_plus", "delta_minus", "grad_proj", "curvature_proj"]


def write_probe_outputs(report: ProbeReport, out_dir, svg: bool = True, extra: dict | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for row in zip(report.direction_index, report.delta_plus, report.delta_minus,
                       report.grad_proj, report.curvature_proj):
            w.writerow([fmt(x) for x in row])
    summary = report.summary()
    if extra:
        summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    if svg:
        (out / "scatter.svg").write_text(scatter_svg(
            report.delta_minus, report.delta_plus, title=f"perturbations (alpha={report.alpha})",
            xlabel="change at theta - alpha d", ylabel="change at theta + alpha d", diagonals=True))
        if len(report.delta_plus) >= 2:
            (out / "curvature_hist.svg").write_text(histogram_svg(
                report.curvature_proj, title="curvature projections", xlabel="(d+ + d-) / alpha^2"))
