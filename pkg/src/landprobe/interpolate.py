"""1-D slices ``O((1 - c) theta0 + c theta1)`` between two parameter vectors."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mdp import ConfigError
from .parallel import derive_seed, parallel_map
from .probe import ObjectiveHandle
from .svg import line_svg
from .trace import fmt

CURVE_COLUMNS = ["coefficient", "value", "value_stderr"]


@dataclass
class InterpolationConfig:
    num_points: int = 101
    overrides: dict = field(default_factory=dict)
    rollouts: int = 512
    seed: int = 0
    chunk_size: int = 8

    def __post_init__(self):
        if self.num_points < 2:
            raise ConfigError("num_points must be >= 2")
        if self.rollouts < 1 or self.chunk_size < 1:
            raise ConfigError("rollouts and chunk_size must be >= 1")

    def coefficients(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.num_points)


@dataclass
class Curve:
    coefficient: np.ndarray
    value: np.ndarray
    value_stderr: np.ndarray
    label: str = ""
    overrides: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def n_nonfinite(self) -> int:
        return int(np.sum(~np.isfinite(self.value)))

    def write_csv(self, path) -> None:
        cols = CURVE_COLUMNS + sorted(self.extra)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for i in range(len(self.coefficient)):
                row = [self.coefficient[i], self.value[i], self.value_stderr[i]]
                row += [self.extra[k][i] for k in sorted(self.extra)]
                w.writerow([fmt(x) for x in row])


def interpolate(objective: ObjectiveHandle, theta0, theta1, config: InterpolationConfig,
                jobs: int = 1, label: str = "") -> Curve:
    """Evaluate ``objective`` on the segment from ``theta0`` to ``theta1``.

    Stochastic objectives use one evaluation seed for every grid point, so
    neighbouring points share their rollout randomness and the curve is smooth
    in the coefficient. Non-finite values are kept and counted.
    """
    t0 = np.asarray(theta0, dtype=float).ravel()
    t1 = np.asarray(theta1, dtype=float).ravel()
    if t0.shape != t1.shape:
        raise ValueError(f"endpoint dimensions differ: {t0.size} vs {t1.size}")
    if t0.size != objective.dim:
        raise ValueError(f"endpoints have dimension {t0.size}, objective expects {objective.dim}")
    coef = config.coefficients()
    thetas = (1.0 - coef)[:, None] * t0[None] + coef[:, None] * t1[None]
    seed = derive_seed(config.seed) if objective.stochastic else 0
    seeds = np.full(len(coef), seed, dtype=np.int64)
    chunks = [slice(i, i + config.chunk_size) for i in range(0, len(coef), config.chunk_size)]

    if objective.evaluate_samples is not None:
        def run(sl):
            samples = np.asarray(objective.evaluate_samples(thetas[sl], seeds[sl]), dtype=float)
            mean = objective.many(thetas[sl], seeds[sl])
            R = samples.shape[1]
            se = samples.std(axis=1, ddof=1) / np.sqrt(R) if R > 1 else np.zeros(len(mean))
            return np.stack([mean, se])
    else:
        def run(sl):
            mean = objective.many(thetas[sl], seeds[sl])
            return np.stack([mean, np.zeros(len(mean))])

    parts = parallel_map(run, chunks, jobs)
    out = np.concatenate(parts, axis=1)
    return Curve(coef, out[0], out[1], label=label, overrides=dict(config.overrides))


def monotone_path_check(curve, band: float | None = None) -> dict:
    """Is the curve non-decreasing up to the noise band?

    ``band`` defaults to twice the largest per-point standard error (zero for
    exact objectives). ``max_dip`` is the largest single-step decrease.
    """
    values = np.asarray(curve.value if isinstance(curve, Curve) else curve, dtype=float)
    if band is None:
        band = 2.0 * float(np.nanmax(curve.value_stderr)) if isinstance(curve, Curve) else 0.0
    drops = values[:-1] - values[1:]
    max_dip = float(max(np.nanmax(drops), 0.0)) if drops.size else 0.0
    monotone = bool(np.all(drops <= band)) if drops.size else True
    return {"status": "Monotone" if monotone else "NonMonotone", "max_dip": max_dip, "band": float(band)}


def curve_summary(curve: Curve) -> dict:
    v = curve.value
    interior = v[1:-1] if len(v) > 2 else v
    return {
        "label": curve.label,
        "overrides": curve.overrides,
        "num_points": int(len(v)),
        "n_nonfinite": curve.n_nonfinite,
        "value_start": float(v[0]),
        "value_end": float(v[-1]),
        "interior_min": float(np.nanmin(interior)),
        "interior_argmin": float(curve.coefficient[1:-1][np.nanargmin(interior)]) if len(v) > 2 else 0.0,
        "monotone": monotone_path_check(curve),
    }


def write_curves(curves: list[Curve], out_dir, svg: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, c in enumerate(curves):
        p = out / f"curve_{k:02d}.csv"
        c.write_csv(p)
        paths.append(p)
    if svg:
        (out / "curves.svg").write_text(line_svg(
            {c.label or f"series {k}": (c.coefficient, c.value) for k, c in enumerate(curves)},
            title="linear interpolation", xlabel="interpolation coefficient", ylabel="objective"))
    return paths
