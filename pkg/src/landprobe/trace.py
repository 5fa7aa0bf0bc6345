"""Training traces and their on-disk layout (CSV + checkpoint JSON files)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .policies import ParamVector, load_checkpoint, save_checkpoint

EXACT_COLUMNS = ["iter", "objective_true", "objective_aug", "tau", "grad_norm"]
REINFORCE_COLUMNS = EXACT_COLUMNS + ["sigma", "eval_return_mean", "eval_return_std"]


def fmt(x) -> str:
    """Shortest round-trip text for a number; blanks for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class TrainTrace:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    checkpoints: dict[int, ParamVector] = field(default_factory=dict)
    classification: str | None = None
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r.get(name) is None else r[name] for r in self.rows], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([fmt(row.get(c)) for c in self.columns])

    def save(self, directory) -> Path:
        """Write ``trace.csv``, ``checkpoints/ckpt_<iter>.json`` and ``trace.json``."""
        d = Path(directory)
        (d / "checkpoints").mkdir(parents=True, exist_ok=True)
        self.write_csv(d / "trace.csv")
        for it, pv in sorted(self.checkpoints.items()):
            save_checkpoint(d / "checkpoints" / f"ckpt_{it:07d}.json", pv)
        info = {"classification": self.classification, "meta": self.meta,
                "checkpoint_iters": sorted(self.checkpoints)}
        (d / "trace.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n")
        return d


def load_trace_checkpoints(directory) -> list[tuple[int, ParamVector]]:
    """Checkpoints stored in a saved trace directory, ordered by iteration."""
    d = Path(directory) / "checkpoints"
    if not d.is_dir():
        raise FileNotFoundError(f"no checkpoints directory under {directory}")
    out = []
    for p in sorted(d.glob("ckpt_*.json")):
        out.append((int(p.stem.split("_")[1]), load_checkpoint(p)))
    if not out:
        raise FileNotFoundError(f"no checkpoints found in {d}")
    return out
