"""Command-line entry point: ``landprobe <command> [options]``.

Every command resolves its configuration from built-in defaults, then an
optional ``--config`` JSON document, then explicit flags, and writes the
resolved document to ``<out>/manifest.json``. A manifest is itself a valid
``--config`` document, so ``landprobe <command> --config manifest.json --out
other/`` reproduces a run.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .envs import PointMassEnv
from .exact_pg import ExactTrainConfig, run_seeds
from .interpolate import InterpolationConfig, curve_summary, interpolate, write_curves
from .limits import LimitsConfig, run_limits_experiment
from .mdp import ConfigError, GridworldSpec, build_gridworld
from .objectives import ANALYTIC, analytic_objective, gridworld_objective, pointmass_objective
from .policies import ParamVector, load_checkpoint
from .probe import ProbeConfig, probe, track_curvature, write_probe_outputs
from .reinforce import ReinforceConfig, train_reinforce
from .svg import line_svg
from .trace import fmt, load_trace_checkpoints

DEFAULTS = {
    "train-exact": {
        "seed": 0,
        "seeds": 200,
        "chunk": 50,
        "gridworld": GridworldSpec().to_dict(),
        "train": {**ExactTrainConfig().to_dict(), "log_stride": 100},
    },
    "train-reinforce": {
        "seed": 0,
        "env": PointMassEnv().to_dict(),
        "train": ReinforceConfig().to_dict(),
    },
    "probe": {
        "seed": 0,
        "objective": None,
        "theta": None,
        "alpha": 0.1,
        "dirs": 1000,
        "noise_reps": 30,
        "crn": True,
        "rollouts": 16,
        "sigma": None,
        "tau": 0.0,
        "mix": 0.0,
        "gamma": 0.99,
        "svg": True,
        "gridworld": GridworldSpec().to_dict(),
        "env": PointMassEnv().to_dict(),
    },
    "interpolate": {
        "seed": 0,
        "objective": None,
        "theta0": None,
        "theta1": None,
        "points": 101,
        "rollouts": 512,
        "gamma": 0.99,
        "overrides": [],
        "svg": True,
        "gridworld": GridworldSpec().to_dict(),
        "env": PointMassEnv().to_dict(),
    },
    "limits": {
        "seed": 0,
        "k1": 50,
        "k2": 50,
        "K": 1000,
        "alpha": 0.1,
        "epsilon": [0.1, 1.0, 10.0],
        "relative_epsilon": True,
    },
    "track-curvature": {
        "seed": 0,
        "trace": None,
        "stride": 1,
        "objective": None,
        "alpha": 0.1,
        "dirs": 100,
        "noise_reps": 30,
        "rollouts": 16,
        "percentile": 90.0,
        "sigma": None,
        "tau": 0.0,
        "mix": 0.0,
        "gamma": 0.99,
        "gridworld": None,
        "env": None,
    },
}


class UsageError(Exception):
    pass


# -- parsing helpers ----------------------------------------------------------------

def parse_theta(text: str) -> tuple[np.ndarray, ParamVector | None]:
    """A literal vector like ``"(-0.5,-2)"`` or the path of a checkpoint file."""
    s = text.strip()
    if re.fullmatch(r"[\(\[]?\s*[-+0-9.eE]+(\s*,\s*[-+0-9.eE]+)*\s*,?\s*[\)\]]?", s):
        try:
            vals = [float(x) for x in s.strip("()[] ").split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError(f"cannot parse theta {text!r}") from exc
        return np.array(vals), None
    path = Path(s)
    if not path.is_file():
        raise UsageError(f"theta {text!r} is neither a vector literal nor an existing checkpoint file")
    try:
        pv = load_checkpoint(path)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"malformed checkpoint {path}: {exc}") from exc
    return pv.values, pv


def parse_override(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"override {text!r}: expected key=value pairs")
        key, value = (x.strip() for x in part.split("=", 1))
        if key not in ("tau", "mix", "sigma"):
            raise UsageError(f"override {text!r}: unknown key {key!r} (use tau, mix or sigma)")
        try:
            out[key] = float(value)
        except ValueError as exc:
            raise UsageError(f"override {text!r}: {value!r} is not a number") from exc
    return out


def _set_path(doc: dict, dotted: str, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        doc = doc.setdefault(k, {})
    doc[keys[-1]] = value


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown configuration key {where + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("gridworld", "env"):
            _merge(base[k], v, f"{where}{k}.")
        else:
            base[k] = v
    return base


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
        if "command" in doc and "config" in doc:
            if doc["command"] != command:
                raise UsageError(f"manifest was written by {doc['command']!r}, not {command!r}")
            doc = doc["config"]
        _merge(cfg, doc)
    for dest, value in vars(args).items():
        if dest.startswith("cfg:") and value is not None:
            _set_path(cfg, dest[4:], value)
    return cfg


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write_manifest(out: Path, command: str, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(_dump({"command": command, "version": __version__, "config": cfg}))


def _load_vector(value, label: str) -> tuple[np.ndarray, ParamVector | None]:
    if value is None:
        return None, None
    if isinstance(value, str):
        return parse_theta(value)
    try:
        return np.asarray(value, dtype=float).ravel(), None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{label} must be a list of numbers or a checkpoint path") from exc


def _objective(cfg: dict, name: str | None, sigma: float | None, tau: float, mix: float, rollouts: int):
    if name is None:
        raise UsageError("no objective given")
    if name.startswith("analytic:"):
        key = name.split(":", 1)[1]
        if key not in ANALYTIC:
            raise UsageError(f"unknown analytic objective {key!r}; choose from {sorted(ANALYTIC)}")
        return analytic_objective(key)
    if name == "gridworld":
        spec = GridworldSpec.from_dict(cfg["gridworld"])
        return gridworld_objective(build_gridworld(spec), tau, mix)
    if name == "pointmass":
        env = PointMassEnv.from_dict(cfg["env"])
        return pointmass_objective(env, 0.5 if sigma is None else sigma, rollouts, cfg["gamma"])
    raise UsageError(f"unknown objective {name!r}; use analytic:<name>, gridworld or pointmass")


def _kind_objective(pv: ParamVector | None) -> str | None:
    if pv is None:
        return None
    return {"softmax_tabular": "gridworld", "gaussian_linear": "pointmass"}.get(pv.policy_kind)


# -- commands -----------------------------------------------------------------------

def cmd_train_exact(cfg: dict, out: Path, jobs: int) -> int:
    spec = GridworldSpec.from_dict(cfg["gridworld"])
    mdp = build_gridworld(spec)
    config = ExactTrainConfig(**cfg["train"])
    seeds = [cfg["seed"] + i for i in range(int(cfg["seeds"]))]
    if not seeds:
        raise ConfigError("seeds must be >= 1")
    traces, summary = run_seeds(mdp, config, seeds, spec, jobs=jobs, chunk=int(cfg["chunk"]))
    for s, tr in zip(seeds, traces):
        tr.meta["gridworld"] = spec.to_dict()
        tr.save(out / "runs" / f"seed_{s:06d}")
    summary["seeds"] = [{"seed": s, "classification": tr.classification,
                         "final_objective_true": tr.meta["final_objective_true"]} for s, tr in zip(seeds, traces)]
    summary["reference_value"] = traces[0].meta["reference_value"]
    (out / "summary.json").write_text(_dump(summary))
    print(f"suboptimal fraction {summary['fraction']:.4f} ({summary['n_suboptimal']}/{summary['n_seeds']})")
    return 0


def cmd_train_reinforce(cfg: dict, out: Path, jobs: int) -> int:
    env = PointMassEnv.from_dict(cfg["env"])
    config = ReinforceConfig(**{**cfg["train"], "seed": cfg["seed"]})
    trace = train_reinforce(env, config)
    trace.save(out)
    last = [r for r in trace.rows if r.get("eval_return_mean") is not None][-1]
    print(f"final deterministic return {last['eval_return_mean']:.4f}")
    return 0


def cmd_probe(cfg: dict, out: Path, jobs: int) -> int:
    theta, pv = _load_vector(cfg["theta"], "theta")
    sigma = cfg["sigma"] if cfg["sigma"] is not None else (pv.sigma if pv is not None and pv.sigma else None)
    # without --objective, a checkpoint names its own landscape
    name = cfg["objective"] or _kind_objective(pv) or "analytic:goodfellow"
    obj = _objective(cfg, name, sigma, cfg["tau"], cfg["mix"], cfg["rollouts"])
    if theta is None:
        theta = np.zeros(obj.dim)
    if theta.size != obj.dim:
        raise UsageError(f"theta has dimension {theta.size} but {obj.name} expects {obj.dim}")
    pc = ProbeConfig(alpha=cfg["alpha"], num_directions=cfg["dirs"], base_seed=cfg["seed"],
                     rollouts_per_eval=cfg["rollouts"] if obj.stochastic else None,
                     common_random_numbers=cfg["crn"], noise_reps=cfg["noise_reps"])
    report = probe(obj, theta, pc, jobs)
    write_probe_outputs(report, out, svg=cfg["svg"], extra={"objective": obj.name, "theta": [float(x) for x in theta]})
    flag = " with flat directions" if report.flat_directions else ""
    print(f"{report.classification}{flag}")
    return 0


def cmd_interpolate(cfg: dict, out: Path, jobs: int) -> int:
    t0, pv0 = _load_vector(cfg["theta0"], "theta0")
    t1, pv1 = _load_vector(cfg["theta1"], "theta1")
    if t0 is None or t1 is None:
        raise UsageError("interpolate needs two endpoints")
    if t0.size != t1.size:
        raise UsageError(f"endpoint dimensions differ: {t0.size} vs {t1.size}")
    name = cfg["objective"] or _kind_objective(pv0) or _kind_objective(pv1)
    overrides = cfg["overrides"] or [{}]
    curves, summaries = [], []
    for k, ov in enumerate(overrides):
        bad = set(ov) - {"tau", "mix", "sigma"}
        if bad:
            raise UsageError(f"unknown override keys {sorted(bad)}")
        sigma = ov.get("sigma", pv0.sigma if pv0 is not None else None)
        obj = _objective(cfg, name, sigma, ov.get("tau", 0.0), ov.get("mix", 0.0), cfg["rollouts"])
        if obj.dim != t0.size:
            raise UsageError(f"endpoints have dimension {t0.size} but {obj.name} expects {obj.dim}")
        ic = InterpolationConfig(num_points=cfg["points"], overrides=ov, rollouts=cfg["rollouts"], seed=cfg["seed"])
        label = ",".join(f"{key}={ov[key]}" for key in sorted(ov)) or "default"
        curve = interpolate(obj, t0, t1, ic, jobs, label=label)
        if name == "pointmass":
            det = _objective(cfg, name, 0.0, 0.0, 0.0, cfg["rollouts"])
            curve.extra["value_deterministic"] = interpolate(det, t0, t1, ic, jobs).value
        curves.append(curve)
        summaries.append(curve_summary(curve))
    write_curves(curves, out, svg=cfg["svg"])
    (out / "summary.json").write_text(_dump({"objective": name, "series": summaries}))
    for s in summaries:
        print(f"{s['label']}: start {s['value_start']:.6g} end {s['value_end']:.6g} "
              f"interior min {s['interior_min']:.6g} {s['monotone']['status']}")
    return 0


def cmd_limits(cfg: dict, out: Path, jobs: int) -> int:
    eps_list = cfg["epsilon"] if isinstance(cfg["epsilon"], list) else [cfg["epsilon"]]
    if not eps_list:
        raise UsageError("need at least one epsilon")
    reports = []
    for eps in eps_list:
        lc = LimitsConfig(k1=cfg["k1"], k2=cfg["k2"], epsilon=float(eps), relative_epsilon=cfg["relative_epsilon"],
                          K=cfg["K"], alpha=cfg["alpha"], seed=cfg["seed"])
        reports.append(run_limits_experiment(lc, jobs))
    first = reports[0]
    doc = {
        "config": cfg,
        "gradient_norm": first["gradient_norm"],
        "frac_random": first["frac_random"],
        "frac_sgd": first["frac_sgd"],
        "sweep": [{"epsilon": r["config"]["epsilon"], "epsilon_absolute": r["epsilon_absolute"],
                   "frac_sgd": r["frac_sgd"]} for r in reports],
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dump(doc))
    lines = ["method,epsilon,draw,delta_plus,delta_minus,detected"]
    for k, dp, dm, det in first["draws"]["random"]:
        lines.append(f"random,,{k},{fmt(dp)},{fmt(dm)},{int(det)}")
    for r in reports:
        e = fmt(r["config"]["epsilon"])
        for k, dp, dm, det in r["draws"]["noisy_gradient"]:
            lines.append(f"noisy_gradient,{e},{k},{fmt(dp)},{fmt(dm)},{int(det)}")
    (out / "draws.csv").write_text("\n".join(lines) + "\n")
    print(f"frac_random {doc['frac_random']:.4f}; " +
          "; ".join(f"frac_sgd(eps={s['epsilon']:g}) {s['frac_sgd']:.4f}" for s in doc["sweep"]))
    return 0


def cmd_track_curvature(cfg: dict, out: Path, jobs: int) -> int:
    if cfg["trace"] is None:
        raise UsageError("--trace is required")
    tdir = Path(cfg["trace"])
    if not tdir.is_dir():
        raise UsageError(f"trace directory not found: {tdir}")
    if cfg["stride"] < 1:
        raise UsageError("stride must be >= 1")
    try:
        ckpts = load_trace_checkpoints(tdir)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    meta = {}
    if (tdir / "trace.json").is_file():
        meta = json.loads((tdir / "trace.json").read_text()).get("meta", {})
    ctx = dict(cfg)
    if ctx["gridworld"] is None:
        ctx["gridworld"] = meta.get("gridworld", GridworldSpec().to_dict())
    if ctx["env"] is None:
        ctx["env"] = meta.get("env", PointMassEnv().to_dict())
    selected = ckpts[::cfg["stride"]]
    first = selected[0][1]
    name = cfg["objective"] or _kind_objective(first)
    sigma = cfg["sigma"] if cfg["sigma"] is not None else first.sigma
    obj = _objective(ctx, name, sigma, cfg["tau"], cfg["mix"], cfg["rollouts"])
    for it, pv in selected:
        if pv.values.size != obj.dim:
            raise UsageError(f"checkpoint {it} has dimension {pv.values.size}; {obj.name} expects {obj.dim}")
    pc = ProbeConfig(alpha=cfg["alpha"], num_directions=cfg["dirs"], base_seed=cfg["seed"],
                     rollouts_per_eval=cfg["rollouts"] if obj.stochastic else None, noise_reps=cfg["noise_reps"])
    rows = track_curvature([(it, pv.values) for it, pv in selected], obj, pc, jobs, cfg["percentile"])
    out.mkdir(parents=True, exist_ok=True)
    cols = ["checkpoint", "curvature", "delta_plus", "direction_index", "base_value"]
    lines = [",".join(cols)] + [",".join(fmt(r[c]) for c in cols) for r in rows]
    (out / "curvature.csv").write_text("\n".join(lines) + "\n")
    c = np.array([r["curvature"] for r in rows])
    summary = {"objective": obj.name, "num_checkpoints": len(rows), "curvature_mean": float(c.mean()),
               "curvature_std": float(c.std(ddof=1)) if len(c) > 1 else 0.0}
    (out / "summary.json").write_text(_dump(summary))
    (out / "curvature.svg").write_text(line_svg({"curvature": ([r["checkpoint"] for r in rows], c)},
                                                title="curvature along the 90th-percentile direction",
                                                xlabel="iteration", ylabel="curvature projection"))
    print(f"{len(rows)} checkpoints; curvature std {summary['curvature_std']:.6g}")
    return 0


COMMANDS = {
    "train-exact": cmd_train_exact,
    "train-reinforce": cmd_train_reinforce,
    "probe": cmd_probe,
    "interpolate": cmd_interpolate,
    "limits": cmd_limits,
    "track-curvature": cmd_track_curvature,
}


# -- argument parser ------------------------------------------------------------------

def _opt(p, flag, key, **kw):
    p.add_argument(flag, dest="cfg:" + key, default=None, **kw)


def _bool_opt(p, flag, key, help_text):
    p.add_argument(flag, dest="cfg:" + key, default=None, action=argparse.BooleanOptionalAction, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landprobe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"landprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config document or a manifest.json from an earlier run")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker threads (outputs do not depend on it)")
        _opt(p, "--seed", "seed", type=int, help="global seed")

    p = sub.add_parser("train-exact", help="exact policy-gradient ascent on the gridworld, many seeds")
    common(p)
    _opt(p, "--seeds", "seeds", type=int, help="number of seeds (seed, seed+1, ...)")
    _opt(p, "--eta", "train.eta", type=float)
    _opt(p, "--tau0", "train.tau0", type=float, help="initial entropy weight")
    _opt(p, "--tau-decay", "train.tau_decay", type=float)
    _opt(p, "--iters", "train.iters", type=int)
    _opt(p, "--init-scale", "train.init_scale", type=float)
    _opt(p, "--checkpoint-stride", "train.checkpoint_stride", type=int)
    _opt(p, "--log-stride", "train.log_stride", type=int)

    p = sub.add_parser("train-reinforce", help="REINFORCE on the point-mass environment")
    common(p)
    _opt(p, "--sigma", "train.sigma", type=float)
    _opt(p, "--eta", "train.eta", type=float)
    _opt(p, "--iters", "train.iters", type=int)
    _opt(p, "--batch-size", "train.batch_size", type=int)
    _opt(p, "--gamma", "train.gamma", type=float)
    _opt(p, "--baseline", "train.baseline", choices=["per_timestep", "batch", "none"])
    _opt(p, "--eval-stride", "train.eval_stride", type=int)
    _opt(p, "--eval-episodes", "train.eval_episodes", type=int)
    _opt(p, "--checkpoint-stride", "train.checkpoint_stride", type=int)

    p = sub.add_parser("probe", help="random symmetric perturbations around a point")
    common(p)
    _opt(p, "--objective", "objective", help="analytic:<name>, gridworld or pointmass (default: from checkpoint, else analytic:goodfellow)")
    _opt(p, "--theta", "theta", help='checkpoint path or literal such as "(-0.5,-2)"')
    _opt(p, "--alpha", "alpha", type=float)
    _opt(p, "--dirs", "dirs", type=int, help="number of random directions K")
    _opt(p, "--noise-reps", "noise_reps", type=int)
    _opt(p, "--rollouts", "rollouts", type=int)
    _opt(p, "--sigma", "sigma", type=float)
    _opt(p, "--tau", "tau", type=float)
    _opt(p, "--mix", "mix", type=float)
    _bool_opt(p, "--crn", "crn", "common random numbers for stochastic objectives")
    _bool_opt(p, "--svg", "svg", "write SVG plots")

    p = sub.add_parser("interpolate", help="1-D slice between two parameter vectors")
    common(p)
    p.add_argument("theta0", nargs="?", help="first endpoint (checkpoint or literal)")
    p.add_argument("theta1", nargs="?", help="second endpoint (checkpoint or literal)")
    _opt(p, "--objective", "objective", help="gridworld, pointmass or analytic:<name> (default: from checkpoint)")
    _opt(p, "--points", "points", type=int)
    _opt(p, "--rollouts", "rollouts", type=int)
    p.add_argument("--override", action="append", default=None,
                   help="series overrides such as tau=0.1,mix=0.1 or sigma=0.3; repeatable")
    _bool_opt(p, "--svg", "svg", "write SVG plots")

    p = sub.add_parser("limits", help="ascent detection on a separable quadratic")
    common(p)
    _opt(p, "--k1", "k1", type=int)
    _opt(p, "--k2", "k2", type=int)
    _opt(p, "--K", "K", type=int, help="number of draws per method")
    _opt(p, "--alpha", "alpha", type=float)
    _opt(p, "--epsilon", "epsilon", type=float, nargs="+", help="noise scales for the noisy-gradient method")
    _bool_opt(p, "--relative-epsilon", "relative_epsilon", "epsilon is a multiple of the gradient norm")

    p = sub.add_parser("track-curvature", help="curvature along a robust improvement direction per checkpoint")
    common(p)
    _opt(p, "--trace", "trace", help="trace directory written by train-exact or train-reinforce")
    _opt(p, "--stride", "stride", type=int, help="use every n-th checkpoint")
    _opt(p, "--objective", "objective")
    _opt(p, "--alpha", "alpha", type=float)
    _opt(p, "--dirs", "dirs", type=int)
    _opt(p, "--noise-reps", "noise_reps", type=int)
    _opt(p, "--rollouts", "rollouts", type=int)
    _opt(p, "--percentile", "percentile", type=float)
    _opt(p, "--sigma", "sigma", type=float)
    _opt(p, "--tau", "tau", type=float)
    _opt(p, "--mix", "mix", type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "interpolate":
            if args.theta0 is not None:
                setattr(args, "cfg:theta0", args.theta0)
            if args.theta1 is not None:
                setattr(args, "cfg:theta1", args.theta1)
            if args.override is not None:
                setattr(args, "cfg:overrides", [parse_override(o) for o in args.override])
        cfg = resolve_config(args.command, args)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        out = Path(args.out)
        _write_manifest(out, args.command, cfg)
        return COMMANDS[args.command](cfg, out, args.jobs)
    except (UsageError, ConfigError) as exc:
        print(f"landprobe {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (TypeError, KeyError) as exc:
        print(f"landprobe {args.command}: configuration error: {exc!r}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: divergence, singular systems, I/O
        print(f"landprobe {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
