"""Finite MDPs, the two-reward Gridworld and exact linear-system evaluation."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIONS = ("up", "down", "left", "right")
_MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}


class ConfigError(ValueError):
    """Invalid user-supplied configuration."""


class TrainingDiverged(RuntimeError):
    """Parameters or objective values became non-finite or unbounded."""


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class TabularMdp:
    """Finite MDP with transition tensor ``P[s, a, s']`` and rewards ``R[s, a]``."""

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    start_state: int = 0
    # Indices of absorbing states with no further reward; informational only.
    terminal_states: tuple[int, ...] = ()

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ConfigError(f"transition must be S x A x S, got {P.shape}")
        if R.shape != P.shape[:2]:
            raise ConfigError(f"reward must be S x A = {P.shape[:2]}, got {R.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > 1e-12:
            raise ConfigError("each transition row P[s, a, :] must be a distribution")
        if not np.all(np.isfinite(R)):
            raise ConfigError("rewards must be finite")
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError(f"discount must lie in [0, 1), got {self.discount}")
        if not 0 <= self.start_state < P.shape[0]:
            raise ConfigError(f"start_state {self.start_state} out of range")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]


@dataclass
class GridworldSpec:
    """Deterministic grid with absorbing reward cells.

    ``rewards`` is a list of ``(cell, value)`` or ``(cell, value, role)`` with
    role ``"sub"`` or ``"opt"``. Cells are ``(row, col)``; row 0 is the top.
    """

    width: int = 5
    height: int = 5
    start: tuple[int, int] = (0, 0)
    rewards: list = field(default_factory=lambda: [((4, 0), 0.7, "sub"), ((0, 4), 1.0, "opt")])
    step_reward: float = 0.0
    gamma: float = 0.9

    def __post_init__(self):
        self.start = tuple(int(v) for v in self.start)
        norm = []
        for entry in self.rewards:
            cell, value = entry[0], entry[1]
            role = entry[2] if len(entry) > 2 else None
            norm.append((tuple(int(v) for v in cell), float(value), role))
        self.rewards = norm
        self.validate()

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("grid dimensions must be positive")
        for cell in [self.start] + [c for c, _, _ in self.rewards]:
            if not self.inside(cell):
                raise ConfigError(f"cell {cell} lies outside the {self.height}x{self.width} grid")
        cells = [c for c, _, _ in self.rewards]
        if len(set(cells)) != len(cells):
            raise ConfigError("reward cells must be distinct")
        for _, _, role in self.rewards:
            if role not in (None, "sub", "opt"):
                raise ConfigError(f"unknown reward role {role!r}")

    def inside(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def index(self, cell) -> int:
        return cell[0] * self.width + cell[1]

    @property
    def sink_state(self) -> int:
        return self.width * self.height

    def suboptimal_cell(self) -> tuple[int, int]:
        """Cell designated as the suboptimal reward."""
        tagged = [c for c, _, role in self.rewards if role == "sub"]
        if tagged:
            return tagged[0]
        values = sorted({v for _, v, _ in self.rewards})
        if len(self.rewards) < 2 or len(values) < 2:
            raise ConfigError("no suboptimal reward designated: need two reward cells with distinct values or a 'sub' role")
        return min(self.rewards, key=lambda e: e[1])[0]

    @classmethod
    def from_dict(cls, doc: dict) -> "GridworldSpec":
        try:
            rewards = [
                (tuple(r["cell"]), r["value"], r.get("role")) for r in doc.get("rewards", [])
            ]
            kwargs = {k: doc[k] for k in ("width", "height", "step_reward", "gamma") if k in doc}
            if "start" in doc:
                kwargs["start"] = tuple(doc["start"])
            if rewards:
                kwargs["rewards"] = rewards
            return cls(**kwargs)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed gridworld document: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "rewards": [
                {"cell": list(c), "value": v, **({"role": role} if role else {})}
                for c, v, role in self.rewards
            ],
            "step_reward": self.step_reward,
            "gamma": self.gamma,
        }


def load_gridworld_spec(path) -> GridworldSpec:
    with open(Path(path)) as fh:
        return GridworldSpec.from_dict(json.load(fh))


def build_gridworld(spec: GridworldSpec) -> TabularMdp:
    """Build the tabular MDP for ``spec``.

    States are grid cells in row-major order plus one absorbing sink (last
    index). A reward cell pays its value for any action taken there and then
    moves to the sink, so the reward is collected exactly once, ``k`` steps
    after start when the cell is ``k`` moves away. Moves off the grid leave
    the agent in place.
    """
    spec.validate()
    n_cells = spec.width * spec.height
    S, A = n_cells + 1, len(ACTIONS)
    sink = n_cells
    P = np.zeros((S, A, S))
    R = np.full((S, A), float(spec.step_reward))
    reward_at = {spec.index(c): v for c, v, _ in spec.rewards}
    for r in range(spec.height):
        for c in range(spec.width):
            s = spec.index((r, c))
            for a, name in enumerate(ACTIONS):
                if s in reward_at:
                    P[s, a, sink] = 1.0
                    R[s, a] = reward_at[s]
                    continue
                dr, dc = _MOVES[name]
                nxt = (r + dr, c + dc)
                if not spec.inside(nxt):
                    nxt = (r, c)
                P[s, a, spec.index(nxt)] = 1.0
    P[sink, :, sink] = 1.0
    R[sink, :] = 0.0
    return TabularMdp(P, R, spec.gamma, spec.index(spec.start), terminal_states=(sink,))


def shortest_path_policy(spec: GridworldSpec, target) -> np.ndarray:
    """Deterministic S x A policy following a shortest path to ``target``.

    Other reward cells are treated as walls. Cells that cannot reach the
    target (and the sink) take action 0.
    """
    target = tuple(target)
    blocked = {c for c, _, _ in spec.rewards if c != target}
    dist = {target: 0}
    queue = deque([target])
    while queue:
        cell = queue.popleft()
        for dr, dc in _MOVES.values():
            prev = (cell[0] - dr, cell[1] - dc)
            if spec.inside(prev) and prev not in dist and prev not in blocked:
                dist[prev] = dist[cell] + 1
                queue.append(prev)
    S = spec.width * spec.height + 1
    probs = np.zeros((S, len(ACTIONS)))
    probs[:, 0] = 1.0
    for cell, d in dist.items():
        if d == 0:
            continue
        for a, name in enumerate(ACTIONS):
            dr, dc = _MOVES[name]
            nxt = (cell[0] + dr, cell[1] + dc)
            if dist.get(nxt, np.inf) == d - 1:
                probs[spec.index(cell)] = 0.0
                probs[spec.index(cell), a] = 1.0
                break
    return probs


def _check_probs(mdp: TabularMdp, probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (mdp.num_states, mdp.num_actions):
        raise ValueError(f"policy table must be S x A = {(mdp.num_states, mdp.num_actions)}, got {probs.shape}")
    if np.any(probs < -1e-15) or np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("each policy row must be a probability distribution")
    return probs


def policy_transition_matrix(mdp: TabularMdp, probs) -> np.ndarray:
    """State-to-state matrix ``P_pi[s, s'] = sum_a pi(a|s) P[s, a, s']``."""
    probs = _check_probs(mdp, probs)
    return _policy_transition(mdp.transition, probs)


def _policy_transition(P: np.ndarray, probs: np.ndarray) -> np.ndarray:
    # Elementwise accumulation in fixed action order keeps batched and
    # unbatched results bitwise identical. probs: (..., S, A).
    out = probs[..., :, 0, None] * P[:, 0, :]
    for a in range(1, P.shape[1]):
        out = out + probs[..., :, a, None] * P[:, a, :]
    return out


def _row_dot(probs: np.ndarray, table: np.ndarray) -> np.ndarray:
    out = probs[..., 0] * table[..., 0]
    for a in range(1, probs.shape[-1]):
        out = out + probs[..., a] * table[..., a]
    return out


def entropy_rows(probs: np.ndarray) -> np.ndarray:
    """Entropy in nats of each row of ``probs`` (last axis); 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    return -_row_dot(probs, logs)


@dataclass
class ValueTables:
    v: np.ndarray
    q: np.ndarray
    occupancy: np.ndarray
    entropy_weight: float


def _solve(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(M, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("(I - gamma P_pi) is singular") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("linear solve produced non-finite values")
    return x


def solve_batch(mdp: TabularMdp, probs: np.ndarray, tau) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched core of :func:`solve_values`.

    ``probs`` has shape (B, S, A) and ``tau`` broadcasts to (B,). Returns
    ``(v, q, occupancy)`` with shapes (B, S), (B, S, A), (B, S).
    """
    S = mdp.num_states
    tau = np.broadcast_to(np.asarray(tau, dtype=float), probs.shape[:1])
    P_pi = _policy_transition(mdp.transition, probs)
    aug = mdp.reward[None] + (tau[:, None] * entropy_rows(probs))[..., None]
    r_pi = _row_dot(probs, aug)
    M = np.eye(S)[None] - mdp.discount * P_pi
    v = _solve(M, r_pi)
    e0 = np.zeros((probs.shape[0], S))
    e0[:, mdp.start_state] = 1.0
    occ = _solve(np.swapaxes(M, -1, -2), e0)
    # q(s, a) = aug(s, a) + gamma * sum_s' P[s, a, s'] v(s')
    cont = np.einsum("ijk,bk->bij", mdp.transition, v)
    q = aug + mdp.discount * cont
    return v, q, occ


def solve_values(mdp: TabularMdp, probs, tau: float = 0.0) -> ValueTables:
    """Exact entropy-augmented evaluation of a fixed policy by direct solves.

    ``v`` solves ``(I - gamma P_pi) v = r_pi`` with ``r_pi(s) = sum_a
    pi(a|s) [R(s, a) + tau H(pi(.|s))]``; ``occupancy`` is the discounted
    visitation from the start state, ``e_s0^T (I - gamma P_pi)^-1``.
    """
    if tau < 0:
        raise ValueError("entropy weight must be non-negative")
    probs = _check_probs(mdp, probs)
    v, q, occ = solve_batch(mdp, probs[None], tau)
    return ValueTables(v[0], q[0], occ[0], float(tau))
