import numpy as np
import pytest

from landprobe.mdp import GridworldSpec, TabularMdp, build_gridworld


def random_mdp(rng, S, A, gamma=0.9, terminal=()):
    P = rng.dirichlet(np.ones(S), size=(S, A))
    R = rng.normal(size=(S, A))
    for t in terminal:
        P[t] = 0.0
        P[t, :, t] = 1.0
        R[t] = 0.0
    return TabularMdp(P, R, gamma, 0, terminal_states=tuple(terminal))


def random_probs(rng, S, A):
    return rng.dirichlet(np.ones(A), size=S)


@pytest.fixture(scope="session")
def grid_spec():
    return GridworldSpec()


@pytest.fixture(scope="session")
def grid_mdp(grid_spec):
    return build_gridworld(grid_spec)


# Acceptance criteria report their verdicts here; they are echoed in the terminal summary.
ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(f"criterion {number:2d}", []).append((bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[name]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"{name}: {verdict}")
        for ok, detail in parts:
            terminalreporter.write_line(f"    [{'ok' if ok else 'red'}] {detail}")
