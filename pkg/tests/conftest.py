"""Shared parameter sets and session-cached long runs.

Long integrations and shipped sweeps are computed once per session and
reused by both the unit-level example tests and the acceptance module.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from rydberg_dark import dynamics, harness
from rydberg_dark.model import ModelParams
from rydberg_dark.qcore import ket, projector

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"


def ref_params(**overrides) -> ModelParams:
    values = dict(omega1=20, omega2=40, omega_raman=0.25, delta=0, gamma0=3.03, gamma1=3.03, gammaR=1e-3, vrr=20)
    values.update(overrides)
    return ModelParams.from_mhz(**values)


def random_density_matrix(rng: np.random.Generator, dim: int = 16, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def p_ref():
    return ref_params()


@pytest.fixture(scope="session")
def p_ref_lossless():
    return ref_params(gammaR=0)


@pytest.fixture(scope="session")
def ref_trajectory(p_ref):
    """100 us from |11> at the reference parameters, states kept, 10 ns sampling."""
    return dynamics.integrate(projector(ket(1, 1)), p_ref, 100.0, sample_every=0.01)


@pytest.fixture(scope="session")
def sweep_results(tmp_path_factory):
    """Lazily run a shipped sweep spec once; returns ``(spec, tables, out_dir)``."""
    cache = {}
    root = tmp_path_factory.mktemp("sweeps")

    def run(name: str):
        if name not in cache:
            spec = harness.load_sweep(CONFIGS / f"{name}.sweep")
            out = root / name
            cache[name] = (spec, harness.run_sweep(spec, out), out)
        return cache[name]

    return run


@pytest.fixture(scope="session")
def ref_final_states(p_ref, ref_trajectory):
    """State at 100 us from |11>, |00> and the maximally mixed state."""
    out = {"11": ref_trajectory.states[-1]}
    for name, rho0 in (("00", projector(ket(0, 0))), ("mixed", np.eye(16, dtype=complex) / 16)):
        tr = dynamics.integrate(rho0, p_ref, 100.0, sample_every=10.0)
        out[name] = tr.states[-1]
    return out


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
