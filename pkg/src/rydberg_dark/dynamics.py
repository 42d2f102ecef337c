"""Master-equation time evolution and steady states.

The generator is the standard trace-preserving Lindblad form

    drho/dt = -i (H_eff rho - rho H_eff^dag) + sum_k C_k rho C_k^dag,
    H_eff = H - (i/2) sum_k C_k^dag C_k,

with density matrices column-stacked (``order="F"``) when a superoperator
is needed.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853

from . import model
from .model import ModelParams
from .qcore import (
    PAIR_DIM,
    InvalidStateError,
    validate_density_matrix,
)

log = logging.getLogger(__name__)

BLOCKADE_MODES = (None, "surrogate", "truncate")

TRACE_WARN = 1e-9
TRACE_FAIL = 1e-6
SAMPLE_POSITIVITY_TOL = -1e-8
NULL_SPACE_RTOL = 1e-10
STEADY_RESIDUAL_TOL = 1e-9

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-11
DEFAULT_DT_MAX = 0.05

TRAJECTORY_COLUMNS = ("t_us", "F", "P", "Peff", "pop_rr", "pop_p1", "pop_p2", "trace_err")


class StiffnessError(RuntimeError):
    def __init__(self, message: str, t: float, step: float | None = None):
        super().__init__(f"{message} (t={t:.6g} us, last step={step})")
        self.t = t
        self.step = step


class IntegratorFailure(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.6g} us")
        self.t = t


class SteadyStateMultiplicityError(RuntimeError):
    """The Liouvillian has more than one independent stationary state.

    ``basis`` holds one Hermitian, unit-trace-where-possible matrix per null
    vector; ``dimension`` is its length.
    """

    def __init__(self, dimension: int, basis: list[np.ndarray]):
        super().__init__(f"Liouvillian null space has dimension {dimension}; steady state is not unique")
        self.dimension = dimension
        self.basis = basis


def _ops(jumps) -> list[np.ndarray]:
    return [j[1] if isinstance(j, tuple) else j for j in jumps]


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, jumps: Sequence) -> np.ndarray:
    """Time derivative of ``rho``; ``jumps`` may be operators or (label, operator) pairs."""
    rho = np.asarray(rho, dtype=complex)
    ops = _ops(jumps)
    heff = np.asarray(H, dtype=complex)
    if ops:
        heff = heff - 0.5j * sum(c.conj().T @ c for c in ops)
    out = -1j * (heff @ rho - rho @ heff.conj().T)
    for c in ops:
        out = out + c @ rho @ c.conj().T
    return out


def system_operators(p: ModelParams, blockade: str | None = None):
    """Hamiltonian, jump operators and retained pair-basis indices for a blockade mode.

    ``blockade=None`` uses ``p.vrr`` as given; ``"surrogate"`` replaces it with
    ``1e3 * Omega``; ``"truncate"`` drops |rr> from the Hilbert space (15 states).
    """
    if blockade not in BLOCKADE_MODES:
        raise ValueError(f"unknown blockade mode {blockade!r}; expected one of {BLOCKADE_MODES}")
    if blockade == "surrogate":
        p = model.perfect_blockade_surrogate(p)
    H = model.build_total_hamiltonian(p)
    jumps = model.jump_operators(p)
    keep = np.arange(PAIR_DIM)
    if blockade == "truncate":
        keep = keep[keep != model.RR_INDEX]
        sel = np.ix_(keep, keep)
        H = H[sel]
        jumps = [c[sel] for c in jumps]
    return H, jumps, keep


def hermitian_basis(d: int) -> np.ndarray:
    """Unitary ``d^2 x d^2`` matrix whose columns are column-stacked orthonormal Hermitian matrices.

    Coordinates of a Hermitian matrix in this basis are real. The first ``d``
    columns are the diagonal projectors, so the trace is the sum of the first
    ``d`` coordinates.
    """
    cols = []
    for i in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1.0
        cols.append(m)
    s = 1.0 / math.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = m[j, i] = s
            cols.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = -1j * s
            m[j, i] = 1j * s
            cols.append(m)
    return np.column_stack([m.reshape(-1, order="F") for m in cols])


@dataclass
class Liouvillian:
    """Superoperator on column-stacked density matrices of the retained subspace."""

    matrix: np.ndarray
    keep: np.ndarray
    full_dim: int = PAIR_DIM

    @property
    def dim(self) -> int:
        return len(self.keep)

    @classmethod
    def from_operators(cls, H: np.ndarray, jumps: Sequence, keep=None, full_dim: int | None = None):
        H = np.asarray(H, dtype=complex)
        d = H.shape[0]
        ops = _ops(jumps)
        ident = np.eye(d)
        heff = H - 0.5j * sum((c.conj().T @ c for c in ops), np.zeros_like(H))
        L = -1j * (np.kron(ident, heff) - np.kron(heff.conj(), ident))
        for c in ops:
            L = L + np.kron(c.conj(), c)
        keep = np.arange(d) if keep is None else np.asarray(keep)
        return cls(L, keep, d if full_dim is None else full_dim)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        v = self.matrix @ np.asarray(rho, dtype=complex).reshape(-1, order="F")
        return v.reshape(d, d, order="F")

    def trace_row(self) -> np.ndarray:
        return np.eye(self.dim).reshape(-1, order="F")

    def restrict(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape[0] == self.dim:
            return rho
        dropped = np.setdiff1d(np.arange(self.full_dim), self.keep)
        if dropped.size and np.max(np.abs(rho[dropped][:, dropped])) > 1e-14:
            raise ValueError("initial state populates a truncated basis state")
        return rho[np.ix_(self.keep, self.keep)]

    def embed(self, rho: np.ndarray) -> np.ndarray:
        if self.dim == self.full_dim:
            return rho
        out = np.zeros((self.full_dim, self.full_dim), dtype=complex)
        out[np.ix_(self.keep, self.keep)] = rho
        return out

    def real_generator(self) -> tuple[np.ndarray, np.ndarray]:
        """Real generator in the Hermitian basis, together with that basis."""
        U = hermitian_basis(self.dim)
        Lr = U.conj().T @ self.matrix @ U
        if np.max(np.abs(Lr.imag)) > 1e-9 * max(1.0, np.max(np.abs(Lr.real))):
            raise ValueError("generator does not preserve Hermiticity")
        return np.ascontiguousarray(Lr.real), U

    def steady_state(self) -> np.ndarray:
        """Unique null vector as a density matrix on the full space.

        Raises
        ------
        SteadyStateMultiplicityError
            If the numerical null space has dimension > 1.
        """
        d = self.dim
        _, s, vh = np.linalg.svd(self.matrix)
        nullity = int(np.sum(s <= NULL_SPACE_RTOL * s[0]))
        if nullity == 0:
            raise RuntimeError(f"Liouvillian has no numerical null vector (smallest singular value {s[-1]:.3e})")
        vecs = vh[-nullity:].conj()
        mats = []
        for v in vecs:
            m = v.reshape(d, d, order="F")
            m = 0.5 * (m + m.conj().T)
            tr = np.trace(m).real
            if abs(tr) > 1e-12:
                m = m / tr
            mats.append(self.embed(m))
        if nullity > 1:
            raise SteadyStateMultiplicityError(nullity, mats)
        rho = mats[0]
        resid = np.linalg.norm(self.apply(self.restrict(rho)))
        if resid > STEADY_RESIDUAL_TOL:
            raise RuntimeError(f"steady-state residual {resid:.3e} exceeds {STEADY_RESIDUAL_TOL:g}")
        return rho


def build_liouvillian(p: ModelParams, blockade: str | None = None) -> Liouvillian:
    H, jumps, keep = system_operators(p, blockade)
    return Liouvillian.from_operators(H, jumps, keep, PAIR_DIM)


def steady_state(p: ModelParams, blockade: str | None = None) -> np.ndarray:
    if p.gamma0 == p.gamma1 == p.gammaR == 0.0:
        raise ValueError("steady_state needs at least one nonzero decay rate")
    return build_liouvillian(p, blockade).steady_state()


@dataclass
class Trajectory:
    """Sampled evolution: ``times`` in us, ``states`` shaped ``(n, d, d)``.

    ``observables`` maps column names (see :data:`TRAJECTORY_COLUMNS`) to arrays
    aligned with ``times``. ``states`` is ``None`` when states were not kept.
    """

    times: np.ndarray
    states: np.ndarray | None
    observables: dict[str, np.ndarray]
    params: ModelParams | None = None
    info: dict = field(default_factory=dict)

    @property
    def F(self) -> np.ndarray:
        return self.observables["F"]

    def __len__(self) -> int:
        return len(self.times)


def sample_grid(t_end: float, sample_every: float) -> np.ndarray:
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    if t_end == 0:
        return np.zeros(1)
    if sample_every <= 0:
        raise ValueError("sample_every must be positive")
    n = int(math.floor(t_end / sample_every + 1e-9))
    t = sample_every * np.arange(n + 1)
    if t_end - t[-1] > 1e-9 * max(1.0, t_end):
        t = np.append(t, t_end)
    else:
        t[-1] = t_end
    return t


def evolve(
    rho0: np.ndarray,
    L: Liouvillian,
    t_end: float,
    *,
    dt_max: float = DEFAULT_DT_MAX,
    sample_every: float = 0.1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    on_sample: Callable[[float, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``L`` from ``rho0`` with an adaptive 8th-order Dormand-Prince scheme.

    Returns sample times and the sampled (full-space) density matrices. The
    trace is never renormalized: drift above 1e-9 is logged, above 1e-6 the run
    aborts with :class:`IntegratorFailure`.
    """
    rho0 = validate_density_matrix(rho0)
    times = sample_grid(t_end, sample_every)
    Lr, U = L.real_generator()
    d = L.dim
    x0 = (U.conj().T @ L.restrict(rho0).reshape(-1, order="F")).real

    def to_rho(x: np.ndarray, t: float) -> np.ndarray:
        rho = L.embed((U @ x).reshape(d, d, order="F"))
        try:
            validate_density_matrix(rho, trace_tol=TRACE_FAIL, pos_tol=SAMPLE_POSITIVITY_TOL)
        except InvalidStateError as exc:
            raise IntegratorFailure(f"state validation failed: {exc}", t) from exc
        if on_sample is not None:
            on_sample(t, rho)
        return rho

    states = np.empty((len(times), L.full_dim, L.full_dim), dtype=complex)
    states[0] = to_rho(x0, 0.0)
    if len(times) == 1:
        return times, states

    solver = DOP853(lambda t, x: Lr @ x, 0.0, x0, t_end, max_step=dt_max, rtol=rtol, atol=atol)
    nxt = 1
    warned = False
    while solver.status == "running":
        t_old = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integrator step failed: {msg}", t_old, solver.step_size)
        drift = abs(np.sum(solver.y[:d]) - 1.0)
        if drift > TRACE_FAIL:
            raise IntegratorFailure(f"trace drift {drift:.3e} exceeds {TRACE_FAIL:g}", solver.t)
        if drift > TRACE_WARN and not warned:
            log.warning("trace drift %.3e at t=%.6g us (not renormalized)", drift, solver.t)
            warned = True
        if nxt < len(times) and times[nxt] <= solver.t:
            dense = solver.dense_output()
            while nxt < len(times) and times[nxt] <= solver.t:
                x = solver.y if times[nxt] == solver.t else dense(times[nxt])
                states[nxt] = to_rho(x, float(times[nxt]))
                nxt += 1
    if nxt < len(times):
        states[nxt:] = to_rho(solver.y, float(solver.t))
    return times, states


def integrate(
    rho0: np.ndarray,
    p: ModelParams,
    t_end: float,
    dt_max: float = DEFAULT_DT_MAX,
    sample_every: float = 0.1,
    *,
    blockade: str | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    keep_states: bool = True,
) -> Trajectory:
    """Evolve a pair density matrix under the full master equation and record observables."""
    from .observables import ObservableSampler

    L = build_liouvillian(p, blockade)
    sampler = ObservableSampler(p)
    times, states = evolve(
        rho0, L, t_end, dt_max=dt_max, sample_every=sample_every, rtol=rtol, atol=atol,
        on_sample=sampler.record,
    )
    info = {
        "method": "DOP853",
        "rtol": rtol,
        "atol": atol,
        "dt_max_us": dt_max,
        "sample_every_us": sample_every,
        "t_end_us": t_end,
        "blockade": blockade or "none",
    }
    return Trajectory(times, states if keep_states else None, sampler.columns(), p, info)


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    obs = traj.observables
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i, t in enumerate(traj.times):
            w.writerow([_fmt(t)] + [_fmt(obs[c][i]) for c in TRAJECTORY_COLUMNS[1:]])


def read_trajectory_csv(path: str | Path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.array(body, dtype=float).reshape(-1, len(header))
    obs = {c: data[:, i] for i, c in enumerate(header) if c != "t_us"}
    return Trajectory(data[:, 0], None, obs, None, {"source": str(path)})


def _fmt(x: float) -> str:
    return format(float(x), ".15g")
