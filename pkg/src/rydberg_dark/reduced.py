"""Four-level effective model, non-Hermitian spectrum and closed-form bounds.

The effective model lives on the dressed basis T0 = |DD>, T1, T2 = |00>,
T3 = DS (see :func:`rydberg_dark.model.effective_basis`). Its coupling and
drain rate are

    omega_tilde = sqrt(2) omega Omega2 / Omega,
    Gamma       = gamma_p Omega1 / (sqrt(2) Omega).

Eigenvalues of ``H - (i/2) sum C^dag C`` are reported with the convention
that decay shows up as a negative imaginary part.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import model
from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_DT_MAX,
    DEFAULT_RTOL,
    Liouvillian,
    Trajectory,
    evolve,
    system_operators,
)
from .model import ModelParams
from .qcore import eig_general, purity

EFFECTIVE_DIM = 4
SPECTRUM_COLUMNS = ("re_ev", "im_ev", "overlap_DS")


@dataclass(frozen=True)
class EffectiveParams:
    omega_tilde: float
    Gamma: float


def effective_params(p: ModelParams) -> EffectiveParams:
    return EffectiveParams(
        omega_tilde=math.sqrt(2.0) * p.omega_raman * p.omega2 / p.Omega,
        Gamma=p.gammaP * p.omega1 / (math.sqrt(2.0) * p.Omega),
    )


def effective_operators(p: ModelParams) -> tuple[np.ndarray, list[np.ndarray]]:
    """Hamiltonian and the four jump operators ``sqrt(Gamma/4) |Tj><T0|``."""
    eff = effective_params(p)
    H = np.zeros((EFFECTIVE_DIM, EFFECTIVE_DIM), dtype=complex)
    H[0, 1] = H[1, 0] = H[1, 2] = H[2, 1] = eff.omega_tilde
    amp = math.sqrt(eff.Gamma / 4.0)
    jumps = []
    for j in range(EFFECTIVE_DIM):
        c = np.zeros((EFFECTIVE_DIM, EFFECTIVE_DIM), dtype=complex)
        c[j, 0] = amp
        jumps.append(c)
    return H, jumps


def effective_liouvillian(p: ModelParams) -> Liouvillian:
    H, jumps = effective_operators(p)
    return Liouvillian.from_operators(H, jumps)


def effective_steady_state(p: ModelParams) -> np.ndarray:
    return effective_liouvillian(p).steady_state()


def project_to_effective(rho: np.ndarray, p: ModelParams, renormalize: bool = True) -> np.ndarray:
    """Compress a pair density matrix onto span{T0..T3}."""
    b = model.effective_basis(p)
    r = b.conj().T @ np.asarray(rho) @ b
    r = 0.5 * (r + r.conj().T)
    if renormalize:
        r = r / np.trace(r).real
    return r


def simulate_effective(
    p: ModelParams,
    rho0_eff: np.ndarray,
    t_end: float,
    *,
    t0: float = 0.0,
    dt_max: float = DEFAULT_DT_MAX,
    sample_every: float = 0.1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Evolve a 4x4 effective-model state from ``t0`` to ``t_end`` (absolute times, us).

    The trajectory's ``F`` is the T3 population; ``Peff`` is the trace.
    """
    if t_end < t0:
        raise ValueError("t_end precedes t0")
    L = effective_liouvillian(p)
    times, states = evolve(rho0_eff, L, t_end - t0, dt_max=dt_max, sample_every=sample_every, rtol=rtol, atol=atol)
    obs = {
        "F": np.real(states[:, 3, 3]).copy(),
        "P": np.array([purity(r) for r in states]),
        "Peff": np.real(np.trace(states, axis1=1, axis2=2)),
    }
    info = {"model": "effective", "t0_us": t0, "rtol": rtol, "atol": atol}
    return Trajectory(times + t0, states, obs, p, info)


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: complex
    overlap_DS: float


@dataclass(frozen=True)
class BoundsReport:
    gammaE_bound: float
    Fmax_bound: float
    xi: float
    spectrum: list[SpectrumEntry]
    blockade_threshold: float
    blockade_ok: bool

    @property
    def slowest_decay(self) -> float:
        return abs(self.spectrum[0].eigenvalue.imag)

    @property
    def decay_gap_ratio(self) -> float:
        """Second-smallest over smallest ``|Im|`` of the non-Hermitian spectrum."""
        return abs(self.spectrum[1].eigenvalue.imag) / self.slowest_decay

    @property
    def decay_per_2xi2(self) -> float:
        """Smallest ``|Im|`` divided by ``2 xi^2`` (rad/us); reported, not asserted."""
        return self.slowest_decay / (2.0 * self.xi**2) if self.xi > 0 else math.nan


def nonhermitian_hamiltonian(p: ModelParams, blockade: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    H, jumps, keep = system_operators(p, blockade)
    heff = H - 0.5j * sum((c.conj().T @ c for c in jumps), np.zeros_like(H))
    return heff, keep


def nonhermitian_spectrum(p: ModelParams, blockade: str | None = None) -> list[SpectrumEntry]:
    """Eigenvalues of ``H - (i/2) sum C^dag C`` by ascending ``|Im|``, with ``|<DS|v>|^2``."""
    heff, keep = nonhermitian_hamiltonian(p, blockade)
    w, v = eig_general(heff)
    if np.max(w.imag) > 1e-10:
        raise RuntimeError(f"eigenvalue with positive imaginary part {np.max(w.imag):.3e}")
    ds = model.effective_basis(p)[keep, 3]
    overlaps = np.abs(ds.conj() @ v) ** 2
    return [SpectrumEntry(complex(e), float(o)) for e, o in zip(w, overlaps)]


def gammaE_bound(p: ModelParams) -> float:
    return p.omega_raman * p.gammaP * p.omega1 / (p.omega1**2 + p.omega2**2 + p.omega_raman**2)


def Fmax_bound(p: ModelParams) -> float:
    return 1.0 - 2.0 * p.xi**2


def bounds(p: ModelParams, blockade: str | None = None) -> BoundsReport:
    return BoundsReport(
        gammaE_bound=gammaE_bound(p),
        Fmax_bound=Fmax_bound(p),
        xi=p.xi,
        spectrum=nonhermitian_spectrum(p, blockade),
        blockade_threshold=model.blockade_threshold(p),
        blockade_ok=model.blockade_condition(p),
    )


def format_bounds(report: BoundsReport) -> str:
    """Flat ``key = value`` text; rates in rad/us with MHz (/2pi) companions."""
    items = [
        ("gammaE_bound_per_us", report.gammaE_bound),
        ("gammaE_bound_mhz", report.gammaE_bound / model.TWO_PI),
        ("Fmax_bound", report.Fmax_bound),
        ("xi", report.xi),
        ("blockade_threshold_per_us", report.blockade_threshold),
        ("blockade_condition", "satisfied" if report.blockade_ok else "violated"),
        ("slowest_decay_per_us", report.slowest_decay),
        ("slowest_overlap_DS", report.spectrum[0].overlap_DS),
        ("decay_gap_ratio", report.decay_gap_ratio),
        ("slowest_decay_over_2xi2", report.decay_per_2xi2),
    ]
    return "".join(f"{k} = {v if isinstance(v, str) else format(float(v), '.15g')}\n" for k, v in items)


def write_spectrum_csv(spectrum: list[SpectrumEntry], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPECTRUM_COLUMNS)
        for e in spectrum:
            w.writerow([format(e.eigenvalue.real, ".15g"), format(e.eigenvalue.imag, ".15g"), format(e.overlap_DS, ".15g")])


def effective_comparison(
    p: ModelParams,
    full: Trajectory,
    t_start: float | None = None,
    **kwargs,
) -> tuple[Trajectory, float]:
    """Run the effective model from the projected full state at ``t_start`` (default ``1/Gamma``).

    Returns the effective trajectory and ``max |F_full - F_eff|`` over the
    full trajectory's samples at or after ``t_start``. ``full`` must carry states.
    """
    if full.states is None:
        raise ValueError("full trajectory must keep its states")
    if t_start is None:
        t_start = 1.0 / effective_params(p).Gamma
    dt = full.times[1] - full.times[0]
    i0 = int(np.searchsorted(full.times, t_start - 1e-12))
    rho_eff = project_to_effective(full.states[i0], p)
    t0 = float(full.times[i0])
    eff = simulate_effective(p, rho_eff, float(full.times[-1]), t0=t0, sample_every=dt, **kwargs)
    f_full = np.interp(eff.times, full.times, full.F)
    return eff, float(np.max(np.abs(f_full - eff.F)))
