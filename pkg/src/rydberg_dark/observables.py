"""Figures of merit for pair states and the entanglement-rate fit."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import model
from .model import ModelParams
from .qcore import SINGLE_DIM, LevelIndex, expect, pair_index, purity

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("param_value", "F_max", "d", "gammaE_per_us", "tau_us", "rms")

_P_ATOM1 = [pair_index(LevelIndex.P, k) for k in range(SINGLE_DIM)]
_P_ATOM2 = [pair_index(k, LevelIndex.P) for k in range(SINGLE_DIM)]
_RR = pair_index(LevelIndex.R, LevelIndex.R)


class InsufficientHorizonError(ValueError):
    pass


@dataclass(frozen=True)
class ObservableRecord:
    F: float
    P: float
    Peff: float
    pop_rr: float
    pop_p1: float
    pop_p2: float
    trace_err: float = 0.0


def measure(rho: np.ndarray, p: ModelParams) -> ObservableRecord:
    """Fidelity with DS, purity, effective-subspace population and level populations."""
    rho = np.asarray(rho)
    basis = model.effective_basis(p)
    diag = np.real(np.diag(rho))
    return ObservableRecord(
        F=expect(rho, basis[:, 3]),
        P=purity(rho),
        Peff=float(np.real(np.trace(basis.conj().T @ rho @ basis))),
        pop_rr=float(diag[_RR]),
        pop_p1=float(diag[_P_ATOM1].sum()),
        pop_p2=float(diag[_P_ATOM2].sum()),
        trace_err=float(np.real(np.trace(rho)) - 1.0),
    )


class ObservableSampler:
    """Accumulates :func:`measure` outputs as columns while a trajectory is integrated."""

    def __init__(self, p: ModelParams):
        self.p = p
        self.records: list[ObservableRecord] = []

    def record(self, t: float, rho: np.ndarray) -> None:
        self.records.append(measure(rho, self.p))

    def columns(self) -> dict[str, np.ndarray]:
        names = ObservableRecord.__dataclass_fields__
        return {n: np.array([getattr(r, n) for r in self.records]) for n in names}


def check_monotone_after(times, F, t_min: float, noise: float = 1e-4) -> bool:
    """Regression tripwire: warn (never raise) if F decreases by more than ``noise`` after ``t_min``."""
    times = np.asarray(times)
    F = np.asarray(F)[times > t_min]
    if F.size < 2:
        return True
    drop = np.max(np.maximum.accumulate(F) - F)
    if drop > noise:
        log.warning("F(t) decreased by %.3e after t=%.3g us", drop, t_min)
        return False
    return True


@dataclass(frozen=True)
class FitResult:
    """``F(t) = F_max (1 - d exp(-gammaE (t - tau)))`` fitted on ``window`` (us)."""

    F_max: float
    d: float
    gammaE: float
    tau: float
    rms_residual: float
    window: tuple[float, float]
    n_points: int

    def model(self, t) -> np.ndarray:
        return self.F_max * (1.0 - self.d * np.exp(-self.gammaE * (np.asarray(t) - self.tau)))


def default_tau(p: ModelParams) -> float:
    return 5.0 / p.gammaP


def fit_entanglement_rate(
    traj,
    tau: float | None = None,
    *,
    tail_fraction: float = 0.05,
    noise_floor: float = 1e-9,
    plateau_tol: float = 0.01,
) -> FitResult:
    """Fit the exponential approach of ``traj.F`` to its plateau.

    ``F_max`` is the mean of the last ``tail_fraction`` of samples. ``d`` and
    ``gammaE`` then come from a straight-line fit of ``log(F_max - F)`` against
    ``t`` from ``tau`` up to the first sample where ``F_max - F`` drops below
    ten times the plateau noise (the tail's standard deviation, floored at
    ``noise_floor``).
    """
    t = np.asarray(traj.times, dtype=float)
    F = np.asarray(traj.F, dtype=float)
    if tau is None:
        if traj.params is None:
            raise ValueError("tau is required when the trajectory carries no parameters")
        tau = default_tau(traj.params)
    if len(t) < 3 or t[-1] <= tau:
        raise InsufficientHorizonError(f"trajectory ends at {t[-1]:.4g} us, before tau={tau:.4g} us")
    rise = F[-1] - np.interp(0.5 * t[-1], t, F)
    if rise >= plateau_tol:
        raise InsufficientHorizonError(
            f"F has not plateaued: F(t_end) - F(t_end/2) = {rise:.3e} >= {plateau_tol:g}"
        )
    n_tail = max(1, int(math.ceil(tail_fraction * len(F))))
    tail = F[-n_tail:]
    F_max = float(tail.mean())
    threshold = 10.0 * max(float(tail.std()), noise_floor)

    gap = F_max - F
    start = int(np.searchsorted(t, tau))
    stop = start
    while stop < len(t) and gap[stop] > threshold:
        stop += 1
    if stop < len(t) and gap[stop] <= 0:
        log.warning("fit window cut at t=%.4g us where F exceeds the plateau estimate", t[stop])
    if stop - start < 3:
        raise InsufficientHorizonError(f"fit window after tau={tau:.4g} us has {stop - start} points")

    tw = t[start:stop]
    slope, intercept = np.polyfit(tw - tau, np.log(gap[start:stop]), 1)
    gammaE = -float(slope)
    d = float(np.exp(intercept) / F_max)
    fit = FitResult(F_max, d, gammaE, float(tau), 0.0, (float(tw[0]), float(tw[-1])), stop - start)
    rms = float(np.sqrt(np.mean((F[start:stop] - fit.model(tw)) ** 2)))
    return FitResult(F_max, d, gammaE, float(tau), rms, fit.window, fit.n_points)


@dataclass
class SweepTable:
    """Per-point fits and aligned F(t) curves of a parameter sweep."""

    values: np.ndarray
    times: np.ndarray
    F: np.ndarray
    fits: list[FitResult | None]
    flags: list[str] = field(default_factory=list)

    @property
    def F_final(self) -> np.ndarray:
        return self.F[:, -1]

    def final_spread(self) -> float:
        return float(np.ptp(self.F_final))

    def max_pairwise_deviation(self, t_min: float = 0.0) -> float:
        """``max_t max_ij |F_i(t) - F_j(t)|`` over samples with ``t >= t_min``."""
        sel = self.times >= t_min
        return float(np.max(np.ptp(self.F[:, sel], axis=0)))

    def gammaE(self) -> np.ndarray:
        return np.array([f.gammaE if f is not None else np.nan for f in self.fits])

    def rows(self) -> list[list[float]]:
        out = []
        for v, fit in zip(self.values, self.fits):
            if fit is None:
                out.append([v, math.nan, math.nan, math.nan, math.nan, math.nan])
            else:
                out.append([v, fit.F_max, fit.d, fit.gammaE, fit.tau, fit.rms_residual])
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for row in self.rows():
                w.writerow([format(float(x), ".15g") for x in row])


def scan_observable(
    trajs: Sequence,
    values: Sequence[float] | None = None,
    *,
    tau: float | None = None,
    strict: bool = True,
) -> SweepTable:
    """Tabulate fits and final fidelities of several trajectories.

    With ``strict=True`` all trajectories must share one time grid; otherwise
    each F(t) is linearly resampled onto the shortest grid. Points whose fit
    fails are kept with a ``None`` fit and a flag instead of aborting.
    """
    if not trajs:
        raise ValueError("no trajectories to scan")
    values = np.arange(len(trajs), dtype=float) if values is None else np.asarray(values, dtype=float)
    if len(values) != len(trajs):
        raise ValueError("values and trajectories differ in length")
    ref = min(trajs, key=lambda tr: tr.times[-1]).times
    curves = []
    for tr in trajs:
        same = len(tr.times) == len(ref) and np.allclose(tr.times, ref, rtol=0, atol=1e-12)
        if not same:
            if strict:
                raise ValueError("trajectories have different time grids (pass strict=False to resample)")
            curves.append(np.interp(ref, tr.times, tr.F))
        else:
            curves.append(np.asarray(tr.F))
    fits, flags = [], []
    for tr in trajs:
        try:
            fits.append(fit_entanglement_rate(tr, tau))
            flags.append("ok")
        except InsufficientHorizonError as exc:
            log.warning("sweep point not fitted: %s", exc)
            fits.append(None)
            flags.append("insufficient_horizon")
    return SweepTable(values, np.asarray(ref), np.vstack(curves), fits, flags)


def linear_r2(x, y) -> float:
    """Coefficient of determination of an ordinary least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, icpt = np.polyfit(x, y, 1)
    ss_res = np.sum((y - (slope * x + icpt)) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(1.0 - ss_res / ss_tot)
