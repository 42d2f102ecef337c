"""Command-line entry point, sweep orchestration and run manifests.

Subcommands: ``simulate``, ``sweep``, ``steady``, ``bounds``, ``spectrum``,
``fit``. Every output is data only (CSV plus plain-text manifests) and
byte-identical across runs with identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, dynamics, model, observables, reduced
from .model import CONFIG_KEYS, FIELDS, TWO_PI, ConfigError, ModelParams
from .qcore import PAIR_DIM, ket, projector

log = logging.getLogger(__name__)

INITIAL_STATES = ("11", "00", "mixed", "DS")
SWEEP_AXES = FIELDS + ("gammaP",)
SUMMARY_COLUMNS = ("param_value", "F_final", "F_ss", "gammaE_bound_per_us", "Fmax_bound", "flag")
EXIT_BLOCKADE_VIOLATED = 3


def initial_state(name: str, p: ModelParams, blockade: str | None = None) -> np.ndarray:
    if name == "11":
        return projector(ket(1, 1))
    if name == "00":
        return projector(ket(0, 0))
    if name == "mixed":
        diag = np.ones(PAIR_DIM)
        if blockade == "truncate":
            diag[model.RR_INDEX] = 0.0
        return np.diag(diag / diag.sum()).astype(complex)
    if name == "DS":
        return projector(model.effective_basis(p)[:, 3])
    raise ConfigError(f"unknown initial state {name!r}; expected one of {INITIAL_STATES}")


# --- sweep specification --------------------------------------------------------


@dataclass
class SweepSpec:
    """One sweep file: base parameters, the varied axis and run settings.

    ``units`` is ``"mhz"`` (values are frequency/2pi in MHz) or ``"Omega"``
    (values are multiples of the point's Omega). ``lock`` applies to an
    ``omega1`` axis: ``"fixed_ratio"`` moves omega2 along at fixed epsilon,
    ``"both"`` runs the fixed-omega2 and fixed-ratio branches.
    """

    base: ModelParams
    axis: str
    values: list[float]
    initial_state: str = "11"
    t_end: float = 100.0
    outputs: str = "out"
    sample_every: float = 0.1
    units: str = "mhz"
    lock: str = "none"
    perfect_blockade: str | None = None
    tau: float | None = None
    axis2: str | None = None
    values2: list[float] = field(default_factory=list)
    units2: str = "mhz"

    def branches(self) -> list[tuple[str, list[ModelParams]]]:
        """Named 1-D point lists; a single unnamed branch unless ``axis2`` or ``lock=both``."""
        if self.axis2 is not None:
            return [
                (f"{self.axis2}_{_fmt(v2)}", [self._point(self._set(self.base, self.axis2, v2, self.units2), v) for v in self.values])
                for v2 in self.values2
            ]
        if self.lock == "both":
            return [
                (lock, [self._point(self.base, v, lock) for v in self.values])
                for lock in ("fixed_omega2", "fixed_ratio")
            ]
        return [("", [self._point(self.base, v, self.lock) for v in self.values])]

    def _point(self, base: ModelParams, value: float, lock: str | None = None) -> ModelParams:
        lock = self.lock if lock is None else lock
        p = self._set(base, self.axis, value, self.units)
        if self.axis == "omega1" and lock == "fixed_ratio":
            p = p.replace(omega2=base.epsilon * p.omega1)
        return p

    @staticmethod
    def _set(base: ModelParams, axis: str, value: float, units: str) -> ModelParams:
        if units == "mhz":
            x = TWO_PI * value
        elif units == "Omega":
            x = value * base.Omega
        else:
            raise ConfigError(f"unknown units {units!r}; expected 'mhz' or 'Omega'")
        try:
            if axis == "gammaP":
                share = 0.5 if base.gammaP == 0 else base.gamma0 / base.gammaP
                return base.replace(gamma0=share * x, gamma1=(1.0 - share) * x)
            return base.replace(**{axis: x})
        except ValueError as exc:
            raise ConfigError(f"sweep value {value} on axis {axis!r} is invalid: {exc}") from exc


def _floats(text: str, key: str, source: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{source}: {key} must be a list of numbers, got {text!r}") from None


def load_sweep(path: str | Path) -> SweepSpec:
    path = Path(path)
    src = str(path)
    kv = model.parse_key_values(path.read_text(), src)
    base = model.params_from_mapping(kv, src)
    known = set(CONFIG_KEYS) | {
        "axis", "values", "units", "initial", "t_end_us", "sample_every_us", "outputs",
        "lock_ratio", "perfect_blockade", "tau_us", "axis2", "values2", "units2",
    }
    unknown = [k for k in kv if k not in known]
    if unknown:
        raise ConfigError(f"{src}: unknown key(s): {', '.join(unknown)}")
    for key in ("axis", "values"):
        if key not in kv:
            raise ConfigError(f"{src}: missing required key {key!r}")
    for key in ("axis", "axis2"):
        if key in kv and kv[key] not in SWEEP_AXES:
            raise ConfigError(f"{src}: {key} {kv[key]!r} is not one of {SWEEP_AXES}")
    blockade = kv.get("perfect_blockade", "none")
    if blockade not in ("none", "surrogate", "truncate"):
        raise ConfigError(f"{src}: perfect_blockade must be none, surrogate or truncate")
    lock = kv.get("lock_ratio", "none")
    if lock not in ("none", "fixed_omega2", "fixed_ratio", "both"):
        raise ConfigError(f"{src}: lock_ratio must be none, fixed_omega2, fixed_ratio or both")
    initial = kv.get("initial", "11")
    if initial not in INITIAL_STATES:
        raise ConfigError(f"{src}: initial must be one of {INITIAL_STATES}")
    try:
        spec = SweepSpec(
            base=base,
            axis=kv["axis"],
            values=_floats(kv["values"], "values", src),
            initial_state=initial,
            t_end=float(kv.get("t_end_us", 100.0)),
            outputs=kv.get("outputs", path.stem),
            sample_every=float(kv.get("sample_every_us", 0.1)),
            units=kv.get("units", "mhz"),
            lock=lock,
            perfect_blockade=None if blockade == "none" else blockade,
            tau=float(kv["tau_us"]) if "tau_us" in kv else None,
            axis2=kv.get("axis2"),
            values2=_floats(kv.get("values2", ""), "values2", src),
            units2=kv.get("units2", "mhz"),
        )
    except ValueError as exc:
        raise ConfigError(f"{src}: {exc}") from exc
    spec.branches()  # validates every point up front
    return spec


# --- running ----------------------------------------------------------------------------


@dataclass
class PointResult:
    index: int
    value: float
    params: ModelParams
    trajectory: dynamics.Trajectory
    fit: observables.FitResult | None
    flag: str
    F_ss: float


def run_point(index: int, value: float, p: ModelParams, initial: str, t_end: float,
              sample_every: float, blockade: str | None, tau: float | None) -> PointResult:
    traj = dynamics.integrate(initial_state(initial, p, blockade), p, t_end, sample_every=sample_every,
                              blockade=blockade, keep_states=False)
    try:
        fit = observables.fit_entanglement_rate(traj, tau)
        flag = "ok"
    except observables.InsufficientHorizonError as exc:
        log.warning("point %d (%g): %s", index, value, exc)
        fit, flag = None, "insufficient_horizon"
    try:
        F_ss = observables.measure(dynamics.steady_state(p, blockade), p).F
    except (dynamics.SteadyStateMultiplicityError, ValueError, RuntimeError) as exc:
        log.warning("point %d (%g): no unique steady state: %s", index, value, exc)
        F_ss = math.nan
    return PointResult(index, value, p, traj, fit, flag, F_ss)


def _run_points(jobs: list[tuple], workers: int) -> list[PointResult]:
    if workers <= 1:
        return [run_point(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_point, *zip(*jobs)))
    return sorted(results, key=lambda r: r.index)


def run_sweep(spec: SweepSpec, out: Path, workers: int = 1) -> dict[str, observables.SweepTable]:
    """Run every branch of ``spec`` and write its CSVs under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    tables = {}
    manifest = [_manifest_header("sweep"), _params_block("base", spec.base), _run_block(spec)]
    for name, points in spec.branches():
        bdir = out / name if name else out
        (bdir / "points").mkdir(parents=True, exist_ok=True)
        jobs = [(i, v, p, spec.initial_state, spec.t_end, spec.sample_every, spec.perfect_blockade, spec.tau)
                for i, (v, p) in enumerate(zip(spec.values, points))]
        results = _run_points(jobs, workers)
        for r in results:
            dynamics.write_trajectory_csv(r.trajectory, bdir / "points" / f"point_{r.index:03d}.csv")
            manifest.append(_params_block(f"{name or 'sweep'}.point_{r.index:03d} (value={_fmt(r.value)})", r.params))
        table = observables.SweepTable(
            np.array(spec.values, dtype=float),
            results[0].trajectory.times,
            np.vstack([r.trajectory.F for r in results]),
            [r.fit for r in results],
            [r.flag for r in results],
        )
        table.write_csv(bdir / "sweep.csv")
        _write_summary(results, bdir / "summary.csv")
        tables[name] = table
    (out / "manifest.txt").write_text("\n".join(manifest))
    return tables


def _write_summary(results: list[PointResult], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow([_fmt(r.value), _fmt(r.trajectory.F[-1]), _fmt(r.F_ss),
                        _fmt(reduced.gammaE_bound(r.params)), _fmt(reduced.Fmax_bound(r.params)), r.flag])


# --- manifests ------------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".15g")


def _manifest_header(command: str) -> str:
    return f"# rydberg_dark {__version__} {command}\n"


def _params_block(title: str, p: ModelParams) -> str:
    lines = [f"[{title}]"]
    for name, key in zip(FIELDS, CONFIG_KEYS):
        val = getattr(p, name)
        lines.append(f"{key} = {_fmt(val / TWO_PI)}")
        lines.append(f"{name}_rad_per_us = {_fmt(val)}")
    lines.append(f"blockade_condition = {'satisfied' if model.blockade_condition(p) else 'violated'}")
    return "\n".join(lines) + "\n"


def _integrator_lines() -> list[str]:
    return [
        "integrator = DOP853",
        f"rtol = {dynamics.DEFAULT_RTOL!r}",
        f"atol = {dynamics.DEFAULT_ATOL!r}",
        f"dt_max_us = {dynamics.DEFAULT_DT_MAX!r}",
    ]


def _run_block(spec: SweepSpec) -> str:
    lines = ["[run]", f"axis = {spec.axis}", f"units = {spec.units}",
             "values = " + ", ".join(_fmt(v) for v in spec.values),
             f"initial = {spec.initial_state}", f"t_end_us = {_fmt(spec.t_end)}",
             f"sample_every_us = {_fmt(spec.sample_every)}", f"lock_ratio = {spec.lock}",
             f"perfect_blockade = {spec.perfect_blockade or 'none'}",
             f"tau_us = {'default (5/gammaP)' if spec.tau is None else _fmt(spec.tau)}"]
    if spec.axis2:
        lines += [f"axis2 = {spec.axis2}", f"units2 = {spec.units2}",
                  "values2 = " + ", ".join(_fmt(v) for v in spec.values2)]
    return "\n".join(lines + _integrator_lines()) + "\n"


# --- subcommands --------------------------------------------------------------------


def cmd_simulate(args) -> int:
    p = model.load_params(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t_end = 100.0 if args.t_end is None else args.t_end
    initial = args.initial or "11"
    blockade = _blockade(args)
    traj = dynamics.integrate(initial_state(initial, p, blockade), p, t_end, sample_every=args.sample_every,
                              blockade=blockade, keep_states=False)
    dynamics.write_trajectory_csv(traj, out / "trajectory.csv")
    run = ["[run]", f"config = {Path(args.config).name}", f"initial = {initial}",
           f"t_end_us = {_fmt(t_end)}", f"sample_every_us = {_fmt(args.sample_every)}",
           f"perfect_blockade = {blockade or 'none'}"] + _integrator_lines()
    (out / "manifest.txt").write_text("\n".join([_manifest_header("simulate"), _params_block("params", p), "\n".join(run) + "\n"]))
    print(f"F(t_end) = {_fmt(traj.F[-1])}")
    return 0


def cmd_sweep(args) -> int:
    spec = load_sweep(args.config)
    if args.t_end is not None:
        spec.t_end = args.t_end
    if args.initial is not None:
        spec.initial_state = args.initial
    if args.perfect_blockade is not None:
        spec.perfect_blockade = _blockade(args)
    out = Path(args.out) if args.out else Path(args.config).parent / spec.outputs
    tables = run_sweep(spec, out, args.workers)
    for name, table in tables.items():
        print(f"{name or 'sweep'}: final F spread = {_fmt(table.final_spread())}")
    return 0


def cmd_steady(args) -> int:
    p = model.load_params(args.config)
    rho = dynamics.steady_state(p, _blockade(args))
    rec = observables.measure(rho, p)
    eff = reduced.effective_params(p)
    lines = [f"{k} = {_fmt(getattr(rec, k))}" for k in ("F", "P", "Peff", "pop_rr", "pop_p1", "pop_p2")]
    lines += [f"Fmax_bound = {_fmt(reduced.Fmax_bound(p))}", f"gammaR_over_Gamma = {_fmt(p.gammaR / eff.Gamma)}"]
    text = "\n".join(lines) + "\n"
    _emit(args, "steady.txt", text)
    return 0


def cmd_bounds(args) -> int:
    p = model.load_params(args.config)
    report = reduced.bounds(p, _blockade(args))
    _emit(args, "bounds.txt", reduced.format_bounds(report))
    if args.out:
        reduced.write_spectrum_csv(report.spectrum, Path(args.out) / "spectrum.csv")
    if not report.blockade_ok:
        print(f"warning: blockade condition V_rr > (2 Omega/Omega1)^2 omega violated "
              f"({_fmt(p.vrr)} <= {_fmt(report.blockade_threshold)} rad/us)", file=sys.stderr)
        return EXIT_BLOCKADE_VIOLATED
    return 0


def cmd_spectrum(args) -> int:
    p = model.load_params(args.config)
    spectrum = reduced.nonhermitian_spectrum(p, _blockade(args))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        reduced.write_spectrum_csv(spectrum, Path(args.out) / "spectrum.csv")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(reduced.SPECTRUM_COLUMNS)
        for e in spectrum:
            w.writerow([_fmt(e.eigenvalue.real), _fmt(e.eigenvalue.imag), _fmt(e.overlap_DS)])
    return 0


def cmd_fit(args) -> int:
    traj = dynamics.read_trajectory_csv(args.trajectory)
    tau = args.tau
    if tau is None:
        if not args.config:
            raise ConfigError("fit needs --tau or --config (for the default tau = 5/gammaP)")
        tau = observables.default_tau(model.load_params(args.config))
    fit = observables.fit_entanglement_rate(traj, tau)
    table = observables.SweepTable(np.array([math.nan]), traj.times, traj.F[None, :], [fit], ["ok"])
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        table.write_csv(Path(args.out) / "fit.csv")
    text = "".join(f"{k} = {_fmt(v)}\n" for k, v in (
        ("F_max", fit.F_max), ("d", fit.d), ("gammaE_per_us", fit.gammaE), ("tau_us", fit.tau),
        ("rms", fit.rms_residual), ("window_start_us", fit.window[0]), ("window_end_us", fit.window[1])))
    sys.stdout.write(text)
    return 0


def _blockade(args) -> str | None:
    mode = getattr(args, "perfect_blockade", None)
    return None if mode in (None, "none") else mode


def _emit(args, name: str, text: str) -> None:
    sys.stdout.write(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / name).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydberg-dark", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False, config_required=True):
        sp.add_argument("--config", required=config_required)
        sp.add_argument("--out", required=out_required)
        sp.add_argument("--perfect-blockade", choices=("none", "surrogate", "truncate"))

    sp = sub.add_parser("simulate", help="integrate the master equation, write trajectory.csv")
    common(sp, out_required=True)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--initial", choices=INITIAL_STATES)
    sp.add_argument("--sample-every", type=float, default=0.1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run a .sweep specification")
    common(sp)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--initial", choices=INITIAL_STATES)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    for name, func, help_ in (
        ("steady", cmd_steady, "steady state from the Liouvillian null space"),
        ("bounds", cmd_bounds, "closed-form bounds and blockade check (exit 3 if violated)"),
        ("spectrum", cmd_spectrum, "non-Hermitian spectrum as re_ev,im_ev,overlap_DS"),
    ):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("fit", help="fit the entanglement rate of a trajectory CSV")
    common(sp, config_required=False)
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--tau", type=float)
    sp.set_defaults(func=cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
