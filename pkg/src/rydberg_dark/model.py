"""Physical model of two driven four-level atoms with a Rydberg-Rydberg shift.

All frequencies are stored as angular frequencies in rad/us; times are in us.
Configuration files and the :meth:`ModelParams.from_mhz` constructor take the
conventional "value / 2pi in MHz" numbers instead.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .qcore import (
    PAIR_DIM,
    SINGLE_DIM,
    LevelIndex,
    basis,
    embed,
    ket,
    normalized,
    tensor,
)

TWO_PI = 2.0 * math.pi

FIELDS = ("omega1", "omega2", "omega_raman", "delta", "gamma0", "gamma1", "gammaR", "vrr")
CONFIG_KEYS = tuple(f"{name}_mhz" for name in FIELDS)

G0, G1, P, R = LevelIndex.G0, LevelIndex.G1, LevelIndex.P, LevelIndex.R
RR_INDEX = PAIR_DIM - 1

# finite stand-in for V_rr -> infinity, in units of Omega
SURROGATE_BLOCKADE_FACTOR = 1e3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Couplings and decay rates, angular frequencies in rad/us.

    Attributes
    ----------
    omega1, omega2 : float
        Rabi frequencies on |1>-|p> and |p>-|r>.
    omega_raman : float
        Raman coupling between |0> and |1>.
    delta : float
        Detuning of |p>; enters the single-atom Hamiltonian as ``-delta |p><p|``.
    gamma0, gamma1 : float
        Decay rates |p> -> |0> and |p> -> |1>.
    gammaR : float
        Rydberg decay rate |r> -> |p>.
    vrr : float
        Energy shift of |rr>.
    """

    omega1: float
    omega2: float
    omega_raman: float
    delta: float = 0.0
    gamma0: float = 0.0
    gamma1: float = 0.0
    gammaR: float = 0.0
    vrr: float = 0.0

    def __post_init__(self):
        for name in FIELDS:
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val}")
            if name != "delta" and val < 0:
                raise ValueError(f"{name} must be non-negative, got {val}")
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValueError("omega1 and omega2 must be strictly positive (the dark state needs both)")

    @classmethod
    def from_mhz(cls, **values: float) -> "ModelParams":
        """Build from ``frequency / 2pi`` values in MHz, keyed by field name."""
        unknown = set(values) - set(FIELDS)
        if unknown:
            raise TypeError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**{k: TWO_PI * float(v) for k, v in values.items()})

    def to_mhz(self) -> dict[str, float]:
        return {name: getattr(self, name) / TWO_PI for name in FIELDS}

    def replace(self, **changes: float) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    @property
    def Omega(self) -> float:
        return math.hypot(self.omega1, self.omega2)

    @property
    def gammaP(self) -> float:
        return self.gamma0 + self.gamma1

    @property
    def epsilon(self) -> float:
        return self.omega2 / self.omega1

    @property
    def xi(self) -> float:
        return self.omega_raman * self.omega1 / self.Omega**2


def blockade_threshold(p: ModelParams) -> float:
    """Right-hand side of the finite-blockade condition, ``(2 Omega / Omega1)^2 omega``."""
    return (2.0 * p.Omega / p.omega1) ** 2 * p.omega_raman


def blockade_condition(p: ModelParams) -> bool:
    return p.vrr > blockade_threshold(p)


def perfect_blockade_surrogate(p: ModelParams) -> ModelParams:
    return p.replace(vrr=SURROGATE_BLOCKADE_FACTOR * p.Omega)


# --- configuration files ---------------------------------------------------


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def params_from_mapping(values: dict[str, str], source: str = "<config>") -> ModelParams:
    """Resolve the eight ``*_mhz`` keys; every one is required."""
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required parameter key(s): {', '.join(missing)}")
    mhz = {}
    for name, key in zip(FIELDS, CONFIG_KEYS):
        try:
            mhz[name] = float(values[key])
        except ValueError:
            raise ConfigError(f"{source}: key {key!r} has non-numeric value {values[key]!r}") from None
    try:
        return ModelParams.from_mhz(**mhz)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_params(path: str | Path) -> ModelParams:
    path = Path(path)
    values = parse_key_values(path.read_text(), str(path))
    unknown = [k for k in values if k not in CONFIG_KEYS]
    if unknown:
        raise ConfigError(f"{path}: unknown key(s): {', '.join(unknown)}")
    return params_from_mapping(values, str(path))


def format_params(p: ModelParams) -> str:
    mhz = p.to_mhz()
    return "".join(f"{key} = {mhz[name]!r}\n" for name, key in zip(FIELDS, CONFIG_KEYS))


def save_params(p: ModelParams, path: str | Path) -> None:
    Path(path).write_text(format_params(p))


# --- operators ----------------------------------------------------------------


def _outer(i: int, j: int) -> np.ndarray:
    m = np.zeros((SINGLE_DIM, SINGLE_DIM), dtype=complex)
    m[i, j] = 1.0
    return m


def build_single_atom_hamiltonian(p: ModelParams) -> np.ndarray:
    """``omega |1><0| + Omega1 |1><p| + Omega2 |p><r| + h.c. - delta |p><p|``."""
    h = p.omega_raman * _outer(G1, G0) + p.omega1 * _outer(G1, P) + p.omega2 * _outer(P, R)
    h = h + h.conj().T
    h[P, P] = -p.delta
    return h


def build_total_hamiltonian(p: ModelParams) -> np.ndarray:
    h = build_single_atom_hamiltonian(p)
    H = embed(h, 1) + embed(h, 2)
    H[RR_INDEX, RR_INDEX] += p.vrr
    return H


def build_jumps(p: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Six jump operators, ordered C0, C1, CR for atom 1 then atom 2."""
    single = (
        ("C0", math.sqrt(p.gamma0) * _outer(G0, P)),
        ("C1", math.sqrt(p.gamma1) * _outer(G1, P)),
        ("CR", math.sqrt(p.gammaR) * _outer(P, R)),
    )
    return [(f"{label}_{atom}", embed(op, atom)) for atom in (1, 2) for label, op in single]


def jump_operators(p: ModelParams) -> list[np.ndarray]:
    return [op for _, op in build_jumps(p)]


# --- named states --------------------------------------------------------------


def dark_state(p: ModelParams) -> np.ndarray:
    """Single-atom EIT dark state ``(Omega2 |1> - Omega1 |r>) / Omega``."""
    return (p.omega2 * basis(G1) - p.omega1 * basis(R)) / p.Omega


def singlet(a: int, b: int) -> np.ndarray:
    """``(|ab> - |ba>) / sqrt(2)`` for two single-atom levels."""
    return (ket(a, b) - ket(b, a)) / math.sqrt(2.0)


def triplet(a: int, b: int) -> np.ndarray:
    """``(|ab> + |ba>) / sqrt(2)``; for ``a == b`` this is ``sqrt(2) |aa>``."""
    return (ket(a, b) + ket(b, a)) / math.sqrt(2.0)


def _dark_ground_states(p: ModelParams) -> dict[str, np.ndarray]:
    d = dark_state(p)
    z = basis(G0)
    ds = (tensor(d, z) - tensor(z, d)) / math.sqrt(2.0)
    return {
        "T0": tensor(d, d),
        "T1": (tensor(d, z) + tensor(z, d)) / math.sqrt(2.0),
        "T2": tensor(z, z),
        "T3": ds,
        "DS": ds,
    }


def supplementary_dark_states(p: ModelParams, literal: bool = False) -> dict[str, np.ndarray]:
    """Three null states ``D1, D2, D3`` of the resonant pair Hamiltonian and ``Dminus``.

    ``D3`` is built with the un-normalized symmetric combinations
    ``|ij> + |ji>`` for the |1r> and |p0> terms, which makes it an exact null
    vector. With ``literal=True`` the normalized triplets are used instead; that
    variant is *not* annihilated by the Hamiltonian and is kept only so the
    difference can be checked. As omega -> 0, Dminus tends to DS.
    """
    o1, o2, w = p.omega1, p.omega2, p.omega_raman
    d1 = o1 * o2 * singlet(G1, P) - (o2**2 - w**2) * singlet(P, R) + o1 * w * singlet(R, G0)
    d2 = o1 * singlet(G1, P) - o2 * singlet(P, R) + w * singlet(G1, G0)
    sym = 1.0 if literal else math.sqrt(2.0)
    d3 = (
        (o2**2 - o1**2 - w**2) * ket(G1, G1)
        - sym * o1 * o2 * triplet(G1, R)
        + o1**2 * ket(P, P)
        + sym * o1 * w * triplet(P, G0)
        - (o2**2 - w**2) * ket(G0, G0)
    )
    d1, d2, d3 = normalized(d1), normalized(d2), normalized(d3)
    diff = d1 - d2
    # D1 and D2 coincide at omega = 0; Dminus is then taken as its limit, DS.
    dminus = normalized(diff) if np.linalg.norm(diff) > 1e-12 else _dark_ground_states(p)["DS"]
    return {"D1": d1, "D2": d2, "D3": d3, "Dminus": dminus}


def named_states(p: ModelParams) -> dict[str, np.ndarray]:
    """DS, T0..T3 (T3 is DS), D1, D2, D3 and Dminus, all normalized pair states."""
    return {**_dark_ground_states(p), **supplementary_dark_states(p)}


@lru_cache(maxsize=256)
def _cached_effective_basis(p: ModelParams) -> np.ndarray:
    s = _dark_ground_states(p)
    b = np.column_stack([s["T0"], s["T1"], s["T2"], s["T3"]])
    b.setflags(write=False)
    return b


def effective_basis(p: ModelParams) -> np.ndarray:
    """16x4 isometry whose columns are T0, T1, T2, T3."""
    return _cached_effective_basis(p)
