"""40Ca+ level catalog, Clebsch-Gordan coefficients and state preparation."""
from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

TERMS = {"S1/2": Fraction(1, 2), "P1/2": Fraction(1, 2), "P3/2": Fraction(3, 2),
         "D3/2": Fraction(3, 2), "D5/2": Fraction(5, 2)}

MAX_ABSORPTION_EFFICIENCY = 0.06


class AbsorptionCapWarning(UserWarning):
    pass


def _half_integer(value, name="value") -> Fraction:
    f = Fraction(value).limit_denominator(2)
    if f.denominator not in (1, 2) or abs(float(f) - float(value)) > 1e-12:
        raise ValueError(f"{name} must be an integer or half-integer, got {value!r}")
    return f


@dataclass(frozen=True)
class AtomicLevel:
    term: str
    m: Fraction

    def __post_init__(self):
        if self.term not in TERMS:
            raise ValueError(f"unknown term {self.term!r}")
        m = _half_integer(self.m, "m")
        if abs(m) > self.j or (self.j - m).denominator != 1:
            raise ValueError(f"m = {m} not allowed in {self.term}")
        object.__setattr__(self, "m", m)

    @property
    def j(self) -> Fraction:
        return TERMS[self.term]

    def __str__(self):
        return f"|{self.term[0]},{self.m:+}>"


@dataclass(frozen=True)
class Transition:
    lower: str
    upper: str
    wavelength_nm: float
    kind: str = "E1"
    role: str = ""


# Read-only catalog of the transitions used by the scheme.
TRANSITIONS = (
    Transition("S1/2", "P1/2", 397.0, role="Doppler cooling, fluorescence readout"),
    Transition("S1/2", "P3/2", 393.0, role="heralding photon"),
    Transition("D3/2", "P1/2", 866.0, role="repump"),
    Transition("D3/2", "P3/2", 850.0, role="repump"),
    Transition("D5/2", "P3/2", 854.0, role="photon absorption"),
    Transition("S1/2", "D5/2", 729.0, kind="E2", role="state preparation, shelving"),
)


@dataclass(frozen=True)
class BranchingTable:
    """Decay fractions of P3/2; the D3/2 channel is only bounded (< 1 %)."""

    to_s12: float = 0.94
    to_d52: float = 0.06
    to_d32: float = 0.0
    d32_bound: float = 0.01

    def fractions(self) -> dict[str, float]:
        return {"S1/2": self.to_s12, "D5/2": self.to_d52, "D3/2": self.to_d32}


P32_BRANCHING = BranchingTable()


def cgc(j_lower, m_lower, q, j_upper, m_upper) -> float:
    """<j_lower m_lower; 1 q | j_upper m_upper> from the Racah closed form.

    The sum is carried out in exact rational arithmetic; only the final
    square root is taken in floating point.
    """
    j1, m1 = _half_integer(j_lower, "j_lower"), _half_integer(m_lower, "m_lower")
    j, m = _half_integer(j_upper, "j_upper"), _half_integer(m_upper, "m_upper")
    q = _half_integer(q, "q")
    j2 = Fraction(1)
    if j1 < 0 or j < 0:
        raise ValueError("angular momenta must be nonnegative")
    if q not in (-1, 0, 1):
        raise ValueError(f"dipole component q must be -1, 0 or +1, got {q}")
    if abs(j - j1) > 1:
        raise ValueError(f"dipole coupling needs |j_upper - j_lower| <= 1 (got {j1} -> {j})")
    if (j1 - m1).denominator != 1 or (j - m).denominator != 1 or (j1 + j).denominator != 1:
        raise ValueError("inconsistent half-integer projections")
    if m != m1 + q or abs(m1) > j1 or abs(m) > j or j1 + j < 1:
        return 0.0
    return _racah(j1, m1, j2, q, j, m)


def _racah(j1, m1, j2, m2, j, m) -> float:
    f = math.factorial
    pref = Fraction(int(2 * j + 1) * f(int(j + j1 - j2)) * f(int(j - j1 + j2)) * f(int(j1 + j2 - j)),
                    f(int(j1 + j2 + j + 1)))
    pref *= (f(int(j + m)) * f(int(j - m)) * f(int(j1 - m1)) * f(int(j1 + m1))
             * f(int(j2 - m2)) * f(int(j2 + m2)))
    total = Fraction(0)
    for k in range(0, int(j1 + j2 - j) + 1):
        args = (k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k)
        if any(a < 0 for a in args):
            continue
        denom = 1
        for a in args:
            denom *= f(int(a))
        total += Fraction((-1) ** k, denom)
    if total == 0:
        return 0.0
    sq = pref * total * total
    return math.copysign(math.sqrt(sq.numerator) / math.sqrt(sq.denominator), total)


def transition_table(transitions=TRANSITIONS) -> list[dict]:
    """All dipole CGCs for the catalog, one row per (m_lower, q)."""
    rows = []
    for tr in transitions:
        if tr.kind != "E1":
            continue
        jl, ju = TERMS[tr.lower], TERMS[tr.upper]
        for ml in _projections(jl):
            for q in (-1, 0, 1):
                mu = ml + q
                if abs(mu) > ju:
                    continue
                rows.append({"term": f"{tr.lower}-{tr.upper}", "j": str(jl), "m_lower": str(ml),
                             "q": q, "m_upper": str(mu), "cgc": cgc(jl, ml, q, ju, mu)})
    return rows


def _projections(j: Fraction) -> list[Fraction]:
    return [-j + k for k in range(int(2 * j) + 1)]


def transition_table_csv(transitions=TRANSITIONS) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["term", "j", "m_lower", "q", "m_upper", "cgc"],
                            lineterminator="\n")
    writer.writeheader()
    for row in transition_table(transitions):
        writer.writerow({**row, "cgc": repr(row["cgc"])})
    return buf.getvalue()


class Orientation(str, enum.Enum):
    PARALLEL = "k||B"
    PERPENDICULAR = "k_|_B"


class Polarization(str, enum.Enum):
    SIGMA_PLUS = "sigma+"
    SIGMA_MINUS = "sigma-"
    PI = "pi"
    PARALLEL_B = "eps||B"
    PERPENDICULAR_B = "eps_|_B"


_CIRCULAR = {Polarization.SIGMA_PLUS, Polarization.SIGMA_MINUS}


@dataclass(frozen=True)
class TransitionGeometry:
    orientation: Orientation
    polarization: Polarization

    def __post_init__(self):
        orient, pol = Orientation(self.orientation), Polarization(self.polarization)
        circular = pol in _CIRCULAR
        if circular != (orient is Orientation.PARALLEL):
            raise ValueError(f"polarization {pol.value} is not available for {orient.value}")
        object.__setattr__(self, "orientation", orient)
        object.__setattr__(self, "polarization", pol)


@dataclass(frozen=True)
class SelectionRule:
    delta_m: frozenset
    coherent_superposition: bool = False


def allowed_transitions(geometry: TransitionGeometry) -> SelectionRule:
    pol = geometry.polarization
    if pol is Polarization.SIGMA_PLUS:
        return SelectionRule(frozenset({+1}))
    if pol is Polarization.SIGMA_MINUS:
        return SelectionRule(frozenset({-1}))
    if pol in (Polarization.PI, Polarization.PARALLEL_B):
        return SelectionRule(frozenset({0}))
    return SelectionRule(frozenset({+1, -1}), coherent_superposition=True)


# --- state preparation ------------------------------------------------------

PREP_LEVELS = (AtomicLevel("S1/2", Fraction(-1, 2)), AtomicLevel("S1/2", Fraction(1, 2)),
               AtomicLevel("D5/2", Fraction(-5, 2)), AtomicLevel("D5/2", Fraction(5, 2)))


@dataclass(frozen=True)
class PulseStep:
    start: AtomicLevel
    end: AtomicLevel
    area: float
    duration: float
    drive: str

    @property
    def label(self) -> str:
        return f"{self.start}->{self.end}"


@dataclass(frozen=True)
class PulseSequence:
    steps: tuple[PulseStep, ...]

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.steps)

    def unitary(self) -> np.ndarray:
        """Ideal resonant rotations on the (S-1/2, S+1/2, D-5/2, D+5/2) space."""
        u = np.eye(4, dtype=complex)
        for step in self.steps:
            u = _rotation(PREP_LEVELS.index(step.start), PREP_LEVELS.index(step.end), step.area) @ u
        return u

    def apply(self, start: AtomicLevel = PREP_LEVELS[0]) -> dict[AtomicLevel, complex]:
        vec = np.zeros(4, dtype=complex)
        vec[PREP_LEVELS.index(start)] = 1.0
        out = self.unitary() @ vec
        return {lev: complex(a) for lev, a in zip(PREP_LEVELS, out) if abs(a) > 1e-15}


def _rotation(i: int, k: int, area: float) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    c, s = math.cos(area / 2), math.sin(area / 2)
    u[i, i] = u[k, k] = c
    u[i, k] = u[k, i] = -1j * s
    return u


def preparation_sequence(budget: float = 24e-6) -> PulseSequence:
    """Three pulses producing (|D,-5/2> + |D,+5/2>)/sqrt(2) up to phases.

    Step durations split ``budget`` evenly; only the total is constrained.
    """
    if not 0 < budget < 25e-6:
        raise ValueError("preparation budget must be positive and below 25 us")
    s_minus, s_plus, d_minus, d_plus = PREP_LEVELS
    dt = budget / 3
    return PulseSequence((
        PulseStep(s_minus, d_minus, math.pi / 2, dt, "729 nm"),
        PulseStep(s_minus, s_plus, math.pi, dt, "radio frequency"),
        PulseStep(s_plus, d_plus, math.pi, dt, "729 nm"),
    ))


def max_absorption_efficiency() -> float:
    return MAX_ABSORPTION_EFFICIENCY


def check_absorption_efficiency(eta_abs: float, allow_above_cap: bool = False) -> bool:
    """True if ``eta_abs`` respects the oscillator-strength cap; warns otherwise."""
    ok = eta_abs <= MAX_ABSORPTION_EFFICIENCY
    if not ok and not allow_above_cap:
        warnings.warn(f"eta_abs = {eta_abs} exceeds the {MAX_ABSORPTION_EFFICIENCY} cap",
                      AbsorptionCapWarning, stacklevel=2)
    return ok
