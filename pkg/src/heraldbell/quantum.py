"""Exact state algebra for the heralded mapping chain.

States live on small labeled bases. A :class:`PureState` stores one
amplitude per basis label, where a label is a tuple of level tags, one per
subsystem, e.g. ``("i+", "i-")`` for the atom pair or
``("g+", "g-", "a'+", "b'-")`` after emission. Site order is always (A, B).

The atomic ground manifold ``{g+, g-}`` is mapped onto a qubit with
``g+ -> |0>`` and ``g- -> |1>``, so two-qubit density matrices use the basis
order ``(g+g+, g+g-, g-g+, g-g-)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from collections.abc import Iterable, Mapping

import numpy as np

ATOL = 1e-12
PSD_FLOOR = -1e-10

INV_SQRT2 = 1.0 / math.sqrt(2.0)

PAULI_I = np.eye(2, dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


class ZeroWeightError(ValueError):
    """A projection left nothing behind (no absorption, impossible outcome)."""


@dataclass(frozen=True)
class PureState:
    labels: tuple[tuple[str, ...], ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        labels = tuple(tuple(lab) for lab in self.labels)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if len(labels) != amps.size:
            raise ValueError("one amplitude per basis label required")
        if len(set(labels)) != len(labels):
            raise ValueError("basis labels must be distinct")
        if len({len(lab) for lab in labels}) > 1:
            raise ValueError("all labels must span the same subsystems")
        if labels and abs(np.vdot(amps, amps).real - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (norm^2 = {np.vdot(amps, amps).real!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[str, ...], complex] | Iterable, normalize=False):
        """Build a state from ``{label: amplitude}``; zero amplitudes are dropped."""
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[tuple[str, ...], complex] = {}
        for lab, amp in items:
            merged[tuple(lab)] = merged.get(tuple(lab), 0.0) + complex(amp)
        merged = {k: v for k, v in merged.items() if abs(v) > ATOL}
        if not merged:
            raise ZeroWeightError("no surviving amplitude")
        amps = np.array(list(merged.values()), dtype=complex)
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(tuple(merged), amps)

    @property
    def n_subsystems(self) -> int:
        return len(self.labels[0])

    def amplitude(self, label) -> complex:
        try:
            return complex(self.amplitudes[self.labels.index(tuple(label))])
        except ValueError:
            return 0j

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def terms(self) -> dict[tuple[str, ...], complex]:
        return dict(zip(self.labels, (complex(a) for a in self.amplitudes)))

    def overlap(self, other: "PureState") -> complex:
        """<self|other>, matching labels by name."""
        return sum(np.conj(a) * other.amplitude(lab) for lab, a in self.terms().items())

    def qubit_vector(self) -> np.ndarray:
        """Amplitude vector on the qubit basis, reading a trailing '+'/'-' as 0/1."""
        n = self.n_subsystems
        vec = np.zeros(2**n, dtype=complex)
        for lab, amp in self.terms().items():
            idx = 0
            for tag in lab:
                if tag[-1] not in "+-":
                    raise ValueError(f"level tag {tag!r} has no qubit reading")
                idx = 2 * idx + (tag[-1] == "-")
            vec[idx] += amp
        return vec


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if not np.allclose(m, m.conj().T, atol=ATOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > ATOL:
            raise ValueError("density matrix trace is not 1")
        if np.linalg.eigvalsh(m).min() < PSD_FLOOR:
            raise ValueError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, state: PureState | np.ndarray) -> "DensityMatrix":
        vec = state.qubit_vector() if isinstance(state, PureState) else np.asarray(state, dtype=complex)
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int = 4) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class MeasurementSetting:
    """Observable ``cos(angle) Z + sin(angle) X`` on one side's qubit."""

    angle: float
    side: str
    index: int

    def __post_init__(self):
        if self.side not in ("A", "B"):
            raise ValueError(f"side must be 'A' or 'B', got {self.side!r}")
        if self.index not in (0, 1):
            raise ValueError("setting index must be 0 or 1")
        object.__setattr__(self, "angle", float(self.angle) % (2 * math.pi))


@dataclass(frozen=True)
class AnalyzerOutcome:
    """Polarization-analyzer result for the heralding photon at A and at B."""

    a: str
    b: str

    def __post_init__(self):
        for out in (self.a, self.b):
            if out not in ("H", "V"):
                raise ValueError(f"analyzer outcome must be 'H' or 'V', got {out!r}")

    @classmethod
    def parse(cls, text: str) -> "AnalyzerOutcome":
        text = text.strip().upper()
        return cls(text[0], text[1])

    def __str__(self):
        return self.a + self.b


ALL_OUTCOMES = tuple(AnalyzerOutcome(a, b) for a in "HV" for b in "HV")


# --- the mapping chain ------------------------------------------------------

def initial_atom_pair() -> PureState:
    """Each atom in an equal superposition of its two storage sublevels."""
    return PureState.from_terms({(sa, sb): 0.5 for sa in ("i+", "i-") for sb in ("i+", "i-")})


def photonic_singlet() -> PureState:
    return PureState.from_terms({("a+", "b-"): INV_SQRT2, ("a-", "b+"): -INV_SQRT2})


def singlet() -> PureState:
    """Heralded target state (g+g- - g-g+)/sqrt(2)."""
    return PureState.from_terms({("g+", "g-"): INV_SQRT2, ("g-", "g+"): -INV_SQRT2})


def _sign(tag: str) -> str:
    return tag[-1]


def absorb_pair(atoms: PureState, photons: PureState) -> tuple[PureState, float]:
    """Absorb one photon at each site and keep the doubly excited branch.

    A photon of polarization ``s`` is absorbable only from ``i_s`` and lifts
    it to ``e_s``; every other branch is removed by the projection. Returns
    the renormalized excited state and the projection probability.
    """
    if atoms.n_subsystems != 2 or photons.n_subsystems != 2:
        raise ValueError("absorb_pair expects two-site atom and photon states")
    for lab in atoms.labels:
        if not all(t[0] == "i" for t in lab):
            raise ValueError("atoms must be on the {i+, i-} storage levels")
    for lab in photons.labels:
        if lab[0][0] != "a" or lab[1][0] != "b":
            raise ValueError("photons must be on the {a+-} x {b+-} modes")

    terms: dict[tuple[str, str], complex] = {}
    for (ia, ib), c_at in atoms.terms().items():
        for (pa, pb), c_ph in photons.terms().items():
            if _sign(ia) == _sign(pa) and _sign(ib) == _sign(pb):
                key = ("e" + _sign(pa), "e" + _sign(pb))
                terms[key] = terms.get(key, 0.0) + c_at * c_ph
    weight = float(sum(abs(v) ** 2 for v in terms.values()))
    if weight <= ATOL:
        raise ZeroWeightError("no absorption: no branch matches the photon polarizations")
    return PureState.from_terms(terms, normalize=True), weight


def emit(excited: PureState) -> PureState:
    """Spontaneous decay e_s -> g_s, tagging the emitted photon a'_s / b'_s."""
    for lab in excited.labels:
        if len(lab) != 2 or not all(t[0] == "e" for t in lab):
            raise ValueError("emit expects a state on {e+, e-} x {e+, e-}")
    return PureState.from_terms(
        {("g" + _sign(ea), "g" + _sign(eb), "a'" + _sign(ea), "b'" + _sign(eb)): c
         for (ea, eb), c in excited.terms().items()}
    )


# <H|s> and <V|s> for s in {+, -}: H = (+ + -)/sqrt2, V = (+ - -)/sqrt2
_ANALYZER = {("H", "+"): INV_SQRT2, ("H", "-"): INV_SQRT2,
             ("V", "+"): INV_SQRT2, ("V", "-"): -INV_SQRT2}


def emit_and_herald(excited: PureState, outcome: AnalyzerOutcome) -> tuple[PureState, float]:
    """Project the emitted photons on the analyzer outcome.

    Returns the atom-pair ground state and the outcome probability;
    probabilities over the four outcomes sum to one.
    """
    emitted = emit(excited)
    terms: dict[tuple[str, str], complex] = {}
    for (ga, gb, pa, pb), c in emitted.terms().items():
        amp = c * _ANALYZER[outcome.a, _sign(pa)] * _ANALYZER[outcome.b, _sign(pb)]
        terms[(ga, gb)] = terms.get((ga, gb), 0.0) + amp
    weight = float(sum(abs(v) ** 2 for v in terms.values()))
    if weight <= ATOL:
        raise ZeroWeightError(f"analyzer outcome {outcome} is impossible for this state")
    return PureState.from_terms(terms, normalize=True), weight


# Local unitary restoring the singlet exactly (including global phase) after
# each analyzer outcome; a V click at a site flips the relative sign there.
HERALD_CORRECTIONS = {
    "HH": np.kron(PAULI_I, PAULI_I),
    "HV": np.kron(PAULI_I, PAULI_Z),
    "VH": np.kron(PAULI_Z, PAULI_I),
    "VV": np.kron(PAULI_Z, PAULI_Z),
}


def correction(outcome: AnalyzerOutcome | str) -> np.ndarray:
    return HERALD_CORRECTIONS[str(outcome)]


def apply_unitary(state: PureState, unitary: np.ndarray) -> np.ndarray:
    return unitary @ state.qubit_vector()


# --- two-qubit mixed states and CHSH ---------------------------------------

def werner(visibility: float, target: PureState | None = None) -> DensityMatrix:
    """``V |target><target| + (1 - V) I/4``; the target defaults to the singlet."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility!r}")
    target = singlet() if target is None else target
    vec = target.qubit_vector()
    if vec.size != 4:
        raise ValueError("werner target must be a two-qubit state")
    proj = np.outer(vec, vec.conj())
    return DensityMatrix(visibility * proj + (1.0 - visibility) * np.eye(4) / 4.0)


def _eigenprojectors(theta: float) -> dict[int, np.ndarray]:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    plus = np.array([c, s], dtype=complex)
    minus = np.array([-s, c], dtype=complex)
    return {+1: np.outer(plus, plus), -1: np.outer(minus, minus)}


def born_probs(rho: DensityMatrix, theta_a: float, theta_b: float) -> dict[tuple[int, int], float]:
    """Joint outcome probabilities p(a, b) for a, b in {+1, -1}."""
    if not isinstance(rho, DensityMatrix) or rho.dim != 4:
        raise ValueError("born_probs needs a two-qubit DensityMatrix")
    pa, pb = _eigenprojectors(theta_a), _eigenprojectors(theta_b)
    out = {}
    for a in (+1, -1):
        for b in (+1, -1):
            out[a, b] = float(np.trace(rho.matrix @ np.kron(pa[a], pb[b])).real)
    return out


def correlator(rho: DensityMatrix, theta_a: float, theta_b: float) -> float:
    probs = born_probs(rho, theta_a, theta_b)
    return probs[1, 1] + probs[-1, -1] - probs[1, -1] - probs[-1, 1]


def canonical_settings() -> tuple[MeasurementSetting, ...]:
    """Angles (a0, a1, b0, b1) = (0, pi/2, 5pi/4, 3pi/4), maximal for the singlet."""
    return (
        MeasurementSetting(0.0, "A", 0),
        MeasurementSetting(math.pi / 2, "A", 1),
        MeasurementSetting(5 * math.pi / 4, "B", 0),
        MeasurementSetting(3 * math.pi / 4, "B", 1),
    )


def setting_angles(settings=None) -> tuple[tuple[float, float], tuple[float, float]]:
    settings = canonical_settings() if settings is None else settings
    alice = {s.index: s.angle for s in settings if s.side == "A"}
    bob = {s.index: s.angle for s in settings if s.side == "B"}
    if sorted(alice) != [0, 1] or sorted(bob) != [0, 1]:
        raise ValueError("need settings x=0,1 for A and y=0,1 for B")
    return (alice[0], alice[1]), (bob[0], bob[1])


def chsh(rho: DensityMatrix, settings=None) -> float:
    """S = E00 + E01 + E10 - E11."""
    (a0, a1), (b0, b1) = setting_angles(settings)
    return (correlator(rho, a0, b0) + correlator(rho, a0, b1)
            + correlator(rho, a1, b0) - correlator(rho, a1, b1))


def singlet_fidelity(rho: DensityMatrix | PureState | np.ndarray) -> float:
    target = singlet().qubit_vector()
    if isinstance(rho, DensityMatrix):
        return float(np.vdot(target, rho.matrix @ target).real)
    vec = rho.qubit_vector() if isinstance(rho, PureState) else np.asarray(rho, dtype=complex)
    return float(abs(np.vdot(target, vec)) ** 2)
