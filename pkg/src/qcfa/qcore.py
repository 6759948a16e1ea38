"""Dense complex linear algebra for the quantum register of a 2QCFA.

States are normalized amplitude vectors, unitaries are dense matrices and
measurements are partitions of the computational basis into outcome blocks.
Everything here is immutable once built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

UNITARITY_TOL = 1e-10
NORM_TOL = 1e-10
#: measurement branches below this probability are not spawned
ZERO_PROB = 1e-14

SQRT2_PI = math.sqrt(2.0) * math.pi

# symbolic angle units understood by the machine file format
ANGLE_UNITS = {"sqrt2_pi": SQRT2_PI, "pi": math.pi}


class DimensionError(ValueError):
    """Operator and state dimensions disagree, or an index is out of range."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class StateVector:
    """A normalized pure state over ``dim`` basis states."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes: Iterable[complex], *, normalize: bool = False):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size == 0:
            raise DimensionError("state vector needs at least one amplitude")
        norm = float(np.linalg.norm(amps))
        if normalize:
            if norm == 0.0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        elif abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state vector has norm {norm!r}, expected 1")
        self.amplitudes = _frozen(amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self) -> str:
        return f"StateVector({self.amplitudes.tolist()!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateVector):
            return NotImplemented
        return np.array_equal(self.amplitudes, other.amplitudes)

    __hash__ = None  # type: ignore[assignment]


def basis_state(i: int, dim: int) -> StateVector:
    if not 0 <= i < dim:
        raise DimensionError(f"basis index {i} out of range for dim {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[i] = 1.0
    return StateVector(amps)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    """A dim x dim complex matrix.

    ``form`` optionally records how the matrix was built so that it can be
    written back symbolically, e.g. ``("rotation", "sqrt2_pi", Fraction(1), 0, 1)``,
    ``("swap", 0, 2)`` or ``("identity",)``. Unitarity is not checked here;
    see :func:`unitarity_defect`.
    """

    matrix: np.ndarray
    form: tuple | None = field(default=None)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise DimensionError(f"unitary must be a non-empty square matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "UnitaryOp") -> "UnitaryOp":
        if other.dim != self.dim:
            raise DimensionError("cannot compose unitaries of different dimension")
        return UnitaryOp(self.matrix @ other.matrix)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UnitaryOp):
            return NotImplemented
        return self.form == other.form and np.array_equal(self.matrix, other.matrix)

    __hash__ = None  # type: ignore[assignment]


def _check_index(i: int, dim: int) -> None:
    if not (isinstance(i, (int, np.integer)) and 0 <= i < dim):
        raise DimensionError(f"basis index {i!r} out of range for dim {dim}")


def identity_op(dim: int) -> UnitaryOp:
    return UnitaryOp(np.eye(dim, dtype=complex), ("identity",))


def rotation_op(theta: float, i: int, j: int, dim: int, *, form: tuple | None = None) -> UnitaryOp:
    """Givens rotation by ``theta`` in the (i, j) coordinate plane.

    On coordinates (i, j) it acts as ``[[cos, -sin], [sin, cos]]``; every other
    basis state is left alone.
    """
    _check_index(i, dim)
    _check_index(j, dim)
    if i == j:
        raise DimensionError("rotation plane needs two distinct indices")
    c, s = math.cos(theta), math.sin(theta)
    m = np.eye(dim, dtype=complex)
    m[i, i] = c
    m[j, j] = c
    m[i, j] = -s
    m[j, i] = s
    return UnitaryOp(m, form)


def symbolic_rotation(coeff: Fraction | int | str, unit: str, i: int, j: int, dim: int) -> UnitaryOp:
    """Rotation by ``coeff * unit`` where unit is one of :data:`ANGLE_UNITS`.

    The angle is always evaluated as ``float(coeff) * unit_value`` so a
    machine read back from a file reproduces the same doubles.
    """
    if unit not in ANGLE_UNITS:
        raise ValueError(f"unknown angle unit {unit!r}")
    coeff = Fraction(coeff)
    theta = float(coeff) * ANGLE_UNITS[unit]
    return rotation_op(theta, i, j, dim, form=("rotation", unit, coeff, i, j))


def basis_swap_op(i: int, j: int, dim: int) -> UnitaryOp:
    """Permutation matrix exchanging basis states i and j."""
    _check_index(i, dim)
    _check_index(j, dim)
    if i == j:
        return identity_op(dim)
    m = np.eye(dim, dtype=complex)
    m[[i, j]] = m[[j, i]]
    return UnitaryOp(m, ("swap", i, j))


def embed_op(u: UnitaryOp, full_dim: int, placement: Sequence[int]) -> UnitaryOp:
    """Act as ``u`` on the basis states listed in ``placement`` and as the
    identity on all others.

    ``placement[k]`` is the index in the large space of ``u``'s k-th basis state.
    """
    placement = [int(p) for p in placement]
    if len(placement) != u.dim:
        raise DimensionError(f"placement has {len(placement)} entries for a {u.dim}-dim operator")
    if len(set(placement)) != len(placement):
        raise DimensionError("placement is not injective")
    for p in placement:
        _check_index(p, full_dim)
    m = np.eye(full_dim, dtype=complex)
    idx = np.array(placement)
    m[np.ix_(idx, idx)] = u.matrix
    form = None
    if u.form is not None:
        kind = u.form[0]
        if kind == "identity":
            form = ("identity",)
        elif kind == "swap":
            form = ("swap", placement[u.form[1]], placement[u.form[2]])
        elif kind == "rotation":
            form = ("rotation", u.form[1], u.form[2], placement[u.form[3]], placement[u.form[4]])
    return UnitaryOp(m, form)


def unitarity_defect(u: UnitaryOp) -> float:
    """max-norm of U^dagger U - I."""
    m = u.matrix
    return float(np.max(np.abs(m.conj().T @ m - np.eye(u.dim))))


def is_unitary(u: UnitaryOp, tol: float = UNITARITY_TOL) -> bool:
    return unitarity_defect(u) <= tol


def apply(u: UnitaryOp, psi: StateVector) -> StateVector:
    if u.dim != psi.dim:
        raise DimensionError(f"operator dim {u.dim} does not match state dim {psi.dim}")
    out = StateVector.__new__(StateVector)
    out.amplitudes = _frozen(u.matrix @ psi.amplitudes)
    return out


@dataclass(frozen=True)
class Measurement:
    """Projective measurement whose projectors are spans of basis blocks.

    Block ``j`` (its position in ``blocks``) is the outcome label. Construction
    does not insist on a partition so that malformed machine files can be
    reported by the validator; :meth:`problems` lists what is wrong.
    """

    blocks: tuple[tuple[int, ...], ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(int(i) for i in b) for b in self.blocks))

    def problems(self) -> list[str]:
        out = []
        seen: dict[int, int] = {}
        for label, block in enumerate(self.blocks):
            if not block:
                out.append(f"block {label} is empty")
            for i in block:
                if not 0 <= i < self.dim:
                    out.append(f"block {label} references basis index {i} outside 0..{self.dim - 1}")
                elif i in seen:
                    out.append(f"basis index {i} appears in blocks {seen[i]} and {label}")
                else:
                    seen[i] = label
        missing = sorted(set(range(self.dim)) - set(seen))
        if missing:
            out.append(f"basis indices {missing} are not covered by any block")
        return out

    def projector(self, label: int) -> np.ndarray:
        p = np.zeros((self.dim, self.dim))
        for i in self.blocks[label]:
            p[i, i] = 1.0
        return p

    @property
    def n_outcomes(self) -> int:
        return len(self.blocks)


def basis_measurement(dim: int) -> Measurement:
    """Full computational-basis measurement, outcome j <-> basis state j."""
    return Measurement(tuple((i,) for i in range(dim)), dim)


@dataclass(frozen=True)
class Outcome:
    label: int
    probability: float
    state: StateVector


@dataclass(frozen=True)
class OutcomeDistribution:
    outcomes: tuple[Outcome, ...]
    #: total probability of the branches omitted for being below ZERO_PROB
    discarded: float = 0.0

    def probabilities(self) -> dict[int, float]:
        return {o.label: o.probability for o in self.outcomes}


def measure(m: Measurement, psi: StateVector, cutoff: float = ZERO_PROB) -> OutcomeDistribution:
    if m.dim != psi.dim:
        raise DimensionError(f"measurement dim {m.dim} does not match state dim {psi.dim}")
    amps = psi.amplitudes
    outcomes = []
    discarded = 0.0
    for label, block in enumerate(m.blocks):
        idx = list(block)
        part = amps[idx]
        prob = float(np.vdot(part, part).real)
        if prob < cutoff:
            discarded += prob
            continue
        collapsed = np.zeros_like(amps)
        collapsed[idx] = part / math.sqrt(prob)
        st = StateVector.__new__(StateVector)
        st.amplitudes = _frozen(collapsed)
        outcomes.append(Outcome(label, prob, st))
    return OutcomeDistribution(tuple(outcomes), discarded)


def phase_distance(psi1: StateVector, psi2: StateVector) -> float:
    """min over unit phases phi of ||psi1 - phi * psi2||."""
    if psi1.dim != psi2.dim:
        raise DimensionError("states have different dimensions")
    a, b = psi1.amplitudes, psi2.amplitudes
    ov = np.vdot(b, a)
    mag = abs(ov)
    phase = ov / mag if mag > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


def equal_up_to_phase(psi1: StateVector, psi2: StateVector, tol: float = 1e-9) -> bool:
    # explicit aligned difference instead of 1 - |<a|b>|; the latter cannot
    # resolve tolerances below ~1e-8 in double precision
    return phase_distance(psi1, psi2) <= tol
