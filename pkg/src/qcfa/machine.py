"""The 2QCFA tuple (Q, S, Sigma, Theta, delta, q0, s0, S_acc, S_rej) and its validator."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .qcore import Measurement, UnitaryOp, unitarity_defect, UNITARITY_TOL

LEFT_END = "¢"
RIGHT_END = "$"
ENDMARKERS = (LEFT_END, RIGHT_END)
DIRECTIONS = (-1, 0, 1)


class Response(NamedTuple):
    next: str
    move: int


@dataclass(frozen=True)
class UnitaryAction:
    """Theta(s, sigma) = U together with delta(s, sigma) = (next, move)."""

    op: UnitaryOp
    next: str
    move: int

    @property
    def responses(self) -> tuple[Response, ...]:
        return (Response(self.next, self.move),)


@dataclass(frozen=True)
class MeasureAction:
    """Theta(s, sigma) is a measurement; responses[j] answers outcome block j."""

    measurement: Measurement
    responses: tuple[Response, ...]

    def __post_init__(self):
        object.__setattr__(self, "responses", tuple(Response(*r) for r in self.responses))


QuantumAction = Union[UnitaryAction, MeasureAction]


class StateCounts(NamedTuple):
    qs: int
    cs: int


@dataclass(frozen=True)
class Machine:
    name: str
    quantum_states: tuple[str, ...]
    classical_states: tuple[str, ...]
    alphabet: tuple[str, ...]
    transitions: Mapping[tuple[str, str], QuantumAction]
    initial_quantum: str
    initial_classical: str
    accepting: frozenset[str]
    rejecting: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "quantum_states", tuple(self.quantum_states))
        object.__setattr__(self, "classical_states", tuple(self.classical_states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "transitions", dict(self.transitions))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        object.__setattr__(self, "rejecting", frozenset(self.rejecting))

    @property
    def dim(self) -> int:
        return len(self.quantum_states)

    @property
    def tape_alphabet(self) -> tuple[str, ...]:
        return (LEFT_END, *self.alphabet, RIGHT_END)

    def q_index(self, name: str) -> int:
        return self.quantum_states.index(name)

    def is_halting(self, s: str) -> bool:
        return s in self.accepting or s in self.rejecting

    def working_states(self) -> list[str]:
        return [s for s in self.classical_states if not self.is_halting(s)]

    def action(self, s: str, symbol: str) -> QuantumAction:
        return self.transitions[(s, symbol)]

    def renamed(self, name: str) -> "Machine":
        return replace(self, name=name)

    __hash__ = None  # type: ignore[assignment]


def rename_symbols(m: Machine, mapping: Mapping[str, str], name: str | None = None) -> Machine:
    """Same machine over a relabelled input alphabet; endmarkers are kept."""
    ren = {a: mapping.get(a, a) for a in m.alphabet}
    if len(set(ren.values())) != len(ren):
        raise ValueError("symbol mapping is not injective")
    table = {(s, ren.get(sym, sym)): act for (s, sym), act in m.transitions.items()}
    return replace(m, name=name or m.name, alphabet=tuple(ren[a] for a in m.alphabet), transitions=table)


def state_counts(m: Machine) -> StateCounts:
    return StateCounts(len(m.quantum_states), len(m.classical_states))


# -- tape ------------------------------------------------------------------

class AlphabetError(ValueError):
    """The input contains a symbol outside the machine's alphabet."""


def as_word(text: str | Sequence[str], alphabet: Sequence[str]) -> tuple[str, ...]:
    """Split ``text`` into alphabet symbols.

    Single-character alphabets read ``text`` character by character; otherwise
    symbols are whitespace separated (``"a b1 a b2"``). Sequences pass through.
    """
    if isinstance(text, str):
        if all(len(a) == 1 for a in alphabet) and not any(c.isspace() for c in text):
            word = tuple(text)
        else:
            word = tuple(text.split())
    else:
        word = tuple(text)
    bad = sorted({c for c in word if c not in alphabet})
    if bad:
        raise AlphabetError(f"symbols {bad} are not in the alphabet {list(alphabet)}")
    return word


def format_word(word: Sequence[str]) -> str:
    if all(len(c) == 1 for c in word):
        return "".join(word)
    return " ".join(word)


def tape(word: Sequence[str]) -> tuple[str, ...]:
    return (LEFT_END, *word, RIGHT_END)


def tape_symbol(word: Sequence[str], p: int) -> str:
    n = len(word)
    if not 0 <= p <= n + 1:
        raise IndexError(f"tape position {p} outside 0..{n + 1}")
    if p == 0:
        return LEFT_END
    if p == n + 1:
        return RIGHT_END
    return word[p - 1]


# -- validation ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    state: str | None = None
    symbol: str | None = None

    def __str__(self) -> str:
        where = ""
        if self.state is not None:
            where = f" at ({self.state}, {self.symbol})" if self.symbol is not None else f" at {self.state}"
        return f"{self.kind}{where}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind: str, message: str, state: str | None = None, symbol: str | None = None) -> None:
        self.violations.append(Violation(kind, message, state, symbol))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(str(v) for v in self.violations)


class InvalidMachine(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__(str(report))
        self.report = report


def _duplicates(items: Iterable[str]) -> list[str]:
    seen, dup = set(), []
    for x in items:
        if x in seen:
            dup.append(x)
        seen.add(x)
    return dup


def validate(m: Machine) -> ValidationReport:
    """Check every well-formedness rule; an empty report means the machine is usable."""
    r = ValidationReport()
    for what, names in (("quantum", m.quantum_states), ("classical", m.classical_states), ("alphabet", m.alphabet)):
        for d in _duplicates(names):
            r.add("duplicate-name", f"{what} name {d!r} is listed twice")
    if not m.quantum_states:
        r.add("empty", "no quantum states")
    if not m.classical_states:
        r.add("empty", "no classical states")
    for a in m.alphabet:
        if a in ENDMARKERS or not a or any(c.isspace() for c in a):
            r.add("bad-symbol", f"{a!r} cannot be an input symbol")
    S = set(m.classical_states)
    if m.initial_quantum not in m.quantum_states:
        r.add("initial-state", f"initial quantum state {m.initial_quantum!r} is not in Q")
    if m.initial_classical not in S:
        r.add("initial-state", f"initial classical state {m.initial_classical!r} is not in S")
    for s in sorted((m.accepting | m.rejecting) - S):
        r.add("unknown-state", f"halting state {s!r} is not in S")
    for s in sorted(m.accepting & m.rejecting):
        r.add("acc-rej-overlap", f"{s!r} is both accepting and rejecting")

    gamma = m.tape_alphabet
    working = [s for s in m.classical_states if not m.is_halting(s)]
    for s in working:
        for sym in gamma:
            if (s, sym) not in m.transitions:
                r.add("missing-transition", "Theta/delta undefined", s, sym)
    for (s, sym), act in m.transitions.items():
        if s not in S:
            r.add("unknown-state", f"transition from unknown state {s!r}", s, sym)
            continue
        if sym not in gamma:
            r.add("unknown-symbol", f"transition on unknown symbol {sym!r}", s, sym)
            continue
        if m.is_halting(s):
            r.add("halting-transition", "halting states have no transitions", s, sym)
            continue
        if isinstance(act, UnitaryAction):
            if act.op.dim != m.dim:
                r.add("dimension", f"unitary is {act.op.dim}-dim, machine has {m.dim} quantum states", s, sym)
            else:
                defect = unitarity_defect(act.op)
                if defect > UNITARITY_TOL:
                    r.add("not-unitary", f"max|U^dag U - I| = {defect:.3g}", s, sym)
        elif isinstance(act, MeasureAction):
            meas = act.measurement
            if meas.dim != m.dim:
                r.add("dimension", f"measurement is {meas.dim}-dim, machine has {m.dim} quantum states", s, sym)
            for p in meas.problems():
                r.add("bad-measurement", p, s, sym)
            if len(act.responses) != meas.n_outcomes:
                r.add("incomplete-outcomes",
                      f"{meas.n_outcomes} outcome blocks but {len(act.responses)} responses", s, sym)
        else:
            r.add("bad-action", f"unknown action type {type(act).__name__}", s, sym)
            continue
        for nxt, move in act.responses:
            if nxt not in S:
                r.add("unknown-state", f"transition targets unknown state {nxt!r}", s, sym)
            if move not in DIRECTIONS:
                r.add("bad-direction", f"move {move!r} is not one of -1, 0, 1", s, sym)
            elif sym == LEFT_END and move == -1:
                r.add("head-constraint", "cannot move left off the left endmarker", s, sym)
            elif sym == RIGHT_END and move == 1:
                r.add("head-constraint", "cannot move right off the right endmarker", s, sym)
    return r


def check(m: Machine) -> Machine:
    """Return ``m`` unchanged or raise :class:`InvalidMachine`."""
    report = validate(m)
    if not report.ok:
        raise InvalidMachine(report)
    return m


class MachineBuilder:
    """Incremental construction of a :class:`Machine`.

    ``symbols`` arguments accept a single symbol or an iterable of symbols.
    Classical states are registered in first-use order.
    """

    def __init__(self, name: str, quantum_states: Sequence[str], alphabet: Sequence[str]):
        self.name = name
        self.quantum_states = tuple(quantum_states)
        self.alphabet = tuple(alphabet)
        self.states: dict[str, None] = {}
        self.transitions: dict[tuple[str, str], QuantumAction] = {}

    def state(self, *names: str) -> None:
        for n in names:
            self.states.setdefault(n, None)

    def _symbols(self, symbols: str | Iterable[str]) -> list[str]:
        if isinstance(symbols, str):
            return [symbols]
        return list(symbols)

    def unitary(self, s: str, symbols: str | Iterable[str], op: UnitaryOp, nxt: str, move: int) -> None:
        self.state(s, nxt)
        act = UnitaryAction(op, nxt, move)
        for sym in self._symbols(symbols):
            self.transitions[(s, sym)] = act

    def measure(self, s: str, symbols: str | Iterable[str], measurement: Measurement,
                responses: Sequence[tuple[str, int]]) -> None:
        self.state(s, *(r[0] for r in responses))
        act = MeasureAction(measurement, tuple(responses))
        for sym in self._symbols(symbols):
            self.transitions[(s, sym)] = act

    def set(self, s: str, symbol: str, action: QuantumAction) -> None:
        self.state(s, *(r.next for r in action.responses))
        self.transitions[(s, symbol)] = action

    def build(self, q0: str, s0: str, accepting: Iterable[str], rejecting: Iterable[str]) -> Machine:
        accepting, rejecting = list(accepting), list(rejecting)
        self.state(s0, *accepting, *rejecting)
        return Machine(self.name, self.quantum_states, tuple(self.states), self.alphabet,
                       self.transitions, q0, s0, frozenset(accepting), frozenset(rejecting))
