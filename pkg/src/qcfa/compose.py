"""Closure constructions: machine-to-machine combinators with state-count accounting.

Composite machines live on the direct sum Q1 (+) Q2. Operators of each part are
embedded as identity on the other part; measurements of each part gain one
extra block covering the other part, which is never observed (the state lies
in one summand at a time) and simply reuses the response of block 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import qcore
from .machine import (LEFT_END, RIGHT_END, MeasureAction, Machine, QuantumAction, Response, StateCounts,
                      UnitaryAction, check, state_counts)


class AlphabetPolicyError(ValueError):
    """The input machines' alphabets are incompatible with the construction."""


class UnimplementedCase(NotImplementedError):
    """A construction variant that has no definition."""


@dataclass(frozen=True)
class ComposeReport:
    op: str
    machine: Machine
    #: error bound of the result from the inputs' bounds, or None when they were not given
    error_bound: float | None
    counts_before: tuple[StateCounts, ...]
    counts_after: StateCounts
    added_states: tuple[str, ...] = field(default=())

    def summary(self) -> str:
        before = " + ".join(f"(qs={c.qs}, cs={c.cs})" for c in self.counts_before)
        bound = "n/a" if self.error_bound is None else f"{self.error_bound:.6g}"
        return (f"{self.op}: {before} -> (qs={self.counts_after.qs}, cs={self.counts_after.cs}); "
                f"error bound {bound}; added {list(self.added_states)}")


def combined_error(eps1: float | None, eps2: float | None) -> float | None:
    if eps1 is None or eps2 is None:
        return None
    return eps1 + eps2 - eps1 * eps2


# -- embedding helpers -------------------------------------------------------

class _Part:
    """One input machine placed inside the composite: renamed states and a basis offset."""

    def __init__(self, m: Machine, prefix: str, offset: int, dim: int):
        self.m = m
        self.prefix = prefix
        self.offset = offset
        self.dim = dim
        self.placement = list(range(offset, offset + m.dim))
        self.others = [i for i in range(dim) if i not in set(self.placement)]

    def s(self, name: str) -> str:
        return self.prefix + name

    def q(self, name: str) -> str:
        return self.prefix + name

    def qi(self, name: str) -> int:
        return self.offset + self.m.q_index(name)

    def embed(self, act: QuantumAction, rename: Callable[[str], str] | None = None) -> QuantumAction:
        rename = rename or self.s
        if isinstance(act, UnitaryAction):
            return UnitaryAction(qcore.embed_op(act.op, self.dim, self.placement), rename(act.next), act.move)
        blocks = [tuple(self.placement[i] for i in b) for b in act.measurement.blocks]
        responses = [Response(rename(r.next), r.move) for r in act.responses]
        if self.others:
            blocks.append(tuple(self.others))
            responses.append(responses[0])
        return MeasureAction(qcore.Measurement(tuple(blocks), self.dim), tuple(responses))


def _check_same_alphabet(m1: Machine, m2: Machine) -> None:
    if set(m1.alphabet) != set(m2.alphabet):
        raise AlphabetPolicyError(
            f"alphabets differ: {sorted(m1.alphabet)} vs {sorted(m2.alphabet)}; "
            "extend one machine with always-reject handling first")


def _fresh(name: str, taken: set[str]) -> str:
    out = name
    while out in taken:
        out += "'"
    taken.add(out)
    return out


# -- complement --------------------------------------------------------------

def complement(m: Machine, eps: float | None = None) -> ComposeReport:
    """Exchange accepting and rejecting states."""
    check(m)
    out = Machine(_complement_name(m.name), m.quantum_states, m.classical_states, m.alphabet, m.transitions,
                  m.initial_quantum, m.initial_classical, m.rejecting, m.accepting)
    c = state_counts(m)
    return ComposeReport("complement", check(out), eps, (c,), state_counts(out))


def _complement_name(name: str) -> str:
    if name.startswith("complement(") and name.endswith(")"):
        return name[len("complement("):-1]
    return f"complement({name})"


# -- intersection / union ----------------------------------------------------

def _sequential(op: str, m1: Machine, m2: Machine, eps1, eps2) -> ComposeReport:
    """Run M1; on its ``bridge`` verdict rewind, reset the register to q2_0 and run M2."""
    check(m1)
    check(m2)
    _check_same_alphabet(m1, m2)
    p1, p2 = "1.", "2."
    dim = m1.dim + m2.dim
    A, B = _Part(m1, p1, 0, dim), _Part(m2, p2, m1.dim, dim)
    bridge = m1.accepting if op == "intersect" else m1.rejecting

    taken = {A.s(s) for s in m1.classical_states} | {B.s(s) for s in m2.classical_states}
    t_states = [_fresh(f"t(1,{j})", taken) for j in range(m1.dim)]
    transitions: dict[tuple[str, str], QuantumAction] = {}
    gamma = m1.tape_alphabet

    for (s, sym), act in m1.transitions.items():
        transitions[(A.s(s), sym)] = A.embed(act)
    for (s, sym), act in m2.transitions.items():
        transitions[(B.s(s), sym)] = B.embed(act)

    ident = qcore.identity_op(dim)
    q20 = B.qi(m2.initial_quantum)
    basis = [(A.placement[j],) for j in range(m1.dim)] + [tuple(B.placement)]
    meas = qcore.Measurement(tuple(basis), dim)
    responses = tuple(Response(t, 0) for t in t_states) + (Response(t_states[0], 0),)
    for s in bridge:
        for sym in gamma:
            if sym == LEFT_END:
                transitions[(A.s(s), sym)] = MeasureAction(meas, responses)
            else:
                transitions[(A.s(s), sym)] = UnitaryAction(ident, A.s(s), -1)
    for j, t in enumerate(t_states):
        swap = UnitaryAction(qcore.basis_swap_op(A.placement[j], q20, dim), B.s(m2.initial_classical), 0)
        for sym in gamma:
            transitions[(t, sym)] = swap

    if op == "intersect":
        accepting = {B.s(s) for s in m2.accepting}
        rejecting = {A.s(s) for s in m1.rejecting} | {B.s(s) for s in m2.rejecting}
    else:
        accepting = {A.s(s) for s in m1.accepting} | {B.s(s) for s in m2.accepting}
        rejecting = {B.s(s) for s in m2.rejecting}
    states = [A.s(s) for s in m1.classical_states] + [B.s(s) for s in m2.classical_states] + t_states
    out = Machine(f"{op}({m1.name},{m2.name})",
                  [A.q(q) for q in m1.quantum_states] + [B.q(q) for q in m2.quantum_states],
                  states, m1.alphabet, transitions, A.q(m1.initial_quantum), A.s(m1.initial_classical),
                  accepting, rejecting)
    return ComposeReport(op, check(out), combined_error(eps1, eps2),
                         (state_counts(m1), state_counts(m2)), state_counts(out), tuple(t_states))


def intersect(m1: Machine, m2: Machine, eps1: float | None = None, eps2: float | None = None) -> ComposeReport:
    """Simulate M1; if it accepts, reset and simulate M2. Requires equal alphabets."""
    return _sequential("intersect", m1, m2, eps1, eps2)


def union(m1: Machine, m2: Machine, eps1: float | None = None, eps2: float | None = None) -> ComposeReport:
    """Simulate M1; if it rejects, reset and simulate M2. Requires equal alphabets."""
    return _sequential("union", m1, m2, eps1, eps2)


# -- reversal ----------------------------------------------------------------

def reverse(m: Machine, eps: float | None = None) -> ComposeReport:
    """Machine for the reversed language.

    A fresh start state walks to $ and swaps a fresh quantum state into q0;
    from there M runs mirrored: directions negated and the two endmarker rows
    exchanged, so that the mirrored tape reads exactly like the original.
    """
    check(m)
    dim = m.dim + 1
    q0r = _fresh("q0R", set(m.quantum_states))
    s0r = _fresh("s0R", set(m.classical_states))
    place = list(range(m.dim))
    mirror = {LEFT_END: RIGHT_END, RIGHT_END: LEFT_END}
    transitions: dict[tuple[str, str], QuantumAction] = {}
    for (s, sym), act in m.transitions.items():
        if isinstance(act, UnitaryAction):
            new: QuantumAction = UnitaryAction(qcore.embed_op(act.op, dim, place), act.next, -act.move)
        else:
            blocks = act.measurement.blocks + ((m.dim,),)
            responses = tuple(Response(r.next, -r.move) for r in act.responses) + (Response(act.responses[0].next,
                                                                                          -act.responses[0].move),)
            new = MeasureAction(qcore.Measurement(blocks, dim), responses)
        transitions[(s, mirror.get(sym, sym))] = new
    ident = qcore.identity_op(dim)
    for sym in m.tape_alphabet:
        if sym == RIGHT_END:
            swap = qcore.basis_swap_op(m.dim, m.q_index(m.initial_quantum), dim)
            transitions[(s0r, sym)] = UnitaryAction(swap, m.initial_classical, 0)
        else:
            transitions[(s0r, sym)] = UnitaryAction(ident, s0r, 1)
    out = Machine(f"reverse({m.name})", (*m.quantum_states, q0r), (s0r, *m.classical_states), m.alphabet,
                  transitions, q0r, s0r, m.accepting, m.rejecting)
    return ComposeReport("reverse", check(out), eps, (state_counts(m),), state_counts(out), (q0r, s0r))


# -- catenation --------------------------------------------------------------

def catenate(m1: Machine, m2: Machine, eps_membership: tuple[bool, bool] = (False, False),
             eps1: float | None = None, eps2: float | None = None) -> ComposeReport:
    """Machine for L1 L2 over disjoint alphabets, for the case where neither language contains the empty word.

    Four added states check the form Sigma1+ Sigma2+ (``s2`` rejects). M1 then
    runs with the first Sigma2 symbol acting as its $. When M1 accepts, its
    register is reset to q2_0 and M2 runs with the last Sigma1 symbol acting as
    its cent sign. The reset reuses the form-check states: M1's accepting states
    cyclically shift Q1 until a measurement finds q1_0, then ``s3`` swaps
    q1_0 with q2_0 and returns to the left end, and ``s0`` walks back to the
    boundary. During the form check ``s1`` and ``s3`` cross each Sigma2 cell
    once each with the same swap, so the check leaves the register unchanged.
    """
    if tuple(eps_membership) != (False, False):
        raise UnimplementedCase("catenation is only defined when the empty word is in neither language")
    check(m1)
    check(m2)
    overlap = set(m1.alphabet) & set(m2.alphabet)
    if overlap:
        raise AlphabetPolicyError(f"catenation needs disjoint alphabets; both contain {sorted(overlap)}")
    p1, p2 = "1.", "2."
    dim = m1.dim + m2.dim
    A, B = _Part(m1, p1, 0, dim), _Part(m2, p2, m1.dim, dim)
    sig1, sig2 = tuple(m1.alphabet), tuple(m2.alphabet)
    taken = {A.s(s) for s in m1.classical_states} | {B.s(s) for s in m2.classical_states}
    s0, s1, s2, s3 = (_fresh(f"s{i}", taken) for i in range(4))
    ident = qcore.identity_op(dim)
    q10, q20 = A.qi(m1.initial_quantum), B.qi(m2.initial_quantum)
    swap = qcore.basis_swap_op(q10, q20, dim)
    Q1, Q2 = tuple(A.placement), tuple(B.placement)
    side = qcore.Measurement((Q1, Q2), dim)
    start1, start2 = A.s(m1.initial_classical), B.s(m2.initial_classical)

    T: dict[tuple[str, str], QuantumAction] = {}
    # form check
    for sym in (LEFT_END, *sig1):
        T[(s0, sym)] = UnitaryAction(ident, s0, 1)
    T[(s0, RIGHT_END)] = UnitaryAction(ident, s2, 0)
    for sym in sig2:
        T[(s0, sym)] = MeasureAction(side, ((s1, 0), (start2, -1)))
    for sym in sig2:
        T[(s1, sym)] = UnitaryAction(swap, s1, 1)
    for sym in (LEFT_END, *sig1):
        T[(s1, sym)] = UnitaryAction(ident, s2, 0)
    T[(s1, RIGHT_END)] = UnitaryAction(ident, s3, -1)
    for sym in (*sig1, RIGHT_END):
        T[(s3, sym)] = UnitaryAction(ident, s3, -1)
    for sym in sig2:
        T[(s3, sym)] = UnitaryAction(swap, s3, -1)
    T[(s3, LEFT_END)] = MeasureAction(side, ((start1, 0), (s0, 1)))

    # M1, with Sigma2 read as $
    for (s, sym), act in m1.transitions.items():
        if sym == RIGHT_END:
            for x in (*sig2, RIGHT_END):
                T[(A.s(s), x)] = A.embed(act)
        else:
            T[(A.s(s), sym)] = A.embed(act)
    # M1 accepted: walk to the boundary and reset the register
    shift = np.eye(dim, dtype=complex)
    n1 = m1.dim
    order = [(q10 + k) % n1 for k in range(n1)]  # cycle q1_0 -> q1_1 -> ... -> q1_0
    for k, i in enumerate(order):
        j = order[(k + 1) % n1]
        shift[:, i] = 0
        shift[j, i] = 1.0
    cyc = qcore.UnitaryOp(shift)
    rest = tuple(i for i in Q1 if i != q10)
    blocks, resp = [(q10,)], [Response(s3, 0)]
    for blk in (rest, Q2):
        if blk:
            blocks.append(blk)
            resp.append(None)
    meas = qcore.Measurement(tuple(blocks), dim)
    for s in m1.accepting:
        name = A.s(s)
        for sym in (LEFT_END, *sig1):
            T[(name, sym)] = UnitaryAction(cyc, name, 1)
        back = tuple(Response(name, -1) if r is None else r for r in resp)
        for sym in (*sig2, RIGHT_END):
            T[(name, sym)] = MeasureAction(meas, back)

    # M2, with Sigma1 (and the unreachable real cent sign) read as cent
    for (s, sym), act in m2.transitions.items():
        if sym == LEFT_END:
            for x in (LEFT_END, *sig1):
                T[(B.s(s), x)] = B.embed(act)
        else:
            T[(B.s(s), sym)] = B.embed(act)

    states = [s0, s1, s2, s3] + [A.s(s) for s in m1.classical_states] + [B.s(s) for s in m2.classical_states]
    out = Machine(f"catenate({m1.name},{m2.name})",
                  [A.q(q) for q in m1.quantum_states] + [B.q(q) for q in m2.quantum_states],
                  states, (*sig1, *sig2), T, A.q(m1.initial_quantum), s0,
                  {B.s(s) for s in m2.accepting},
                  {A.s(s) for s in m1.rejecting} | {B.s(s) for s in m2.rejecting} | {s2})
    return ComposeReport("catenate", check(out), combined_error(eps1, eps2),
                         (state_counts(m1), state_counts(m2)), state_counts(out), (s0, s1, s2, s3))


# -- regular languages -------------------------------------------------------

@dataclass(frozen=True)
class DFA:
    """Complete deterministic finite automaton."""

    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    delta: Mapping[tuple[str, str], str]
    start: str
    accepting: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "delta", dict(self.delta))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        missing = [(q, a) for q in self.states for a in self.alphabet if (q, a) not in self.delta]
        if missing:
            raise ValueError(f"DFA is not total: missing {missing[:5]}")
        if self.start not in self.states:
            raise ValueError(f"start state {self.start!r} is not a state")

    def accepts(self, word: Sequence[str]) -> bool:
        q = self.start
        for c in word:
            q = self.delta[(q, c)]
        return q in self.accepting


def lift_dfa(d: DFA, name: str | None = None) -> Machine:
    """One quantum state, identity actions, one left-to-right pass deciding at $."""
    taken = set(d.states)
    acc, rej = _fresh("acc", taken), _fresh("rej", taken)
    ident = qcore.identity_op(1)
    T: dict[tuple[str, str], QuantumAction] = {}
    for q in d.states:
        T[(q, LEFT_END)] = UnitaryAction(ident, q, 1)
        for a in d.alphabet:
            T[(q, a)] = UnitaryAction(ident, d.delta[(q, a)], 1)
        T[(q, RIGHT_END)] = UnitaryAction(ident, acc if q in d.accepting else rej, 0)
    m = Machine(name or "dfa", ("q0",), (*d.states, acc, rej), d.alphabet, T, "q0", d.start, {acc}, {rej})
    return check(m)


# -- accounting --------------------------------------------------------------

OP_KINDS = ("intersect", "union", "complement", "reverse", "catenate")


def predicted_state_bounds(op_kind: str, counts1: StateCounts, counts2: StateCounts | None = None) -> StateCounts:
    """State counts produced by each construction (these meet the upper bounds with equality)."""
    c1 = StateCounts(*counts1)
    if op_kind == "complement":
        return c1
    if op_kind == "reverse":
        return StateCounts(c1.qs + 1, c1.cs + 1)
    if op_kind not in OP_KINDS:
        raise ValueError(f"unknown op_kind {op_kind!r}; expected one of {OP_KINDS}")
    if counts2 is None:
        raise ValueError(f"{op_kind} needs the counts of both machines")
    c2 = StateCounts(*counts2)
    if op_kind in ("intersect", "union"):
        return StateCounts(c1.qs + c2.qs, c1.cs + c2.cs + c1.qs)
    return StateCounts(c1.qs + c2.qs, c1.cs + c2.cs + 4)
