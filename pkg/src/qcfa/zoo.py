"""Concrete machines: the two-quantum-state recognizer for a^n b^n and its relatives.

Every machine here follows one round structure over a tape region bounded by a
left and a right marker:

1. rewind to the left marker and scan right, rotating the quantum state by
   +sqrt(2)*pi per ``a`` and by a negative multiple of it per ``b``;
2. measure at the right marker; outcome q1 rejects;
3. two symmetric random walks started next to the left marker, each of which
   must reach the right marker before falling back onto the left one;
4. k fair quantum coins which must all come up q0.

Any failure in 3 or 4 resets the quantum state to q0 and starts a new round.
A round therefore accepts with probability exactly ``2**-k / l**2`` after the
measurement survived, where ``l`` is the region length plus one.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import qcore
from .machine import LEFT_END, RIGHT_END, Machine, MachineBuilder, check

QUANTUM = ("q0", "q1")
ACCEPT = "acc"
REJECT = "rej"

IDENTITY = qcore.identity_op(2)
COIN = qcore.symbolic_rotation(Fraction(1, 4), "pi", 0, 1, 2)
FLIP = qcore.basis_swap_op(0, 1, 2)
MEASURE = qcore.basis_measurement(2)


def angle_op(coeff) -> qcore.UnitaryOp:
    """Rotation by ``coeff * sqrt(2) * pi`` in the (q0, q1) plane."""
    return qcore.symbolic_rotation(Fraction(coeff), "sqrt2_pi", 0, 1, 2)


def round_accept_probability(length: int, k_coins: int) -> float:
    """Per-round acceptance of the walk-and-coins gadget for an input of ``length`` symbols."""
    ell = length + 1
    return 2.0 ** -k_coins / ell**2


@dataclass(frozen=True)
class ZooParams:
    k_coins: int = 2

    def __post_init__(self):
        _check_k(self.k_coins)

    def round_accept_probability(self, length: int) -> float:
        return round_accept_probability(length, self.k_coins)


def _fill(b: MachineBuilder, reject: str = REJECT) -> None:
    """Complete Theta/delta on unreachable pairs with a harmless reject."""
    gamma = (LEFT_END, *b.alphabet, RIGHT_END)
    for s in list(b.states):
        if s in (ACCEPT, REJECT) or s == reject:
            continue
        for sym in gamma:
            if (s, sym) not in b.transitions:
                b.unitary(s, sym, IDENTITY, reject, 0)


class _Region:
    """Tape region of one round.

    ``peek=(boundary, before)`` marks a virtual right end: a ``boundary`` cell
    whose left neighbour is ``before``.
    """

    def __init__(self, b: MachineBuilder, pre: str, left: Sequence[str], rotations: dict[str, qcore.UnitaryOp],
                 right: Sequence[str] = (RIGHT_END,), peek: tuple[str, str] | None = None):
        self.b = b
        self.pre = pre
        self.left = tuple(left)
        self.rot = dict(rotations)
        self.right = tuple(right) if peek is None else (peek[0],)
        self.peek = peek
        self.gamma = (LEFT_END, *b.alphabet, RIGHT_END)

    def name(self, s: str) -> str:
        return self.pre + s

    def rewind(self, state: str, then: str) -> None:
        """Move left to the left marker, then step right into ``then``."""
        for sym in self.gamma:
            if sym in self.left:
                self.b.unitary(state, sym, IDENTITY, then, 1)
            elif sym != LEFT_END:
                self.b.unitary(state, sym, IDENTITY, state, -1)

    def scan(self, after_measure: str) -> str:
        b, n = self.b, self.name
        scan = n("scan")
        if self.peek is None:
            for sym, op in self.rot.items():
                b.unitary(scan, sym, op, scan, 1)
            b.measure(scan, self.right, MEASURE, [(after_measure, -1), (REJECT, 0)])
        else:
            boundary, before = self.peek
            scan2 = n("scan2")
            for sym, op in self.rot.items():
                b.unitary(scan, sym, op, scan2 if sym == before else scan, 1)
                if sym != boundary:
                    b.unitary(scan2, sym, op, scan2, 1)
            b.measure(scan2, boundary, MEASURE, [(after_measure, -1), (REJECT, 0)])
        return scan

    def walk(self, x: int, success: str, fail: str) -> str:
        """Symmetric walk from the first region cell; ``success`` is entered on the right marker."""
        b, n = self.b, self.name
        walk, meas = n(f"walk{x}"), n(f"walk{x}_m")
        b.unitary(walk, self.left, IDENTITY, fail, 0)
        interior = [s for s in self.rot if self.peek is None or s != self.peek[0]]
        b.unitary(walk, interior, COIN, meas, 0)
        b.measure(meas, list(self.rot), MEASURE, [(walk, -1), (walk, 1)])
        if self.peek is None:
            b.unitary(walk, self.right, IDENTITY, success, 0)
        else:
            boundary, before = self.peek
            look, rot = n(f"walk{x}_peek"), n(f"walk{x}_rot")
            b.unitary(walk, boundary, IDENTITY, look, -1)
            for sym in self.gamma:
                if sym == before:
                    b.unitary(look, sym, IDENTITY, success, 1)
                elif sym != RIGHT_END:
                    b.unitary(look, sym, IDENTITY, rot, 1)
            b.unitary(rot, boundary, COIN, meas, 0)
        return walk

    def coins(self, k: int, success: str, fail: str) -> str:
        b, n = self.b, self.name
        for i in range(k, 0, -1):
            coin, meas = n(f"coin{i}"), n(f"coin{i}_m")
            b.unitary(coin, self.gamma, COIN, meas, 0)
            b.measure(meas, self.gamma, MEASURE, [(success, 0), (fail, 0)])
            success = coin
        return success

    def reset(self, then: str) -> str:
        b, n = self.b, self.name
        reset, flip = n("reset"), n("flip")
        b.measure(reset, self.gamma, MEASURE, [(then, 0), (flip, 0)])
        b.unitary(flip, self.gamma, FLIP, then, 0)
        return reset

    def gadget(self, k: int, success: str, fail: str) -> str:
        """Two walks then k coins; returns the entry state (a rewind to the left marker)."""
        n = self.name
        coins = self.coins(k, success, fail)
        walk2 = self.walk(2, coins, fail)
        self.rewind(n("wback2"), walk2)
        walk1 = self.walk(1, n("wback2"), fail)
        self.rewind(n("wback1"), walk1)
        return n("wback1")

    def full_round(self, k: int, success: str) -> str:
        """Scan, measure, amplify; failures restart. Returns the round's entry rewind state."""
        n = self.name
        entry = n("rewind")
        reset = self.reset(entry)
        gadget = self.gadget(k, success, reset)
        scan = self.scan(gadget)
        self.rewind(entry, scan)
        return entry


def _check_k(k_coins: int) -> None:
    if not (isinstance(k_coins, int) and k_coins >= 1):
        raise ValueError("k_coins must be an integer >= 1")


def _form_check(b: MachineBuilder, blocks: Sequence[Iterable[str]], then: str, pre: str = "chk") -> str:
    """Deterministic left-to-right check of ``blocks[0]+ blocks[1]+ ...``; ends in ``then`` at $ moving left."""
    blocks = [tuple(x) for x in blocks]
    start = f"{pre}0"
    b.unitary(start, LEFT_END, IDENTITY, f"{pre}1", 1)
    # chk{2i+1}: expecting the first symbol of block i; chk{2i+2}: inside block i
    for i, block in enumerate(blocks):
        expect, inside = f"{pre}{2 * i + 1}", f"{pre}{2 * i + 2}"
        for sym in block:
            b.unitary(expect, sym, IDENTITY, inside, 1)
            b.unitary(inside, sym, IDENTITY, inside, 1)
        if i + 1 < len(blocks):
            for sym in blocks[i + 1]:
                if sym not in block:
                    b.unitary(inside, sym, IDENTITY, f"{pre}{2 * i + 4}", 1)
        else:
            b.unitary(inside, RIGHT_END, IDENTITY, then, -1)
    return start


def _finish(b: MachineBuilder, s0: str) -> Machine:
    b.state(ACCEPT, REJECT)
    _fill(b)
    return check(b.build("q0", s0, [ACCEPT], [REJECT]))


def m_eq(k_coins: int = 2) -> Machine:
    """One-sided recognizer of {a^n b^n | n >= 1} with two quantum states."""
    return m_eq_ratio(1, "a", k_coins, name=f"m_eq(k={k_coins})")


def m_eq_ratio(ratio: int, orientation: str = "a", k_coins: int = 2, name: str | None = None) -> Machine:
    """{a^(ratio*n) b^n | n >= 1}, or {b^(ratio*n) a^n} when ``orientation == "b"``.

    The heavy symbol rotates by +sqrt(2)*pi and the light one by -ratio*sqrt(2)*pi.
    """
    _check_k(k_coins)
    if not (isinstance(ratio, int) and ratio >= 1):
        raise ValueError("ratio must be an integer >= 1")
    if orientation not in ("a", "b"):
        raise ValueError("orientation must be 'a' or 'b'")
    heavy, light = ("a", "b") if orientation == "a" else ("b", "a")
    b = MachineBuilder(name or f"m_eq_ratio({ratio},{orientation},k={k_coins})", QUANTUM, ("a", "b"))
    region = _Region(b, "", [LEFT_END], {heavy: angle_op(1), light: angle_op(-ratio)})
    entry = region.full_round(k_coins, ACCEPT)
    s0 = _form_check(b, [[heavy], [light]], entry)
    return _finish(b, s0)


def m_count_eq(k_coins: int = 2) -> Machine:
    """One-sided recognizer of {x in {a,b}* | #a(x) = #b(x)}: the round without a form check."""
    _check_k(k_coins)
    b = MachineBuilder(f"m_count_eq(k={k_coins})", QUANTUM, ("a", "b"))
    region = _Region(b, "", [LEFT_END], {"a": angle_op(1), "b": angle_op(-1)})
    entry = region.full_round(k_coins, ACCEPT)
    return _finish(b, entry)


def m_eq_double(k_coins: int = 2) -> Machine:
    """{a^n b1^n a^m b2^m | n, m >= 1}.

    Phase one runs the round on the prefix up to the ``a`` following the last
    ``b1``, which plays the right end; phase two runs it on the suffix with the
    last ``b1`` as the left end.
    """
    _check_k(k_coins)
    b = MachineBuilder(f"m_eq_double(k={k_coins})", QUANTUM, ("a", "b1", "b2"))
    second = _Region(b, "p2_", ["b1"], {"a": angle_op(1), "b2": angle_op(-1)})
    entry2 = second.full_round(k_coins, ACCEPT)
    first = _Region(b, "p1_", [LEFT_END], {"a": angle_op(1), "b1": angle_op(-1)}, peek=("a", "b1"))
    entry1 = first.full_round(k_coins, entry2)
    s0 = _form_check(b, [["a"], ["b1"], ["a"], ["b2"]], entry1)
    return _finish(b, s0)


def amplification_round(k_coins: int = 2) -> Machine:
    """A single walk-and-coins round over {a, b}: accepts on success, rejects on any failure.

    Accepts an input of length n with probability 2**-k / (n+1)**2.
    """
    _check_k(k_coins)
    b = MachineBuilder(f"amplification_round(k={k_coins})", QUANTUM, ("a", "b"))
    region = _Region(b, "", [LEFT_END], {"a": IDENTITY, "b": IDENTITY})
    entry = region.gadget(k_coins, ACCEPT, REJECT)
    return _finish(b, entry)


def example_machines(k_coins: int = 2, m: int = 2) -> dict[str, Machine]:
    """Machines assembled from the primitives with the closure constructions."""
    from .compose import complement, union

    if m < 1:
        raise ValueError("m must be >= 1")
    ex2 = m_eq_ratio(1, "a", k_coins)
    for r in range(2, m + 1):
        ex2 = union(ex2, m_eq_ratio(r, "a", k_coins)).machine
    return {
        "example-2": ex2.renamed(f"example_2(m={m},k={k_coins})"),
        "example-3": complement(m_count_eq(k_coins)).machine.renamed(f"example_3(k={k_coins})"),
        "double-block": m_eq_double(k_coins).renamed(f"double_block(k={k_coins})"),
    }


# -- membership oracles ------------------------------------------------------

def _blocks(word: Sequence[str]) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    for c in word:
        if out and out[-1][0] == c:
            out[-1] = (c, out[-1][1] + 1)
        else:
            out.append((c, 1))
    return out


def in_l_eq_ratio(word: Sequence[str], ratio: int = 1, orientation: str = "a") -> bool:
    heavy, light = ("a", "b") if orientation == "a" else ("b", "a")
    bl = _blocks(word)
    return (len(bl) == 2 and bl[0][0] == heavy and bl[1][0] == light
            and bl[0][1] == ratio * bl[1][1])


def in_l_eq(word: Sequence[str]) -> bool:
    return in_l_eq_ratio(word, 1, "a")


def in_l_count_eq(word: Sequence[str]) -> bool:
    return list(word).count("a") == list(word).count("b")


def in_l_eq_double(word: Sequence[str]) -> bool:
    bl = _blocks(word)
    return ([c for c, _ in bl] == ["a", "b1", "a", "b2"]
            and bl[0][1] == bl[1][1] and bl[2][1] == bl[3][1])
