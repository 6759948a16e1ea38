"""Shared builders for the test suite."""
import itertools

import numpy as np

from qcfa import qcore
from qcfa.compose import DFA
from qcfa.machine import LEFT_END, RIGHT_END, MachineBuilder, MeasureAction, UnitaryAction, check


def words(alphabet, max_len):
    for n in range(max_len + 1):
        for w in itertools.product(alphabet, repeat=n):
            yield w


def dfa_a_star_b_star():
    delta = {("A", "a"): "A", ("A", "b"): "B", ("B", "a"): "D", ("B", "b"): "B",
             ("D", "a"): "D", ("D", "b"): "D"}
    return DFA(("A", "B", "D"), ("a", "b"), delta, "A", {"A", "B"})


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return qcore.UnitaryOp(q * (np.diag(r) / np.abs(np.diag(r))))


def random_partition(rng, dim):
    labels = rng.integers(0, dim, size=dim)
    blocks = [tuple(int(i) for i in np.flatnonzero(labels == v)) for v in np.unique(labels)]
    order = rng.permutation(len(blocks))
    return qcore.Measurement(tuple(blocks[i] for i in order), dim)


def _move(rng, sym):
    moves = [-1, 0, 1]
    if sym == LEFT_END:
        moves = [0, 1]
    elif sym == RIGHT_END:
        moves = [-1, 0]
    return int(rng.choice(moves))


def random_machine(rng, qs=None, cs=None, alphabet=("a", "b"), name="random"):
    """A valid machine with qs <= 3 quantum and cs <= 5 classical states (two of them halting)."""
    qs = int(rng.integers(1, 4)) if qs is None else qs
    cs = int(rng.integers(3, 6)) if cs is None else cs
    qnames = tuple(f"q{i}" for i in range(qs))
    work = [f"w{i}" for i in range(cs - 2)]
    states = work + ["acc", "rej"]
    b = MachineBuilder(name, qnames, alphabet)
    b.state(*work)
    for s in work:
        for sym in (LEFT_END, *alphabet, RIGHT_END):
            if rng.random() < 0.5:
                op = random_unitary(rng, qs)
                b.set(s, sym, UnitaryAction(op, states[int(rng.integers(len(states)))], _move(rng, sym)))
            else:
                meas = random_partition(rng, qs)
                resp = tuple((states[int(rng.integers(len(states)))], _move(rng, sym))
                             for _ in range(meas.n_outcomes))
                b.set(s, sym, MeasureAction(meas, resp))
    return check(b.build("q0", work[0], ["acc"], ["rej"]))
