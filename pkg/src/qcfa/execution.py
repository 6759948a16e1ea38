"""Running a 2QCFA on an input: exact branching evaluation and Monte Carlo sampling.

Both engines walk the same configuration graph. A node is a classical state,
a head position and a quantum state; quantum states at the same (state,
position) that agree up to a global phase (within ``merge_tol``) share a node,
so the graph of most machines is finite even though the measurement tree is not.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.stats import binomtest

from . import qcore
from .machine import (AlphabetError, Machine, MeasureAction, UnitaryAction, as_word, check,
                      format_word, tape)

ACC = -1
REJ = -2

DEFAULT_MERGE_TOL = 1e-9
DEFAULT_MASS_FLOOR = 1e-12
DEFAULT_MAX_STEPS = 10**6
CONSERVATION_TOL = 1e-9

# graph sizes above which the exact evaluator stops trying to close the graph
# or to use dense matrix powers
CLOSE_LIMIT = 4000
DENSE_LIMIT = 600


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    BUDGET_EXCEEDED = "budget_exceeded"


class ExecutionError(RuntimeError):
    """A run reached a state the validator should have ruled out."""


@dataclass(frozen=True)
class Configuration:
    s: str
    p: int
    psi: qcore.StateVector
    mass: float = 1.0
    depth: int = 0


@dataclass(frozen=True)
class Absorbed:
    verdict: Verdict
    mass: float


def initial_configuration(m: Machine) -> Configuration:
    return Configuration(m.initial_classical, 0, qcore.basis_state(m.q_index(m.initial_quantum), m.dim))


def _branches(m: Machine, cells: Sequence[str], s: str, p: int, psi: qcore.StateVector):
    """(next, move, probability, state) per retained branch, plus discarded probability."""
    if m.is_halting(s):
        raise ExecutionError(f"step called on halting state {s!r}")
    if not 0 <= p < len(cells):
        raise ExecutionError(f"head position {p} is off the tape")
    try:
        act = m.transitions[(s, cells[p])]
    except KeyError:
        raise ExecutionError(f"no transition for ({s}, {cells[p]})") from None
    if isinstance(act, UnitaryAction):
        return [(act.next, act.move, 1.0, qcore.apply(act.op, psi))], 0.0
    dist = qcore.measure(act.measurement, psi)
    return ([(act.responses[o.label].next, act.responses[o.label].move, o.probability, o.state)
             for o in dist.outcomes], dist.discarded)


def step(m: Machine, word: Sequence[str], c: Configuration) -> list[Configuration | Absorbed]:
    """All successors of ``c`` after one application of Theta/delta."""
    cells = tape(word)
    branches, _ = _branches(m, cells, c.s, c.p, c.psi)
    out: list[Configuration | Absorbed] = []
    for nxt, move, prob, psi in branches:
        mass = c.mass * prob
        if nxt in m.accepting:
            out.append(Absorbed(Verdict.ACCEPT, mass))
        elif nxt in m.rejecting:
            out.append(Absorbed(Verdict.REJECT, mass))
        else:
            p = c.p + move
            if not 0 <= p < len(cells):
                raise ExecutionError(f"transition ({c.s}, {cells[c.p]}) moves the head off the tape")
            out.append(Configuration(nxt, p, psi, mass, c.depth + 1))
    return out


class ConfigGraph:
    """Lazily expanded graph of configurations for one machine and input.

    Node ``i`` has up to ``width`` outgoing edges stored row-wise in ``tgt``
    (node id, or ACC / REJ) and ``prob``; ``lost[i]`` is the probability of
    measurement branches dropped below :data:`qcore.ZERO_PROB`.
    """

    def __init__(self, m: Machine, word: Sequence[str], merge_tol: float = DEFAULT_MERGE_TOL):
        self.machine = m
        self.word = tuple(word)
        self._cells = tape(self.word)
        self.merge_tol = merge_tol
        self.width = max([1] + [a.measurement.n_outcomes for a in m.transitions.values()
                                if isinstance(a, MeasureAction)])
        self.nodes: list[tuple[str, int, qcore.StateVector]] = []
        self._groups: dict[tuple[str, int], list[int]] = {}
        self._cap = 0
        self._grow(64)
        self.n_expanded = 0
        init = initial_configuration(m)
        if init.s in m.accepting:
            self.root = ACC
        elif init.s in m.rejecting:
            self.root = REJ
        else:
            self.root = self.intern(init.s, init.p, init.psi)

    def _grow(self, cap: int) -> None:
        k, n = self.width, self._cap

        def resized(name, fill, shape, dtype):
            a = np.full(shape, fill, dtype=dtype)
            if n:
                a[:n] = getattr(self, name)
            setattr(self, name, a)

        resized("tgt", REJ, (cap, k), np.int64)
        resized("prob", 0.0, (cap, k), float)
        resized("cum", np.inf, (cap, k), float)
        resized("nout", 0, cap, np.int64)
        resized("total", 0.0, cap, float)
        resized("lost", 0.0, cap, float)
        resized("expanded", False, cap, bool)
        self._cap = cap

    def __len__(self) -> int:
        return len(self.nodes)

    def intern(self, s: str, p: int, psi: qcore.StateVector) -> int:
        group = self._groups.setdefault((s, p), [])
        for i in group:
            if qcore.phase_distance(self.nodes[i][2], psi) <= self.merge_tol:
                return i
        i = len(self.nodes)
        if i >= self._cap:
            self._grow(2 * self._cap)
        self.nodes.append((s, p, psi))
        group.append(i)
        return i

    def expand(self, i: int) -> None:
        if self.expanded[i]:
            return
        s, p, psi = self.nodes[i]
        m = self.machine
        branches, discarded = _branches(m, self._cells, s, p, psi)
        targets, probs = [], []
        for nxt, move, prob, child in branches:
            if nxt in m.accepting:
                targets.append(ACC)
            elif nxt in m.rejecting:
                targets.append(REJ)
            else:
                q = p + move
                if not 0 <= q < len(self._cells):
                    raise ExecutionError(f"transition ({s}, {self._cells[p]}) moves the head off the tape")
                targets.append(self.intern(nxt, q, child))
            probs.append(prob)
        k = len(targets)
        self.tgt[i, :k] = targets
        self.prob[i, :k] = probs
        self.cum[i, :k] = np.cumsum(probs)
        self.nout[i] = k
        self.total[i] = self.cum[i, k - 1]
        self.lost[i] = discarded
        self.expanded[i] = True
        self.n_expanded += 1

    def edges(self, i: int):
        k = self.nout[i]
        return zip(self.tgt[i, :k].tolist(), self.prob[i, :k].tolist())

    def close(self, max_nodes: int = CLOSE_LIMIT, max_depth: int | None = None) -> bool:
        """Expand breadth-first until no unexpanded node remains.

        Returns False if ``max_nodes`` or ``max_depth`` levels are exceeded first;
        everything expanded so far is kept.
        """
        if self.root < 0:
            return True
        level = [i for i in range(len(self.nodes)) if not self.expanded[i]]
        depth = 0
        while level:
            if len(self.nodes) > max_nodes or (max_depth is not None and depth > max_depth):
                return False
            nxt = []
            for i in level:
                before = len(self.nodes)
                self.expand(i)
                nxt.extend(range(before, len(self.nodes)))
            level = nxt
            depth += 1
        return len(self.nodes) <= max_nodes


# -- exact evaluation ------------------------------------------------------

@dataclass(frozen=True)
class ExactResult:
    p_acc_low: float
    p_rej_low: float
    residual: float
    steps_expanded: int
    nodes: int = 0

    @property
    def p_acc_high(self) -> float:
        return self.p_acc_low + self.residual

    @property
    def p_rej_high(self) -> float:
        return self.p_rej_low + self.residual

    @property
    def conservation_error(self) -> float:
        return abs(self.p_acc_low + self.p_rej_low + self.residual - 1.0)

    def swapped(self) -> "ExactResult":
        return ExactResult(self.p_rej_low, self.p_acc_low, self.residual, self.steps_expanded, self.nodes)


def _word(m: Machine, x) -> tuple[str, ...]:
    return as_word(x, m.alphabet)


def exact_eval(m: Machine, x, step_budget: int, merge_tol: float = DEFAULT_MERGE_TOL,
               mass_floor: float = DEFAULT_MASS_FLOOR) -> ExactResult:
    """Acceptance/rejection probability enclosures after ``step_budget`` steps.

    The true acceptance probability lies in ``[p_acc_low, p_acc_low + residual]``.
    When the configuration graph is finite the remaining depths are folded with
    matrix powers; otherwise the frontier is advanced depth by depth and nodes
    lighter than ``mass_floor`` are moved into the residual.
    """
    if step_budget < 0:
        raise ValueError("step_budget must be non-negative")
    check(m)
    g = ConfigGraph(m, _word(m, x), merge_tol)
    if g.root == ACC:
        return ExactResult(1.0, 0.0, 0.0, 0, 0)
    if g.root == REJ:
        return ExactResult(0.0, 1.0, 0.0, 0, 0)
    closed = g.close(CLOSE_LIMIT, max_depth=step_budget)
    if closed:
        return _eval_closed(g, step_budget)
    return _eval_frontier(g, step_budget, mass_floor)


def _eval_frontier(g: ConfigGraph, budget: int, mass_floor: float) -> ExactResult:
    acc = rej = lost = 0.0
    frontier = {g.root: 1.0}
    depth = 0
    while frontier and depth < budget:
        nxt: dict[int, float] = {}
        for i, mass in frontier.items():
            g.expand(i)
            lost += mass * g.lost[i]
            for t, pr in g.edges(i):
                w = mass * pr
                if t == ACC:
                    acc += w
                elif t == REJ:
                    rej += w
                else:
                    nxt[t] = nxt.get(t, 0.0) + w
        frontier = {}
        for i, w in nxt.items():
            if w < mass_floor:
                lost += w
            else:
                frontier[i] = w
        depth += 1
        residual = math.fsum(frontier.values()) + lost
        if abs(acc + rej + residual - 1.0) > CONSERVATION_TOL:
            raise ExecutionError(f"mass conservation broken at depth {depth}")
    residual = math.fsum(frontier.values()) + lost
    return ExactResult(acc, rej, residual, depth, len(g))


def _eval_closed(g: ConfigGraph, budget: int) -> ExactResult:
    n = len(g)
    rows, cols, vals = [], [], []
    a = np.zeros(n)
    r = np.zeros(n)
    for i in range(n):
        for t, pr in g.edges(i):
            if t == ACC:
                a[i] += pr
            elif t == REJ:
                r[i] += pr
            else:
                rows.append(i)
                cols.append(t)
                vals.append(pr)
    lost = g.lost[:n].copy()
    T = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    m = np.zeros(n)
    m[g.root] = 1.0

    if n <= DENSE_LIMIT:
        # visited = sum_{t < budget} m T^t via binary powers P_j = T^(2^j),
        # S_j = sum_{i < 2^j} T^i
        visited = np.zeros(n)
        P = T.toarray()
        S = np.eye(n)
        b = budget
        while b:
            if b & 1:
                visited += m @ S
                m = m @ P
            b >>= 1
            if b:
                S = S + S @ P
                P = P @ P
        depth = budget
    else:
        visited = np.zeros(n)
        TT = T.T.tocsr()
        depth = 0
        while depth < budget and m.any():
            visited += m
            m = TT @ m
            depth += 1
    p_acc = float(visited @ a)
    p_rej = float(visited @ r)
    residual = float(m.sum() + visited @ lost)
    return ExactResult(p_acc, p_rej, residual, depth, n)


# -- Markov-chain oracle ---------------------------------------------------

def line_walk_oracle(length: int) -> float:
    """Probability that a symmetric walk on 0..length started at 1 is absorbed at ``length``."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if length == 1:
        return 1.0
    k = length - 1  # interior positions 1..length-1
    A = np.eye(k)
    b = np.zeros(k)
    for i in range(k):
        if i > 0:
            A[i, i - 1] = -0.5
        if i < k - 1:
            A[i, i + 1] = -0.5
        else:
            b[i] = 0.5
    return float(np.linalg.solve(A, b)[0])


# -- sampling --------------------------------------------------------------

def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for trajectory ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class TrajectoryOutcome:
    verdict: Verdict
    steps: int


def _choose(g: ConfigGraph, i: int, u: float) -> int:
    k = int(g.nout[i])
    j = int(np.count_nonzero(g.cum[i, :k] <= u * g.total[i]))
    return min(j, k - 1)


def run_trajectory(m: Machine, x, rng: np.random.Generator, max_steps: int = DEFAULT_MAX_STEPS,
                   graph: ConfigGraph | None = None) -> TrajectoryOutcome:
    """Sample one path to absorption.

    One uniform is drawn from ``rng`` at each measurement with two or more
    possible outcomes; nothing is drawn otherwise.
    """
    g = graph if graph is not None else ConfigGraph(check(m), _word(m, x))
    node = g.root
    steps = 0
    while node >= 0:
        if steps >= max_steps:
            return TrajectoryOutcome(Verdict.BUDGET_EXCEEDED, steps)
        g.expand(node)
        j = 0
        if g.nout[node] > 1:
            j = _choose(g, node, rng.random())
        node = int(g.tgt[node, j])
        steps += 1
    return TrajectoryOutcome(Verdict.ACCEPT if node == ACC else Verdict.REJECT, steps)


class _Streams:
    """Per-trajectory uniform buffers, created on first use."""

    CHUNK = 128

    def __init__(self, seed: int, indices: np.ndarray):
        self.seed = seed
        self.indices = indices
        self.gens: dict[int, np.random.Generator] = {}
        self.buf = np.empty((len(indices), self.CHUNK))
        self.ptr = np.full(len(indices), self.CHUNK, dtype=np.int64)

    def draw(self, rows: np.ndarray) -> np.ndarray:
        for r in rows[self.ptr[rows] >= self.CHUNK].tolist():
            gen = self.gens.get(r)
            if gen is None:
                gen = self.gens[r] = trajectory_rng(self.seed, int(self.indices[r]))
            self.buf[r] = gen.random(self.CHUNK)
            self.ptr[r] = 0
        u = self.buf[rows, self.ptr[rows]]
        self.ptr[rows] += 1
        return u


def sample_trajectories(g: ConfigGraph, indices: np.ndarray, seed: int, max_steps: int):
    """Vectorized run_trajectory over the given trajectory indices.

    Returns (codes, steps) with codes ACC, REJ or 0 for an exhausted budget.
    Identical to calling :func:`run_trajectory` with ``trajectory_rng(seed, i)``.
    """
    n = len(indices)
    codes = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    if g.root < 0:
        codes[:] = g.root
        return codes, steps
    streams = _Streams(seed, indices)
    cur = np.full(n, g.root, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        over = steps[active] >= max_steps
        if over.any():
            active = active[~over]
            if not active.size:
                break
        nodes = cur[active]
        fresh = nodes[~g.expanded[nodes]]
        if fresh.size:
            for i in np.unique(fresh).tolist():
                g.expand(i)
        nout = g.nout[nodes]
        choice = np.zeros(active.size, dtype=np.int64)
        draw = nout > 1
        if draw.any():
            dn = nodes[draw]
            u = streams.draw(active[draw])
            ut = u * g.total[dn]
            j = np.count_nonzero(g.cum[dn] <= ut[:, None], axis=1)
            choice[draw] = np.minimum(j, nout[draw] - 1)
        nxt = g.tgt[nodes, choice]
        steps[active] += 1
        cur[active] = nxt
        done = nxt < 0
        codes[active[done]] = nxt[done]
        active = active[~done]
    return codes, steps


def wilson_interval(successes: int, trials: int, confidence: float) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class AcceptanceEstimate:
    trials: int
    accepts: int
    rejects: int
    budget_exceeded: int
    p_acc_hat: float
    ci_low: float
    ci_high: float
    mean_steps: float
    median_steps: float
    confidence: float = 0.99

    @property
    def p_rej_hat(self) -> float:
        return self.rejects / self.trials

    def reject_interval(self) -> tuple[float, float]:
        return wilson_interval(self.rejects, self.trials, self.confidence)


def estimate_acceptance(m: Machine, x, trials: int, seed: int, max_steps: int = DEFAULT_MAX_STEPS,
                        confidence: float = 0.99, batch_size: int = 20000) -> AcceptanceEstimate:
    """Aggregate ``trials`` independent trajectories.

    Trajectory ``i`` always uses ``trajectory_rng(seed, i)``, so the result does
    not depend on ``batch_size`` or on how batches are scheduled.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    g = ConfigGraph(check(m), _word(m, x))
    g.close(CLOSE_LIMIT)
    codes = np.empty(trials, dtype=np.int64)
    steps = np.empty(trials, dtype=np.int64)
    for start in range(0, trials, batch_size):
        idx = np.arange(start, min(trials, start + batch_size))
        codes[idx], steps[idx] = sample_trajectories(g, idx, seed, max_steps)
    accepts = int(np.count_nonzero(codes == ACC))
    rejects = int(np.count_nonzero(codes == REJ))
    lo, hi = wilson_interval(accepts, trials, confidence)
    return AcceptanceEstimate(trials, accepts, rejects, trials - accepts - rejects, accepts / trials,
                              lo, hi, float(steps.mean()), float(np.median(steps)), confidence)


@dataclass(frozen=True)
class StatsRow:
    input: str
    length: int
    trials: int
    accepts: int
    rejects: int
    budget_exceeded: int
    p_acc_hat: float
    ci_low: float
    ci_high: float
    mean_steps: float
    median_steps: float

    FIELDS = ("input", "length", "trials", "accepts", "rejects", "budget_exceeded",
              "p_acc_hat", "ci_low", "ci_high", "mean_steps", "median_steps")


def expected_steps_profile(m: Machine, inputs, trials: int, seed: int,
                           max_steps: int = DEFAULT_MAX_STEPS, confidence: float = 0.99) -> list[StatsRow]:
    rows = []
    for x in inputs:
        word = _word(m, x)
        est = estimate_acceptance(m, word, trials, seed, max_steps, confidence)
        rows.append(StatsRow(format_word(word), len(word), est.trials, est.accepts, est.rejects,
                             est.budget_exceeded, est.p_acc_hat, est.ci_low, est.ci_high,
                             est.mean_steps, est.median_steps))
    return rows


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


__all__ = [
    "ACC", "REJ", "AlphabetError", "Absorbed", "AcceptanceEstimate", "ConfigGraph", "Configuration",
    "ExactResult", "ExecutionError", "StatsRow", "TrajectoryOutcome", "Verdict", "estimate_acceptance",
    "exact_eval", "expected_steps_profile", "initial_configuration", "line_walk_oracle", "loglog_slope",
    "run_trajectory", "sample_trajectories", "step", "trajectory_rng", "wilson_interval",
]
