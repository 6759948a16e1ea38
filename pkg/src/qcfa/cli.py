"""Command-line interface.

Exit codes: 0 success, 1 usage, 2 unreadable or invalid machine file,
3 runtime precondition (input outside the alphabet, incompatible machines, ...).
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import astuple
from pathlib import Path

from . import compose, zoo
from .execution import (DEFAULT_MASS_FLOOR, DEFAULT_MERGE_TOL, StatsRow, estimate_acceptance, exact_eval,
                        expected_steps_profile)
from .machine import AlphabetError, InvalidMachine, as_word, validate
from .serialization import MachineFileError, parse, serialize

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _bounded(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise argparse.ArgumentTypeError(f"{text} is below the allowed range")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise argparse.ArgumentTypeError(f"{text} is above the allowed range")
        return v
    return conv


positive = _bounded(int, 1)
nonneg = _bounded(int, 0)
nonneg_float = _bounded(float, 0.0)
probability = _bounded(float, 0.0, 1.0, lo_open=True, hi_open=True)
error_bound = _bounded(float, 0.0, 1.0)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcfa", description="Simulate and compose 2QCFA machines.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a machine file")
    v.add_argument("file")

    r = sub.add_parser("run", help="Monte Carlo acceptance estimate")
    r.add_argument("file")
    r.add_argument("--input", required=True)
    r.add_argument("--trials", type=positive, required=True)
    r.add_argument("--seed", type=nonneg, required=True)
    r.add_argument("--max-steps", type=positive, required=True)
    r.add_argument("--confidence", type=probability, default=0.99)

    e = sub.add_parser("eval", help="exact acceptance bounds")
    e.add_argument("file")
    e.add_argument("--input", required=True)
    e.add_argument("--budget", type=nonneg, required=True)
    e.add_argument("--merge-tol", type=nonneg_float, default=DEFAULT_MERGE_TOL)
    e.add_argument("--mass-floor", type=nonneg_float, default=DEFAULT_MASS_FLOOR)

    c = sub.add_parser("compose", help="closure constructions")
    c.add_argument("op", choices=["intersect", "union", "complement", "reverse", "catenate"])
    c.add_argument("m1")
    c.add_argument("m2", nargs="?")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--eps1", type=error_bound)
    c.add_argument("--eps2", type=error_bound)
    c.add_argument("--empty-in-l1", action="store_true", help="catenate: the first language contains the empty word")
    c.add_argument("--empty-in-l2", action="store_true", help="catenate: the second language contains the empty word")

    z = sub.add_parser("zoo", help="write a built-in machine")
    z.add_argument("machine", choices=["m-eq", "m-count-eq", "m-eq-ratio", "m-eq-double", "example-2", "example-3"])
    z.add_argument("--coins", type=positive, default=2)
    z.add_argument("--ratio", type=positive, default=1)
    z.add_argument("--orientation", choices=["a", "b"], default="a")
    z.add_argument("-o", "--output", required=True)

    s = sub.add_parser("stats", help="batch Monte Carlo statistics as CSV")
    s.add_argument("file")
    s.add_argument("--inputs", required=True)
    s.add_argument("--trials", type=positive, required=True)
    s.add_argument("--seed", type=nonneg, required=True)
    s.add_argument("--max-steps", type=positive, required=True)
    s.add_argument("--confidence", type=probability, default=0.99)
    s.add_argument("--csv", required=True)
    return p


def _kv(pairs) -> None:
    for k, v in pairs:
        print(f"{k}={v}")


def cmd_validate(a) -> int:
    report = validate(parse(a.file, validate=False))
    print(report)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_run(a) -> int:
    m = parse(a.file)
    word = as_word(a.input, m.alphabet)
    est = estimate_acceptance(m, word, a.trials, a.seed, a.max_steps, a.confidence)
    _kv([("trials", est.trials), ("accepts", est.accepts), ("rejects", est.rejects),
         ("budget_exceeded", est.budget_exceeded), ("p_acc_hat", est.p_acc_hat), ("p_rej_hat", est.p_rej_hat),
         ("ci_low", est.ci_low), ("ci_high", est.ci_high), ("confidence", est.confidence),
         ("mean_steps", est.mean_steps), ("median_steps", est.median_steps)])
    return EXIT_OK


def cmd_eval(a) -> int:
    m = parse(a.file)
    word = as_word(a.input, m.alphabet)
    r = exact_eval(m, word, a.budget, merge_tol=a.merge_tol, mass_floor=a.mass_floor)
    _kv([("p_acc_low", r.p_acc_low), ("p_rej_low", r.p_rej_low), ("residual", r.residual),
         ("steps_expanded", r.steps_expanded), ("nodes", r.nodes)])
    return EXIT_OK


def cmd_compose(a) -> int:
    binary = a.op in ("intersect", "union", "catenate")
    if binary != (a.m2 is not None):
        raise UsageError(f"{a.op} takes {'two machines' if binary else 'one machine'}")
    m1 = parse(a.m1)
    if a.op == "complement":
        rep = compose.complement(m1, a.eps1)
    elif a.op == "reverse":
        rep = compose.reverse(m1, a.eps1)
    elif a.op == "catenate":
        rep = compose.catenate(m1, parse(a.m2), (a.empty_in_l1, a.empty_in_l2), a.eps1, a.eps2)
    else:
        rep = getattr(compose, a.op)(m1, parse(a.m2), a.eps1, a.eps2)
    serialize(rep.machine, a.output)
    before = [tuple(c) for c in rep.counts_before]
    _kv([("op", rep.op), ("machine", rep.machine.name),
         ("counts_before", " ".join(f"qs={q},cs={s}" for q, s in before)),
         ("counts_after", f"qs={rep.counts_after.qs},cs={rep.counts_after.cs}"),
         ("error_bound", "n/a" if rep.error_bound is None else rep.error_bound),
         ("added_states", ",".join(rep.added_states)), ("output", a.output)])
    return EXIT_OK


def cmd_zoo(a) -> int:
    k = a.coins
    if a.machine == "m-eq":
        m = zoo.m_eq(k)
    elif a.machine == "m-count-eq":
        m = zoo.m_count_eq(k)
    elif a.machine == "m-eq-ratio":
        m = zoo.m_eq_ratio(a.ratio, a.orientation, k)
    elif a.machine == "m-eq-double":
        m = zoo.m_eq_double(k)
    else:
        m = zoo.example_machines(k, max(a.ratio, 2) if a.machine == "example-2" else 2)[a.machine]
    serialize(m, a.output)
    _kv([("machine", m.name), ("qs", len(m.quantum_states)), ("cs", len(m.classical_states)), ("output", a.output)])
    return EXIT_OK


def read_inputs(path: str | Path) -> list[str]:
    """One input per line; an empty line is the empty word."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln.rstrip("\r").strip() for ln in lines]


def cmd_stats(a) -> int:
    m = parse(a.file)
    words = [as_word(x, m.alphabet) for x in read_inputs(a.inputs)]
    rows = expected_steps_profile(m, words, a.trials, a.seed, a.max_steps, a.confidence)
    with open(a.csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(StatsRow.FIELDS)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(row)])
    print(f"rows={len(rows)}")
    print(f"csv={a.csv}")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "eval": cmd_eval, "compose": cmd_compose,
            "zoo": cmd_zoo, "stats": cmd_stats}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"qcfa: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (MachineFileError, InvalidMachine) as e:
        print(f"invalid machine: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (AlphabetError, compose.AlphabetPolicyError, compose.UnimplementedCase, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
