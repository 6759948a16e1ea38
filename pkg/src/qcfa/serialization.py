"""JSON machine files.

Unitaries are written symbolically whenever their construction is known
(identity, basis swap, rotation by a rational multiple of sqrt(2)*pi or pi), so
reading a file back rebuilds bit-identical matrices. Anything else is a matrix
of ``[re, im]`` pairs; Python's float repr round-trips exactly.
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import qcore
from .machine import Machine, MeasureAction, Response, UnitaryAction, check

UNIT_KEYS = {"sqrt2_pi": "coeff_sqrt2_pi", "pi": "coeff_pi"}


class MachineFileError(ValueError):
    """Malformed machine document. ``where`` is a line/column or a JSON path."""

    def __init__(self, message: str, where: str | None = None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


# -- writing -----------------------------------------------------------------

def _unitary_to_json(u: qcore.UnitaryOp, names: tuple[str, ...]) -> Any:
    form = u.form
    if form is not None:
        if form[0] == "identity":
            return "identity"
        if form[0] == "swap":
            return {"swap": [names[form[1]], names[form[2]]]}
        if form[0] == "rotation":
            _, unit, coeff, i, j = form
            return {"rotation": {UNIT_KEYS[unit]: str(Fraction(coeff)), "plane": [i, j]}}
    return [[[float(z.real), float(z.imag)] for z in row] for row in u.matrix]


def to_dict(m: Machine) -> dict:
    names = m.quantum_states
    transitions = []
    for (s, sym), act in m.transitions.items():
        entry: dict[str, Any] = {"state": s, "symbol": sym}
        if isinstance(act, UnitaryAction):
            entry["unitary"] = _unitary_to_json(act.op, names)
            entry["next"] = act.next
            entry["move"] = act.move
        else:
            entry["measure"] = [[names[i] for i in b] for b in act.measurement.blocks]
            entry["outcomes"] = {str(j): {"next": r.next, "move": r.move} for j, r in enumerate(act.responses)}
        transitions.append(entry)
    return {
        "name": m.name,
        "alphabet": list(m.alphabet),
        "quantum_states": list(m.quantum_states),
        "classical_states": list(m.classical_states),
        "initial_quantum": m.initial_quantum,
        "initial_classical": m.initial_classical,
        "accept": sorted(m.accepting),
        "reject": sorted(m.rejecting),
        "transitions": transitions,
    }


def dumps(m: Machine) -> str:
    return json.dumps(to_dict(m), indent=1, ensure_ascii=False)


def serialize(m: Machine, path: str | Path) -> None:
    Path(path).write_text(dumps(m) + "\n", encoding="utf-8")


# -- reading -----------------------------------------------------------------

def _get(obj: Any, key: str, where: str, kind: type | tuple[type, ...] | None = None) -> Any:
    if not isinstance(obj, dict):
        raise MachineFileError("expected an object", where)
    if key not in obj:
        raise MachineFileError(f"missing field {key!r}", where)
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise MachineFileError(f"field {key!r} has the wrong type", f"{where}.{key}")
    return val


def _str_list(obj: dict, key: str, where: str) -> list[str]:
    val = _get(obj, key, where, list)
    if not all(isinstance(v, str) for v in val):
        raise MachineFileError("expected a list of strings", f"{where}.{key}")
    return val


def _move(val: Any, where: str) -> int:
    # range is the validator's business; only the type is checked here
    if isinstance(val, bool) or not isinstance(val, int):
        raise MachineFileError("move must be an integer", where)
    return val


def _qindex(name: Any, names: list[str], where: str) -> int:
    if isinstance(name, int) and not isinstance(name, bool) and 0 <= name < len(names):
        return name
    if isinstance(name, str) and name in names:
        return names.index(name)
    raise MachineFileError(f"unknown quantum state {name!r}", where)


def _unitary_from_json(spec: Any, names: list[str], where: str) -> qcore.UnitaryOp:
    dim = len(names)
    try:
        if spec == "identity":
            return qcore.identity_op(dim)
        if isinstance(spec, dict) and "swap" in spec:
            pair = spec["swap"]
            if not (isinstance(pair, list) and len(pair) == 2):
                raise MachineFileError("swap needs two quantum states", where)
            return qcore.basis_swap_op(_qindex(pair[0], names, where), _qindex(pair[1], names, where), dim)
        if isinstance(spec, dict) and "rotation" in spec:
            rot = spec["rotation"]
            if not isinstance(rot, dict):
                raise MachineFileError("rotation must be an object", where)
            units = [u for u, k in UNIT_KEYS.items() if k in rot]
            if len(units) != 1:
                raise MachineFileError(f"rotation needs exactly one of {sorted(UNIT_KEYS.values())}", where)
            unit = units[0]
            raw = rot[UNIT_KEYS[unit]]
            if isinstance(raw, bool) or not isinstance(raw, (str, int)):
                raise MachineFileError("rotation coefficient must be a rational written as \"p/q\" or an integer",
                                       where)
            try:
                coeff = Fraction(raw)
            except (ValueError, ZeroDivisionError):
                raise MachineFileError(f"bad rational {raw!r}", where) from None
            plane = rot.get("plane", [0, 1])
            if not (isinstance(plane, list) and len(plane) == 2):
                raise MachineFileError("plane must be a pair of quantum states", where)
            i, j = (_qindex(p, names, where) for p in plane)
            return qcore.symbolic_rotation(coeff, unit, i, j, dim)
        if isinstance(spec, list):
            rows = []
            for r, row in enumerate(spec):
                if not isinstance(row, list):
                    raise MachineFileError("matrix rows must be lists", f"{where}[{r}]")
                vals = []
                for c, z in enumerate(row):
                    if not (isinstance(z, list) and len(z) == 2 and all(
                            isinstance(t, (int, float)) and not isinstance(t, bool) for t in z)):
                        raise MachineFileError("matrix entries must be [re, im] pairs", f"{where}[{r}][{c}]")
                    vals.append(complex(z[0], z[1]))
                rows.append(vals)
            if any(len(r) != len(rows) for r in rows):
                raise MachineFileError("matrix must be square", where)
            return qcore.UnitaryOp(np.array(rows, dtype=complex).reshape(len(rows), len(rows)))
    except qcore.DimensionError as e:
        raise MachineFileError(str(e), where) from None
    raise MachineFileError("unitary must be \"identity\", {swap}, {rotation} or a matrix", where)


def from_dict(doc: Any) -> Machine:
    """Build a machine from a decoded document. Semantic checks are left to :func:`machine.validate`."""
    if not isinstance(doc, dict):
        raise MachineFileError("top level must be an object", "$")
    name = _get(doc, "name", "$", str)
    alphabet = _str_list(doc, "alphabet", "$")
    qnames = _str_list(doc, "quantum_states", "$")
    snames = _str_list(doc, "classical_states", "$")
    q0 = _get(doc, "initial_quantum", "$", str)
    s0 = _get(doc, "initial_classical", "$", str)
    acc = _str_list(doc, "accept", "$")
    rej = _str_list(doc, "reject", "$")
    entries = _get(doc, "transitions", "$", list)
    transitions = {}
    for k, e in enumerate(entries):
        where = f"$.transitions[{k}]"
        s = _get(e, "state", where, str)
        sym = _get(e, "symbol", where, str)
        if (s, sym) in transitions:
            raise MachineFileError(f"duplicate entry for ({s}, {sym})", where)
        if ("unitary" in e) == ("measure" in e):
            raise MachineFileError("entry needs exactly one of 'unitary' or 'measure'", where)
        if "unitary" in e:
            op = _unitary_from_json(e["unitary"], qnames, where + ".unitary")
            act = UnitaryAction(op, _get(e, "next", where, str), _move(_get(e, "move", where), where + ".move"))
        else:
            blocks_raw = _get(e, "measure", where, list)
            blocks = []
            for b, block in enumerate(blocks_raw):
                if not isinstance(block, list):
                    raise MachineFileError("measurement blocks must be lists", f"{where}.measure[{b}]")
                blocks.append(tuple(_qindex(q, qnames, f"{where}.measure[{b}]") for q in block))
            outcomes = _get(e, "outcomes", where, dict)
            extra = sorted(set(outcomes) - {str(j) for j in range(len(blocks))})
            if extra:
                raise MachineFileError(f"outcomes for unknown blocks {extra}", where + ".outcomes")
            responses = []
            for j in range(len(blocks)):
                if str(j) not in outcomes:
                    break  # reported by the validator as incomplete-outcomes
                o = outcomes[str(j)]
                ow = f"{where}.outcomes.{j}"
                responses.append(Response(_get(o, "next", ow, str), _move(_get(o, "move", ow), ow + ".move")))
            act = MeasureAction(qcore.Measurement(tuple(blocks), len(qnames)), tuple(responses))
        transitions[(s, sym)] = act
    return Machine(name, qnames, snames, alphabet, transitions, q0, s0, frozenset(acc), frozenset(rej))


def loads(text: str, *, validate: bool = True) -> Machine:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MachineFileError(e.msg, f"line {e.lineno}, column {e.colno}") from None
    m = from_dict(doc)
    return check(m) if validate else m


def parse(path: str | Path, *, validate: bool = True) -> Machine:
    """Read a machine file; raises MachineFileError or machine.InvalidMachine."""
    return loads(Path(path).read_text(encoding="utf-8"), validate=validate)
