import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qcfa import zoo
from qcfa.cli import main, read_inputs
from qcfa.execution import StatsRow
from qcfa.machine import InvalidMachine
from qcfa.serialization import MachineFileError, dumps, loads, parse, serialize


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


@pytest.fixture(scope="module")
def m_eq_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("m") / "m_eq.json"
    serialize(zoo.m_eq(2), p)
    return p


# -- serialization -----------------------------------------------------------

@pytest.mark.parametrize("build", [lambda: zoo.m_eq(7), lambda: zoo.m_eq_double(2), lambda: zoo.m_eq_ratio(3, "b", 1),
                                   lambda: zoo.example_machines(1)["example-3"]])
def test_round_trip(build, tmp_path):
    m = build()
    serialize(m, tmp_path / "m.json")
    assert parse(tmp_path / "m.json") == m


def test_round_trip_of_plain_matrices():
    from helpers import random_machine
    m = random_machine(np.random.default_rng(0))
    assert loads(dumps(m)) == m


def test_rotation_coefficient_reconstructed_exactly():
    doc = json.loads(dumps(zoo.m_eq(1)))
    doc["transitions"] = [{"state": "s", "symbol": s, "unitary": {"rotation": {"coeff_sqrt2_pi": "1", "plane": [0, 1]}},
                           "next": "s" if s != "$" else "acc", "move": 1 if s != "$" else 0}
                          for s in ["¢", "a", "b", "$"]]
    doc["classical_states"] = ["s", "acc", "rej"]
    doc["initial_classical"] = "s"
    m = loads(json.dumps(doc))
    u = m.transitions[("s", "a")].op.matrix
    t = math.sqrt(2) * math.pi
    assert u[0, 0] == math.cos(t) and u[1, 0] == math.sin(t) and u[0, 1] == -math.sin(t) and u[1, 1] == math.cos(t)


def test_parse_error_has_position():
    with pytest.raises(MachineFileError) as e:
        loads('{"name": "x",\n  "alphabet": [}')
    assert e.value.where == "line 2, column 16"


def test_structural_errors_name_path():
    doc = json.loads(dumps(zoo.m_eq(1)))
    doc["transitions"][3]["measure"][0] = ["q9"]
    with pytest.raises(MachineFileError) as e:
        loads(json.dumps(doc))
    assert "transitions[3]" in e.value.where


def test_overlapping_blocks_named():
    doc = json.loads(dumps(zoo.m_eq(1)))
    k = next(i for i, t in enumerate(doc["transitions"]) if "measure" in t)
    doc["transitions"][k]["measure"] = [["q0", "q1"], ["q1"]]
    entry = doc["transitions"][k]
    with pytest.raises(InvalidMachine) as e:
        loads(json.dumps(doc))
    v = e.value.report.violations
    assert [(x.kind, x.state, x.symbol) for x in v] == [("bad-measurement", entry["state"], entry["symbol"])]


def test_read_inputs(tmp_path):
    p = tmp_path / "in.txt"
    p.write_text("ab\n\naab\n", encoding="utf-8")
    assert read_inputs(p) == ["ab", "", "aab"]


# -- commands ----------------------------------------------------------------

def test_validate(capsys, m_eq_file, tmp_path):
    assert run_cli(capsys, "validate", m_eq_file)[:2] == (0, "ok\n")
    doc = json.loads(m_eq_file.read_text(encoding="utf-8"))
    doc["initial_classical"] = "nowhere"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc), encoding="utf-8")
    code, out, _ = run_cli(capsys, "validate", bad)
    assert code == 2 and "initial-state" in out


def test_eval(capsys, m_eq_file):
    code, out, _ = run_cli(capsys, "eval", m_eq_file, "--input", "aab", "--budget", 5000)
    assert code == 0
    r = kv(out)
    assert float(r["p_rej_low"]) >= 0.92
    assert {"p_acc_low", "p_rej_low", "residual"} <= set(r)


def test_run_member_never_rejected(capsys, m_eq_file):
    code, out, _ = run_cli(capsys, "run", m_eq_file, "--input", "ab", "--trials", 10000, "--seed", 1,
                           "--max-steps", 1000000)
    r = kv(out)
    assert code == 0 and r["rejects"] == "0" and r["trials"] == "10000"
    assert int(r["accepts"]) + int(r["budget_exceeded"]) == 10000


def test_compose_complement_swaps(capsys, m_eq_file, tmp_path):
    out_file = tmp_path / "mc.json"
    code, out, _ = run_cli(capsys, "compose", "complement", m_eq_file, "-o", out_file)
    assert code == 0 and kv(out)["counts_after"] == "qs=2,cs=21"
    a = kv(run_cli(capsys, "eval", m_eq_file, "--input", "aab", "--budget", 3000)[1])
    b = kv(run_cli(capsys, "eval", out_file, "--input", "aab", "--budget", 3000)[1])
    assert (a["p_acc_low"], a["p_rej_low"], a["residual"]) == (b["p_rej_low"], b["p_acc_low"], b["residual"])


def test_compose_binary_and_errors(capsys, m_eq_file, tmp_path):
    code, out, _ = run_cli(capsys, "compose", "intersect", m_eq_file, m_eq_file, "-o", tmp_path / "i.json",
                           "--eps1", 0.1, "--eps2", 0.1)
    assert code == 0 and float(kv(out)["error_bound"]) == pytest.approx(0.19)
    assert parse(tmp_path / "i.json").name.startswith("intersect")
    assert run_cli(capsys, "compose", "catenate", m_eq_file, m_eq_file, "-o", tmp_path / "c.json")[0] == 3
    assert run_cli(capsys, "compose", "reverse", m_eq_file, m_eq_file, "-o", tmp_path / "r.json")[0] == 1
    assert run_cli(capsys, "compose", "union", m_eq_file, "-o", tmp_path / "u.json")[0] == 1


def test_zoo(capsys, tmp_path):
    for name in ["m-eq", "m-count-eq", "m-eq-ratio", "m-eq-double", "example-2", "example-3"]:
        f = tmp_path / f"{name}.json"
        code, out, _ = run_cli(capsys, "zoo", name, "--coins", 1, "--ratio", 2, "-o", f)
        assert code == 0 and kv(out)["qs"] == ("4" if name == "example-2" else "2")
        assert run_cli(capsys, "validate", f)[0] == 0
    f = tmp_path / "r.json"
    run_cli(capsys, "zoo", "m-eq-ratio", "--ratio", 3, "--orientation", "b", "-o", f)
    assert parse(f) == zoo.m_eq_ratio(3, "b", 2)


def test_stats_csv_deterministic(capsys, m_eq_file, tmp_path):
    inputs = tmp_path / "in.txt"
    inputs.write_text("ab\n\naab\nba\n", encoding="utf-8")
    outs = []
    for i in range(2):
        csv_path = tmp_path / f"s{i}.csv"
        code, _, _ = run_cli(capsys, "stats", m_eq_file, "--inputs", inputs, "--trials", 50, "--seed", 4,
                             "--max-steps", 100000, "--csv", csv_path)
        assert code == 0
        outs.append(csv_path.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0] == ",".join(StatsRow.FIELDS)
    assert len(lines) == 5
    assert lines[2].split(",")[:2] == ["", "0"]
    for line in lines[1:]:
        row = dict(zip(StatsRow.FIELDS, line.split(",")))
        assert int(row["accepts"]) + int(row["rejects"]) + int(row["budget_exceeded"]) == int(row["trials"]) == 50


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["eval", "m.json", "--input", "ab"],
    ["eval", "m.json", "--input", "ab", "--budget", "-1"],
    ["run", "m.json", "--input", "ab", "--trials", "0", "--seed", "1", "--max-steps", "10"],
    ["run", "m.json", "--input", "ab", "--trials", "5", "--seed", "1", "--max-steps", "10", "--confidence", "1.5"],
    ["zoo", "m-eq", "--coins", "0", "-o", "x.json"],
    ["zoo", "m-eq", "--bogus", "-o", "x.json"],
    ["compose", "intersect", "a.json", "b.json", "-o", "x.json", "--eps1", "2"],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 1
    assert "usage:" in capsys.readouterr().err


def test_runtime_and_file_errors(capsys, m_eq_file, tmp_path):
    assert run_cli(capsys, "eval", m_eq_file, "--input", "abc", "--budget", 10)[0] == 3
    assert run_cli(capsys, "eval", tmp_path / "missing.json", "--input", "ab", "--budget", 10)[0] == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    code, _, err = run_cli(capsys, "eval", broken, "--input", "ab", "--budget", 10)
    assert code == 2 and "line 1" in err


def test_console_entry_point(m_eq_file):
    p = subprocess.run([sys.executable, "-m", "qcfa.cli", "eval", str(m_eq_file), "--input", "ba", "--budget", "10"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and "p_rej_low=1.0" in p.stdout
