import json
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import pytest

from ratlogic import cli
from ratlogic.formula import parse_formula, unparse
from ratlogic.timed import format_word, parse_word

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return write


def test_eval_verdicts(capsys):
    f = SAMPLES / "example1.formula"
    assert run(capsys, "eval", f, SAMPLES / "example1.word")[:2] == (0, "true\n")
    assert run(capsys, "eval", f, SAMPLES / "example1-reject.word")[:2] == (1, "false\n")


def test_eval_json_and_position(capsys, files):
    f = files("f", "(next [0,1] b)")
    w = files("w", "t=0 {a}\nt=0.5 {b}\nt=0.7 {a}\n")
    code, out, _ = run(capsys, "eval", f, w, "--pos", 2, "--json")
    assert code == 1
    assert json.loads(out) == {"command": "eval", "position": 2, "verdict": False}


def test_eval_tptl_defaults_clock_to_zero(capsys, files):
    f = files("f", "(tuntil true (and b (in (1,2))))")
    w = files("w", "t=0 {a}\nt=1.5 {b}\n")
    assert run(capsys, "eval", f, w, "--dialect", "tptl")[0] == 0
    assert run(capsys, "eval", f, w, "--dialect", "tptl", "--nu", "1")[0] == 1


@pytest.mark.parametrize("word_text", ["t=1 {a}\n", "t=0 {a}\nt=0.5\n", "garbage\n"])
def test_bad_words_are_errors(capsys, files, word_text):
    code, _, err = run(capsys, "eval", SAMPLES / "example1.formula", files("w", word_text))
    assert code == 2 and err.startswith("ratlogic eval:")


def test_bad_formula_and_missing_file(capsys, files):
    assert run(capsys, "eval", files("f", "(until a"), SAMPLES / "bb.word")[0] == 2
    assert run(capsys, "eval", "/nonexistent", SAMPLES / "bb.word")[0] == 2
    assert run(capsys, "eval", files("f", "(rat (0,1) a)"), SAMPLES / "bb.word", "--dialect", "mtl")[0] == 2


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "translate", SAMPLES / "example1.formula")[0] == 2


def test_translate_passes(capsys, files):
    f = files("f", "(mc (1,2) 0 2 a)")
    code, out, _ = run(capsys, "translate", f, "--pass", "expand")
    assert code == 0
    assert out == "(rat (1,2) (cat (star (cat (star (not a)) a (star (not a)) a)) (star (not a))))\n"
    same = files("g", "(until (0,1) a b)")
    for p in ("um2mc", "urat2rat"):
        assert run(capsys, "translate", same, "--pass", p)[1] == "(until (0,1) a b)\n"
    code, out, _ = run(capsys, "translate", files("h", "(rat [0,inf) (star true))"), "--pass", "sfr2tptl")
    assert code == 0 and out.startswith("(freeze")


def test_reduce_manifest_and_equisat(capsys, tmp_path):
    out = tmp_path / "red.formula"
    code, _, _ = run(capsys, "translate", SAMPLES / "example1.formula", "--pass", "reduce", "--out", out,
                     "--alphabet", "a,b")
    assert code == 0
    man = Path(str(out) + ".manifest.json")
    record = json.loads(man.read_text())
    assert record["format"] == cli.MANIFEST_FORMAT
    assert record["reduced"] == out.read_text().strip()
    code, text, _ = run(capsys, "equisat", man, SAMPLES / "example1.word")
    assert code == 0
    assert "forward: PASS" in text and "backward: PASS" in text


def test_equisat_reports_locus_of_broken_extension(capsys, tmp_path, files):
    fpath = files("f", "(rat (0,1) a)")
    man = tmp_path / "m.json"
    run(capsys, "translate", fpath, "--pass", "reduce", "--alphabet", "a,b", "--manifest", man)
    w = files("w", "t=0 {a}\nt=0.5 {a}\nt=1.5 {b}\n")
    _, out = cli.replay(json.loads(man.read_text()))
    ext = out.recipe(parse_word(w.read_text())).extended
    broken = ext.with_events([e - {"c.1"} for e in ext.events])
    ext_path = files("ext", format_word(broken))
    code, text, _ = run(capsys, "equisat", man, w, "--extended", ext_path, "--json")
    assert code == 1
    result = json.loads(text)
    assert result["forward"] == "FAIL" and result["locus"]
    good = files("good", format_word(ext))
    assert run(capsys, "equisat", man, w, "--extended", good)[0] == 0


def test_equisat_rejects_foreign_manifests(capsys, files):
    bad = files("m.json", json.dumps({"format": "other"}))
    assert run(capsys, "equisat", bad, SAMPLES / "bb.word")[0] == 2
    stale = files("s.json", json.dumps({"format": cli.MANIFEST_FORMAT, "source": "(rat (0,1) a)",
                                        "alphabet": ["a"], "reduced": "true"}))
    assert run(capsys, "equisat", stale, SAMPLES / "bb.word")[0] == 2


def test_automaton_commands(capsys, files):
    ata = SAMPLES / "eg1.ata"
    assert run(capsys, "simulate", ata, SAMPLES / "bb.word")[:2] == (0, "accepted\n")
    assert run(capsys, "simulate", ata, files("w", "t=0 {a}\nt=1 {a}\n"))[:2] == (1, "rejected\n")
    assert run(capsys, "simulate", ata, files("v", "t=0 {a,b}\n"))[0] == 2
    assert run(capsys, "simulate", ata, files("v2", "t=0 {a,b}\n"), "--adapter")[0] == 0
    code, out, _ = run(capsys, "beh", ata, "--pretty")
    assert code == 0 and out == "(((a ∧ x.O(x∈[0,1) Uns x∈(1,inf))) ∨ b) W (a ∧ Ō□ns b))\n"
    code, out, _ = run(capsys, "beh", ata, "--json")
    assert json.loads(out)["locations"]["sl"] == "(boxns b)"
    code, out, _ = run(capsys, "ata2sfr", ata)
    assert code == 0 and parse_formula(out)


def test_invalid_automaton_is_an_error(capsys, files):
    text = (SAMPLES / "eg1.ata").read_text() + "order s0 < sa\n"
    assert run(capsys, "beh", files("bad.ata", text))[0] == 2


@pytest.mark.parametrize("suite", cli.SUITES)
def test_fuzz_suites_pass(capsys, suite):
    code, out, _ = run(capsys, "fuzz", "--suite", suite, "--budget", 15, "--seed", 3)
    assert code == 0
    assert out.startswith(f"{suite}: 15 cases, 0 failures")


def test_fuzz_zero_budget(capsys):
    code, out, _ = run(capsys, "fuzz", "--suite", "derived", "--budget", 0, "--json")
    assert code == 0 and json.loads(out)["failures"] == []


def test_fuzz_cases_are_reproducible():
    a = cli.make_case("reduce", 5, 17, Fraction(1, 4), 5)
    b = cli.make_case("reduce", 5, 17, Fraction(1, 4), 5)
    assert a.word == b.word and a.formula is b.formula


def test_fuzz_shrinks_and_writes_repro(monkeypatch, capsys, tmp_path):
    def long_words_fail(case):
        return "too long" if len(case.word) >= 2 else None
    monkeypatch.setitem(cli.CHECKS, "derived", long_words_fail)
    code, out, _ = run(capsys, "fuzz", "--suite", "derived", "--budget", 20, "--out", tmp_path, "--json")
    assert code == 1
    record = json.loads(out)
    assert record["failures"]
    indices = [f["index"] for f in record["failures"]]
    assert indices == sorted(indices)
    words = [p for p in record["files"] if p.endswith(".word")]
    assert words and all(len(parse_word(Path(p).read_text())) == 2 for p in words)
    assert any(p.endswith(".formula") for p in record["files"])


def test_shrink_widens_intervals(monkeypatch):
    monkeypatch.setitem(cli.CHECKS, "derived", lambda c: "always fails")
    case = cli.make_case("derived", 0, 0, Fraction(1, 4), 5).with_formula(parse_formula("(count (1,2) 1 a)"))
    small = cli.shrink(case)
    assert len(small.word) == 1
    assert unparse(small.formula) == "(count [0,inf) 1 a)"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ratlogic", "simulate", str(SAMPLES / "eg1.ata"),
                           str(SAMPLES / "bb.word")], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "accepted\n"
