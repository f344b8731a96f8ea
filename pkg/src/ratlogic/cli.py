"""Command-line front end: ``ratlogic eval|translate|simulate|ata2sfr|beh|equisat|fuzz``.

Exit codes are shared by every command: 0 for a true verdict or success, 1
for a false verdict or a failed check, 2 for any input or usage error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import ata as A
from . import reduction as R
from .formula import (
    ALWAYS, BASE, URat, UntilMod, expand_derived, parse_formula, pretty, random_derived, random_formula,
    random_interval, random_re, substitute, unparse, walk,
)
from .semantics import Evaluator
from .timed import Interval, TimedWord, format_rational, format_word, parse_word, to_rational

EXIT_TRUE, EXIT_FALSE, EXIT_ERROR = 0, 1, 2
PASSES = ("reduce", "urat2rat", "um2mc", "expand", "sfr2tptl")
SUITES = ("derived", "rewrite", "reduce", "triangle")
MANIFEST_FORMAT = "ratlogic-reduce/1"


class CliError(ValueError):
    pass


# --- io helpers --------------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None


def _formula(path: str, dialect: Optional[str]):
    return parse_formula(_read(path), dialect, closed=dialect != "tptl")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _report(args, record: dict, lines: Sequence[str]) -> None:
    if args.json:
        sys.stdout.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    else:
        for line in lines:
            sys.stdout.write(line + "\n")


def _verdict(ok: bool) -> int:
    return EXIT_TRUE if ok else EXIT_FALSE


# --- eval, translate -------------------------------------------------------------------


def cmd_eval(args) -> int:
    f = _formula(args.formula, args.dialect)
    w = parse_word(_read(args.word))
    nu = to_rational(args.nu) if args.nu is not None else None
    if nu is None and args.dialect == "tptl":
        nu = Fraction(0)
    ok = Evaluator(w).holds(f, args.pos, nu)
    record = {"command": "eval", "position": args.pos, "verdict": ok}
    if nu is not None:
        record["valuation"] = format_rational(nu)
    _report(args, record, ["true" if ok else "false"])
    return _verdict(ok)


def manifest(source, out: R.ReductionOutput) -> dict:
    return {
        "format": MANIFEST_FORMAT,
        "source": unparse(source),
        "alphabet": list(out.alphabet),
        "reduced": unparse(out.formula),
        "new_symbols": sorted(out.new_symbols),
        "constraints": [c.name for c in out.constraints],
        "strict": out.strict,
    }


def replay(record: dict) -> Tuple[object, R.ReductionOutput]:
    """Rebuild the reduction a manifest describes and check it is the same one."""
    if record.get("format") != MANIFEST_FORMAT:
        raise CliError(f"not a reduction manifest (format {record.get('format')!r})")
    source = parse_formula(record["source"])
    out = R.reduce(source, record["alphabet"])
    if unparse(out.formula) != record["reduced"]:
        raise CliError("manifest does not match the reduction computed by this version")
    return source, out


def cmd_translate(args) -> int:
    f = _formula(args.formula, args.dialect)
    if args.pass_ == "reduce":
        alphabet = args.alphabet.split(",") if args.alphabet else None
        out = R.reduce(f, alphabet)
        g = out.formula
        info = manifest(f, out)
        target = args.manifest or (args.out + ".manifest.json" if args.out else None)
        if target:
            Path(target).write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    elif args.pass_ == "urat2rat":
        g = R.urat_to_rat(f)
    elif args.pass_ == "um2mc":
        g = R.um_to_mc(f)
    elif args.pass_ == "expand":
        g = expand_derived(f)
    else:
        g = A.sfr_to_tptl(f)
    text = unparse(g) + "\n"
    if args.json:
        record = {"command": "translate", "pass": args.pass_, "formula": unparse(g)}
        if args.pass_ == "reduce":
            record["manifest"] = info
        if args.out:
            _emit(text, args.out)
        _report(args, record, [])
    else:
        _emit(text, args.out)
    return EXIT_TRUE


# --- automata -------------------------------------------------------------------------------


def _automaton(path: str) -> A.Ata:
    return A.check_ata(A.parse_ata(_read(path)))


def cmd_simulate(args) -> int:
    M = _automaton(args.ata)
    w = parse_word(_read(args.word))
    ok = A.simulate(M, w, adapter=args.adapter)
    _report(args, {"command": "simulate", "accepted": ok}, ["accepted" if ok else "rejected"])
    return _verdict(ok)


def cmd_ata2sfr(args) -> int:
    g = A.ata_to_sfrmtl(_automaton(args.ata))
    if args.json:
        _report(args, {"command": "ata2sfr", "formula": unparse(g)}, [])
    else:
        _emit(unparse(g) + "\n", args.out)
    return EXIT_TRUE


def cmd_beh(args) -> int:
    b = A.beh(_automaton(args.ata))
    g = b.closed if args.closed else b.formula
    if args.json:
        record = {"command": "beh", "formula": unparse(g), "pretty": pretty(g),
                  "locations": {s: unparse(h) for s, h in sorted(b.formulas.items())}}
        _report(args, record, [])
    else:
        _emit((pretty(g) if args.pretty else unparse(g)) + "\n", args.out)
    return EXIT_TRUE


# --- equisatisfiability replay --------------------------------------------------------------


def cmd_equisat(args) -> int:
    try:
        record = json.loads(_read(args.manifest))
    except json.JSONDecodeError as e:
        raise CliError(f"manifest is not JSON: {e}") from None
    source, out = replay(record)
    w = parse_word(_read(args.word))
    if not Evaluator(w).holds(source, 1):
        raise CliError("the word does not satisfy the source formula")
    if args.extended:
        ext = parse_word(_read(args.extended))
        if out.erase(ext) != w:
            raise CliError("the extended word does not erase to the given word")
        origin = "supplied"
    else:
        ext = out.recipe(w).extended
        origin = "recipe"
    forward = Evaluator(ext).holds(out.formula, 1)
    locus = [] if forward else out.locate(ext) or [("top", 1)]
    backward = None
    if forward:
        base = out.erase(ext)
        backward = bool(len(base)) and Evaluator(base).holds(source, 1)
    ok = forward and backward is not False
    result = {
        "command": "equisat",
        "extension": origin,
        "forward": "PASS" if forward else "FAIL",
        "backward": None if backward is None else ("PASS" if backward else "FAIL"),
        "locus": [{"constraint": name, "position": k} for name, k in locus],
    }
    lines = [f"forward: {result['forward']} ({origin} extension, {len(ext)} points)"]
    lines += [f"  violated: {name} at position {k}" for name, k in locus]
    if backward is not None:
        lines.append(f"backward: {result['backward']}")
    _report(args, result, lines)
    return _verdict(ok)


# --- fuzzing ------------------------------------------------------------------------------------


class Case:
    """One fuzz case: a check over a formula (or automaton) and a word."""

    def __init__(self, suite: str, word: TimedWord, formula=None, automaton: Optional[A.Ata] = None):
        self.suite = suite
        self.word = word
        self.formula = formula
        self.automaton = automaton

    def failure(self) -> Optional[str]:
        return CHECKS[self.suite](self)

    def with_word(self, w: TimedWord) -> "Case":
        return Case(self.suite, w, self.formula, self.automaton)

    def with_formula(self, f) -> "Case":
        return Case(self.suite, self.word, f, self.automaton)


def _positionwise(w: TimedWord, f, g) -> Optional[str]:
    ev = Evaluator(w)
    for i in w.positions():
        if ev.holds(f, i) != ev.holds(g, i):
            return f"position {i}: source {ev.holds(f, i)}, rewritten {ev.holds(g, i)}"
    return None


def _check_derived(c: Case) -> Optional[str]:
    return _positionwise(c.word, c.formula, expand_derived(c.formula))


def _check_rewrite(c: Case) -> Optional[str]:
    rewrite = R.urat_to_rat if isinstance(c.formula, URat) else R.um_to_mc
    return _positionwise(c.word, c.formula, rewrite(c.formula))


def _check_reduce(c: Case) -> Optional[str]:
    out = R.reduce(c.formula, ("a", "b"))
    want = Evaluator(c.word).holds(c.formula, 1)
    if out.strict and not c.word.is_strict():
        return None
    ext = out.recipe(c.word).extended
    got = Evaluator(ext).holds(out.formula, 1)
    if got != want:
        where = ", ".join(f"{n} at {k}" for n, k in out.locate(ext))
        return f"source {want}, reduced on the recipe extension {got}" + (f" ({where})" if where else "")
    return None


def _check_triangle(c: Case) -> Optional[str]:
    M = c.automaton
    sim = A.simulate(M, c.word)
    via_beh = Evaluator(c.word).holds(A.beh(M).formula, 1, 0)
    via_sfr = Evaluator(c.word).holds(A.ata_to_sfrmtl(M), 1)
    if sim == via_beh == via_sfr:
        return None
    return f"simulate {sim}, Beh {via_beh}, SfrMTL {via_sfr}"


CHECKS: Dict[str, Callable[[Case], Optional[str]]] = {
    "derived": _check_derived, "rewrite": _check_rewrite, "reduce": _check_reduce, "triangle": _check_triangle,
}


def make_case(suite: str, seed: int, index: int, grid: Fraction, max_len: int) -> Case:
    """The index-th case of a suite; depends only on (suite, seed, index)."""
    rng = random.Random(f"{suite}:{seed}:{index}")
    if suite == "derived":
        f = random_derived(rng)
        return Case(suite, R.random_word(rng, ("a", "b"), max_len, 4, grid), f)
    if suite == "rewrite":
        pick = lambda: rng.choice(BASE)
        if rng.random() < 0.5:
            f = URat(random_interval(rng), random_re(rng, rng.sample(BASE, 2)), pick(), pick())
        else:
            n = rng.randint(1, 3)
            f = UntilMod(random_interval(rng), rng.randrange(n), n, pick(), pick(), pick())
        # both rewrites are exact on strictly monotone words only
        return Case(suite, R.random_word(rng, ("a", "b"), max_len, 4, grid, strict=True), f)
    if suite == "reduce":
        f = random_formula(rng, kinds=rng.choice([("rat",), ("urat",), ("um",)]))
        strict = R.reduce(f, ("a", "b")).strict
        return Case(suite, R.random_word(rng, ("a", "b"), max_len, 4, grid, strict), f)
    if suite == "triangle":
        M = A.random_ata(rng, locations=rng.randint(1, 3))
        w = R.random_word(rng, ("a",), max_len, M.K + 2, grid)
        w = TimedWord(tuple(frozenset([rng.choice(M.alphabet)]) for _ in w.events), w.stamps)
        return Case(suite, w, automaton=M)
    raise CliError(f"unknown suite {suite!r}")


def _drop(w: TimedWord, k: int) -> TimedWord:
    events = w.events[:k] + w.events[k + 1:]
    stamps = w.stamps[:k] + w.stamps[k + 1:]
    return TimedWord(events, tuple(t - stamps[0] for t in stamps))


def _widenings(iv: Interval) -> List[Interval]:
    out = [ALWAYS]
    if iv.hi is not None:
        out.append(Interval(iv.lo, None, iv.lo_closed, False))
    if iv.lo > 0:
        out.append(Interval(0, iv.hi, True, iv.hi_closed))
    return [x for x in out if x != iv]


def _timed_nodes(f) -> List:
    return [n for n in dict.fromkeys(walk(f)) if isinstance(getattr(n, "interval", None), Interval)]


def _retimed(node, iv: Interval):
    return type(node)(*[iv if name == "interval" else getattr(node, name) for name in node.fields])


def shrink(case: Case) -> Case:
    """Delete positions and widen intervals while the case keeps failing."""
    progress = True
    while progress:
        progress = False
        for k in range(len(case.word)):
            if len(case.word) > 1:
                smaller = case.with_word(_drop(case.word, k))
                if _fails(smaller):
                    case, progress = smaller, True
                    break
        if progress or case.formula is None:
            continue
        for node in _timed_nodes(case.formula):
            for wider in _widenings(node.interval):
                candidate = case.with_formula(substitute(case.formula, {node: _retimed(node, wider)}))
                if _fails(candidate):
                    case, progress = candidate, True
                    break
            if progress:
                break
    return case


def _fails(case: Case) -> bool:
    try:
        return case.failure() is not None
    except ValueError:
        return False


def _run_case(job) -> Optional[dict]:
    suite, seed, index, grid, max_len = job
    case = make_case(suite, seed, index, grid, max_len)
    try:
        problem = case.failure()
    except ValueError as e:
        problem = f"error: {e}"
    if problem is None:
        return None
    small = shrink(case) if not problem.startswith("error") else case
    return {"index": index, "problem": small.failure() if small is not case else problem, "case": small}


def _write_repro(out: Path, suite: str, fail: dict) -> List[str]:
    case: Case = fail["case"]
    stem = out / f"{suite}-{fail['index']:05d}"
    files = [(stem.with_suffix(".word"), format_word(case.word))]
    if case.formula is not None:
        files.append((stem.with_suffix(".formula"), unparse(case.formula) + "\n"))
    if case.automaton is not None:
        files.append((stem.with_suffix(".ata"), A.format_ata(case.automaton)))
    files.append((stem.with_suffix(".txt"), fail["problem"] + "\n"))
    out.mkdir(parents=True, exist_ok=True)
    for path, text in files:
        path.write_text(text, encoding="utf-8")
    return [str(p) for p, _ in files]


def fuzz(suite: str, seed: int, budget: int, grid: Fraction = Fraction(1, 4), max_len: int = 5,
         jobs: int = 1) -> List[dict]:
    """Failures (shrunk) among the first ``budget`` cases, sorted by case index."""
    work = [(suite, seed, i, grid, max_len) for i in range(budget)]
    if jobs > 1 and budget:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_case, work))
    else:
        results = [_run_case(job) for job in work]
    return sorted((r for r in results if r is not None), key=lambda r: r["index"])


def cmd_fuzz(args) -> int:
    grid = to_rational(args.grid)
    fails = fuzz(args.suite, args.seed, args.budget, grid, args.max_len, args.jobs)
    written = []
    if fails and args.out:
        for f in fails:
            written += _write_repro(Path(args.out), args.suite, f)
    record = {
        "command": "fuzz", "suite": args.suite, "seed": args.seed, "cases": args.budget,
        "failures": [{"index": f["index"], "problem": f["problem"]} for f in fails], "files": written,
    }
    lines = [f"{args.suite}: {args.budget} cases, {len(fails)} failures (seed {args.seed})"]
    lines += [f"  case {f['index']}: {f['problem']}" for f in fails]
    _report(args, record, lines)
    return EXIT_FALSE if fails else EXIT_TRUE


# --- argument parsing ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ratlogic", description="Rational metric temporal logic toolkit.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable JSON output")
    common.add_argument("--out", help="write the result to this file instead of stdout")
    common.add_argument("--dialect", choices=("mtl", "ratmtl", "tptl"), help="check the input formula's dialect")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate a formula on a timed word")
    e.add_argument("formula")
    e.add_argument("word")
    e.add_argument("--pos", type=int, default=1, help="1-based position (default 1)")
    e.add_argument("--nu", help="clock value for a free clock (tptl; default 0)")
    e.set_defaults(run=cmd_eval)

    t = sub.add_parser("translate", parents=[common], help="apply a translation pass")
    t.add_argument("formula")
    t.add_argument("--pass", dest="pass_", choices=PASSES, required=True)
    t.add_argument("--alphabet", help="comma-separated letters for reduce (default: the formula's)")
    t.add_argument("--manifest", help="where to write the reduce manifest (default <out>.manifest.json)")
    t.set_defaults(run=cmd_translate)

    s = sub.add_parser("simulate", parents=[common], help="run an automaton on a word")
    s.add_argument("ata")
    s.add_argument("word")
    s.add_argument("--adapter", action="store_true", help="read a multi-letter event as any of its letters")
    s.set_defaults(run=cmd_simulate)

    a = sub.add_parser("ata2sfr", parents=[common], help="translate an automaton into SfrMTL")
    a.add_argument("ata")
    a.set_defaults(run=cmd_ata2sfr)

    b = sub.add_parser("beh", parents=[common], help="Beh of the initial location as 1-TPTL")
    b.add_argument("ata")
    b.add_argument("--closed", action="store_true", help="freeze the clock at the first point")
    b.add_argument("--pretty", action="store_true", help="infix rendering (not parseable)")
    b.set_defaults(run=cmd_beh)

    q = sub.add_parser("equisat", parents=[common], help="replay a reduce manifest on a word")
    q.add_argument("manifest")
    q.add_argument("word")
    q.add_argument("--extended", help="check this extended word instead of the recipe's")
    q.set_defaults(run=cmd_equisat)

    f = sub.add_parser("fuzz", parents=[common], help="randomized cross-checks")
    f.add_argument("--suite", choices=SUITES, required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--budget", type=int, default=100, help="number of cases")
    f.add_argument("--grid", default="1/4", help="stamp granularity")
    f.add_argument("--max-len", type=int, default=5)
    f.add_argument("--jobs", type=int, default=1, help="worker processes")
    f.set_defaults(run=cmd_fuzz)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_TRUE
    try:
        return args.run(args)
    except (ValueError, KeyError, RecursionError) as e:
        sys.stderr.write(f"ratlogic {args.command}: {e}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
