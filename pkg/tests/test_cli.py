import json
import shutil

import pytest

from pdnet.cli import export, main, run_bench

from conftest import BENCH
from figures import isomorphism

MOTIVATING = str(BENCH / "motivating.cpl")
SAFETY = "G !fireable(err)"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_violated_text(capsys):
    code, out, _ = run(capsys, "check", MOTIVATING, "--ltl", SAFETY)
    assert code == 1
    assert "verdict: violated" in out
    line = next(x for x in out.splitlines() if x.startswith("statements:"))
    assert line.split()[1].startswith("1,7,8,2,9")


def test_check_holds(capsys):
    assert run(capsys, "check", MOTIVATING, "--ltl", "true")[0] == 0


def test_check_formula_from_file(capsys, tmp_path):
    f = tmp_path / "f.ltl"
    f.write_text(SAFETY + "\n")
    assert run(capsys, "check", MOTIVATING, "--ltl", f"@{f}")[0] == 1


@pytest.mark.parametrize("flag", ["--slice", "--no-slice"])
def test_peterson_same_verdict_both_modes(capsys, flag):
    prog = str(BENCH / "peterson.cpl")
    psi = str(BENCH / "peterson.psi1.ltl")
    assert run(capsys, "check", prog, "--ltl", f"@{psi}", flag)[0] == 0


def test_check_json(capsys):
    code, out, _ = run(capsys, "check", MOTIVATING, "--ltl", SAFETY, "--fmt", "json")
    doc = json.loads(out)
    assert code == 1 and doc["verdict"] == "violated"
    assert doc["slice"]["places_kept"] == 11


@pytest.mark.parametrize("argv", [
    ["check", "/nonexistent.cpl", "--ltl", "true"],
    ["check", MOTIVATING, "--ltl", "G ("],
    ["check", MOTIVATING, "--ltl", "F fireable(nope)"],
    ["check", MOTIVATING, "--ltl", "@/nonexistent.ltl"],
    ["check", MOTIVATING, "--ltl", "G tok(x) >= 0", "--max-states", "5"],
    ["check", MOTIVATING, "--ltl", "true", "--int-range", "3:1"],
    ["check", MOTIVATING],
    ["frobnicate"],
])
def test_error_exit_code(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_bound_exceeded_reports_on_stderr(capsys):
    code, _, err = run(capsys, "check", MOTIVATING, "--ltl", "G tok(x) >= 0",
                       "--max-states", "5")
    assert code == 2 and "bound" in err


def test_bad_environment_bound(capsys, monkeypatch):
    monkeypatch.setenv("PDNET_MAX_STATES", "lots")
    assert run(capsys, "check", MOTIVATING, "--ltl", "true")[0] == 2


def test_environment_bound(capsys, monkeypatch):
    monkeypatch.setenv("PDNET_MAX_STATES", "5")
    assert run(capsys, "check", MOTIVATING, "--ltl", "G tok(x) >= 0", "--no-slice")[0] == 2


def test_bench_empty_dir(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", str(tmp_path), "--fmt", "json")
    assert code == 0 and json.loads(out) == {"cases": [], "mismatches": []}


def test_bench_missing_dir(capsys, tmp_path):
    assert run(capsys, "bench", str(tmp_path / "nope"))[0] == 2


def small_corpus(tmp_path):
    for name in ("peterson", "fib"):
        for f in BENCH.glob(f"{name}.*"):
            shutil.copy(f, tmp_path / f.name)
    exp = json.loads((BENCH / "expected.json").read_text())
    (tmp_path / "expected.json").write_text(json.dumps({k: exp[k] for k in ("peterson", "fib")}))
    return tmp_path


def test_bench_small_corpus_reproducible(capsys, tmp_path):
    corpus = str(small_corpus(tmp_path))
    outs = []
    for _ in range(2):
        code, out, _ = run(capsys, "bench", corpus, "--fmt", "json")
        assert code == 0
        doc = json.loads(out)
        for row in doc["cases"]:
            for mode in ("sliced", "unsliced"):
                row[mode].pop("time")
        outs.append(doc)
    assert outs[0] == outs[1]
    assert len(outs[0]["cases"]) == 4 and outs[0]["mismatches"] == []
    for row in outs[0]["cases"]:
        assert row["sliced"]["states"] <= row["unsliced"]["states"]


def test_bench_reports_expectation_mismatch(capsys, tmp_path):
    corpus = small_corpus(tmp_path)
    (corpus / "expected.json").write_text(json.dumps({"peterson": [False, True]}))
    rows, problems = run_bench(corpus)
    assert problems == ["peterson peterson.psi1.ltl: expected violated, got holds"]
    assert run(capsys, "bench", str(corpus))[0] == 2


def test_export_net_is_figure_shaped(capsys):
    code, out, _ = run(capsys, "export", MOTIVATING, "--stage", "net", "--fmt", "json")
    assert code == 0 and isomorphism(json.loads(out)) is not None
    code, out, _ = run(capsys, "export", MOTIVATING)
    assert code == 0 and out.startswith("digraph")


@pytest.mark.parametrize("stage", ["net", "deps", "slice", "rg", "product"])
@pytest.mark.parametrize("fmt", ["dot", "json"])
def test_export_every_stage(capsys, stage, fmt):
    code, out, _ = run(capsys, "export", MOTIVATING, "--stage", stage, "--fmt", fmt,
                       "--ltl", SAFETY)
    assert code == 0
    if fmt == "dot":
        assert out.lstrip().startswith("digraph")
    else:
        json.loads(out)


def test_export_unknown_stage(capsys):
    code, _, err = run(capsys, "export", MOTIVATING, "--stage", "bogus")
    assert code == 2 and "unknown stage" in err


def test_export_slice_full_criterion_removes_nothing(motivating):
    doc = json.loads(export(motivating, "slice", "json", slicing=False))
    assert doc["removed_places"] == [] and doc["removed_transitions"] == []


def test_export_rg_counts(motivating):
    full = json.loads(export(motivating, "rg", "json", slicing=False))
    sliced = json.loads(export(motivating, "rg", "json", SAFETY))
    assert full["markings"] == 30 and sliced["markings"] == 20
    assert sliced["dead"] >= 1 and sliced["edges"] >= sliced["markings"]


def test_int_range_flag(capsys, tmp_path):
    prog = tmp_path / "p.cpl"
    prog.write_text("global x;\nthread t { x := x + 1; }\n")
    code, _, _ = run(capsys, "check", str(prog), "--ltl", "G tok(x) <= 1", "--int-range", "0:3")
    assert code == 0
    code, _, err = run(capsys, "check", str(prog), "--ltl", "G tok(x) <= 1", "--int-range", "0:0")
    assert code == 2 and "outside" in err
