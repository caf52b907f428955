"""The eight acceptance criteria, one test each.

Every test records a one-line outcome in RESULTS; conftest prints them at
the end of the run, one PASS/FAIL line per criterion.
"""
import json
import random
import time
from contextlib import contextmanager

from pdnet import ltl
from pdnet.buchi import translate_to_buchi
from pdnet.checker import check, check_sliced, reachability_graph
from pdnet.cli import export, prepare
from pdnet.gen import abstract_atoms, program_atoms, random_formula, random_program
from pdnet.interp import reachable_configs
from pdnet.net import CONTROL, VARIABLE
from pdnet.program import parse
from pdnet.slicer import executable, slice_net
from pdnet.translate import translate

from conftest import BENCH, BENCH_NAMES, bench_formula, bench_source
from figures import isomorphism
from lasso_oracle import compare

RESULTS = {}
SAFETY = "G !fireable(err)"


@contextmanager
def criterion(n, title):
    notes = []
    try:
        yield notes
    except BaseException as e:
        RESULTS[n] = f"criterion {n} FAIL {title}: {type(e).__name__} {e}".strip()
        raise
    RESULTS[n] = f"criterion {n} PASS {title}" + (f" ({'; '.join(notes)})" if notes else "")


def test_c1_verdict_table():
    expected = json.loads((BENCH / "expected.json").read_text())
    with criterion(1, "verdict table") as notes:
        slowest, wrong = 0.0, []
        for name in BENCH_NAMES:
            program = parse(bench_source(name))
            for k in (1, 2):
                start = time.perf_counter()
                res = check_sliced(program, bench_formula(name, k), max_states=10**6)
                took = time.perf_counter() - start
                slowest = max(slowest, took)
                want = "holds" if expected[name][k - 1] else "violated"
                if res.verdict != want or took >= 10:
                    wrong.append(f"{name} psi{k}: {res.verdict} in {took:.2f}s, want {want}")
        notes.append(f"20 cases, slowest {slowest:.2f}s")
        assert wrong == []


def test_c2_slice_soundness():
    with criterion(2, "slice soundness") as notes:
        bad = []
        for name in BENCH_NAMES:
            program = parse(bench_source(name))
            for k in (1, 2):
                f = bench_formula(name, k)
                a = check_sliced(program, f, slicing=False).verdict
                b = check_sliced(program, f).verdict
                if a != b:
                    bad.append(f"{name} psi{k}")
        for seed in range(200):
            rng = random.Random(seed)
            p, _ = random_program(rng)
            net, _ = translate(p)
            f = ltl.show(random_formula(rng, program_atoms(p, net)))
            if check_sliced(p, f, slicing=False).verdict != check_sliced(p, f).verdict:
                bad.append(f"random seed {seed}: {f}")
        notes.append("20 corpus + 200 random, 0 mismatches")
        assert bad == []


def test_c3_motivating_example(motivating):
    with criterion(3, "motivating example") as notes:
        res = check_sliced(motivating, SAFETY)
        assert res.verdict == "violated"
        assert res.statement_sequence()[:5] == [1, 7, 8, 2, 9]
        full_net, _ = translate(motivating)
        sliced_net = prepare(motivating, SAFETY, True)[0]
        delta = len(reachability_graph(full_net)) - len(reachability_graph(sliced_net))
        iso = isomorphism(json.loads(export(motivating, "net", "json")))
        notes.append(f"isomorphic to figure: {iso is not None}, marking delta {delta}")
        if iso is not None:
            assert delta == 10
        else:
            assert delta > 0


# our transition and place names for the ones the worked slice uses
FRAGMENT_NAMES = {"t1": "t3", "t2": "t4", "t_i1": "t2", "c3": "c5", "f3": "f5"}


def test_c4_fragment_slice(fragment_net):
    net, tm = fragment_net
    with criterion(4, "worked slice") as notes:
        f = ltl.resolve(ltl.parse("G tok(c) <= 0"), net, tm)
        crit = ltl.extract_criterion(net, f)
        assert {net.places[p].name for p in crit} == {"v_c", FRAGMENT_NAMES["c3"]}
        s = slice_net(net, crit, tmap=tm)
        removed = {net.transitions[t].name for t in s.removed_transitions()}
        assert removed == {FRAGMENT_NAMES["t1"], FRAGMENT_NAMES["t2"]}
        # the private places of the removed statements: control, flow, the dead variable
        assert {net.places[p].name for p in s.removed_places()} == {"c3", "c4", "f3", "f4", "v_b"}
        assert s.report()["repair_arcs"] == [[FRAGMENT_NAMES["t_i1"], FRAGMENT_NAMES["f3"]]]
        notes.append("removed t1,t2 as " + ",".join(sorted(removed)))


def test_c5_differential_semantics():
    with criterion(5, "differential semantics") as notes:
        names = sorted(p.stem for p in BENCH.glob("*.cpl"))
        for name in names:
            p = parse(bench_source(name))
            net, _ = translate(p)
            ids = [net.place(f"v_{g.name}").id for g in p.globals]
            marks = {tuple(m[i] for i in ids) for m in reachability_graph(net, 100_000).markings}
            res = reachable_configs(p, bound=100_000)
            assert not res.truncated, name
            assert marks == {c.m for c in res.configs}, name
        notes.append(f"{len(names)} programs")


def test_c6_ndfs_matches_scc():
    with criterion(6, "NDFS vs SCC") as notes:
        done, seed, bad, largest = 0, 0, [], 0
        while done < 100:
            rng = random.Random(seed)
            seed += 1
            p, _ = random_program(rng)
            net, tm = translate(p)
            f = ltl.resolve(random_formula(rng, program_atoms(p, net)), net, tm)
            b = check(net, f, max_states=5000, algorithm="scc")
            if b.verdict == "unknown" or b.stats["product_states"] > 5000:
                continue
            a = check(net, f, max_states=5000)
            largest = max(largest, b.stats["product_states"])
            if a.verdict != b.verdict:
                bad.append(seed - 1)
            done += 1
        notes.append(f"100 products, largest {largest} states")
        assert bad == []


def test_c7_buchi_language():
    atoms = abstract_atoms(3)
    with criterion(7, "Buchi language oracle") as notes:
        bad = []
        for seed in range(50):
            f = random_formula(random.Random(seed), atoms, max_atoms=3, max_depth=4)
            if compare(f, translate_to_buchi(ltl.nnf(f), atoms), atoms, 6):
                bad.append(ltl.show(f))
        notes.append("50 formulas, lassos up to size 6")
        assert bad == []


def random_criteria(seed):
    rng = random.Random(seed)
    p, _ = random_program(rng)
    net, tm = translate(p)
    cand = [q.id for q in net.places if q.has(VARIABLE) or q.has(CONTROL)]
    c1 = set(rng.sample(cand, rng.randint(0, min(3, len(cand)))))
    c2 = c1 | set(rng.sample(cand, rng.randint(0, min(3, len(cand)))))
    return net, tm, c1, c2


def test_c8_slicer_properties():
    with criterion(8, "slicer properties") as notes:
        bad = []
        for seed in range(500):
            net, tm, c1, c2 = random_criteria(seed)
            s1, s2 = slice_net(net, c1, tmap=tm), slice_net(net, c2, tmap=tm)
            again = slice_net(s1.net, {s1.place_map[q] for q in c1})
            if again.removed_places() or again.removed_transitions():
                bad.append((seed, "idempotence"))
            if not (s1.kept_places <= s2.kept_places
                    and s1.kept_transitions <= s2.kept_transitions):
                bad.append((seed, "monotonicity"))
            if not (executable(s1) and executable(s2)):
                bad.append((seed, "executability"))
        notes.append("500 pairs")
        assert bad == []

