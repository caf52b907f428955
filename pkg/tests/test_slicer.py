import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from pdnet import ltl
from pdnet.checker import check_sliced, reachability_graph
from pdnet.gen import program_atoms, random_formula, random_program
from pdnet.net import CONTROL, VARIABLE
from pdnet.program import parse
from pdnet.slicer import (SliceError, compute_slice, executable, slice_net,
                          stuttering_equivalent)
from pdnet.translate import translate, translate_block

from conftest import bench_formula, bench_source

SAFETY = "G !fireable(err)"


def criterion(net, tmap, text):
    f = ltl.resolve(ltl.parse(text), net, tmap)
    return ltl.extract_criterion(net, f), ltl.observed(f)


def pnames(net, ids):
    return {net.places[i].name for i in ids}


def tnames(net, ids):
    return {net.transitions[i].name for i in ids}


@pytest.fixture
def motivating_slice(motivating_net):
    net, tm = motivating_net
    crit, obs = criterion(net, tm, SAFETY)
    return net, slice_net(net, crit, observed=obs, tmap=tm)


def test_motivating_slice(motivating_slice):
    net, s = motivating_slice
    assert pnames(net, s.removed_places()) == {"c3", "f3", "c4", "f4", "v_y", "v_z"}
    assert tnames(net, s.removed_transitions()) == {"t3", "t4"}
    assert len(s.net.places) == 11 and len(s.net.transitions) == 8
    assert s.report()["repair_arcs"] == [["t2", "c5"]]
    assert executable(s)


def test_motivating_slice_reduces_states(motivating_slice):
    net, s = motivating_slice
    assert len(reachability_graph(net)) - len(reachability_graph(s.net)) == 10


def test_fragment_slice_and_trace(fragment_net):
    net, tm = fragment_net
    crit, _ = criterion(net, tm, "G tok(c) <= 0")
    assert pnames(net, crit) == {"v_c", "c5"}
    s = slice_net(net, crit, tmap=tm)
    assert tnames(net, s.removed_transitions()) == {"t3", "t4"}
    assert pnames(net, s.removed_places()) == {"c3", "c4", "f3", "f4", "v_b"}
    assert s.report()["repair_arcs"] == [["t2", "f5"]]
    trace = s.report()["trace"]
    assert [e["place"] for e in trace] == ["c5", "c2"]
    # the fragment's terminal place has no counterpart in the figure
    assert set(trace[0]["added_places"]) - {"f_end"} == {"c2", "f5"}
    assert trace[0]["added_transitions"] == ["t5"]
    assert trace[1]["added_places"] == ["f2", "v_a"]
    assert trace[1]["added_transitions"] == ["t2", "t2'"]
    assert json.loads(s.report_json()) == s.report()


def test_all_places_criterion_keeps_everything(motivating_net):
    net, tm = motivating_net
    s = slice_net(net, range(len(net.places)), tmap=tm)
    assert s.removed_places() == set() and s.removed_transitions() == set()
    assert s.repairs == []


def test_chain_repair():
    net, tm = translate_block(parse("global a, b, c;\nthread t { a := 1; b := 2; c := a; }"))
    crit, _ = criterion(net, tm, "G tok(c) <= 0")
    s = slice_net(net, crit, tmap=tm)
    assert tnames(net, s.removed_transitions()) == {"t3"}
    assert s.report()["repair_arcs"] == [["t2", "f4"]]
    assert executable(s)


def test_unknown_criterion_place(motivating_net):
    net, _ = motivating_net
    with pytest.raises(SliceError):
        slice_net(net, {len(net.places) + 3})


def test_stuttering_equivalence(motivating_net, motivating_slice):
    net, s = motivating_slice
    assert stuttering_equivalent(net, s, SAFETY)
    assert stuttering_equivalent(net, net, SAFETY)
    broken = net.restrict(s.state.places, s.state.transitions - {net.trans("t2").id}, [])[0]
    assert not stuttering_equivalent(net, broken, SAFETY)


def test_bench_slice_reports_are_deterministic():
    net, tm = translate(parse(bench_source("datarace")))
    crit, obs = criterion(net, tm, bench_formula("datarace", 1))
    a = slice_net(net, crit, observed=obs, tmap=tm).report_json()
    b = slice_net(net, crit, observed=obs, tmap=tm).report_json()
    assert a == b


def random_case(seed):
    rng = random.Random(seed)
    p, _ = random_program(rng)
    net, tm = translate(p)
    cand = [q.id for q in net.places if q.has(VARIABLE) or q.has(CONTROL)]
    c1 = set(rng.sample(cand, rng.randint(0, min(3, len(cand)))))
    c2 = c1 | set(rng.sample(cand, rng.randint(0, min(3, len(cand)))))
    return net, tm, c1, c2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_slice_properties(seed):
    net, tm, c1, c2 = random_case(seed)
    s1, s2 = slice_net(net, c1, tmap=tm), slice_net(net, c2, tmap=tm)
    # state invariants
    st1 = s1.state
    assert c1 <= st1.places
    assert st1.processed <= {p for p in st1.places if net.places[p].has(CONTROL)}
    # monotone in the criterion
    assert s1.kept_places <= s2.kept_places
    assert s1.kept_transitions <= s2.kept_transitions
    assert executable(s1) and executable(s2)
    # slicing the slice again changes nothing
    again = slice_net(s1.net, {s1.place_map[q] for q in c1})
    assert again.removed_places() == set() and again.removed_transitions() == set()
    # every kept arc's endpoints are kept (the restriction is a subnet)
    for a in s1.net.arcs:
        assert 0 <= a.place < len(s1.net.places) and 0 <= a.trans < len(s1.net.transitions)


def test_compute_slice_without_seeds(motivating_net):
    net, tm = motivating_net
    st_ = compute_slice(net, {net.place("c9").id}, tmap=tm, seeds=False)
    assert {"c9", "c8", "c7"} <= pnames(net, st_.places)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_slicing_preserves_verdicts(seed):
    rng = random.Random(seed)
    p, _ = random_program(rng)
    net, _ = translate(p)
    f = ltl.show(random_formula(rng, program_atoms(p, net)))
    assert check_sliced(p, f, slicing=False).verdict == check_sliced(p, f).verdict
