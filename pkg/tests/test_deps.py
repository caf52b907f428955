import pytest
from hypothesis import assume, given, settings

from pdnet import deps
from pdnet.deps import (DependenceEdge, DependenceError, control_flow_dependence_edges,
                        control_scope, critical_region, data_dependence_edges, data_dependent,
                        dependence_dot, interference_dependent, reachable, ref_def_sets)
from pdnet.program import parse
from pdnet.translate import translate, translate_block

import path_oracle
from conftest import BENCH_NAMES, bench_source
from path_oracle import tiny_sources

FIG2A_TWO_THREADS = "global a = 1, b = 1, c = 1, d;\n" \
    "thread t { if (a != 0) { a := 1; b := 2; c := 3; } }\nthread u { d := c; }"
CALL = "fn f() { }\nthread t { call f(); }"
LOCKED = "global a, b; mutex m;\nthread t { lock m; a := 1; unlock m; b := 1; }\n" \
    "thread u { lock m; b := 2; unlock m; }"
WAIT = "mutex m; cond c;\nthread a { lock m; wait c m; unlock m; }\n" \
    "thread b { lock m; signal c; unlock m; }"


def tid(net, name):
    return net.trans(name).id


def edges_by_name(net, edges, kind):
    return {(net.transitions[e.src].name, net.transitions[e.dst].name)
            for e in edges if e.kind == kind}


def by_kind(net, kind):
    return [t.id for t in net.transitions if t.kind == kind]


# reachability

def test_fragment_reachability(fragment_net):
    net, _ = fragment_net
    assert reachable(net, tid(net, "t2"), tid(net, "t5"))
    assert not reachable(net, tid(net, "t5"), tid(net, "t2"))


def test_disjoint_threads_not_reachable():
    net, _ = translate(parse("global x, y; thread a { x := 1; } thread b { y := 1; }"))
    assert not reachable(net, tid(net, "t2"), tid(net, "t5"))


def test_reachability_without_enter_arc():
    net, _ = translate(parse(CALL))
    (call,), (ret,) = by_kind(net, "call"), by_kind(net, "return")
    (enter_arc,) = [a for a in net.arcs if a.tag == "enter"]
    assert reachable(net, call, ret)
    assert not reachable(net, call, ret, excluded=enter_arc)
    assert not path_oracle.reachable(net, call, ret, excluded={enter_arc.key()})


# control scope

def test_fragment_control_scope(fragment_net):
    net, _ = fragment_net
    for name in ("t3", "t4", "t5"):
        assert control_scope(net, tid(net, "t2"), tid(net, name))
    assert not control_scope(net, tid(net, "t2'"), tid(net, "t3"))


def test_after_join_not_in_scope():
    net, _ = translate(parse("global x; thread t { if (x < 1) { x := 1; } else { x := 2; } "
                             "x := 3; }"))
    assert control_scope(net, tid(net, "t2"), tid(net, "t3"))
    assert not control_scope(net, tid(net, "t2"), tid(net, "t5"))
    assert not path_oracle.control_scope(net, tid(net, "t2"), tid(net, "t5"))


def test_control_scope_kind_error(fragment_net):
    net, _ = fragment_net
    with pytest.raises(DependenceError):
        control_scope(net, tid(net, "t3"), tid(net, "t4"))


# critical region

def test_critical_region():
    net, _ = translate(parse(LOCKED))
    lock = tid(net, "t2")
    assert net.transitions[lock].kind == "lock"
    assert critical_region(net, lock, tid(net, "t3"))
    assert not critical_region(net, lock, tid(net, "t5"))
    assert not critical_region(net, lock, tid(net, "t8"))
    with pytest.raises(DependenceError):
        critical_region(net, tid(net, "t3"), tid(net, "t5"))


# reference and definition sets

def test_ref_def(motivating_net):
    net, _ = motivating_net
    vx = net.place("v_x").id
    assert ref_def_sets(net, tid(net, "t8")) == ({vx}, set())
    assert ref_def_sets(net, tid(net, "t2")) == (set(), {vx})
    assert ref_def_sets(net, tid(net, "t1")) == (set(), set())


def test_data_and_interference(motivating_net):
    net, _ = motivating_net
    assert data_dependent(net, tid(net, "t3"), tid(net, "t4")) == (True, net.place("v_y").id)
    assert interference_dependent(net, tid(net, "t2"), tid(net, "t8")) == \
        (True, net.place("v_x").id)
    assert not data_dependent(net, tid(net, "t2"), tid(net, "t8"))[0]
    assert not interference_dependent(net, tid(net, "t3"), tid(net, "t4"))[0]


def test_fragment_interference():
    net, _ = translate(parse(FIG2A_TWO_THREADS))
    c_write = next(t.id for t in net.transitions
                   if net.place("v_c").id in deps.defined_places(net, t.id))
    d_write = next(t.id for t in net.transitions
                   if net.place("v_d").id in deps.defined_places(net, t.id))
    assert interference_dependent(net, c_write, d_write)[0]


def test_redefinition_blocks_data_dependence():
    net, _ = translate(parse("global x, y; thread t { x := 1; x := 2; y := x; }"))
    assert not data_dependent(net, tid(net, "t2"), tid(net, "t4"))[0]
    assert data_dependent(net, tid(net, "t3"), tid(net, "t4"))[0]


def test_locals_never_interfere():
    net, tm = translate(parse(bench_source("fib")))
    for e in data_dependence_edges(net):
        if e.kind == "I":
            assert tm.is_global(net, e.place)


# control-flow dependence edges

def test_call_dependences():
    net, _ = translate(parse(CALL))
    edges = control_flow_dependence_edges(net)
    (call,), (ret,) = by_kind(net, "call"), by_kind(net, "return")
    callee_enter = next(t.id for t in net.transitions if t.kind == "enter" and t.instance != "1")
    callee_exit = next(t.id for t in net.transitions if t.kind == "exit" and t.instance != "1")
    assert DependenceEdge(call, callee_enter, "ca") in edges
    assert DependenceEdge(callee_exit, ret, "ca") in edges


def test_prior_occurrence():
    net, _ = translate(parse(WAIT))
    edges = control_flow_dependence_edges(net)
    (w2,), (sig,) = by_kind(net, "wait2"), by_kind(net, "signal")
    assert DependenceEdge(w2, sig, "po") in edges and DependenceEdge(sig, w2, "po") in edges


def test_lock_dependences():
    net, _ = translate(parse(LOCKED))
    lo = edges_by_name(net, control_flow_dependence_edges(net), "lo")
    assert ("t2", "t3") in lo and ("t2", "t4") in lo and ("t2", "t5") not in lo
    locks = [net.transitions[t].name for t in by_kind(net, "lock")]
    assert (locks[0], locks[1]) in lo and (locks[1], locks[0]) in lo


def test_straight_line_has_only_enter_co():
    net, _ = translate(parse("global x, y; thread t { x := 1; y := x; }"))
    edges = control_flow_dependence_edges(net)
    assert {e.kind for e in edges} == {"co"}
    assert edges_by_name(net, edges, "co") == {("t1", "t2"), ("t1", "t3")}


def test_motivating_co_edges(motivating_net):
    net, _ = motivating_net
    co = edges_by_name(net, control_flow_dependence_edges(net), "co")
    assert co == {("t1", "t2"), ("t1", "t3"), ("t1", "t4"), ("t7", "t8"), ("t7", "t8'"),
                  ("t8", "t9")}


def test_dependence_dot(motivating_net):
    net, _ = motivating_net
    dot = dependence_dot(net, deps.dependence_edges(net))
    assert "style=bold" in dot and "style=dotted" in dot and dot.startswith("digraph")


# oracles

def co_chains(net):
    """branch/enter -> control place -> transition chains through control arcs."""
    out = set()
    for t in net.transitions:
        if t.kind not in ("branch", "enter"):
            continue
        for a in net.t_out[t.id]:
            if a.kind == "control" and not a.flow and not net.places[a.place].sync:
                out |= {(t.id, b.trans) for b in net.p_out[a.place] if b.kind == "control"}
    return out


@pytest.mark.parametrize("name", BENCH_NAMES + ["motivating"])
def test_co_edges_match_control_arcs(name):
    net, _ = translate(parse(bench_source(name)))
    co = {(e.src, e.dst) for e in control_flow_dependence_edges(net) if e.kind == "co"}
    assert co == co_chains(net)


def postdominator_oracle(net):
    """co edges from paths alone: statement S depends on branch transition t
    when every maximal path after t runs S while some maximal path from the
    decision point before t avoids it.  An entry is a decision between
    running the body and skipping it, so S depends on the enter transition
    when every run of the body reaches S."""
    def statement(t):
        tr = net.transitions[t]
        return {u.id for u in net.transitions if (u.instance, u.label) == (tr.instance, tr.label)}

    out = set()
    for t in net.transitions:
        if t.kind not in ("branch", "enter"):
            continue
        after = [a.place for a in net.t_out[t.id] if a.flow]
        before = [a.place for a in net.t_in[t.id] if a.flow]
        for u in net.transitions:
            if u.id == t.id or u.kind == "exit" or u.instance != t.instance:
                continue
            s = statement(u.id)
            if not path_oracle.reachable(net, t.id, u.id, "flow") or path_oracle.avoidable(net, after, s):
                continue
            if t.kind == "enter" or path_oracle.avoidable(net, before, s):
                out.add((t.id, u.id))
    return out


@settings(max_examples=60, deadline=None)
@given(tiny_sources())
def test_co_edges_match_postdominators_on_loop_free_code(src):
    assume("while" not in src)
    net, _ = translate(parse(src))
    assume(path_oracle.node_count(net) <= 40)
    assert co_chains(net) == postdominator_oracle(net)


@settings(max_examples=60, deadline=None)
@given(tiny_sources())
def test_path_queries_match_enumeration(src):
    net, _ = translate(parse(src))
    assume(path_oracle.node_count(net) <= 30)
    n = len(net.transitions)
    for tm in range(n):
        kind = net.transitions[tm].kind
        for tn in range(n):
            if tm == tn:
                continue
            assert reachable(net, tm, tn) == path_oracle.reachable(net, tm, tn)
            assert reachable(net, tm, tn, arcs="flow") == \
                path_oracle.reachable(net, tm, tn, "flow")
            if kind in ("branch", "enter"):
                assert control_scope(net, tm, tn) == path_oracle.control_scope(net, tm, tn)
            if kind == "lock":
                assert critical_region(net, tm, tn) == path_oracle.critical_region(net, tm, tn)


@settings(max_examples=30, deadline=None)
@given(tiny_sources())
def test_excluded_arc_matches_enumeration(src):
    net, _ = translate_block(parse(src))
    assume(0 < path_oracle.node_count(net) <= 30)
    flow = [a for a in net.arcs if a.flow]
    for a in flow[::3]:
        for tm in range(len(net.transitions)):
            for tn in range(len(net.transitions)):
                if tm != tn:
                    assert reachable(net, tm, tn, excluded=a) == \
                        path_oracle.reachable(net, tm, tn, excluded={a.key()})


@settings(max_examples=40, deadline=None)
@given(tiny_sources())
def test_data_edges_side_conditions(src):
    net, tm = translate(parse(src))
    for e in data_dependence_edges(net):
        assert e.place in deps.defined_places(net, e.src)
        assert e.place in deps.used_places(net, e.dst)
        if e.kind == "D":
            assert path_oracle.reachable(net, e.src, e.dst, "flow")
        else:
            assert net.transitions[e.src].thread != net.transitions[e.dst].thread
            assert tm.is_global(net, e.place)
